#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "moddiff/core/errors.hpp"

namespace moddiff {

// Role of a table column. Internal columns are integrator states carried so a
// simulation can be restarted from any row; they are excluded from the default
// modeling/response sets.
enum class ColumnRole { Index, State, Internal, Imposed, Boolean };

std::string_view to_string(ColumnRole role);

// Role inferred from a column name when loading CSV: "t" -> Index,
// "X_*" -> Boolean, "speed_setpoint" -> Imposed, "I_*" -> Internal,
// anything else -> State.
ColumnRole role_from_name(std::string_view name);

struct Column {
    std::string name;
    ColumnRole role = ColumnRole::State;
    std::vector<double> values;
};

// Time-indexed table: rows are time steps, columns are named series.
// The universal exchange format between the simulator and the detectors.
class DataTable {
public:
    DataTable() = default;

    std::size_t n_rows() const { return cols_.empty() ? 0 : cols_.front().values.size(); }
    std::size_t n_cols() const { return cols_.size(); }

    // Throws SchemaError on duplicate name or row-count mismatch with existing columns.
    void add_column(std::string name, ColumnRole role, std::vector<double> values);

    bool has_column(std::string_view name) const;
    std::size_t column_index(std::string_view name) const; // SchemaError if missing

    const Column& column(std::size_t i) const { return cols_.at(i); }
    const Column& column(std::string_view name) const { return cols_.at(column_index(name)); }
    Column& column(std::string_view name) { return cols_.at(column_index(name)); }

    std::span<const double> col(std::string_view name) const { return column(name).values; }
    std::span<double> col_mut(std::string_view name) { return column(name).values; }

    std::vector<std::string> names() const;
    std::vector<std::string> names(ColumnRole role) const;

    // Boolean columns must contain only 0.0 / 1.0; throws SchemaError otherwise.
    void validate() const;

private:
    std::vector<Column> cols_;
};

// CSV I/O. First row is the header; the `t` column comes first. Values are
// written with shortest round-trip precision so load(save(T)) == T bit-exactly.
void save_csv(const DataTable& table, const std::string& path);
DataTable load_csv(const std::string& path);

} // namespace moddiff
