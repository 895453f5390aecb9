#include "moddiff/core/data_table.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

namespace moddiff {

std::string_view to_string(ColumnRole role) {
    switch (role) {
    case ColumnRole::Index: return "index";
    case ColumnRole::State: return "state";
    case ColumnRole::Internal: return "internal";
    case ColumnRole::Imposed: return "imposed";
    case ColumnRole::Boolean: return "boolean";
    }
    return "?";
}

ColumnRole role_from_name(std::string_view name) {
    if (name == "t") return ColumnRole::Index;
    if (name.rfind("X_", 0) == 0) return ColumnRole::Boolean;
    if (name == "speed_setpoint") return ColumnRole::Imposed;
    if (name.rfind("I_", 0) == 0) return ColumnRole::Internal;
    return ColumnRole::State;
}

void DataTable::add_column(std::string name, ColumnRole role, std::vector<double> values) {
    if (has_column(name)) throw SchemaError("duplicate column name: " + name);
    if (!cols_.empty() && values.size() != n_rows()) {
        throw SchemaError("column " + name + " has " + std::to_string(values.size()) +
                          " rows, table has " + std::to_string(n_rows()));
    }
    cols_.push_back(Column{std::move(name), role, std::move(values)});
}

bool DataTable::has_column(std::string_view name) const {
    for (const auto& c : cols_)
        if (c.name == name) return true;
    return false;
}

std::size_t DataTable::column_index(std::string_view name) const {
    for (std::size_t i = 0; i < cols_.size(); ++i)
        if (cols_[i].name == name) return i;
    throw SchemaError("missing column: " + std::string(name));
}

std::vector<std::string> DataTable::names() const {
    std::vector<std::string> out;
    out.reserve(cols_.size());
    for (const auto& c : cols_) out.push_back(c.name);
    return out;
}

std::vector<std::string> DataTable::names(ColumnRole role) const {
    std::vector<std::string> out;
    for (const auto& c : cols_)
        if (c.role == role) out.push_back(c.name);
    return out;
}

void DataTable::validate() const {
    for (const auto& c : cols_) {
        if (c.role != ColumnRole::Boolean) continue;
        for (double v : c.values) {
            if (v != 0.0 && v != 1.0)
                throw SchemaError("boolean column " + c.name + " contains non 0/1 value");
        }
    }
}

namespace {

void append_double(std::string& out, double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

double parse_double(std::string_view s, const std::string& path, std::size_t line) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw IoError(path + ":" + std::to_string(line) + ": bad numeric field '" +
                      std::string(s) + "'");
    }
    return v;
}

} // namespace

void save_csv(const DataTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);

    // `t` first, then the remaining columns in table order.
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < table.n_cols(); ++i)
        if (table.column(i).role == ColumnRole::Index) order.push_back(i);
    for (std::size_t i = 0; i < table.n_cols(); ++i)
        if (table.column(i).role != ColumnRole::Index) order.push_back(i);

    std::string line;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (k) line += ',';
        line += table.column(order[k]).name;
    }
    line += '\n';
    out << line;

    for (std::size_t r = 0; r < table.n_rows(); ++r) {
        line.clear();
        for (std::size_t k = 0; k < order.size(); ++k) {
            if (k) line += ',';
            const auto& c = table.column(order[k]);
            if (c.role == ColumnRole::Index) {
                line += std::to_string(static_cast<long long>(c.values[r]));
            } else {
                append_double(line, c.values[r]);
            }
        }
        line += '\n';
        out << line;
    }
    if (!out) throw IoError("write failed: " + path);
}

DataTable load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);

    std::string header;
    if (!std::getline(in, header)) throw IoError("empty file: " + path);
    if (!header.empty() && header.back() == '\r') header.pop_back();

    std::vector<std::string> names;
    {
        std::stringstream ss(header);
        std::string field;
        while (std::getline(ss, field, ',')) names.push_back(field);
    }
    if (names.empty()) throw IoError("no columns in header: " + path);

    std::vector<std::vector<double>> values(names.size());
    std::string row;
    std::size_t lineno = 1;
    while (std::getline(in, row)) {
        ++lineno;
        if (!row.empty() && row.back() == '\r') row.pop_back();
        if (row.empty()) continue;
        std::size_t start = 0, field = 0;
        while (field < names.size()) {
            std::size_t comma = row.find(',', start);
            std::string_view cell =
                std::string_view(row).substr(start, comma == std::string::npos ? std::string::npos
                                                                               : comma - start);
            values[field].push_back(parse_double(cell, path, lineno));
            ++field;
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (field != names.size())
            throw IoError(path + ":" + std::to_string(lineno) + ": expected " +
                          std::to_string(names.size()) + " fields, got " + std::to_string(field));
    }

    DataTable table;
    for (std::size_t i = 0; i < names.size(); ++i)
        table.add_column(names[i], role_from_name(names[i]), std::move(values[i]));
    return table;
}

} // namespace moddiff
