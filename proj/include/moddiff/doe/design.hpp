#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "moddiff/core/data_table.hpp"

namespace moddiff::doe {

// Boolean design over modules: rows are experiments, columns are modules.
struct DoeDesign {
    std::vector<std::string> module_names;
    std::vector<std::vector<std::uint8_t>> rows;

    std::size_t n_rows() const { return rows.size(); }
    std::size_t n_modules() const { return module_names.size(); }

    DataTable to_table() const;
};

enum class Ordering { sequential, random };

// Unrolling of a design into one version vector per time step. Vectors are
// constant within each segment_length block.
struct Schedule {
    std::vector<std::string> module_names;
    std::vector<std::vector<std::uint8_t>> steps; // n x m
    std::size_t segment_length = 1;

    std::size_t n_steps() const { return steps.size(); }
    DataTable to_table() const;
};

// 2^m rows in binary counting order, module 1 = least significant bit.
// m = 0 yields a single empty row. Throws ConfigError past the row cap.
DoeDesign full_factorial(std::size_t m, std::size_t row_cap = (1u << 20));
DoeDesign full_factorial(const std::vector<std::string>& module_names,
                         std::size_t row_cap = (1u << 20));

// Every bit flipped; same shape.
DoeDesign complement(const DoeDesign& design);

// Lays design rows out segment by segment, repeating the whole design until n
// steps are covered. The final repetition may stop mid-design; leftover steps
// shorter than a segment keep the last segment's vector. Random ordering
// permutes rows independently per repetition, seeded.
Schedule make_schedule(const DoeDesign& design, std::size_t n, std::size_t segment_length,
                       Ordering ordering = Ordering::sequential, std::uint64_t seed = 0);

} // namespace moddiff::doe
