#include "moddiff/doe/design.hpp"

#include <numeric>

#include "moddiff/core/errors.hpp"
#include "moddiff/core/rng.hpp"

namespace moddiff::doe {

DataTable DoeDesign::to_table() const {
    DataTable t;
    std::vector<double> idx(n_rows());
    std::iota(idx.begin(), idx.end(), 0.0);
    t.add_column("t", ColumnRole::Index, std::move(idx));
    for (std::size_t j = 0; j < n_modules(); ++j) {
        std::vector<double> col(n_rows());
        for (std::size_t r = 0; r < n_rows(); ++r) col[r] = rows[r][j];
        t.add_column("X_" + module_names[j], ColumnRole::Boolean, std::move(col));
    }
    return t;
}

DataTable Schedule::to_table() const {
    DataTable t;
    std::vector<double> idx(n_steps());
    std::iota(idx.begin(), idx.end(), 0.0);
    t.add_column("t", ColumnRole::Index, std::move(idx));
    for (std::size_t j = 0; j < module_names.size(); ++j) {
        std::vector<double> col(n_steps());
        for (std::size_t r = 0; r < n_steps(); ++r) col[r] = steps[r][j];
        t.add_column("X_" + module_names[j], ColumnRole::Boolean, std::move(col));
    }
    return t;
}

DoeDesign full_factorial(std::size_t m, std::size_t row_cap) {
    std::vector<std::string> names(m);
    for (std::size_t j = 0; j < m; ++j) names[j] = "M" + std::to_string(j + 1);
    return full_factorial(names, row_cap);
}

DoeDesign full_factorial(const std::vector<std::string>& module_names, std::size_t row_cap) {
    const std::size_t m = module_names.size();
    if (m >= 63 || (std::size_t(1) << m) > row_cap) {
        throw ConfigError("full factorial over " + std::to_string(m) +
                          " modules exceeds the row cap of " + std::to_string(row_cap));
    }
    DoeDesign d;
    d.module_names = module_names;
    const std::size_t r = std::size_t(1) << m;
    d.rows.resize(r, std::vector<std::uint8_t>(m, 0));
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < m; ++j) d.rows[i][j] = (i >> j) & 1u;
    return d;
}

DoeDesign complement(const DoeDesign& design) {
    DoeDesign out = design;
    for (auto& row : out.rows)
        for (auto& b : row) b = b ? 0 : 1;
    return out;
}

Schedule make_schedule(const DoeDesign& design, std::size_t n, std::size_t segment_length,
                       Ordering ordering, std::uint64_t seed) {
    if (segment_length < 1) throw ConfigError("segment_length must be >= 1");
    if (n < 1) throw ConfigError("schedule length must be >= 1");
    if (design.n_rows() == 0) throw ConfigError("design has no rows");

    Schedule s;
    s.module_names = design.module_names;
    s.segment_length = segment_length;
    s.steps.reserve(n);

    auto eng = make_engine(seed, "schedule");
    const std::size_t r = design.n_rows();
    std::vector<std::size_t> order(r);
    std::iota(order.begin(), order.end(), 0);

    std::size_t pos_in_rep = r; // triggers (re)ordering on first use
    while (s.steps.size() < n) {
        if (pos_in_rep == r) {
            pos_in_rep = 0;
            if (ordering == Ordering::random) shuffle_inplace(eng, order);
        }
        const auto& row = design.rows[order[pos_in_rep]];
        const std::size_t remaining = n - s.steps.size();
        if (remaining < segment_length) {
            // Tail shorter than a segment: hold the previous segment's vector
            // (or this row's when the schedule is shorter than one segment).
            const auto& hold = s.steps.empty() ? row : s.steps.back();
            while (s.steps.size() < n) s.steps.push_back(hold);
            break;
        }
        for (std::size_t k = 0; k < segment_length; ++k) s.steps.push_back(row);
        ++pos_in_rep;
    }
    return s;
}

} // namespace moddiff::doe
