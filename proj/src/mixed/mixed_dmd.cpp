#include "moddiff/mixed/mixed_dmd.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "json.hpp"

#include "moddiff/core/errors.hpp"
#include "moddiff/core/parallel.hpp"
#include "moddiff/dmd/dmdc.hpp"
#include "moddiff/kernels/kernels.hpp"

namespace moddiff::mixed {

double PenaltyWeights::term_weight(std::size_t order) const {
    if (order == 0) throw ConfigError("term order must be >= 1");
    if (order <= p_term.size()) return p_term[order - 1];
    // extend by doubling past the configured orders
    double w = p_term.back();
    for (std::size_t o = p_term.size(); o < order; ++o) w *= 2.0;
    return w;
}

void PenaltyWeights::validate() const {
    if (!(p_eps > 0.0) || !(p_a > 0.0)) throw ConfigError("penalty weights must be positive");
    if (p_term.empty()) throw ConfigError("at least one corrective-term weight is required");
    double prev = 0.0;
    for (double w : p_term) {
        if (!(w > 0.0)) throw ConfigError("penalty weights must be positive");
        if (!(w > p_a)) throw ConfigError("corrective-term weights must exceed p_a");
        if (w < prev) throw ConfigError("corrective-term weights must be non-decreasing in order");
        prev = w;
    }
}

std::vector<std::vector<std::string>> enumerate_subsets(
    const std::vector<std::string>& module_names, std::size_t q, bool up_to) {
    const std::size_t m = module_names.size();
    if (q < 1 || q > m) throw ConfigError("subset size must lie in [1, m]");

    std::vector<std::vector<std::string>> out;
    std::vector<std::size_t> idx;
    auto emit = [&](std::size_t size) {
        idx.assign(size, 0);
        for (std::size_t i = 0; i < size; ++i) idx[i] = i;
        for (;;) {
            std::vector<std::string> subset(size);
            for (std::size_t i = 0; i < size; ++i) subset[i] = module_names[idx[i]];
            out.push_back(std::move(subset));
            // next combination in lexicographic index order
            std::size_t i = size;
            while (i > 0) {
                --i;
                if (idx[i] + (size - i) < m) {
                    ++idx[i];
                    for (std::size_t j = i + 1; j < size; ++j) idx[j] = idx[j - 1] + 1;
                    break;
                }
                if (i == 0) return;
            }
            if (size == 0) return;
        }
    };

    if (up_to) {
        for (std::size_t size = 1; size <= q; ++size) emit(size);
    } else {
        emit(q);
    }
    return out;
}

std::vector<std::vector<std::string>> terms(const std::vector<std::string>& subset) {
    if (subset.empty()) throw ConfigError("terms: subset must be nonempty");
    const std::size_t q = subset.size();
    std::vector<std::vector<std::string>> out;
    for (std::size_t mask = 1; mask < (std::size_t(1) << q); ++mask) {
        std::vector<std::string> term;
        for (std::size_t j = 0; j < q; ++j)
            if (mask & (std::size_t(1) << j)) term.push_back(subset[j]);
        out.push_back(std::move(term));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) {
                         if (a.size() != b.size()) return a.size() < b.size();
                         return a < b;
                     });
    return out;
}

ActivationColumns build_activations(const doe::Schedule& schedule,
                                    const std::vector<std::string>& subset) {
    ActivationColumns out;
    out.term_list = terms(subset);
    std::vector<std::size_t> module_idx(subset.size());
    for (std::size_t j = 0; j < subset.size(); ++j) {
        auto it = std::find(schedule.module_names.begin(), schedule.module_names.end(), subset[j]);
        if (it == schedule.module_names.end())
            throw ConfigError("schedule does not cover module " + subset[j]);
        module_idx[j] = static_cast<std::size_t>(it - schedule.module_names.begin());
    }
    const std::size_t n = schedule.n_steps();
    out.delta.assign(out.term_list.size(), std::vector<double>(n, 1.0));
    for (std::size_t k = 0; k < out.term_list.size(); ++k) {
        for (const auto& mod : out.term_list[k]) {
            const std::size_t j = module_idx[static_cast<std::size_t>(
                std::find(subset.begin(), subset.end(), mod) - subset.begin())];
            for (std::size_t t = 0; t < n; ++t)
                out.delta[k][t] *= static_cast<double>(schedule.steps[t][j]);
        }
    }
    return out;
}

std::string SubsetModel::subset_label() const {
    std::string s;
    for (std::size_t i = 0; i < subset.size(); ++i) {
        if (i) s += " . ";
        s += subset[i];
    }
    return s;
}

namespace {

std::string term_label(const std::vector<std::string>& term) {
    std::string s;
    for (std::size_t i = 0; i < term.size(); ++i) {
        if (i) s += ".";
        s += term[i];
    }
    return s;
}

// One stacked transition dataset: regressor columns, next-state targets, per
// row weight and per-term activation.
struct FitData {
    std::vector<std::vector<double>> base;   // [p+c] regressor series at t
    std::vector<std::vector<double>> next;   // [p] state series at t+1
    std::vector<double> weights;             // per transition row
    std::vector<std::vector<double>> delta;  // [term][row]
    std::size_t n_rows = 0;
};

bool table_is_reference(const DataTable& t) {
    for (const auto& name : t.names(ColumnRole::Boolean))
        for (double v : t.col(name))
            if (v != 0.0) return false;
    return true;
}

FitData gather(const StackedTables& data, const std::vector<std::vector<std::string>>& term_list,
               const std::vector<std::string>& state_cols,
               const std::vector<std::string>& imposed_cols, double w_ref) {
    const std::size_t p = state_cols.size(), c = imposed_cols.size();
    FitData d;
    std::size_t total = 0;
    for (const auto* t : data.tables) {
        if (t->n_rows() < 2) throw ConfigError("stacked table has fewer than 2 rows");
        total += t->n_rows() - 1;
    }
    d.n_rows = total;
    d.base.assign(p + c, std::vector<double>(total));
    d.next.assign(p, std::vector<double>(total));
    d.weights.assign(total, 1.0);
    d.delta.assign(term_list.size(), std::vector<double>(total, 1.0));

    std::size_t row0 = 0;
    for (const auto* t : data.tables) {
        const std::size_t n = t->n_rows() - 1;
        const bool is_ref = table_is_reference(*t);
        for (std::size_t j = 0; j < p; ++j) {
            auto col = t->col(state_cols[j]);
            for (std::size_t i = 0; i < n; ++i) {
                d.base[j][row0 + i] = col[i];
                d.next[j][row0 + i] = col[i + 1];
            }
        }
        for (std::size_t j = 0; j < c; ++j) {
            auto col = t->col(imposed_cols[j]);
            for (std::size_t i = 0; i < n; ++i) d.base[p + j][row0 + i] = col[i];
        }
        if (is_ref) {
            for (std::size_t i = 0; i < n; ++i) d.weights[row0 + i] = w_ref;
            for (auto& delta : d.delta)
                for (std::size_t i = 0; i < n; ++i) delta[row0 + i] = 0.0;
        } else {
            for (std::size_t k = 0; k < term_list.size(); ++k) {
                for (const auto& mod : term_list[k]) {
                    const std::string name = "X_" + mod;
                    if (!t->has_column(name))
                        throw SchemaError("table lacks activation column " + name);
                    auto col = t->col(name);
                    for (std::size_t i = 0; i < n; ++i) d.delta[k][row0 + i] *= col[i];
                }
            }
        }
        row0 += n;
    }
    return d;
}

} // namespace

SubsetModel fit_subset(const StackedTables& data, const std::vector<std::string>& subset,
                       const std::vector<std::string>& state_cols,
                       const std::vector<std::string>& imposed_cols,
                       const PenaltyWeights& weights, const FitOptions& opts) {
    weights.validate();
    if (subset.empty()) throw ConfigError("fit_subset: subset must be nonempty");
    const auto t_start = std::chrono::steady_clock::now();

    SubsetModel model;
    model.subset = subset;
    model.term_list = terms(subset);
    model.state_cols = state_cols;
    model.imposed_cols = imposed_cols;

    const std::size_t p = state_cols.size(), c = imposed_cols.size();
    const std::size_t n_in = p + c;
    const std::size_t n_terms = model.term_list.size();

    FitData d = gather(data, model.term_list, state_cols, imposed_cols, opts.w_ref);

    // feature layout: base block then one block per term
    std::vector<std::vector<double>> features;
    features.reserve(n_in * (1 + n_terms));
    for (std::size_t j = 0; j < n_in; ++j) features.push_back(d.base[j]);
    for (std::size_t k = 0; k < n_terms; ++k) {
        for (std::size_t j = 0; j < n_in; ++j) {
            std::vector<double> col(d.n_rows);
            for (std::size_t t = 0; t < d.n_rows; ++t) col[t] = d.delta[k][t] * d.base[j][t];
            features.push_back(std::move(col));
        }
    }

    model.A.assign(p * n_in, 0.0);
    model.A_terms.assign(n_terms, std::vector<double>(p * n_in, 0.0));
    model.l1_terms.assign(n_terms, 0.0);

    SolveOptions solver = opts.solver;
    solver.norm = opts.norm;
    solver.p_eps = weights.p_eps;

    double rss = 0.0;
    bool converged = true;
    for (std::size_t out = 0; out < p; ++out) {
        std::vector<PenaltySpec> pen(features.size());
        for (std::size_t j = 0; j < n_in; ++j) {
            pen[j].lambda = weights.p_a;
            pen[j].prior =
                (opts.prior == PriorMode::identity && j == out) ? 1.0 : 0.0;
        }
        for (std::size_t k = 0; k < n_terms; ++k) {
            const double lam = weights.term_weight(model.term_list[k].size());
            for (std::size_t j = 0; j < n_in; ++j)
                pen[(k + 1) * n_in + j] = PenaltySpec{lam, 0.0};
        }

        auto result = solve_penalized(features, d.next[out], d.weights, pen, solver);
        converged = converged && result.converged;
        rss += result.rss;
        for (std::size_t j = 0; j < n_in; ++j) model.A[out * n_in + j] = result.coef[j];
        for (std::size_t k = 0; k < n_terms; ++k)
            for (std::size_t j = 0; j < n_in; ++j)
                model.A_terms[k][out * n_in + j] = result.coef[(k + 1) * n_in + j];
    }

    model.rss = rss;
    model.converged = converged;
    for (std::size_t out = 0; out < p; ++out)
        for (std::size_t j = 0; j < n_in; ++j) {
            const double prior =
                (opts.prior == PriorMode::identity && j == out) ? 1.0 : 0.0;
            model.l1_ref += std::fabs(model.A[out * n_in + j] - prior);
        }
    for (std::size_t k = 0; k < n_terms; ++k)
        model.l1_terms[k] = kernels::sumabs(model.A_terms[k].data(), p * n_in);

    model.total_score = weights.p_eps * model.rss + weights.p_a * model.l1_ref;
    for (std::size_t k = 0; k < n_terms; ++k)
        model.total_score += weights.term_weight(model.term_list[k].size()) * model.l1_terms[k];

    model.eigen_radii = eigen_report(model);
    model.cpu_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return model;
}

std::vector<double> eigen_report(const SubsetModel& model) {
    const std::size_t p = model.p(), n_in = model.n_in();
    const std::size_t q = model.subset.size();
    std::vector<double> radii;
    radii.reserve(std::size_t(1) << q);
    for (std::size_t pattern = 0; pattern < (std::size_t(1) << q); ++pattern) {
        std::vector<double> eff(p * p);
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = 0; j < p; ++j) eff[i * p + j] = model.A[i * n_in + j];
        for (std::size_t k = 0; k < model.term_list.size(); ++k) {
            bool active = true;
            for (const auto& mod : model.term_list[k]) {
                const auto it = std::find(model.subset.begin(), model.subset.end(), mod);
                const std::size_t bit =
                    static_cast<std::size_t>(it - model.subset.begin());
                if (!(pattern & (std::size_t(1) << bit))) active = false;
            }
            if (!active) continue;
            for (std::size_t i = 0; i < p; ++i)
                for (std::size_t j = 0; j < p; ++j)
                    eff[i * p + j] += model.A_terms[k][i * n_in + j];
        }
        radii.push_back(dmd::spectral_radius(eff, p));
    }
    return radii;
}

RankingReport rank_combinations(const StackedTables& data,
                                const std::vector<std::vector<std::string>>& subsets,
                                const std::vector<std::string>& state_cols,
                                const std::vector<std::string>& imposed_cols,
                                const PenaltyWeights& weights, const FitOptions& opts) {
    RankingReport report;
    report.ranked.resize(subsets.size());

    parallel_for(subsets.size(), [&](std::size_t i) {
        auto& slot = report.ranked[i];
        try {
            slot.model = fit_subset(data, subsets[i], state_cols, imposed_cols, weights, opts);
            slot.status = "OK";
        } catch (const std::exception& e) {
            slot.model.subset = subsets[i];
            slot.model.total_score = std::numeric_limits<double>::infinity();
            slot.status = e.what();
        }
    });

    std::stable_sort(report.ranked.begin(), report.ranked.end(),
                     [](const RankedSubset& a, const RankedSubset& b) {
                         if (a.model.total_score != b.model.total_score)
                             return a.model.total_score < b.model.total_score;
                         const double la = kernels::sum(a.model.l1_terms.data(),
                                                        a.model.l1_terms.size());
                         const double lb = kernels::sum(b.model.l1_terms.data(),
                                                        b.model.l1_terms.size());
                         if (la != lb) return la < lb;
                         return a.model.subset_label() < b.model.subset_label();
                     });
    return report;
}

std::string RankingReport::to_csv() const {
    std::ostringstream out;
    out << "Combination,Status,RSS,L1_Aref,L1_Am,TotalScore,CPU\n";
    for (const auto& r : ranked) {
        double l1_terms = 0.0;
        for (double v : r.model.l1_terms) l1_terms += v;
        out << r.model.subset_label() << ',' << (r.status == "OK" ? "OK" : "FAILED") << ','
            << r.model.rss << ',' << r.model.l1_ref << ',' << l1_terms << ','
            << r.model.total_score << ',' << r.model.cpu_seconds << "s\n";
    }
    return out.str();
}

std::string RankingReport::eigen_csv() const {
    std::size_t max_patterns = 0;
    for (const auto& r : ranked) max_patterns = std::max(max_patterns, r.model.eigen_radii.size());
    std::ostringstream out;
    out << "Combination";
    for (std::size_t i = 0; i < max_patterns; ++i) out << ",lambda_p" << i;
    out << ",RSS,CPU\n";
    for (const auto& r : ranked) {
        out << r.model.subset_label();
        for (std::size_t i = 0; i < max_patterns; ++i) {
            out << ',';
            if (i < r.model.eigen_radii.size()) out << r.model.eigen_radii[i];
        }
        out << ',' << r.model.rss << ',' << r.model.cpu_seconds << "s\n";
    }
    return out.str();
}

std::string SubsetModel::to_json() const {
    nlohmann::json j;
    j["subset"] = subset;
    j["state_cols"] = state_cols;
    j["imposed_cols"] = imposed_cols;
    j["A"] = A;
    nlohmann::json jt = nlohmann::json::object();
    for (std::size_t k = 0; k < term_list.size(); ++k) jt[term_label(term_list[k])] = A_terms[k];
    j["A_terms"] = jt;
    j["rss"] = rss;
    j["l1_ref"] = l1_ref;
    j["l1_terms"] = l1_terms;
    j["total_score"] = total_score;
    j["converged"] = converged;
    j["cpu_seconds"] = cpu_seconds;
    j["eigen_radii"] = eigen_radii;
    return j.dump(2);
}

std::map<std::string, std::pair<double, double>> standardize_columns(
    std::vector<DataTable*> tables, const std::vector<std::string>& columns) {
    std::map<std::string, std::pair<double, double>> stats;
    for (const auto& name : columns) {
        double sum = 0.0;
        std::size_t n = 0;
        for (auto* t : tables) {
            auto col = t->col(name);
            sum += kernels::sum(col.data(), col.size());
            n += col.size();
        }
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (auto* t : tables)
            for (double v : t->col(name)) ss += (v - mean) * (v - mean);
        double scale = std::sqrt(ss / static_cast<double>(n));
        if (!(scale > 0.0)) scale = 1.0;
        for (auto* t : tables)
            for (auto& v : t->col_mut(name)) v = (v - mean) / scale;
        stats[name] = {mean, scale};
    }
    return stats;
}

} // namespace moddiff::mixed
