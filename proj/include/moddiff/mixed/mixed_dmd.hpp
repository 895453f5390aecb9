#pragma once

#include <map>
#include <string>
#include <vector>

#include "moddiff/core/data_table.hpp"
#include "moddiff/doe/design.hpp"
#include "moddiff/mixed/penalized.hpp"

namespace moddiff::mixed {

// Objective weights: residual, reference matrix, and corrective matrices by
// interaction order (1 = single module, 2 = pairwise, ...).
struct PenaltyWeights {
    double p_eps = 10.0;
    double p_a = 0.01;
    std::vector<double> p_term = {0.02, 0.04}; // by order; higher orders double

    double term_weight(std::size_t order) const;
    void validate() const; // p_term(o) > p_a, non-decreasing, all positive
};

enum class PriorMode { identity, zero };

struct FitOptions {
    ResidualNorm norm = ResidualNorm::l2;
    PriorMode prior = PriorMode::identity;
    double w_ref = 10.0; // residual weight of reference-table rows
    SolveOptions solver;
};

// Subsets of size q (or up to q), deterministic lexicographic-by-position
// order over the module list.
std::vector<std::vector<std::string>> enumerate_subsets(
    const std::vector<std::string>& module_names, std::size_t q, bool up_to = false);

// The 2^q - 1 nonempty sub-subsets, ordered by (order, lexicographic).
std::vector<std::vector<std::string>> terms(const std::vector<std::string>& subset);

// Activation series per term: delta_t = product of the schedule Booleans of
// the term's modules at step t.
struct ActivationColumns {
    std::vector<std::vector<std::string>> term_list;
    std::vector<std::vector<double>> delta; // [term][step]
};
ActivationColumns build_activations(const doe::Schedule& schedule,
                                    const std::vector<std::string>& subset);

// Input to a fit: tables stacked row-wise; transition pairs never span a
// table boundary. A table whose X_* columns are absent or identically zero
// counts as reference data and gets the w_ref residual weight.
struct StackedTables {
    std::vector<const DataTable*> tables;
};

// Fitted model for one module subset: reference matrix plus one corrective
// matrix per term, all shaped p x (p + c) with imposed-variable regressor
// columns appended after the state columns. Outputs are the state columns
// only.
struct SubsetModel {
    std::vector<std::string> subset;
    std::vector<std::vector<std::string>> term_list;
    std::vector<std::string> state_cols;
    std::vector<std::string> imposed_cols;
    std::vector<double> A;                    // p x (p+c), row-major [out][in]
    std::vector<std::vector<double>> A_terms; // per term
    double rss = 0.0;
    double l1_ref = 0.0;               // ||A - prior||_1, the penalized quantity
    std::vector<double> l1_terms;      // ||A_term||_1 per term
    double total_score = 0.0;          // p_eps*rss + p_a*l1_ref + sum p_term*l1_term
    bool converged = true;
    double cpu_seconds = 0.0;
    std::vector<double> eigen_radii;   // spectral radius per activation pattern

    std::size_t p() const { return state_cols.size(); }
    std::size_t n_in() const { return state_cols.size() + imposed_cols.size(); }
    std::string subset_label() const; // "Battery . Motor"
    std::string to_json() const;
};

SubsetModel fit_subset(const StackedTables& data, const std::vector<std::string>& subset,
                       const std::vector<std::string>& state_cols,
                       const std::vector<std::string>& imposed_cols,
                       const PenaltyWeights& weights, const FitOptions& opts = {});

// Spectral radius of the state block of A + sum of active corrective terms,
// one value per activation pattern in binary counting order (first subset
// module = least significant bit).
std::vector<double> eigen_report(const SubsetModel& model);

struct RankedSubset {
    SubsetModel model;
    std::string status; // "OK" or the error message
};

struct RankingReport {
    std::vector<RankedSubset> ranked; // ascending total score
    std::string to_csv() const;       // Combination,Status,RSS,L1_Aref,L1_Am,TotalScore,CPU
    std::string eigen_csv() const;    // per-pattern spectral radii per combination
};

// Fits every subset (parallel across subsets) and sorts ascending by score;
// ties break by smaller corrective L1 mass, then label. Individual failures
// are recorded, not fatal.
RankingReport rank_combinations(const StackedTables& data,
                                const std::vector<std::vector<std::string>>& subsets,
                                const std::vector<std::string>& state_cols,
                                const std::vector<std::string>& imposed_cols,
                                const PenaltyWeights& weights, const FitOptions& opts = {});

// Z-scores the named columns in place across the stacked rows of all tables
// (shared mean/scale). Returns per-column (mean, scale).
std::map<std::string, std::pair<double, double>> standardize_columns(
    std::vector<DataTable*> tables, const std::vector<std::string>& columns);

} // namespace moddiff::mixed
