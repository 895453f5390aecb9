#pragma once

#include <string>
#include <vector>

#include "moddiff/core/data_table.hpp"

namespace moddiff::dmd {

// Linear dynamics x_{t+1} = A x_t + B u_t identified by least squares over
// the transition pairs of one or more tables.
struct LinearModel {
    std::vector<std::string> state_cols;
    std::vector<std::string> control_cols;
    std::vector<double> A; // p x p, row-major, [output][input]
    std::vector<double> B; // p x c, row-major
    std::vector<double> r2; // per-variable one-step R^2 on the training data

    std::size_t p() const { return state_cols.size(); }
    std::size_t c() const { return control_cols.size(); }

    std::string to_json() const;
    static LinearModel from_json(const std::string& text);
};

// Greedy correlation pruning: constant columns are dropped, then the member
// of the worst correlated pair with the higher mean absolute correlation to
// the remaining columns is removed until no pair reaches the threshold.
// Deterministic; ties drop the later column. Only State columns participate.
std::vector<std::string> prune_variables(const DataTable& table, double corr_threshold = 0.98);

// Least-squares fit over all transition pairs of the given tables. Pairs
// never span a table boundary. Throws NumericError on a rank-deficient
// regressor matrix, naming the dependent columns.
LinearModel fit_dmdc(const std::vector<const DataTable*>& tables,
                     const std::vector<std::string>& state_cols,
                     const std::vector<std::string>& control_cols);
LinearModel fit_dmdc(const DataTable& table, const std::vector<std::string>& state_cols,
                     const std::vector<std::string>& control_cols);

// Max |eigenvalue| of a square row-major matrix.
double spectral_radius(const std::vector<double>& A, std::size_t n);

// Iterates the model from x0 under the given control trajectory. Throws
// NumericError with the step index if the rollout diverges.
DataTable rollout(const LinearModel& model, const std::vector<double>& x0,
                  const std::vector<std::vector<double>>& controls);

// Everything behind the standard quality plots, per variable: one-step
// predictions, truths, residual + response mean, and R^2.
struct QualitySeries {
    std::string name;
    double r2 = 0.0;
    std::vector<double> truth;
    std::vector<double> predicted;
    std::vector<double> residual_plus_mean;
};
std::vector<QualitySeries> quality(const DataTable& table, const LinearModel& model);

} // namespace moddiff::dmd
