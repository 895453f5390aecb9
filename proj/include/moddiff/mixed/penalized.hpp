#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace moddiff::mixed {

enum class ResidualNorm { l1, l2 };

// Per-feature penalty lambda * |coef - prior|.
struct PenaltySpec {
    double lambda = 0.0;
    double prior = 0.0;
};

struct SolveOptions {
    ResidualNorm norm = ResidualNorm::l2;
    double p_eps = 10.0;       // residual weight in the objective
    double tol = 1e-8;         // relative objective decrease per iteration
    std::size_t max_iter = 10000;
    double huber_delta_rel = 1e-6; // L1 residual smoothing, relative to target scale
};

struct SolveResult {
    std::vector<double> coef; // includes the prior offsets
    // objective value after each iteration (coordinate sweep for L2, outer
    // reweighting step for L1); monotone non-increasing
    std::vector<double> objective_history;
    double objective = 0.0;
    double rss = 0.0; // sum w*r^2 (L2) or sum w*|r| (L1)
    bool converged = false;
    std::size_t iterations = 0;
};

// Minimizes
//   p_eps * sum_t w_t * rho(y_t - sum_f coef_f * F_{t,f})
//     + sum_f lambda_f * |coef_f - prior_f|
// with rho(r) = r^2 for the L2 residual norm and the Huber-smoothed |r| for
// L1, by per-coordinate exact minimization with soft-thresholding (L2) and a
// majorize-minimize reweighting around it (L1). A feature whose weighted
// column is identically zero gets coefficient prior_f + 0.
SolveResult solve_penalized(const std::vector<std::vector<double>>& features,
                            std::span<const double> target,
                            std::span<const double> row_weights, // empty = ones
                            std::span<const PenaltySpec> penalties,
                            const SolveOptions& opts = {});

} // namespace moddiff::mixed
