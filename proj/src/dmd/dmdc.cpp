#include "moddiff/dmd/dmdc.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "moddiff/core/errors.hpp"
#include "moddiff/kernels/kernels.hpp"

namespace moddiff::dmd {

namespace {

bool is_constant(std::span<const double> v) {
    for (double x : v)
        if (x != v[0]) return false;
    return true;
}

// Pearson correlation matrix over the named columns.
std::vector<double> abs_corr_matrix(const DataTable& table,
                                    const std::vector<std::string>& names) {
    const std::size_t k = names.size();
    const std::size_t n = table.n_rows();
    std::vector<std::vector<double>> centered(k);
    std::vector<double> norms(k);
    for (std::size_t i = 0; i < k; ++i) {
        auto col = table.col(names[i]);
        const double mean = kernels::sum(col.data(), n) / static_cast<double>(n);
        centered[i].resize(n);
        for (std::size_t t = 0; t < n; ++t) centered[i][t] = col[t] - mean;
        norms[i] = std::sqrt(kernels::sumsq(centered[i].data(), n));
    }
    std::vector<double> corr(k * k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        corr[i * k + i] = 1.0;
        for (std::size_t j = i + 1; j < k; ++j) {
            double c = 0.0;
            if (norms[i] > 0.0 && norms[j] > 0.0) {
                c = kernels::dot(centered[i].data(), centered[j].data(), n) /
                    (norms[i] * norms[j]);
                c = std::clamp(std::fabs(c), 0.0, 1.0);
            }
            corr[i * k + j] = corr[j * k + i] = c;
        }
    }
    return corr;
}

} // namespace

std::vector<std::string> prune_variables(const DataTable& table, double corr_threshold) {
    if (table.n_rows() < 2) throw ConfigError("prune_variables needs at least 2 rows");
    if (!(corr_threshold > 0.0 && corr_threshold <= 1.0))
        throw ConfigError("corr_threshold must lie in (0, 1]");

    std::vector<std::string> kept;
    for (const auto& name : table.names(ColumnRole::State))
        if (!is_constant(table.col(name))) kept.push_back(name);

    // small slack so exact duplicates (|corr| == 1) trip a threshold of 1.0
    const double eps = 1e-12;
    while (kept.size() > 1) {
        auto corr = abs_corr_matrix(table, kept);
        const std::size_t k = kept.size();

        double best = -1.0;
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = i + 1; j < k; ++j)
                if (corr[i * k + j] > best) {
                    best = corr[i * k + j];
                    bi = i;
                    bj = j;
                }
        if (best + eps < corr_threshold) break;

        auto mean_corr = [&](std::size_t i) {
            double s = 0.0;
            for (std::size_t j = 0; j < k; ++j)
                if (j != i) s += corr[i * k + j];
            return s / static_cast<double>(k - 1);
        };
        // drop the member more correlated with everything else; ties drop the
        // later column
        const std::size_t drop = mean_corr(bi) > mean_corr(bj) ? bi : bj;
        kept.erase(kept.begin() + static_cast<std::ptrdiff_t>(drop));
    }
    return kept;
}

namespace {

struct TransitionData {
    Eigen::MatrixXd Z;  // rows = transitions, cols = [states | controls]
    Eigen::MatrixXd Xn; // rows = transitions, cols = next states
};

TransitionData gather_transitions(const std::vector<const DataTable*>& tables,
                                  const std::vector<std::string>& state_cols,
                                  const std::vector<std::string>& control_cols) {
    std::size_t total = 0;
    for (const auto* t : tables) {
        if (t->n_rows() < 2) throw ConfigError("table has fewer than 2 rows");
        total += t->n_rows() - 1;
    }
    const std::size_t p = state_cols.size(), c = control_cols.size();
    TransitionData d;
    d.Z.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(p + c));
    d.Xn.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(p));
    Eigen::Index row = 0;
    for (const auto* t : tables) {
        const std::size_t n = t->n_rows();
        for (std::size_t j = 0; j < p; ++j) {
            auto col = t->col(state_cols[j]);
            for (std::size_t i = 0; i + 1 < n; ++i) {
                d.Z(row + static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
                d.Xn(row + static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    col[i + 1];
            }
        }
        for (std::size_t j = 0; j < c; ++j) {
            auto col = t->col(control_cols[j]);
            for (std::size_t i = 0; i + 1 < n; ++i)
                d.Z(row + static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p + j)) =
                    col[i];
        }
        row += static_cast<Eigen::Index>(n - 1);
    }
    return d;
}

} // namespace

LinearModel fit_dmdc(const std::vector<const DataTable*>& tables,
                     const std::vector<std::string>& state_cols,
                     const std::vector<std::string>& control_cols) {
    const std::size_t p = state_cols.size(), c = control_cols.size();
    if (p == 0) throw ConfigError("fit_dmdc needs at least one state column");
    auto data = gather_transitions(tables, state_cols, control_cols);
    if (static_cast<std::size_t>(data.Z.rows()) < p + c + 1)
        throw ConfigError("not enough transition pairs for the requested model size");

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(data.Z);
    qr.setThreshold(1e-10);
    if (qr.rank() < data.Z.cols()) {
        std::vector<std::string> all_names = state_cols;
        all_names.insert(all_names.end(), control_cols.begin(), control_cols.end());
        std::string msg = "rank-deficient regressor matrix; dependent columns:";
        const auto perm = qr.colsPermutation().indices();
        for (Eigen::Index k = qr.rank(); k < data.Z.cols(); ++k)
            msg += " " + all_names[static_cast<std::size_t>(perm[k])];
        msg += " (prune variables first)";
        throw NumericError(msg);
    }

    Eigen::MatrixXd coef = qr.solve(data.Xn); // (p+c) x p

    LinearModel model;
    model.state_cols = state_cols;
    model.control_cols = control_cols;
    model.A.resize(p * p);
    model.B.resize(p * c);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < p; ++j)
            model.A[i * p + j] = coef(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
        for (std::size_t j = 0; j < c; ++j)
            model.B[i * c + j] =
                coef(static_cast<Eigen::Index>(p + j), static_cast<Eigen::Index>(i));
    }

    Eigen::MatrixXd pred = data.Z * coef;
    model.r2.resize(p);
    for (std::size_t i = 0; i < p; ++i) {
        const auto truth = data.Xn.col(static_cast<Eigen::Index>(i));
        const auto fit = pred.col(static_cast<Eigen::Index>(i));
        const double mean = truth.mean();
        const double ss_tot = (truth.array() - mean).square().sum();
        const double ss_res = (truth - fit).squaredNorm();
        model.r2[i] = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
    }
    return model;
}

LinearModel fit_dmdc(const DataTable& table, const std::vector<std::string>& state_cols,
                     const std::vector<std::string>& control_cols) {
    return fit_dmdc(std::vector<const DataTable*>{&table}, state_cols, control_cols);
}

double spectral_radius(const std::vector<double>& A, std::size_t n) {
    if (A.size() != n * n) throw ConfigError("spectral_radius: matrix is not n x n");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (!std::isfinite(A[i * n + j]))
                throw NumericError("spectral_radius: non-finite matrix entry");
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = A[i * n + j];
        }
    Eigen::EigenSolver<Eigen::MatrixXd> solver(m, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success)
        throw NumericError("eigenvalue computation did not converge");
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

DataTable rollout(const LinearModel& model, const std::vector<double>& x0,
                  const std::vector<std::vector<double>>& controls) {
    const std::size_t p = model.p(), c = model.c();
    if (x0.size() != p) throw ConfigError("rollout: x0 size mismatch");

    const std::size_t horizon = controls.size();
    std::vector<std::vector<double>> cols(p, std::vector<double>(horizon + 1));
    std::vector<double> x = x0, next(p);
    for (std::size_t j = 0; j < p; ++j) cols[j][0] = x[j];

    for (std::size_t t = 0; t < horizon; ++t) {
        if (controls[t].size() != c) throw ConfigError("rollout: control size mismatch");
        for (std::size_t i = 0; i < p; ++i) {
            double v = kernels::dot(&model.A[i * p], x.data(), p);
            if (c > 0) v += kernels::dot(&model.B[i * c], controls[t].data(), c);
            next[i] = v;
        }
        for (std::size_t i = 0; i < p; ++i) {
            if (!std::isfinite(next[i]))
                throw NumericError("rollout diverged at step " + std::to_string(t) + " in " +
                                   model.state_cols[i]);
            cols[i][t + 1] = next[i];
        }
        x = next;
    }

    DataTable out;
    std::vector<double> idx(horizon + 1);
    for (std::size_t t = 0; t <= horizon; ++t) idx[t] = static_cast<double>(t);
    out.add_column("t", ColumnRole::Index, std::move(idx));
    for (std::size_t j = 0; j < p; ++j)
        out.add_column(model.state_cols[j], ColumnRole::State, std::move(cols[j]));
    return out;
}

std::vector<QualitySeries> quality(const DataTable& table, const LinearModel& model) {
    const std::size_t p = model.p(), c = model.c();
    const std::size_t n = table.n_rows();
    if (n < 2) throw ConfigError("quality needs at least 2 rows");

    std::vector<std::span<const double>> state(p), control(c);
    for (std::size_t j = 0; j < p; ++j) state[j] = table.col(model.state_cols[j]);
    for (std::size_t j = 0; j < c; ++j) control[j] = table.col(model.control_cols[j]);

    std::vector<QualitySeries> out(p);
    std::vector<double> x(p), u(c);
    for (std::size_t i = 0; i < p; ++i) {
        out[i].name = model.state_cols[i];
        out[i].truth.resize(n - 1);
        out[i].predicted.resize(n - 1);
        out[i].residual_plus_mean.resize(n - 1);
    }
    for (std::size_t t = 0; t + 1 < n; ++t) {
        for (std::size_t j = 0; j < p; ++j) x[j] = state[j][t];
        for (std::size_t j = 0; j < c; ++j) u[j] = control[j][t];
        for (std::size_t i = 0; i < p; ++i) {
            double v = kernels::dot(&model.A[i * p], x.data(), p);
            if (c > 0) v += kernels::dot(&model.B[i * c], u.data(), c);
            out[i].predicted[t] = v;
            out[i].truth[t] = state[i][t + 1];
        }
    }
    for (std::size_t i = 0; i < p; ++i) {
        auto& q = out[i];
        const std::size_t m = q.truth.size();
        const double mean = kernels::sum(q.truth.data(), m) / static_cast<double>(m);
        double ss_tot = 0.0, ss_res = 0.0;
        for (std::size_t t = 0; t < m; ++t) {
            const double r = q.truth[t] - q.predicted[t];
            q.residual_plus_mean[t] = r + mean;
            ss_res += r * r;
            ss_tot += (q.truth[t] - mean) * (q.truth[t] - mean);
        }
        q.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
    }
    return out;
}

std::string LinearModel::to_json() const {
    nlohmann::json j;
    j["state_cols"] = state_cols;
    j["control_cols"] = control_cols;
    j["A"] = A;
    j["B"] = B;
    j["r2"] = r2;
    return j.dump(2);
}

LinearModel LinearModel::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    LinearModel m;
    m.state_cols = j.at("state_cols").get<std::vector<std::string>>();
    m.control_cols = j.at("control_cols").get<std::vector<std::string>>();
    m.A = j.at("A").get<std::vector<double>>();
    m.B = j.at("B").get<std::vector<double>>();
    m.r2 = j.value("r2", std::vector<double>{});
    if (m.A.size() != m.p() * m.p() || m.B.size() != m.p() * m.c())
        throw SchemaError("linear model JSON has inconsistent dimensions");
    return m;
}

} // namespace moddiff::dmd
