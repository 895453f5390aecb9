#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "moddiff/core/errors.hpp"
#include "moddiff/core/rng.hpp"
#include "moddiff/mixed/penalized.hpp"

using namespace moddiff;
using namespace moddiff::mixed;

namespace {

struct Instance {
    std::vector<std::vector<double>> F;
    std::vector<double> y;
    std::vector<double> w;
    std::vector<PenaltySpec> pen;
};

Instance random_instance(std::mt19937_64& eng, std::size_t n, std::size_t k, bool priors,
                         bool weighted) {
    Instance ins;
    ins.F.assign(k, std::vector<double>(n));
    ins.y.resize(n);
    for (auto& col : ins.F)
        for (auto& v : col) v = uniform(eng, -1.0, 1.0);
    // sparse ground truth plus noise
    std::vector<double> truth(k, 0.0);
    for (std::size_t f = 0; f < k; f += 2) truth[f] = uniform(eng, -2.0, 2.0);
    for (std::size_t t = 0; t < n; ++t) {
        double v = 0.02 * uniform(eng, -1.0, 1.0);
        for (std::size_t f = 0; f < k; ++f) v += truth[f] * ins.F[f][t];
        ins.y[t] = v;
    }
    if (weighted) {
        ins.w.resize(n);
        for (auto& v : ins.w) v = uniform(eng, 0.5, 4.0);
    }
    ins.pen.resize(k);
    for (std::size_t f = 0; f < k; ++f) {
        ins.pen[f].lambda = uniform(eng, 0.05, 0.5);
        ins.pen[f].prior = priors ? uniform(eng, -0.5, 0.5) : 0.0;
    }
    return ins;
}

double objective_l2(const Instance& ins, const std::vector<double>& coef, double p_eps) {
    const std::size_t n = ins.y.size();
    double rss = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        double r = ins.y[t];
        for (std::size_t f = 0; f < coef.size(); ++f) r -= coef[f] * ins.F[f][t];
        rss += (ins.w.empty() ? 1.0 : ins.w[t]) * r * r;
    }
    double pen = 0.0;
    for (std::size_t f = 0; f < coef.size(); ++f)
        pen += ins.pen[f].lambda * std::fabs(coef[f] - ins.pen[f].prior);
    return p_eps * rss + pen;
}

// Independent global minimizer: enumerate all 3^k sign patterns of the
// shifted problem, solve the stationarity system on the active set, and keep
// every KKT-consistent candidate. Convexity makes the best candidate the
// global optimum.
std::vector<double> oracle_minimizer(const Instance& ins, double p_eps) {
    const std::size_t n = ins.y.size(), k = ins.F.size();
    Eigen::MatrixXd F(n, k);
    Eigen::VectorXd y(n), wv(n);
    for (std::size_t t = 0; t < n; ++t) {
        y(static_cast<Eigen::Index>(t)) = ins.y[t];
        wv(static_cast<Eigen::Index>(t)) = ins.w.empty() ? 1.0 : ins.w[t];
        for (std::size_t f = 0; f < k; ++f)
            F(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(f)) = ins.F[f][t];
    }
    Eigen::VectorXd prior(static_cast<Eigen::Index>(k)), lambda(static_cast<Eigen::Index>(k));
    for (std::size_t f = 0; f < k; ++f) {
        prior(static_cast<Eigen::Index>(f)) = ins.pen[f].prior;
        lambda(static_cast<Eigen::Index>(f)) = ins.pen[f].lambda;
    }
    const Eigen::VectorXd ys = y - F * prior; // shifted target
    const Eigen::MatrixXd FtWF = F.transpose() * wv.asDiagonal() * F;
    const Eigen::VectorXd FtWy = F.transpose() * wv.asDiagonal() * ys;

    std::size_t total = 1;
    for (std::size_t f = 0; f < k; ++f) total *= 3;

    double best = std::numeric_limits<double>::infinity();
    std::vector<double> best_coef(k, 0.0);
    for (std::size_t code = 0; code < total; ++code) {
        std::vector<int> sign(k);
        std::size_t c = code;
        for (std::size_t f = 0; f < k; ++f) {
            sign[f] = static_cast<int>(c % 3) - 1;
            c /= 3;
        }
        std::vector<Eigen::Index> active;
        for (std::size_t f = 0; f < k; ++f)
            if (sign[f] != 0) active.push_back(static_cast<Eigen::Index>(f));

        Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
        if (!active.empty()) {
            Eigen::MatrixXd G(active.size(), active.size());
            Eigen::VectorXd rhs(active.size());
            for (std::size_t i = 0; i < active.size(); ++i) {
                rhs(static_cast<Eigen::Index>(i)) =
                    FtWy(active[i]) -
                    lambda(active[i]) * sign[static_cast<std::size_t>(active[i])] /
                        (2.0 * p_eps);
                for (std::size_t j = 0; j < active.size(); ++j)
                    G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                        FtWF(active[i], active[j]);
            }
            Eigen::VectorXd sol = G.ldlt().solve(rhs);
            bool ok = true;
            for (std::size_t i = 0; i < active.size(); ++i) {
                const double v = sol(static_cast<Eigen::Index>(i));
                if (v * sign[static_cast<std::size_t>(active[i])] <= 0.0) ok = false;
            }
            if (!ok) continue;
            for (std::size_t i = 0; i < active.size(); ++i)
                b(active[i]) = sol(static_cast<Eigen::Index>(i));
        }
        // KKT for inactive coordinates
        const Eigen::VectorXd grad = 2.0 * p_eps * (FtWF * b - FtWy);
        bool ok = true;
        for (std::size_t f = 0; f < k; ++f)
            if (sign[f] == 0 && std::fabs(grad(static_cast<Eigen::Index>(f))) >
                                    lambda(static_cast<Eigen::Index>(f)) + 1e-9)
                ok = false;
        if (!ok) continue;

        std::vector<double> coef(k);
        for (std::size_t f = 0; f < k; ++f)
            coef[f] = b(static_cast<Eigen::Index>(f)) + ins.pen[f].prior;
        const double obj = objective_l2(ins, coef, p_eps);
        if (obj < best) {
            best = obj;
            best_coef = coef;
        }
    }
    REQUIRE(std::isfinite(best));
    return best_coef;
}

} // namespace

TEST_CASE("solver matches the sign-enumeration oracle on 6-regressor instances") {
    auto eng = make_engine(101, "pen-oracle");
    for (int rep = 0; rep < 12; ++rep) {
        const bool priors = rep % 2 == 1;
        const bool weighted = rep % 3 == 1;
        auto ins = random_instance(eng, 60, 6, priors, weighted);
        SolveOptions opts;
        opts.p_eps = 10.0;
        auto got = solve_penalized(ins.F, ins.y, ins.w, ins.pen, opts);
        REQUIRE(got.converged);

        auto oracle = oracle_minimizer(ins, opts.p_eps);
        const double f_got = objective_l2(ins, got.coef, opts.p_eps);
        const double f_best = objective_l2(ins, oracle, opts.p_eps);
        CHECK(f_got <= f_best * (1.0 + 1e-6) + 1e-12);
        CHECK(f_got >= f_best * (1.0 - 1e-6) - 1e-12);
    }
}

TEST_CASE("objective history is monotone non-increasing") {
    auto eng = make_engine(103, "pen-mono");
    for (auto norm : {ResidualNorm::l2, ResidualNorm::l1}) {
        auto ins = random_instance(eng, 200, 8, true, true);
        SolveOptions opts;
        opts.norm = norm;
        auto got = solve_penalized(ins.F, ins.y, ins.w, ins.pen, opts);
        REQUIRE(got.objective_history.size() >= 2);
        for (std::size_t i = 1; i < got.objective_history.size(); ++i)
            CHECK(got.objective_history[i] <=
                  got.objective_history[i - 1] + 1e-9 * std::fabs(got.objective_history[i - 1]));
    }
}

TEST_CASE("zero feature column stays at its prior") {
    std::vector<std::vector<double>> F = {{0.0, 0.0, 0.0, 0.0}, {1.0, 2.0, -1.0, 0.5}};
    std::vector<double> y = {2.0, 4.0, -2.0, 1.0};
    std::vector<PenaltySpec> pen = {{0.1, 0.0}, {0.01, 0.0}};
    auto got = solve_penalized(F, y, {}, pen);
    CHECK(got.coef[0] == 0.0);
    CHECK(got.coef[1] == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("scaling all weights by c preserves the argmin and scales the score") {
    auto eng = make_engine(107, "pen-scale");
    auto ins = random_instance(eng, 120, 5, false, false);
    SolveOptions opts;
    opts.p_eps = 10.0;
    opts.tol = 1e-12;
    auto base = solve_penalized(ins.F, ins.y, ins.w, ins.pen, opts);

    const double c = 7.5;
    auto scaled = ins;
    for (auto& p : scaled.pen) p.lambda *= c;
    SolveOptions opts2 = opts;
    opts2.p_eps = opts.p_eps * c;
    auto got = solve_penalized(scaled.F, scaled.y, scaled.w, scaled.pen, opts2);

    for (std::size_t f = 0; f < base.coef.size(); ++f)
        CHECK(got.coef[f] == doctest::Approx(base.coef[f]).epsilon(1e-6));
    CHECK(got.objective == doctest::Approx(c * base.objective).epsilon(1e-6));
}

TEST_CASE("raising one coefficient's penalty never raises its magnitude") {
    auto eng = make_engine(109, "pen-group");
    for (int rep = 0; rep < 3; ++rep) {
        auto ins = random_instance(eng, 150, 8, false, rep % 2 == 0);
        SolveOptions opts;
        opts.tol = 1e-12;
        auto lo = solve_penalized(ins.F, ins.y, ins.w, ins.pen, opts);

        for (std::size_t f = 0; f < 8; ++f) {
            auto ins_hi = ins;
            ins_hi.pen[f].lambda *= 10.0;
            auto hi = solve_penalized(ins_hi.F, ins_hi.y, ins_hi.w, ins_hi.pen, opts);
            CHECK(std::fabs(hi.coef[f]) <= std::fabs(lo.coef[f]) + 1e-8);
        }
    }
}

TEST_CASE("l1 residual mode resists outliers better than l2") {
    auto eng = make_engine(113, "pen-l1");
    const std::size_t n = 400;
    std::vector<std::vector<double>> F(1, std::vector<double>(n));
    std::vector<double> y(n);
    for (std::size_t t = 0; t < n; ++t) {
        F[0][t] = uniform(eng, -1.0, 1.0);
        y[t] = 1.5 * F[0][t];
    }
    // a few gross outliers
    for (std::size_t t = 0; t < n; t += 50) y[t] += 40.0;
    std::vector<PenaltySpec> pen = {{1e-6, 0.0}};

    SolveOptions l2opts;
    auto l2fit = solve_penalized(F, y, {}, pen, l2opts);
    SolveOptions l1opts;
    l1opts.norm = ResidualNorm::l1;
    auto l1fit = solve_penalized(F, y, {}, pen, l1opts);

    CHECK(std::fabs(l1fit.coef[0] - 1.5) < std::fabs(l2fit.coef[0] - 1.5));
    CHECK(l1fit.coef[0] == doctest::Approx(1.5).epsilon(0.02));
}

TEST_CASE("input validation") {
    std::vector<std::vector<double>> F = {{1.0, 2.0}};
    std::vector<double> y = {1.0, 2.0, 3.0};
    std::vector<PenaltySpec> pen = {{0.1, 0.0}};
    CHECK_THROWS_AS(static_cast<void>(solve_penalized(F, y, {}, pen)), ConfigError);
}
