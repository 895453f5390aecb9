#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "moddiff/core/errors.hpp"
#include "moddiff/core/rng.hpp"
#include "moddiff/mixed/mixed_dmd.hpp"

using namespace moddiff;
using namespace moddiff::mixed;

namespace {

// Piecewise-linear generator: x_{t+1} = (A0 + delta_B(t) dA) x_t + b u_t.
// The doe table records the Boolean schedule; the ref table runs with all
// modules at reference (X columns zero).
struct Synthetic {
    DataTable doe_table;
    DataTable ref_table;
    std::vector<double> A0;
    std::vector<double> dA;
    std::vector<double> b;
    std::size_t p = 3;
};

Synthetic make_synthetic(std::uint64_t seed, std::size_t n = 2000, bool with_effect = true) {
    Synthetic s;
    auto eng = make_engine(seed, "mixed-synth");
    const std::size_t p = s.p;
    s.A0 = {0.90, 0.05, 0.00, -0.04, 0.85, 0.08, 0.02, 0.00, 0.88};
    s.dA = {0.05, 0.00, -0.03, 0.00, 0.04, 0.00, 0.02, -0.05, 0.00};
    if (!with_effect)
        for (auto& v : s.dA) v = 0.0;
    s.b = {0.40, -0.20, 0.10};

    auto design = doe::full_factorial({"Battery", "Motor"});
    auto schedule = doe::make_schedule(design, n, 25);

    auto run = [&](bool use_schedule) {
        std::vector<std::vector<double>> xs(p, std::vector<double>(n));
        std::vector<double> us(n), xb(n, 0.0), xm(n, 0.0);
        std::vector<double> x(p, 0.1), next(p);
        for (std::size_t t = 0; t < n; ++t) {
            us[t] = std::sin(0.013 * static_cast<double>(t)) + 0.3 * uniform(eng, -1.0, 1.0);
            const bool battery_on = use_schedule && schedule.steps[t][0] != 0;
            if (use_schedule) {
                xb[t] = schedule.steps[t][0];
                xm[t] = schedule.steps[t][1];
            }
            for (std::size_t j = 0; j < p; ++j) xs[j][t] = x[j];
            for (std::size_t i = 0; i < p; ++i) {
                double v = s.b[i] * us[t];
                for (std::size_t j = 0; j < p; ++j) {
                    double a = s.A0[i * p + j];
                    if (battery_on) a += s.dA[i * p + j];
                    v += a * x[j];
                }
                next[i] = v;
            }
            x = next;
        }
        DataTable t;
        for (std::size_t j = 0; j < p; ++j)
            t.add_column("x" + std::to_string(j), ColumnRole::State, std::move(xs[j]));
        t.add_column("u", ColumnRole::Imposed, std::move(us));
        t.add_column("X_Battery", ColumnRole::Boolean, std::move(xb));
        t.add_column("X_Motor", ColumnRole::Boolean, std::move(xm));
        return t;
    };
    s.doe_table = run(true);
    s.ref_table = run(false);
    return s;
}

const std::vector<std::string> kMods = {"Battery", "Motor", "Driveline", "Glider"};

// Independent full-model evaluation of the objective from the assembled
// matrices, for the decoupling/additivity checks.
double evaluate_model(const SubsetModel& m, const StackedTables& data,
                      const PenaltyWeights& w, const FitOptions& opts) {
    const std::size_t p = m.p(), n_in = m.n_in();
    double rss = 0.0;
    for (const auto* table : data.tables) {
        bool is_ref = true;
        for (const auto& name : table->names(ColumnRole::Boolean))
            for (double v : table->col(name))
                if (v != 0.0) is_ref = false;
        const double wt = is_ref ? opts.w_ref : 1.0;
        const std::size_t n = table->n_rows();
        for (std::size_t t = 0; t + 1 < n; ++t) {
            std::vector<double> z(n_in);
            for (std::size_t j = 0; j < p; ++j) z[j] = table->col(m.state_cols[j])[t];
            for (std::size_t j = 0; j < m.imposed_cols.size(); ++j)
                z[p + j] = table->col(m.imposed_cols[j])[t];
            std::vector<double> delta(m.term_list.size(), is_ref ? 0.0 : 1.0);
            if (!is_ref)
                for (std::size_t k = 0; k < m.term_list.size(); ++k)
                    for (const auto& mod : m.term_list[k])
                        delta[k] *= table->col("X_" + mod)[t];
            for (std::size_t i = 0; i < p; ++i) {
                double pred = 0.0;
                for (std::size_t j = 0; j < n_in; ++j) {
                    double a = m.A[i * n_in + j];
                    for (std::size_t k = 0; k < m.term_list.size(); ++k)
                        a += delta[k] * m.A_terms[k][i * n_in + j];
                    pred += a * z[j];
                }
                const double r = table->col(m.state_cols[i])[t + 1] - pred;
                rss += wt * r * r;
            }
        }
    }
    double score = w.p_eps * rss + w.p_a * m.l1_ref;
    for (std::size_t k = 0; k < m.term_list.size(); ++k)
        score += w.term_weight(m.term_list[k].size()) * m.l1_terms[k];
    return score;
}

} // namespace

TEST_CASE("penalty weights validate the required ordering") {
    PenaltyWeights w;
    CHECK_NOTHROW(w.validate());
    CHECK(w.term_weight(1) == 0.02);
    CHECK(w.term_weight(2) == 0.04);
    CHECK(w.term_weight(3) == 0.08); // doubling extension

    PenaltyWeights bad = w;
    bad.p_term = {0.005}; // not > p_a
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = w;
    bad.p_term = {0.04, 0.02}; // decreasing
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("enumerate_subsets") {
    CHECK(enumerate_subsets(kMods, 2).size() == 6);
    CHECK(enumerate_subsets(kMods, 4).size() == 1);
    CHECK(enumerate_subsets(kMods, 2, true).size() == 10);
    auto pairs = enumerate_subsets(kMods, 2);
    CHECK(pairs[0] == std::vector<std::string>{"Battery", "Motor"});
    CHECK(pairs[5] == std::vector<std::string>{"Driveline", "Glider"});
}

TEST_CASE("terms enumeration") {
    auto t = terms({"Battery", "Motor"});
    REQUIRE(t.size() == 3);
    CHECK(t[0] == std::vector<std::string>{"Battery"});
    CHECK(t[1] == std::vector<std::string>{"Motor"});
    CHECK(t[2] == std::vector<std::string>{"Battery", "Motor"});
    CHECK(terms({"Battery"}).size() == 1);
    CHECK(terms({"A", "B", "C"}).size() == 7);
}

TEST_CASE("build_activations") {
    doe::Schedule s;
    s.module_names = {"Battery", "Motor"};
    s.steps = {{1, 1}, {1, 0}, {0, 0}};
    auto act = build_activations(s, {"Battery", "Motor"});
    REQUIRE(act.delta.size() == 3);
    // step (1,1): every term active
    CHECK(act.delta[0][0] == 1.0);
    CHECK(act.delta[1][0] == 1.0);
    CHECK(act.delta[2][0] == 1.0);
    // step (1,0): only Battery
    CHECK(act.delta[0][1] == 1.0);
    CHECK(act.delta[1][1] == 0.0);
    CHECK(act.delta[2][1] == 0.0);
    // reference step: everything off
    CHECK(act.delta[0][2] == 0.0);
    CHECK(act.delta[1][2] == 0.0);
    CHECK(act.delta[2][2] == 0.0);
}

TEST_CASE("fit on a pure linear system leaves corrective matrices at zero") {
    auto synth = make_synthetic(2, 2000, /*with_effect=*/false);
    StackedTables data{{&synth.ref_table, &synth.doe_table}};
    PenaltyWeights w;
    auto model = fit_subset(data, {"Battery", "Motor"}, {"x0", "x1", "x2"}, {"u"}, w);
    REQUIRE(model.converged);

    double l1_terms = 0.0;
    for (double v : model.l1_terms) l1_terms += v;
    CHECK(l1_terms <= 1e-6 * model.l1_ref + 1e-9);

    // the reference block recovers the generator
    const std::size_t n_in = model.n_in();
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(model.A[i * n_in + j] == doctest::Approx(synth.A0[i * 3 + j]).epsilon(1e-3));
        CHECK(model.A[i * n_in + 3] == doctest::Approx(synth.b[i]).epsilon(1e-3));
    }
}

TEST_CASE("support recovery on the piecewise-linear synthetic") {
    auto synth = make_synthetic(3);
    StackedTables data{{&synth.ref_table, &synth.doe_table}};
    PenaltyWeights w;
    auto model = fit_subset(data, {"Battery", "Motor"}, {"x0", "x1", "x2"}, {"u"}, w);
    REQUIRE(model.converged);
    REQUIRE(model.term_list.size() == 3);

    const std::size_t n_in = model.n_in();
    // Battery block matches dA on the state columns
    double fro = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            const double diff = model.A_terms[0][i * n_in + j] - synth.dA[i * 3 + j];
            fro += diff * diff;
        }
    CHECK(std::sqrt(fro) <= 1e-3);
    // Motor and interaction blocks vanish
    CHECK(model.l1_terms[1] <= 1e-3);
    CHECK(model.l1_terms[2] <= 1e-3);
}

TEST_CASE("score is recomputable from the stored parts") {
    auto synth = make_synthetic(5, 800);
    StackedTables data{{&synth.ref_table, &synth.doe_table}};
    PenaltyWeights w;
    FitOptions opts;
    auto model = fit_subset(data, {"Battery", "Motor"}, {"x0", "x1", "x2"}, {"u"}, w, opts);

    // additive identity on the stored parts
    double score = w.p_eps * model.rss + w.p_a * model.l1_ref;
    for (std::size_t k = 0; k < model.term_list.size(); ++k)
        score += w.term_weight(model.term_list[k].size()) * model.l1_terms[k];
    CHECK(model.total_score == doctest::Approx(score).epsilon(1e-12));

    // decoupling: independent full-model evaluation agrees
    const double full = evaluate_model(model, data, w, opts);
    CHECK(model.total_score == doctest::Approx(full).epsilon(1e-9));
}

TEST_CASE("zero-activation soundness: never-activated terms contribute exactly zero") {
    auto synth = make_synthetic(7, 600);
    // Driveline never switches: activation columns identically 0
    synth.doe_table.add_column("X_Driveline", ColumnRole::Boolean,
                               std::vector<double>(synth.doe_table.n_rows(), 0.0));
    synth.ref_table.add_column("X_Driveline", ColumnRole::Boolean,
                               std::vector<double>(synth.ref_table.n_rows(), 0.0));

    StackedTables data{{&synth.ref_table, &synth.doe_table}};
    PenaltyWeights w;
    auto model = fit_subset(data, {"Battery", "Driveline"}, {"x0", "x1", "x2"}, {"u"}, w);

    // terms: [Battery], [Driveline], [Battery.Driveline]
    CHECK(model.l1_terms[1] == 0.0);
    CHECK(model.l1_terms[2] == 0.0);
    for (double v : model.A_terms[1]) CHECK(v == 0.0);
    for (double v : model.A_terms[2]) CHECK(v == 0.0);
}

TEST_CASE("raising the term weights never raises the corrective mass they price") {
    auto synth = make_synthetic(9, 900);
    StackedTables data{{&synth.ref_table, &synth.doe_table}};
    PenaltyWeights w;
    w.p_term = {0.02, 0.04};
    auto lo = fit_subset(data, {"Battery", "Motor"}, {"x0", "x1", "x2"}, {"u"}, w);
    PenaltyWeights w10 = w;
    w10.p_term = {0.2, 0.4};
    auto hi = fit_subset(data, {"Battery", "Motor"}, {"x0", "x1", "x2"}, {"u"}, w10);
    // With all term weights scaled together only the original-weighted sum of
    // term norms is guaranteed monotone; single groups may trade off.
    double mass_lo = 0.0, mass_hi = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
        const double wk = w.term_weight(lo.term_list[k].size());
        mass_lo += wk * lo.l1_terms[k];
        mass_hi += wk * hi.l1_terms[k];
    }
    CHECK(mass_hi <= mass_lo + 1e-8);
}

TEST_CASE("weight scaling leaves matrices unchanged and scales the score") {
    auto synth = make_synthetic(11, 500);
    StackedTables data{{&synth.ref_table, &synth.doe_table}};
    PenaltyWeights w;
    FitOptions opts;
    opts.solver.tol = 1e-12;
    auto base = fit_subset(data, {"Battery", "Motor"}, {"x0", "x1", "x2"}, {"u"}, w, opts);

    PenaltyWeights ws;
    const double c = 3.0;
    ws.p_eps = w.p_eps * c;
    ws.p_a = w.p_a * c;
    ws.p_term = {w.p_term[0] * c, w.p_term[1] * c};
    auto scaled = fit_subset(data, {"Battery", "Motor"}, {"x0", "x1", "x2"}, {"u"}, ws, opts);

    for (std::size_t i = 0; i < base.A.size(); ++i)
        CHECK(scaled.A[i] == doctest::Approx(base.A[i]).epsilon(1e-5));
    CHECK(scaled.total_score == doctest::Approx(c * base.total_score).epsilon(1e-6));
}

TEST_CASE("eigen_report") {
    SUBCASE("zero corrective matrices: all radii equal rho(A)") {
        auto synth = make_synthetic(13, 400);
        StackedTables data{{&synth.ref_table}};
        PenaltyWeights w;
        auto model = fit_subset(data, {"Battery", "Motor"}, {"x0", "x1", "x2"}, {"u"}, w);
        REQUIRE(model.eigen_radii.size() == 4);
        for (double r : model.eigen_radii)
            CHECK(r == doctest::Approx(model.eigen_radii[0]).epsilon(1e-12));
    }
    SUBCASE("diagonal arithmetic") {
        SubsetModel m;
        m.subset = {"M1", "M2"};
        m.term_list = terms(m.subset);
        m.state_cols = {"a", "b"};
        m.imposed_cols = {};
        m.A = {0.5, 0.0, 0.0, 0.5};
        m.A_terms = {{0.6, 0.0, 0.0, 0.6}, {0.0, 0.0, 0.0, 0.0}, {0.0, 0.0, 0.0, 0.0}};
        auto radii = eigen_report(m);
        REQUIRE(radii.size() == 4);
        CHECK(radii[0] == doctest::Approx(0.5)); // pattern 00
        CHECK(radii[1] == doctest::Approx(1.1)); // pattern 10: A + A_M1
        CHECK(radii[2] == doctest::Approx(0.5)); // pattern 01: A_M2 = 0
        CHECK(radii[3] == doctest::Approx(1.1)); // pattern 11
    }
}

TEST_CASE("ranking is invariant to subset enumeration order") {
    auto synth = make_synthetic(15, 700);
    synth.doe_table.add_column("X_Driveline", ColumnRole::Boolean,
                               std::vector<double>(synth.doe_table.n_rows(), 0.0));
    synth.ref_table.add_column("X_Driveline", ColumnRole::Boolean,
                               std::vector<double>(synth.ref_table.n_rows(), 0.0));
    StackedTables data{{&synth.ref_table, &synth.doe_table}};
    PenaltyWeights w;

    auto subsets = enumerate_subsets({"Battery", "Motor", "Driveline"}, 2);
    auto fwd = rank_combinations(data, subsets, {"x0", "x1", "x2"}, {"u"}, w);
    std::reverse(subsets.begin(), subsets.end());
    auto rev = rank_combinations(data, subsets, {"x0", "x1", "x2"}, {"u"}, w);

    REQUIRE(fwd.ranked.size() == rev.ranked.size());
    for (std::size_t i = 0; i < fwd.ranked.size(); ++i) {
        CHECK(fwd.ranked[i].model.subset_label() == rev.ranked[i].model.subset_label());
        CHECK(fwd.ranked[i].model.total_score ==
              doctest::Approx(rev.ranked[i].model.total_score).epsilon(1e-12));
    }
    // the pair containing the truly changed module ranks first
    CHECK(fwd.ranked[0].model.subset_label().find("Battery") != std::string::npos);
    CHECK(fwd.ranked[0].status == "OK");
}

TEST_CASE("ranking records failures without aborting") {
    auto synth = make_synthetic(17, 300);
    StackedTables data{{&synth.ref_table, &synth.doe_table}};
    PenaltyWeights w;
    // "Glider" has no X_ column anywhere: that subset fails, others succeed
    auto report =
        rank_combinations(data, {{"Battery"}, {"Glider"}}, {"x0", "x1", "x2"}, {"u"}, w);
    int ok = 0, failed = 0;
    for (const auto& r : report.ranked) {
        if (r.status == "OK") ++ok;
        else ++failed;
    }
    CHECK(ok == 1);
    CHECK(failed == 1);
    CHECK(report.ranked.back().status != "OK"); // failures sort last (infinite score)
}

TEST_CASE("standardize_columns shares moments across stacked tables") {
    auto synth = make_synthetic(19, 200);
    auto a = synth.ref_table;
    auto b = synth.doe_table;
    auto stats = standardize_columns({&a, &b}, {"x0"});
    double sum = 0.0;
    std::size_t n = a.n_rows() + b.n_rows();
    for (double v : a.col("x0")) sum += v;
    for (double v : b.col("x0")) sum += v;
    CHECK(sum / static_cast<double>(n) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(stats.at("x0").second > 0.0);
}
