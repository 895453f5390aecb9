#include "moddiff/embed/autoencoder.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "moddiff/core/errors.hpp"
#include "moddiff/core/parallel.hpp"
#include "moddiff/core/rng.hpp"
#include "moddiff/kernels/kernels.hpp"

namespace moddiff::embed {

namespace {

struct Params {
    std::vector<double> w1, b1, w2, b2, w3, b3, w4, b4;

    void axpy_from(double a, const Params& g) {
        auto upd = [a](std::vector<double>& x, const std::vector<double>& d) {
            kernels::axpy(a, d.data(), x.data(), x.size());
        };
        upd(w1, g.w1); upd(b1, g.b1); upd(w2, g.w2); upd(b2, g.b2);
        upd(w3, g.w3); upd(b3, g.b3); upd(w4, g.w4); upd(b4, g.b4);
    }
};

struct Dims {
    std::size_t n, in, h, d;
};

// Adam moments over all parameter blocks, flattened.
struct AdamState {
    std::vector<double> m, v;
    std::vector<std::vector<double>*> dummy; // layout fixed by Params order
    std::size_t t = 0;

    static std::size_t total_size(const Params& p) {
        return p.w1.size() + p.b1.size() + p.w2.size() + p.b2.size() + p.w3.size() +
               p.b3.size() + p.w4.size() + p.b4.size();
    }
    explicit AdamState(const Params& p) : m(total_size(p), 0.0), v(total_size(p), 0.0) {}

    template <typename Fn>
    static void for_each_block(Params& p, Fn&& fn) {
        fn(p.w1); fn(p.b1); fn(p.w2); fn(p.b2); fn(p.w3); fn(p.b3); fn(p.w4); fn(p.b4);
    }

    void reset() {
        std::fill(m.begin(), m.end(), 0.0);
        std::fill(v.begin(), v.end(), 0.0);
        t = 0;
    }

    void absorb(Params& g) {
        ++t;
        std::size_t off = 0;
        for_each_block(g, [&](std::vector<double>& blk) {
            for (double gv : blk) {
                m[off] = 0.9 * m[off] + 0.1 * gv;
                v[off] = 0.999 * v[off] + 0.001 * gv * gv;
                ++off;
            }
        });
    }

    void apply(Params& p, double step) const {
        const double mc = 1.0 - std::pow(0.9, static_cast<double>(t));
        const double vc = 1.0 - std::pow(0.999, static_cast<double>(t));
        std::size_t off = 0;
        for_each_block(p, [&](std::vector<double>& blk) {
            for (auto& w : blk) {
                const double mh = m[off] / mc;
                const double vh = v[off] / vc;
                w -= step * mh / (std::sqrt(vh) + 1e-8);
                ++off;
            }
        });
    }
};

void init_params(Params& p, const Dims& dm, std::mt19937_64& eng) {
    auto init = [&](std::vector<double>& w, std::size_t rows, std::size_t cols,
                    std::size_t fan_in) {
        w.resize(rows * cols);
        const double r = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (auto& v : w) v = uniform(eng, -r, r);
    };
    init(p.w1, dm.in, dm.h, dm.in);
    init(p.w2, dm.h, dm.d, dm.h);
    init(p.w3, dm.d, dm.h, dm.d);
    init(p.w4, dm.h, dm.in, dm.h);
    p.b1.assign(dm.h, 0.0);
    p.b2.assign(dm.d, 0.0);
    p.b3.assign(dm.h, 0.0);
    p.b4.assign(dm.in, 0.0);
}

struct Scratch {
    std::vector<double> h1, lat, h2, out;       // activations
    std::vector<double> dout, dh2, dlat, dh1;   // gradients
};

void add_bias(std::vector<double>& m, const std::vector<double>& b, std::size_t n,
              std::size_t cols) {
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < cols; ++j) m[i * cols + j] += b[j];
}

void tanh_inplace(std::vector<double>& m) {
    for (auto& v : m) v = std::tanh(v);
}

// forward pass; returns mse against X
double forward(const std::vector<double>& X, const Params& p, const Dims& dm, Scratch& s) {
    s.h1.assign(dm.n * dm.h, 0.0);
    kernels::matmul_nn(X.data(), p.w1.data(), s.h1.data(), dm.n, dm.in, dm.h);
    add_bias(s.h1, p.b1, dm.n, dm.h);
    tanh_inplace(s.h1);

    s.lat.assign(dm.n * dm.d, 0.0);
    kernels::matmul_nn(s.h1.data(), p.w2.data(), s.lat.data(), dm.n, dm.h, dm.d);
    add_bias(s.lat, p.b2, dm.n, dm.d);

    s.h2.assign(dm.n * dm.h, 0.0);
    kernels::matmul_nn(s.lat.data(), p.w3.data(), s.h2.data(), dm.n, dm.d, dm.h);
    add_bias(s.h2, p.b3, dm.n, dm.h);
    tanh_inplace(s.h2);

    s.out.assign(dm.n * dm.in, 0.0);
    kernels::matmul_nn(s.h2.data(), p.w4.data(), s.out.data(), dm.n, dm.h, dm.in);
    add_bias(s.out, p.b4, dm.n, dm.in);

    double ss = 0.0;
    for (std::size_t i = 0; i < s.out.size(); ++i) {
        const double r = s.out[i] - X[i];
        ss += r * r;
    }
    return ss / static_cast<double>(dm.n * dm.in);
}

void backward(const std::vector<double>& X, const Params& p, const Dims& dm, Scratch& s,
              Params& g) {
    const double inv = 2.0 / static_cast<double>(dm.n * dm.in);
    s.dout.resize(dm.n * dm.in);
    for (std::size_t i = 0; i < s.dout.size(); ++i) s.dout[i] = inv * (s.out[i] - X[i]);

    auto colsum = [](const std::vector<double>& m, std::vector<double>& b, std::size_t n,
                     std::size_t cols) {
        std::fill(b.begin(), b.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < cols; ++j) b[j] += m[i * cols + j];
    };

    g.w4.assign(p.w4.size(), 0.0);
    kernels::matmul_tn(s.h2.data(), s.dout.data(), g.w4.data(), dm.n, dm.h, dm.in);
    g.b4.resize(dm.in);
    colsum(s.dout, g.b4, dm.n, dm.in);

    s.dh2.assign(dm.n * dm.h, 0.0);
    kernels::matmul_nt(s.dout.data(), p.w4.data(), s.dh2.data(), dm.n, dm.in, dm.h);
    for (std::size_t i = 0; i < s.dh2.size(); ++i) s.dh2[i] *= 1.0 - s.h2[i] * s.h2[i];

    g.w3.assign(p.w3.size(), 0.0);
    kernels::matmul_tn(s.lat.data(), s.dh2.data(), g.w3.data(), dm.n, dm.d, dm.h);
    g.b3.resize(dm.h);
    colsum(s.dh2, g.b3, dm.n, dm.h);

    s.dlat.assign(dm.n * dm.d, 0.0);
    kernels::matmul_nt(s.dh2.data(), p.w3.data(), s.dlat.data(), dm.n, dm.h, dm.d);

    g.w2.assign(p.w2.size(), 0.0);
    kernels::matmul_tn(s.h1.data(), s.dlat.data(), g.w2.data(), dm.n, dm.h, dm.d);
    g.b2.resize(dm.d);
    colsum(s.dlat, g.b2, dm.n, dm.d);

    s.dh1.assign(dm.n * dm.h, 0.0);
    kernels::matmul_nt(s.dlat.data(), p.w2.data(), s.dh1.data(), dm.n, dm.d, dm.h);
    for (std::size_t i = 0; i < s.dh1.size(); ++i) s.dh1[i] *= 1.0 - s.h1[i] * s.h1[i];

    g.w1.assign(p.w1.size(), 0.0);
    kernels::matmul_tn(X.data(), s.dh1.data(), g.w1.data(), dm.n, dm.in, dm.h);
    g.b1.resize(dm.h);
    colsum(s.dh1, g.b1, dm.n, dm.h);
}

std::vector<double> normalized_matrix(const DataTable& table,
                                      const std::vector<std::string>& cols,
                                      const std::vector<double>& mean,
                                      const std::vector<double>& scale) {
    const std::size_t n = table.n_rows(), in = cols.size();
    std::vector<double> X(n * in);
    for (std::size_t j = 0; j < in; ++j) {
        auto col = table.col(cols[j]);
        for (std::size_t i = 0; i < n; ++i) X[i * in + j] = (col[i] - mean[j]) / scale[j];
    }
    return X;
}

} // namespace

Embedding train(const DataTable& reference, std::size_t latent_dim, const TrainOptions& opts) {
    if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
    Embedding e;
    e.input_cols = reference.names(ColumnRole::State);
    if (e.input_cols.empty()) throw ConfigError("reference table has no state columns");
    if (reference.n_rows() < 10 * latent_dim)
        throw ConfigError("reference table needs at least 10*latent_dim rows");

    const std::size_t in = e.input_cols.size();
    e.latent_dim = latent_dim;
    e.hidden_dim = 4 * latent_dim;
    e.mean.resize(in);
    e.scale.resize(in);
    const std::size_t n = reference.n_rows();
    for (std::size_t j = 0; j < in; ++j) {
        auto col = reference.col(e.input_cols[j]);
        e.mean[j] = kernels::sum(col.data(), n) / static_cast<double>(n);
        double ss = 0.0;
        for (double v : col) ss += (v - e.mean[j]) * (v - e.mean[j]);
        e.scale[j] = std::sqrt(ss / static_cast<double>(n));
        if (!(e.scale[j] > 0.0)) e.scale[j] = 1.0;
    }

    const Dims dm{n, in, e.hidden_dim, latent_dim};
    auto X = normalized_matrix(reference, e.input_cols, e.mean, e.scale);

    auto eng = make_engine(opts.seed, "embedding-init");
    Params p;
    init_params(p, dm, eng);

    Scratch s;
    Params g;
    double loss = forward(X, p, dm, s);
    if (!std::isfinite(loss))
        throw NumericError("autoencoder training diverged; try a smaller step size");
    e.loss_history.push_back(loss);

    // Full-batch Adam with a monotonicity guard: an epoch whose update would
    // raise the loss is retried with the applied step halved.
    AdamState adam(p);
    double step_scale = 1.0;
    bool just_restarted = false;
    for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        backward(X, p, dm, s, g);
        adam.absorb(g);
        bool accepted = false;
        for (int attempt = 0; attempt < 20; ++attempt) {
            Params trial = p;
            adam.apply(trial, opts.step_size * step_scale);
            const double trial_loss = forward(X, trial, dm, s);
            if (!std::isfinite(trial_loss))
                throw NumericError("autoencoder training diverged; try a smaller step size");
            if (trial_loss <= loss) {
                p = std::move(trial);
                const double prev = loss;
                loss = trial_loss;
                e.loss_history.push_back(loss);
                accepted = true;
                just_restarted = false;
                step_scale = std::min(step_scale * 1.1, 1.0);
                if (prev - loss <= opts.early_stop_tol * std::max(prev, 1e-300)) epoch = opts.epochs;
                break;
            }
            step_scale *= 0.5;
        }
        if (!accepted) {
            // stale momentum can point uphill; restart the moments once
            if (just_restarted) break;
            adam.reset();
            step_scale = 1.0;
            just_restarted = true;
        }
    }

    // restore activations of the final parameters and score per column
    e.final_loss = forward(X, p, dm, s);
    e.reconstruction_r2.assign(in, 0.0);
    for (std::size_t j = 0; j < in; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += X[i * in + j];
        mean /= static_cast<double>(n);
        double ss_tot = 0.0, ss_res = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = X[i * in + j];
            const double r = s.out[i * in + j] - t;
            ss_res += r * r;
            ss_tot += (t - mean) * (t - mean);
        }
        e.reconstruction_r2[j] = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot
                                              : (ss_res == 0.0 ? 1.0 : 0.0);
    }

    e.w_enc1 = std::move(p.w1);
    e.b_enc1 = std::move(p.b1);
    e.w_enc2 = std::move(p.w2);
    e.b_enc2 = std::move(p.b2);
    e.w_dec1 = std::move(p.w3);
    e.b_dec1 = std::move(p.b3);
    e.w_dec2 = std::move(p.w4);
    e.b_dec2 = std::move(p.b4);
    return e;
}

Embedding select_dim(const DataTable& reference, std::size_t max_dim, double r2_threshold,
                     const TrainOptions& opts) {
    if (max_dim < 1) throw ConfigError("max_dim must be >= 1");
    const std::size_t width = reference.names(ColumnRole::State).size();
    if (max_dim > width) throw ConfigError("max_dim exceeds the table width");

    std::vector<Embedding> candidates(max_dim);
    parallel_for(max_dim, [&](std::size_t i) {
        candidates[i] = train(reference, i + 1, opts);
    });
    for (auto& cand : candidates) {
        const double worst =
            *std::min_element(cand.reconstruction_r2.begin(), cand.reconstruction_r2.end());
        if (worst >= r2_threshold) return std::move(cand);
    }
    Embedding last = std::move(candidates.back());
    last.dim_warning = true;
    return last;
}

namespace {

// encoder/decoder application for one row block
void encode_rows(const Embedding& e, const std::vector<double>& X, std::size_t n,
                 std::vector<double>& L) {
    const Dims dm{n, e.input_cols.size(), e.hidden_dim, e.latent_dim};
    std::vector<double> h1(n * dm.h, 0.0);
    kernels::matmul_nn(X.data(), e.w_enc1.data(), h1.data(), n, dm.in, dm.h);
    add_bias(h1, e.b_enc1, n, dm.h);
    tanh_inplace(h1);
    L.assign(n * dm.d, 0.0);
    kernels::matmul_nn(h1.data(), e.w_enc2.data(), L.data(), n, dm.h, dm.d);
    add_bias(L, e.b_enc2, n, dm.d);
}

void decode_rows(const Embedding& e, const std::vector<double>& L, std::size_t n,
                 std::vector<double>& Y) {
    const Dims dm{n, e.input_cols.size(), e.hidden_dim, e.latent_dim};
    std::vector<double> h2(n * dm.h, 0.0);
    kernels::matmul_nn(L.data(), e.w_dec1.data(), h2.data(), n, dm.d, dm.h);
    add_bias(h2, e.b_dec1, n, dm.h);
    tanh_inplace(h2);
    Y.assign(n * dm.in, 0.0);
    kernels::matmul_nn(h2.data(), e.w_dec2.data(), Y.data(), n, dm.h, dm.in);
    add_bias(Y, e.b_dec2, n, dm.in);
}

} // namespace

DataTable encode_table(const Embedding& e, const DataTable& table) {
    for (const auto& name : e.input_cols)
        if (!table.has_column(name)) throw SchemaError("encode_table: missing column " + name);

    const std::size_t n = table.n_rows();
    auto X = normalized_matrix(table, e.input_cols, e.mean, e.scale);
    std::vector<double> L;
    encode_rows(e, X, n, L);

    DataTable out;
    for (std::size_t c = 0; c < table.n_cols(); ++c) {
        const auto& col = table.column(c);
        if (col.role == ColumnRole::Index) out.add_column(col.name, col.role, col.values);
    }
    for (std::size_t j = 0; j < e.latent_dim; ++j) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = L[i * e.latent_dim + j];
        out.add_column("L" + std::to_string(j + 1), ColumnRole::State, std::move(col));
    }
    for (std::size_t c = 0; c < table.n_cols(); ++c) {
        const auto& col = table.column(c);
        if (col.role == ColumnRole::Imposed || col.role == ColumnRole::Boolean)
            out.add_column(col.name, col.role, col.values);
    }
    return out;
}

DataTable decode_table(const Embedding& e, const DataTable& latent) {
    const std::size_t n = latent.n_rows();
    std::vector<double> L(n * e.latent_dim);
    for (std::size_t j = 0; j < e.latent_dim; ++j) {
        const std::string name = "L" + std::to_string(j + 1);
        if (!latent.has_column(name)) throw SchemaError("decode_table: missing column " + name);
        auto col = latent.col(name);
        for (std::size_t i = 0; i < n; ++i) L[i * e.latent_dim + j] = col[i];
    }
    std::vector<double> Y;
    decode_rows(e, L, n, Y);

    DataTable out;
    for (std::size_t c = 0; c < latent.n_cols(); ++c) {
        const auto& col = latent.column(c);
        if (col.role == ColumnRole::Index) out.add_column(col.name, col.role, col.values);
    }
    for (std::size_t j = 0; j < e.input_cols.size(); ++j) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i)
            col[i] = Y[i * e.input_cols.size() + j] * e.scale[j] + e.mean[j];
        out.add_column(e.input_cols[j], ColumnRole::State, std::move(col));
    }
    for (std::size_t c = 0; c < latent.n_cols(); ++c) {
        const auto& col = latent.column(c);
        if (col.role == ColumnRole::Imposed || col.role == ColumnRole::Boolean)
            out.add_column(col.name, col.role, col.values);
    }
    return out;
}

std::string Embedding::to_json() const {
    nlohmann::json j;
    j["input_cols"] = input_cols;
    j["latent_dim"] = latent_dim;
    j["hidden_dim"] = hidden_dim;
    j["activation"] = "tanh";
    j["mean"] = mean;
    j["scale"] = scale;
    j["w_enc1"] = w_enc1;
    j["b_enc1"] = b_enc1;
    j["w_enc2"] = w_enc2;
    j["b_enc2"] = b_enc2;
    j["w_dec1"] = w_dec1;
    j["b_dec1"] = b_dec1;
    j["w_dec2"] = w_dec2;
    j["b_dec2"] = b_dec2;
    j["final_loss"] = final_loss;
    j["reconstruction_r2"] = reconstruction_r2;
    j["dim_warning"] = dim_warning;
    return j.dump(2);
}

Embedding Embedding::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    Embedding e;
    e.input_cols = j.at("input_cols").get<std::vector<std::string>>();
    e.latent_dim = j.at("latent_dim").get<std::size_t>();
    e.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    e.mean = j.at("mean").get<std::vector<double>>();
    e.scale = j.at("scale").get<std::vector<double>>();
    e.w_enc1 = j.at("w_enc1").get<std::vector<double>>();
    e.b_enc1 = j.at("b_enc1").get<std::vector<double>>();
    e.w_enc2 = j.at("w_enc2").get<std::vector<double>>();
    e.b_enc2 = j.at("b_enc2").get<std::vector<double>>();
    e.w_dec1 = j.at("w_dec1").get<std::vector<double>>();
    e.b_dec1 = j.at("b_dec1").get<std::vector<double>>();
    e.w_dec2 = j.at("w_dec2").get<std::vector<double>>();
    e.b_dec2 = j.at("b_dec2").get<std::vector<double>>();
    e.final_loss = j.value("final_loss", 0.0);
    e.reconstruction_r2 = j.value("reconstruction_r2", std::vector<double>{});
    e.dim_warning = j.value("dim_warning", false);
    return e;
}

} // namespace moddiff::embed
