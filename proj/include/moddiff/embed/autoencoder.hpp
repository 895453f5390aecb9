#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "moddiff/core/data_table.hpp"

namespace moddiff::embed {

// Feed-forward autoencoder: input -> tanh(4d) -> d -> tanh(4d) -> input,
// trained full-batch on z-scored columns. Imposed and Boolean columns are
// never encoded; they pass through encode/decode untouched.
struct Embedding {
    std::vector<std::string> input_cols;
    std::size_t latent_dim = 0;
    std::size_t hidden_dim = 0;
    std::vector<double> mean;  // per input column
    std::vector<double> scale; // per input column, strictly positive

    // row-major weights, biases
    std::vector<double> w_enc1, b_enc1; // in -> hidden
    std::vector<double> w_enc2, b_enc2; // hidden -> latent
    std::vector<double> w_dec1, b_dec1; // latent -> hidden
    std::vector<double> w_dec2, b_dec2; // hidden -> in

    double final_loss = 0.0;              // mse in normalized units
    std::vector<double> loss_history;     // per epoch, monotone under the guard
    std::vector<double> reconstruction_r2; // per input column, original units
    bool dim_warning = false;              // select_dim could not reach threshold

    std::string to_json() const;
    static Embedding from_json(const std::string& text);
};

struct TrainOptions {
    std::size_t epochs = 5000;
    double step_size = 1e-2;   // initial/maximum step; halved on loss increase
    double early_stop_tol = 1e-10; // relative loss improvement per epoch
    std::uint64_t seed = 0;
};

// Trains on the state columns of the reference table. Deterministic for a
// given seed. Throws NumericError if the loss turns non-finite.
Embedding train(const DataTable& reference, std::size_t latent_dim,
                const TrainOptions& opts = {});

// Trains d = 1, 2, ... and returns the smallest d whose worst per-column
// reconstruction R^2 reaches the threshold; otherwise the max_dim embedding
// with dim_warning set. Candidate dimensions train in parallel.
Embedding select_dim(const DataTable& reference, std::size_t max_dim, double r2_threshold,
                     const TrainOptions& opts = {});

// Latent columns are named L1..Ld; Index, Imposed and Boolean columns pass
// through unchanged.
DataTable encode_table(const Embedding& e, const DataTable& table);
DataTable decode_table(const Embedding& e, const DataTable& latent);

} // namespace moddiff::embed
