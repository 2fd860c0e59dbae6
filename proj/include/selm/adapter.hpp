#pragma once

#include "selm/autodiff.hpp"
#include "selm/params.hpp"

namespace selm {

/// One LSTM cell unrolled over the segment axis; the recurrence is causal
/// (output at segment n sees inputs 0..n only) and starts from zero state.
struct LstmCell {
    TensorPtr wx, wh, b;
    int input = 0, hidden = 0;

    LstmCell() = default;
    LstmCell(int input_dim, int hidden_dim, RngState& rng);

    /// [B, N, input] -> [B, N, hidden]
    TensorPtr run_sequence(const TensorPtr& x) const;
    void collect(ParamList& out, const std::string& prefix) const;
};

struct AdapterConfig {
    int d_llm = 64;
    int rank = 8;    // r < d_llm
    int hidden = 32; // h > r
    Real scale = Real(1);
    enum class Topology { Sequential, Parallel } topology = Topology::Sequential;
};

/// Per-attention-layer plugin producing additive key/value corrections.
/// Sequential: down-project to r, long-term LSTM r->h, short-term LSTM h->r,
/// zero-initialized up-projection to 2*d_llm split into (dk, dv).
/// Parallel: both recurrent paths consume the r-width projection side by side
/// (the long path gets an h->r tail) and their outputs are summed before the
/// up-projection.
struct TimeAdapter {
    AdapterConfig cfg;
    TensorPtr down_w, down_b;
    LstmCell long_cell;
    TensorPtr long_proj_w, long_proj_b; // parallel topology only
    LstmCell short_cell;
    TensorPtr up_w; // zero-initialized and bias-free: (dk, dv) == 0 at start

    TimeAdapter() = default;
    TimeAdapter(const AdapterConfig& config, RngState& rng);

    struct Out {
        TensorPtr dk;
        TensorPtr dv;
    };
    Out forward(const TensorPtr& x) const;
    void collect(ParamList& out, const std::string& prefix) const;
    i64 parameter_count() const;
};

} // namespace selm
