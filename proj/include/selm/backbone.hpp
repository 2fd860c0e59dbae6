#pragma once

#include <memory>
#include <vector>

#include "selm/adapter.hpp"
#include "selm/autodiff.hpp"
#include "selm/params.hpp"

namespace selm {

struct BackboneConfig {
    int layers = 2;
    int heads = 4;
    int d_llm = 64;
    int ffn_width = 256;
    int max_positions = 64;
    bool frozen = true;

    void validate() const;
};

/// Pre-norm decoder block with causal self-attention. The Time-Adapter, when
/// present, consumes the block input and its (dk, dv) corrections are added
/// to the key/value projection outputs.
struct AttentionLayer {
    TensorPtr ln1_g, ln1_b;
    TensorPtr wq, bq, wk, wv, bv, wo, bo; // key projection is bias-free
    TensorPtr ln2_g, ln2_b;
    TensorPtr ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    std::unique_ptr<TimeAdapter> adapter;

    AttentionLayer() = default;
    AttentionLayer(const BackboneConfig& cfg, RngState& rng, bool trainable_host);

    TensorPtr forward(const TensorPtr& x, int heads, TensorPtr* attn_out = nullptr) const;
    void collect(ParamList& out, const std::string& prefix, bool host_trainable) const;
};

/// Frozen decoder-style transformer surrogate standing in for the LLM.
/// Host weights are seeded at construction and excluded from training; the
/// learned positional embedding and any adapters stay trainable.
struct Backbone {
    BackboneConfig cfg;
    TensorPtr pos_embed; // [max_positions, d_llm], trainable
    std::vector<AttentionLayer> layers;

    Backbone() = default;
    Backbone(const BackboneConfig& config, RngState& rng);

    void attach_adapters(const AdapterConfig& acfg, RngState& rng);

    /// Eq-style fusion entry point: input is GA + GC.
    TensorPtr forward(const TensorPtr& ga, const TensorPtr& gc) const;
    /// Runs an already-fused embedding through positions + all layers.
    TensorPtr forward_fused(const TensorPtr& x) const;

    void collect(ParamList& out, const std::string& prefix) const;
};

} // namespace selm
