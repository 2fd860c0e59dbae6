#pragma once

#include "selm/autodiff.hpp"
#include "selm/params.hpp"

namespace selm {

/// Controls the reparameterization noise of the AM-VAE. Deterministic mode
/// (inference) forces eps = 0; Sampled draws fresh noise from `rng` per
/// forward; Fixed uses a caller-provided tensor (e.g. for gradient checks).
struct NoiseSpec {
    enum class Mode { Deterministic, Sampled, Fixed };
    Mode mode = Mode::Deterministic;
    RngState* rng = nullptr;
    const Tensor* fixed_eps = nullptr;

    static NoiseSpec deterministic() { return {}; }
    static NoiseSpec sampled(RngState& r) { return {Mode::Sampled, &r, nullptr}; }
    static NoiseSpec fixed(const Tensor& eps) { return {Mode::Fixed, nullptr, &eps}; }
};

/// Multi-head cross-attention aligning TS embeddings with the semantic
/// prototypes: query from H, key/value from the prototype rows, so the output
/// keeps H's [B, N, D] shape. Softmax runs over the prototype axis.
struct CrossAttention {
    int heads = 1;
    // no key bias: a uniform shift of every key leaves the softmax unchanged,
    // so such a parameter could never train
    TensorPtr wq, bq, wk, wv, bv, wo, bo;

    CrossAttention() = default;
    CrossAttention(int d_model, int n_heads, RngState& rng);

    TensorPtr forward(const TensorPtr& prototypes, const TensorPtr& h,
                      TensorPtr* attn_out = nullptr) const;
    void collect(ParamList& out, const std::string& prefix) const;
};

/// Anomaly-modeling VAE. Encodes the joint space to a latent Gaussian,
/// decodes a sample to the anomaly part DC and defines DA = J - DC, so the
/// decomposition identity DA + DC == J holds by construction. There is no
/// reconstruction objective; the latent trains through the forecast loss.
struct AmVae {
    TensorPtr enc_w, enc_b;       // D -> n
    TensorPtr mu_w, mu_b;         // n -> m
    TensorPtr logvar_w, logvar_b; // n -> m
    TensorPtr dec_w, dec_b;       // m -> D

    AmVae() = default;
    AmVae(int d_model, int hidden, int latent, RngState& rng);

    struct Out {
        TensorPtr dc;     // anomaly semantics
        TensorPtr da;     // de-anomaly semantics
        TensorPtr mu;     // [B, N, m]
        TensorPtr logvar; // clamped to [-10, 10]
    };
    Out decompose(const TensorPtr& joint, const NoiseSpec& noise) const;
    void collect(ParamList& out, const std::string& prefix) const;

    int latent_dim() const { return mu_w->extent(1); }
};

/// S = prototypes + mean(J over batch and sequence axes), broadcast per row.
TensorPtr enrich_prototypes(const TensorPtr& joint, const TensorPtr& prototypes);

/// M[b,n,i] = (1/D) <standardize(H[b,n,:]), standardize(S[i,:])>; bounded
/// Pearson-style correlations in [-1, 1].
TensorPtr cross_correlation(const TensorPtr& h, const TensorPtr& s, Real eps = kEps);

/// Indices of the k largest entries per [b, n] row of a correlation map,
/// sorted by descending value, ties broken by the lower index.
struct IndexMap {
    std::vector<int> shape; // leading dims, e.g. [B, N]
    int k = 0;
    std::vector<int> idx; // shape + [k], row-major
};

IndexMap topk_select(const Tensor& corr, int k_top);

/// DX' = DX ⊙ w where w[b,n,:] is the mean of the selected prototype rows.
TensorPtr infuse(const TensorPtr& dx, const TensorPtr& s, const IndexMap& indices);

/// Channel attention + gate: Attn = sigmoid(MLP([H, DX'])), fused =
/// Attn⊙H + (1-Attn)⊙J (an elementwise convex combination), then the F_llm
/// projection into the backbone width.
struct GateBranch {
    TensorPtr mlp_w1, mlp_b1; // 2D -> 2D
    TensorPtr mlp_w2, mlp_b2; // 2D -> D
    TensorPtr out_w, out_b;   // D -> D_llm

    GateBranch() = default;
    GateBranch(int d_model, int d_llm, RngState& rng);

    struct Out {
        TensorPtr attn;
        TensorPtr fused_pre; // before the F_llm projection
        TensorPtr projected; // [B, N, D_llm]
    };
    Out forward(const TensorPtr& h, const TensorPtr& dx_bar, const TensorPtr& joint) const;
    void collect(ParamList& out, const std::string& prefix) const;
};

struct TsccConfig {
    int d_model = 64;
    int d_llm = 64;
    int heads = 4;
    int k_top = 5;
    int vae_hidden = 32; // n < D
    int vae_latent = 16; // m <= n
    Real eps = kEps;
};

/// The full temporal-semantic cross-correlation pipeline producing the
/// de-anomaly (GA) and anomaly (GC) embeddings. The two gate branches share
/// structure but not weights.
struct Tscc {
    TsccConfig cfg;
    CrossAttention align;
    AmVae vae;
    GateBranch branch_a, branch_c;

    Tscc() = default;
    Tscc(const TsccConfig& config, RngState& rng);

    struct Out {
        TensorPtr ga, gc;
        TensorPtr joint;  // J
        TensorPtr s;      // enriched prototypes
        TensorPtr mu, logvar;
        TensorPtr corr;   // M
        IndexMap topk;
    };
    Out forward(const TensorPtr& h, const TensorPtr& prototypes, const NoiseSpec& noise) const;
    void collect(ParamList& out, const std::string& prefix) const;
};

} // namespace selm
