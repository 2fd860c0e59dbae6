#include "selm/tscc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace selm {

namespace o = ops;

CrossAttention::CrossAttention(int d_model, int n_heads, RngState& rng) : heads(n_heads) {
    if (n_heads <= 0 || d_model % n_heads != 0)
        throw std::invalid_argument("CrossAttention: head count " + std::to_string(n_heads) +
                                    " does not divide width " + std::to_string(d_model));
    wq = init_fanin({d_model, d_model}, rng);
    bq = init_zeros({d_model});
    wk = init_fanin({d_model, d_model}, rng);
    wv = init_fanin({d_model, d_model}, rng);
    bv = init_zeros({d_model});
    wo = init_fanin({d_model, d_model}, rng);
    bo = init_zeros({d_model});
}

TensorPtr CrossAttention::forward(const TensorPtr& prototypes, const TensorPtr& h,
                                  TensorPtr* attn_out) const {
    const int d = wq->extent(0);
    if (h->ndim() != 3 || h->extent(2) != d || prototypes->ndim() != 2 ||
        prototypes->extent(1) != d)
        throw std::invalid_argument("cross_align: width mismatch between " +
                                    shape_str(h->shape) + " and " + shape_str(prototypes->shape));
    const int b = h->extent(0), n = h->extent(1);
    const int kp = prototypes->extent(0);
    const int dk = d / heads;
    const Real scale = Real(1) / std::sqrt(static_cast<Real>(dk));

    // queries from H: [B,N,D] -> [B,heads,N,dk]
    auto q = o::transpose(o::reshape(o::affine(h, wq, bq), {b, n, heads, dk}), 1, 2);
    // keys/values from the prototypes: [Kp,D] -> [heads,Kp,dk]
    auto k = o::transpose(o::reshape(o::matmul(prototypes, wk), {kp, heads, dk}), 0, 1);
    auto v = o::transpose(o::reshape(o::affine(prototypes, wv, bv), {kp, heads, dk}), 0, 1);

    auto scores = o::mul_scalar(o::matmul(q, o::transpose(k, 1, 2)), scale); // [B,heads,N,Kp]
    auto attn = o::softmax(scores, 3);
    if (attn_out) *attn_out = attn;
    auto ctx = o::matmul(attn, v); // [B,heads,N,dk]
    auto merged = o::reshape(o::transpose(ctx, 1, 2), {b, n, d});
    return o::affine(merged, wo, bo);
}

void CrossAttention::collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".wq", wq, true});
    out.push_back({prefix + ".bq", bq, true});
    out.push_back({prefix + ".wk", wk, true});
    out.push_back({prefix + ".wv", wv, true});
    out.push_back({prefix + ".bv", bv, true});
    out.push_back({prefix + ".wo", wo, true});
    out.push_back({prefix + ".bo", bo, true});
}

AmVae::AmVae(int d_model, int hidden, int latent, RngState& rng) {
    if (hidden >= d_model)
        throw std::invalid_argument("AmVae: hidden " + std::to_string(hidden) +
                                    " must be a bottleneck below width " + std::to_string(d_model));
    if (latent > hidden)
        throw std::invalid_argument("AmVae: latent " + std::to_string(latent) +
                                    " must not exceed hidden " + std::to_string(hidden));
    enc_w = init_fanin({d_model, hidden}, rng);
    enc_b = init_zeros({hidden});
    mu_w = init_fanin({hidden, latent}, rng);
    mu_b = init_zeros({latent});
    logvar_w = init_fanin({hidden, latent}, rng);
    logvar_b = init_zeros({latent});
    dec_w = init_fanin({latent, d_model}, rng);
    dec_b = init_zeros({d_model});
}

AmVae::Out AmVae::decompose(const TensorPtr& joint, const NoiseSpec& noise) const {
    auto hidden = o::gelu(o::affine(joint, enc_w, enc_b));
    Out out;
    out.mu = o::affine(hidden, mu_w, mu_b);
    out.logvar = o::clamp(o::affine(hidden, logvar_w, logvar_b), Real(-10), Real(10));
    check_finite(*out.mu, "amvae_decompose: mu");
    check_finite(*out.logvar, "amvae_decompose: logvar");

    TensorPtr z;
    if (noise.mode == NoiseSpec::Mode::Deterministic) {
        z = out.mu;
    } else {
        Tensor eps(out.mu->shape);
        if (noise.mode == NoiseSpec::Mode::Sampled) {
            if (!noise.rng) throw std::invalid_argument("amvae_decompose: sampled mode needs rng");
            fill_normal(eps, *noise.rng, 0.0, 1.0);
        } else {
            if (!noise.fixed_eps || noise.fixed_eps->shape != out.mu->shape)
                throw std::invalid_argument("amvae_decompose: fixed eps missing or bad shape");
            eps = *noise.fixed_eps;
        }
        auto eps_leaf = Tensor::leaf(std::move(eps), false);
        z = o::add(out.mu, o::mul(eps_leaf, o::exp_(o::mul_scalar(out.logvar, Real(0.5)))));
    }
    check_finite(*z, "amvae_decompose: z");
    out.dc = o::affine(z, dec_w, dec_b);
    out.da = o::sub(joint, out.dc);
    return out;
}

void AmVae::collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".enc_w", enc_w, true});
    out.push_back({prefix + ".enc_b", enc_b, true});
    out.push_back({prefix + ".mu_w", mu_w, true});
    out.push_back({prefix + ".mu_b", mu_b, true});
    out.push_back({prefix + ".logvar_w", logvar_w, true});
    out.push_back({prefix + ".logvar_b", logvar_b, true});
    out.push_back({prefix + ".dec_w", dec_w, true});
    out.push_back({prefix + ".dec_b", dec_b, true});
}

TensorPtr enrich_prototypes(const TensorPtr& joint, const TensorPtr& prototypes) {
    return o::add(prototypes, o::mean(joint, {0, 1}));
}

TensorPtr cross_correlation(const TensorPtr& h, const TensorPtr& s, Real eps) {
    if (h->ndim() != 3 || s->ndim() != 2 || h->extent(2) != s->extent(1))
        throw std::invalid_argument("cross_correlation: width mismatch between " +
                                    shape_str(h->shape) + " and " + shape_str(s->shape));
    const int d = h->extent(2);
    auto hs = o::standardize(h, 2, eps);
    auto ss = o::standardize(s, 1, eps);
    return o::mul_scalar(o::matmul(hs, o::transpose(ss, 0, 1)), Real(1) / Real(d));
}

IndexMap topk_select(const Tensor& corr, int k_top) {
    if (corr.ndim() < 1) throw std::invalid_argument("topk_select: empty map");
    const int kp = corr.extent(corr.ndim() - 1);
    if (k_top < 1 || k_top > kp)
        throw std::invalid_argument("topk_select: k_top " + std::to_string(k_top) +
                                    " out of range [1," + std::to_string(kp) + "]");
    IndexMap out;
    out.shape.assign(corr.shape.begin(), corr.shape.end() - 1);
    out.k = k_top;
    const i64 rows = numel_of(out.shape);
    out.idx.resize(static_cast<size_t>(rows) * k_top);
    std::vector<int> order(static_cast<size_t>(kp));
    for (i64 r = 0; r < rows; ++r) {
        const Real* row = corr.data.data() + r * kp;
        std::iota(order.begin(), order.end(), 0);
        // descending value, ascending index on ties
        std::sort(order.begin(), order.end(), [row](int a, int b) {
            if (row[a] != row[b]) return row[a] > row[b];
            return a < b;
        });
        std::copy_n(order.begin(), k_top, out.idx.begin() + r * k_top);
    }
    return out;
}

TensorPtr infuse(const TensorPtr& dx, const TensorPtr& s, const IndexMap& indices) {
    auto weights = o::gather_rows_mean(s, indices.idx, indices.shape, indices.k);
    return o::mul(dx, weights);
}

GateBranch::GateBranch(int d_model, int d_llm, RngState& rng) {
    mlp_w1 = init_fanin({2 * d_model, 2 * d_model}, rng);
    mlp_b1 = init_zeros({2 * d_model});
    mlp_w2 = init_fanin({2 * d_model, d_model}, rng);
    mlp_b2 = init_zeros({d_model});
    out_w = init_fanin({d_model, d_llm}, rng);
    out_b = init_zeros({d_llm});
}

GateBranch::Out GateBranch::forward(const TensorPtr& h, const TensorPtr& dx_bar,
                                    const TensorPtr& joint) const {
    Out out;
    auto cat = o::concat(h, dx_bar, 2);
    out.attn = o::sigmoid(o::affine(o::gelu(o::affine(cat, mlp_w1, mlp_b1)), mlp_w2, mlp_b2));
    out.fused_pre =
        o::add(o::mul(out.attn, h), o::mul(o::rsub_scalar(Real(1), out.attn), joint));
    out.projected = o::affine(out.fused_pre, out_w, out_b);
    return out;
}

void GateBranch::collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".mlp_w1", mlp_w1, true});
    out.push_back({prefix + ".mlp_b1", mlp_b1, true});
    out.push_back({prefix + ".mlp_w2", mlp_w2, true});
    out.push_back({prefix + ".mlp_b2", mlp_b2, true});
    out.push_back({prefix + ".out_w", out_w, true});
    out.push_back({prefix + ".out_b", out_b, true});
}

Tscc::Tscc(const TsccConfig& config, RngState& rng)
    : cfg(config),
      align(config.d_model, config.heads, rng),
      vae(config.d_model, config.vae_hidden, config.vae_latent, rng),
      branch_a(config.d_model, config.d_llm, rng),
      branch_c(config.d_model, config.d_llm, rng) {}

Tscc::Out Tscc::forward(const TensorPtr& h, const TensorPtr& prototypes,
                        const NoiseSpec& noise) const {
    Out out;
    out.joint = align.forward(prototypes, h);
    out.s = enrich_prototypes(out.joint, prototypes);
    auto dec = vae.decompose(out.joint, noise);
    out.mu = dec.mu;
    out.logvar = dec.logvar;
    out.corr = cross_correlation(h, out.s, cfg.eps);
    out.topk = topk_select(*out.corr, cfg.k_top);
    auto da_bar = infuse(dec.da, out.s, out.topk);
    auto dc_bar = infuse(dec.dc, out.s, out.topk);
    out.ga = branch_a.forward(h, da_bar, out.joint).projected;
    out.gc = branch_c.forward(h, dc_bar, out.joint).projected;
    return out;
}

void Tscc::collect(ParamList& out, const std::string& prefix) const {
    align.collect(out, prefix + ".align");
    vae.collect(out, prefix + ".vae");
    branch_a.collect(out, prefix + ".gate_a");
    branch_c.collect(out, prefix + ".gate_c");
}

} // namespace selm
