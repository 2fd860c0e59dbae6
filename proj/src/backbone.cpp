#include "selm/backbone.hpp"

#include <cmath>
#include <stdexcept>

namespace selm {

namespace o = ops;

void BackboneConfig::validate() const {
    if (layers < 1) throw std::invalid_argument("BackboneConfig: layers must be >= 1");
    if (heads <= 0 || d_llm % heads != 0)
        throw std::invalid_argument("BackboneConfig: head count " + std::to_string(heads) +
                                    " does not divide width " + std::to_string(d_llm));
    if (ffn_width <= 0 || max_positions <= 0)
        throw std::invalid_argument("BackboneConfig: ffn_width and max_positions must be positive");
}

AttentionLayer::AttentionLayer(const BackboneConfig& cfg, RngState& rng, bool trainable_host) {
    const int d = cfg.d_llm;
    ln1_g = Tensor::leaf(Tensor({d}, Real(1)), trainable_host);
    ln1_b = init_zeros({d}, trainable_host);
    wq = init_fanin({d, d}, rng, trainable_host);
    bq = init_zeros({d}, trainable_host);
    wk = init_fanin({d, d}, rng, trainable_host);
    wv = init_fanin({d, d}, rng, trainable_host);
    bv = init_zeros({d}, trainable_host);
    wo = init_fanin({d, d}, rng, trainable_host);
    bo = init_zeros({d}, trainable_host);
    ln2_g = Tensor::leaf(Tensor({d}, Real(1)), trainable_host);
    ln2_b = init_zeros({d}, trainable_host);
    ffn_w1 = init_fanin({d, cfg.ffn_width}, rng, trainable_host);
    ffn_b1 = init_zeros({cfg.ffn_width}, trainable_host);
    ffn_w2 = init_fanin({cfg.ffn_width, d}, rng, trainable_host);
    ffn_b2 = init_zeros({d}, trainable_host);
}

namespace {
// additive causal mask [N, N]: 0 on j <= i, large negative above the diagonal
TensorPtr causal_mask(int n) {
    Tensor m({n, n}, Real(0));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) m.data[static_cast<size_t>(i) * n + j] = Real(-1e30);
    return Tensor::leaf(std::move(m), false);
}
} // namespace

TensorPtr AttentionLayer::forward(const TensorPtr& x, int heads, TensorPtr* attn_out) const {
    const int b = x->extent(0), n = x->extent(1), d = x->extent(2);
    const int dk = d / heads;
    const Real scale = Real(1) / std::sqrt(static_cast<Real>(dk));

    auto xn = o::layer_norm(x, ln1_g, ln1_b, 2);
    auto k_lin = o::matmul(xn, wk);
    auto v_lin = o::affine(xn, wv, bv);
    if (adapter) {
        const auto delta = adapter->forward(x); // consumes the block input
        k_lin = o::add(k_lin, delta.dk);
        v_lin = o::add(v_lin, delta.dv);
    }
    auto q = o::transpose(o::reshape(o::affine(xn, wq, bq), {b, n, heads, dk}), 1, 2);
    auto k = o::transpose(o::reshape(k_lin, {b, n, heads, dk}), 1, 2);
    auto v = o::transpose(o::reshape(v_lin, {b, n, heads, dk}), 1, 2);

    auto scores = o::add(o::mul_scalar(o::matmul(q, o::transpose(k, 2, 3)), scale),
                         causal_mask(n)); // [B,heads,N,N]
    auto attn = o::softmax(scores, 3);
    if (attn_out) *attn_out = attn;
    auto ctx = o::reshape(o::transpose(o::matmul(attn, v), 1, 2), {b, n, d});
    auto x1 = o::add(x, o::affine(ctx, wo, bo));

    auto xn2 = o::layer_norm(x1, ln2_g, ln2_b, 2);
    auto f = o::affine(o::gelu(o::affine(xn2, ffn_w1, ffn_b1)), ffn_w2, ffn_b2);
    return o::add(x1, f);
}

void AttentionLayer::collect(ParamList& out, const std::string& prefix,
                             bool host_trainable) const {
    out.push_back({prefix + ".ln1_g", ln1_g, host_trainable});
    out.push_back({prefix + ".ln1_b", ln1_b, host_trainable});
    out.push_back({prefix + ".wq", wq, host_trainable});
    out.push_back({prefix + ".bq", bq, host_trainable});
    out.push_back({prefix + ".wk", wk, host_trainable});
    out.push_back({prefix + ".wv", wv, host_trainable});
    out.push_back({prefix + ".bv", bv, host_trainable});
    out.push_back({prefix + ".wo", wo, host_trainable});
    out.push_back({prefix + ".bo", bo, host_trainable});
    out.push_back({prefix + ".ln2_g", ln2_g, host_trainable});
    out.push_back({prefix + ".ln2_b", ln2_b, host_trainable});
    out.push_back({prefix + ".ffn_w1", ffn_w1, host_trainable});
    out.push_back({prefix + ".ffn_b1", ffn_b1, host_trainable});
    out.push_back({prefix + ".ffn_w2", ffn_w2, host_trainable});
    out.push_back({prefix + ".ffn_b2", ffn_b2, host_trainable});
    if (adapter) adapter->collect(out, prefix + ".adapter");
}

Backbone::Backbone(const BackboneConfig& config, RngState& rng) : cfg(config) {
    cfg.validate();
    pos_embed = init_normal({cfg.max_positions, cfg.d_llm}, rng, 0.02, true);
    layers.reserve(static_cast<size_t>(cfg.layers));
    for (int i = 0; i < cfg.layers; ++i) layers.emplace_back(cfg, rng, !cfg.frozen);
}

void Backbone::attach_adapters(const AdapterConfig& acfg, RngState& rng) {
    for (auto& layer : layers) layer.adapter = std::make_unique<TimeAdapter>(acfg, rng);
}

TensorPtr Backbone::forward(const TensorPtr& ga, const TensorPtr& gc) const {
    return forward_fused(o::add(ga, gc));
}

TensorPtr Backbone::forward_fused(const TensorPtr& x) const {
    if (x->ndim() != 3 || x->extent(2) != cfg.d_llm)
        throw std::invalid_argument("backbone_forward: expected [B,N," + std::to_string(cfg.d_llm) +
                                    "] input, got " + shape_str(x->shape));
    const int n = x->extent(1);
    if (n > cfg.max_positions)
        throw std::invalid_argument("backbone_forward: " + std::to_string(n) +
                                    " positions exceed max_positions " +
                                    std::to_string(cfg.max_positions));
    auto h = o::add(x, o::slice(pos_embed, 0, 0, n));
    for (const auto& layer : layers) h = layer.forward(h, cfg.heads);
    return h;
}

void Backbone::collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".pos_embed", pos_embed, true});
    for (size_t i = 0; i < layers.size(); ++i)
        layers[i].collect(out, prefix + ".layer" + std::to_string(i), !cfg.frozen);
}

} // namespace selm
