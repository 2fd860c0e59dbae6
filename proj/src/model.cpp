#include "selm/model.hpp"

#include <stdexcept>
#include <unordered_map>

namespace selm {

namespace o = ops;

void ModelConfig::resolve() {
    if (encoder_hidden <= 0) encoder_hidden = 2 * d_model;
    if (vocab_width <= 0) vocab_width = d_model;
    if (vae_hidden <= 0) vae_hidden = std::max(2, d_model / 2);
    if (vae_latent <= 0) vae_latent = std::max(1, d_model / 4);
    if (adapter_rank <= 0) adapter_rank = std::max(1, d_llm / 8);
    if (adapter_hidden <= 0) adapter_hidden = std::max(adapter_rank + 1, d_llm / 2);
    if (decoder_hidden <= 0) decoder_hidden = 2 * d_llm;
    if (context_length <= 0 || horizon <= 0 || segment_length <= 0)
        throw std::invalid_argument("ModelConfig: geometry must be positive");
    if (context_length % segment_length != 0)
        throw std::invalid_argument("ModelConfig: context_length " +
                                    std::to_string(context_length) +
                                    " is not divisible by segment_length " +
                                    std::to_string(segment_length));
    if (segments() > max_positions)
        throw std::invalid_argument("ModelConfig: " + std::to_string(segments()) +
                                    " segments exceed max_positions " +
                                    std::to_string(max_positions));
    if (prototypes > vocab_size)
        throw std::invalid_argument("ModelConfig: prototypes exceed vocab_size");
    if (decoder_mode != "flatten" && decoder_mode != "per_segment")
        throw std::invalid_argument("ModelConfig: unknown decoder_mode '" + decoder_mode + "'");
    if (adapter_topology != "sequential" && adapter_topology != "parallel")
        throw std::invalid_argument("ModelConfig: unknown adapter_topology '" + adapter_topology +
                                    "'");
}

Decoder::Decoder(const ModelConfig& cfg, RngState& rng)
    : per_segment(cfg.decoder_mode == "per_segment"),
      n_segments(cfg.segments()),
      d_llm(cfg.d_llm),
      horizon(cfg.horizon) {
    if (per_segment) {
        if (horizon % n_segments != 0)
            throw std::invalid_argument("Decoder: per-segment mode needs horizon divisible by " +
                                        std::to_string(n_segments) + " segments");
        w1 = init_fanin({d_llm, cfg.decoder_hidden}, rng);
        b1 = init_zeros({cfg.decoder_hidden});
        w2 = init_fanin({cfg.decoder_hidden, horizon / n_segments}, rng);
        b2 = init_zeros({horizon / n_segments});
    } else {
        w1 = init_fanin({n_segments * d_llm, cfg.decoder_hidden}, rng);
        b1 = init_zeros({cfg.decoder_hidden});
        w2 = init_fanin({cfg.decoder_hidden, horizon}, rng);
        b2 = init_zeros({horizon});
    }
}

TensorPtr Decoder::forward(const TensorPtr& y) const {
    if (y->ndim() != 3 || y->extent(1) != n_segments || y->extent(2) != d_llm)
        throw std::invalid_argument("decode: expected [B," + std::to_string(n_segments) + "," +
                                    std::to_string(d_llm) + "] input, got " +
                                    shape_str(y->shape));
    const int b = y->extent(0);
    if (per_segment) {
        auto per = o::affine(o::gelu(o::affine(y, w1, b1)), w2, b2); // [B,N,horizon/N]
        return o::reshape(per, {b, horizon});
    }
    auto flat = o::reshape(y, {b, n_segments * d_llm});
    return o::affine(o::gelu(o::affine(flat, w1, b1)), w2, b2);
}

void Decoder::collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".w1", w1, true});
    out.push_back({prefix + ".b1", b1, true});
    out.push_back({prefix + ".w2", w2, true});
    out.push_back({prefix + ".b2", b2, true});
}

SelmModel::SelmModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.resolve();
    RngState rng(cfg_.seed);

    encoder = TimeEncoder(cfg_.segment_length, cfg_.encoder_hidden, cfg_.d_model, rng);
    if (cfg_.embedding_path.empty()) {
        vocab = VocabularyTable::seeded(cfg_.vocab_size, cfg_.vocab_width, rng);
    } else {
        vocab = load_embedding_table(cfg_.embedding_path);
        cfg_.vocab_size = vocab.vocab();
        cfg_.vocab_width = vocab.width();
    }
    sem_proj =
        SemanticProjection(cfg_.vocab_size, cfg_.prototypes, cfg_.vocab_width, cfg_.d_model, rng);

    TsccConfig tcfg;
    tcfg.d_model = cfg_.d_model;
    tcfg.d_llm = cfg_.d_llm;
    tcfg.heads = cfg_.tscc_heads;
    tcfg.k_top = cfg_.k_top;
    tcfg.vae_hidden = cfg_.vae_hidden;
    tcfg.vae_latent = cfg_.vae_latent;
    tcfg.eps = cfg_.eps;
    tscc = Tscc(tcfg, rng);

    BackboneConfig bcfg;
    bcfg.layers = cfg_.layers;
    bcfg.heads = cfg_.heads;
    bcfg.d_llm = cfg_.d_llm;
    bcfg.ffn_width = cfg_.ffn_width;
    bcfg.max_positions = cfg_.max_positions;
    bcfg.frozen = cfg_.frozen;
    backbone = Backbone(bcfg, rng);

    if (cfg_.use_adapter) {
        AdapterConfig acfg;
        acfg.d_llm = cfg_.d_llm;
        acfg.rank = cfg_.adapter_rank;
        acfg.hidden = cfg_.adapter_hidden;
        acfg.scale = cfg_.adapter_scale;
        acfg.topology = cfg_.adapter_topology == "parallel"
                            ? AdapterConfig::Topology::Parallel
                            : AdapterConfig::Topology::Sequential;
        backbone.attach_adapters(acfg, rng);
    }

    decoder = Decoder(cfg_, rng);
}

ModelOutput SelmModel::forward(const Tensor& context, const NoiseSpec& noise) const {
    if (context.ndim() != 2 || context.extent(1) != cfg_.context_length)
        throw std::invalid_argument("model forward: expected [B," +
                                    std::to_string(cfg_.context_length) + "] context, got " +
                                    shape_str(context.shape));
    auto segs = Tensor::leaf(segment(context, cfg_.segment_length), false);
    auto h = encoder.forward(segs);
    auto l2 = sem_proj.forward(vocab.table);

    ModelOutput out;
    out.prototypes_l2 = l2;
    TensorPtr fused;
    if (cfg_.use_tscc) {
        auto t = tscc.forward(h, l2, noise);
        out.mu = t.mu;
        out.logvar = t.logvar;
        out.ga = t.ga;
        out.gc = t.gc;
        out.corr = t.corr;
        fused = backbone.forward(t.ga, t.gc);
    } else {
        // alignment-only baseline: cross-attention then the token projection
        auto joint = tscc.align.forward(l2, h);
        out.ga = o::affine(joint, tscc.branch_a.out_w, tscc.branch_a.out_b);
        fused = backbone.forward_fused(out.ga);
    }
    out.prediction = decoder.forward(fused);
    return out;
}

ParamList SelmModel::parameters() const {
    ParamList all;
    encoder.collect(all, "time_encoder");
    all.push_back({"vocab.table", vocab.table, false});
    sem_proj.collect(all, "semantic_projection");
    tscc.collect(all, "tscc");
    backbone.collect(all, "backbone");
    decoder.collect(all, "decoder");
    partition_parameters(all); // validates name uniqueness
    return all;
}

Checkpoint SelmModel::to_checkpoint(const std::string& config_text) const {
    Checkpoint ckpt;
    ckpt.seed = cfg_.seed;
    ckpt.config_text = config_text;
    for (const auto& p : parameters()) {
        CheckpointEntry e;
        e.name = p.name;
        e.trainable = p.trainable;
        e.tensor = *p.tensor; // value copy; graph edges are not serialized
        e.tensor.grad.clear();
        ckpt.entries.push_back(std::move(e));
    }
    return ckpt;
}

void SelmModel::load_state(const Checkpoint& ckpt) {
    auto params = parameters();
    std::unordered_map<std::string, TensorPtr> by_name;
    for (auto& p : params) by_name[p.name] = p.tensor;
    size_t matched = 0;
    for (const auto& e : ckpt.entries) {
        auto it = by_name.find(e.name);
        if (it == by_name.end())
            throw std::runtime_error("load_state: checkpoint entry '" + e.name +
                                     "' has no matching parameter");
        if (it->second->shape != e.tensor.shape)
            throw std::runtime_error("load_state: shape mismatch for '" + e.name + "': model " +
                                     shape_str(it->second->shape) + " vs checkpoint " +
                                     shape_str(e.tensor.shape));
        it->second->data = e.tensor.data;
        ++matched;
    }
    if (matched != by_name.size())
        throw std::runtime_error("load_state: checkpoint holds " + std::to_string(matched) +
                                 " of " + std::to_string(by_name.size()) + " parameters");
}

} // namespace selm
