#pragma once

#include <string>

#include "selm/backbone.hpp"
#include "selm/data.hpp"
#include "selm/embedding.hpp"
#include "selm/matrixio.hpp"
#include "selm/tscc.hpp"

namespace selm {

struct ModelConfig {
    // geometry
    int context_length = 672;
    int horizon = 96;
    int segment_length = 96;
    // embeddings
    int d_model = 64;
    int encoder_hidden = 0; // 0 -> 2 * d_model
    int vocab_size = 1000;
    int vocab_width = 0; // 0 -> d_model
    int prototypes = 32;
    std::string embedding_path; // empty -> seeded-random vocabulary
    // tscc
    bool use_tscc = true;
    int tscc_heads = 4;
    int k_top = 5;
    int vae_hidden = 0; // 0 -> d_model / 2
    int vae_latent = 0; // 0 -> d_model / 4
    // backbone
    int layers = 2;
    int heads = 4;
    int d_llm = 64;
    int ffn_width = 256;
    int max_positions = 64;
    bool frozen = true;
    // adapter
    bool use_adapter = true;
    int adapter_rank = 0;   // 0 -> d_llm / 8
    int adapter_hidden = 0; // 0 -> d_llm / 2
    Real adapter_scale = Real(1);
    std::string adapter_topology = "sequential";
    // decoder
    int decoder_hidden = 0; // 0 -> 2 * d_llm
    std::string decoder_mode = "flatten";
    Real eps = kEps;
    std::uint64_t seed = 42;

    void resolve(); // fills derived defaults and validates
    int segments() const { return context_length / segment_length; }
};

/// Decoder head mapping backbone output to the native horizon. Flatten mode
/// maps the concatenated [N * d_llm] features through two affine layers;
/// per-segment mode maps each segment row to horizon/N values and requires
/// the horizon to be divisible by N.
struct Decoder {
    TensorPtr w1, b1, w2, b2;
    bool per_segment = false;
    int n_segments = 0, d_llm = 0, horizon = 0;

    Decoder() = default;
    Decoder(const ModelConfig& cfg, RngState& rng);

    TensorPtr forward(const TensorPtr& y) const; // [B,N,d_llm] -> [B,horizon]
    void collect(ParamList& out, const std::string& prefix) const;
};

struct ModelOutput {
    TensorPtr prediction; // [B, horizon], normalized space
    TensorPtr mu, logvar; // null when TSCC is disabled
    // diagnostics / export hooks
    TensorPtr ga, gc, corr, prototypes_l2;
};

/// The full forecaster: segmentation -> time encoder -> TSCC semantic
/// enhancement -> adapter-augmented frozen backbone -> decoder head.
class SelmModel {
public:
    explicit SelmModel(ModelConfig cfg);

    /// context is an already instance-normalized [B, L] batch.
    ModelOutput forward(const Tensor& context, const NoiseSpec& noise) const;

    ParamList parameters() const;
    const ModelConfig& config() const { return cfg_; }

    Checkpoint to_checkpoint(const std::string& config_text) const;
    void load_state(const Checkpoint& ckpt);

    TimeEncoder encoder;
    VocabularyTable vocab;
    SemanticProjection sem_proj;
    Tscc tscc;
    Backbone backbone;
    Decoder decoder;

private:
    ModelConfig cfg_;
};

} // namespace selm
