#pragma once

#include <string>

#include "selm/autodiff.hpp"
#include "selm/params.hpp"

namespace selm {

/// Two-layer segment projection: [B, N, P] -> [B, N, D] via
/// F2(gelu(F1(segments))), applied per segment.
struct TimeEncoder {
    TensorPtr w1, b1, w2, b2;

    TimeEncoder() = default;
    TimeEncoder(int segment_length, int hidden, int d_model, RngState& rng);

    TensorPtr forward(const TensorPtr& segments) const;
    void collect(ParamList& out, const std::string& prefix) const;
};

/// Frozen word-embedding surrogate, either seeded at random or imported from
/// a portable matrix file.
struct VocabularyTable {
    enum class Source { SeededRandom, Imported };

    TensorPtr table; // [V, D_w], requires_grad = false
    Source source = Source::SeededRandom;

    int vocab() const { return table->extent(0); }
    int width() const { return table->extent(1); }

    static VocabularyTable seeded(int vocab, int width, RngState& rng);
};

/// Reads a [V, D_w] matrix file written in the portable format.
VocabularyTable load_embedding_table(const std::string& path);

/// Trainable projection of the frozen vocabulary onto Kp prototype rows:
/// a linear map along the vocabulary axis, plus a width adapter when the
/// source width differs from the model width.
struct SemanticProjection {
    TensorPtr w_vk, b_k; // [V, Kp], [Kp]
    TensorPtr w_wd, b_d; // width adapter [D_w, D], [D]; null when D_w == D

    SemanticProjection() = default;
    SemanticProjection(int vocab, int prototypes, int vocab_width, int d_model, RngState& rng);

    /// [V, D_w] -> [Kp, D]; the table receives no gradient, the projection does.
    TensorPtr forward(const TensorPtr& vocab_table) const;
    void collect(ParamList& out, const std::string& prefix) const;
};

} // namespace selm
