#include "selm/embedding.hpp"

#include <stdexcept>

#include "selm/matrixio.hpp"

namespace selm {

namespace o = ops;

TimeEncoder::TimeEncoder(int segment_length, int hidden, int d_model, RngState& rng) {
    w1 = init_fanin({segment_length, hidden}, rng);
    b1 = init_zeros({hidden});
    w2 = init_fanin({hidden, d_model}, rng);
    b2 = init_zeros({d_model});
}

TensorPtr TimeEncoder::forward(const TensorPtr& segments) const {
    if (segments->ndim() != 3 || segments->extent(2) != w1->extent(0))
        throw std::invalid_argument("time_encode: expected [B,N," +
                                    std::to_string(w1->extent(0)) + "] input, got " +
                                    shape_str(segments->shape));
    return o::affine(o::gelu(o::affine(segments, w1, b1)), w2, b2);
}

void TimeEncoder::collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".w1", w1, true});
    out.push_back({prefix + ".b1", b1, true});
    out.push_back({prefix + ".w2", w2, true});
    out.push_back({prefix + ".b2", b2, true});
}

VocabularyTable VocabularyTable::seeded(int vocab, int width, RngState& rng) {
    VocabularyTable vt;
    Tensor t({vocab, width});
    fill_normal(t, rng, 0.0, 1.0);
    vt.table = Tensor::leaf(std::move(t), false);
    vt.source = Source::SeededRandom;
    return vt;
}

VocabularyTable load_embedding_table(const std::string& path) {
    const MatrixFile mf = read_matrix(path);
    if (mf.rows == 0 || mf.cols == 0)
        throw std::runtime_error(path + ": empty embedding table");
    Tensor t({static_cast<int>(mf.rows), static_cast<int>(mf.cols)});
    for (size_t i = 0; i < mf.values.size(); ++i) t.data[i] = static_cast<Real>(mf.values[i]);
    VocabularyTable vt;
    vt.table = Tensor::leaf(std::move(t), false);
    vt.source = VocabularyTable::Source::Imported;
    return vt;
}

SemanticProjection::SemanticProjection(int vocab, int prototypes, int vocab_width, int d_model,
                                       RngState& rng) {
    if (prototypes > vocab)
        throw std::invalid_argument("SemanticProjection: prototype count " +
                                    std::to_string(prototypes) + " exceeds vocabulary size " +
                                    std::to_string(vocab));
    w_vk = init_fanin({vocab, prototypes}, rng);
    b_k = init_zeros({prototypes});
    if (vocab_width != d_model) {
        w_wd = init_fanin({vocab_width, d_model}, rng);
        b_d = init_zeros({d_model});
    }
}

TensorPtr SemanticProjection::forward(const TensorPtr& vocab_table) const {
    if (vocab_table->ndim() != 2 || vocab_table->extent(0) != w_vk->extent(0))
        throw std::invalid_argument("project_vocabulary: table " + shape_str(vocab_table->shape) +
                                    " does not match projection " + shape_str(w_vk->shape));
    // map along the vocabulary axis: [V, Dw] -> [Dw, V] -> [Dw, Kp] -> [Kp, Dw]
    auto wide = o::transpose(o::affine(o::transpose(vocab_table, 0, 1), w_vk, b_k), 0, 1);
    if (w_wd) return o::affine(wide, w_wd, b_d);
    return wide;
}

void SemanticProjection::collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".w_vk", w_vk, true});
    out.push_back({prefix + ".b_k", b_k, true});
    if (w_wd) {
        out.push_back({prefix + ".w_wd", w_wd, true});
        out.push_back({prefix + ".b_d", b_d, true});
    }
}

} // namespace selm
