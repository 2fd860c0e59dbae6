#include "selm/adapter.hpp"

#include <stdexcept>

namespace selm {

namespace o = ops;

LstmCell::LstmCell(int input_dim, int hidden_dim, RngState& rng)
    : input(input_dim), hidden(hidden_dim) {
    wx = init_fanin({input_dim, 4 * hidden_dim}, rng);
    wh = init_fanin({hidden_dim, 4 * hidden_dim}, rng);
    b = init_zeros({4 * hidden_dim});
}

TensorPtr LstmCell::run_sequence(const TensorPtr& x) const {
    if (x->ndim() != 3 || x->extent(2) != input)
        throw std::invalid_argument("LstmCell: expected [B,N," + std::to_string(input) +
                                    "] input, got " + shape_str(x->shape));
    const int bsz = x->extent(0), n = x->extent(1);
    if (n == 0) throw std::invalid_argument("LstmCell: empty segment axis");
    auto h = Tensor::leaf(Tensor({bsz, hidden}), false);
    auto c = Tensor::leaf(Tensor({bsz, hidden}), false);
    TensorPtr out;
    for (int t = 0; t < n; ++t) {
        auto xt = o::reshape(o::slice(x, 1, t, 1), {bsz, input});
        auto st = o::recurrent_cell_step(xt, h, c, wx, wh, b);
        h = st.h;
        c = st.c;
        auto step = o::reshape(h, {bsz, 1, hidden});
        out = t == 0 ? step : o::concat(out, step, 1);
    }
    return out;
}

void LstmCell::collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".wx", wx, true});
    out.push_back({prefix + ".wh", wh, true});
    out.push_back({prefix + ".b", b, true});
}

TimeAdapter::TimeAdapter(const AdapterConfig& config, RngState& rng) : cfg(config) {
    if (cfg.rank >= cfg.d_llm)
        throw std::invalid_argument("TimeAdapter: rank " + std::to_string(cfg.rank) +
                                    " must stay below width " + std::to_string(cfg.d_llm));
    if (cfg.hidden <= cfg.rank)
        throw std::invalid_argument("TimeAdapter: hidden " + std::to_string(cfg.hidden) +
                                    " must exceed rank " + std::to_string(cfg.rank));
    down_w = init_fanin({cfg.d_llm, cfg.rank}, rng);
    down_b = init_zeros({cfg.rank});
    if (cfg.topology == AdapterConfig::Topology::Sequential) {
        long_cell = LstmCell(cfg.rank, cfg.hidden, rng);
        short_cell = LstmCell(cfg.hidden, cfg.rank, rng);
    } else {
        long_cell = LstmCell(cfg.rank, cfg.hidden, rng);
        long_proj_w = init_fanin({cfg.hidden, cfg.rank}, rng);
        long_proj_b = init_zeros({cfg.rank});
        short_cell = LstmCell(cfg.rank, cfg.rank, rng);
    }
    up_w = init_zeros({cfg.rank, 2 * cfg.d_llm});
}

TimeAdapter::Out TimeAdapter::forward(const TensorPtr& x) const {
    if (x->ndim() != 3 || x->extent(2) != cfg.d_llm)
        throw std::invalid_argument("adapter_forward: expected [B,N," + std::to_string(cfg.d_llm) +
                                    "] input, got " + shape_str(x->shape));
    auto u = o::affine(x, down_w, down_b); // [B,N,r]
    TensorPtr features;
    if (cfg.topology == AdapterConfig::Topology::Sequential) {
        features = short_cell.run_sequence(long_cell.run_sequence(u));
    } else {
        auto long_out = o::affine(long_cell.run_sequence(u), long_proj_w, long_proj_b);
        features = o::add(long_out, short_cell.run_sequence(u));
    }
    auto delta = o::mul_scalar(o::matmul(features, up_w), cfg.scale);
    Out out;
    out.dk = o::slice(delta, 2, 0, cfg.d_llm);
    out.dv = o::slice(delta, 2, cfg.d_llm, cfg.d_llm);
    return out;
}

void TimeAdapter::collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".down_w", down_w, true});
    out.push_back({prefix + ".down_b", down_b, true});
    long_cell.collect(out, prefix + ".long");
    if (long_proj_w) {
        out.push_back({prefix + ".long_proj_w", long_proj_w, true});
        out.push_back({prefix + ".long_proj_b", long_proj_b, true});
    }
    short_cell.collect(out, prefix + ".short");
    out.push_back({prefix + ".up_w", up_w, true});
}

i64 TimeAdapter::parameter_count() const {
    ParamList tmp;
    collect(tmp, "a");
    return param_count(tmp);
}

} // namespace selm
