#include "selm/params.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <unordered_set>

namespace selm {

ParamPartition partition_parameters(const ParamList& all) {
    std::unordered_set<std::string> names;
    ParamPartition part;
    for (const auto& p : all) {
        if (p.name.empty()) throw std::runtime_error("partition_parameters: unnamed parameter");
        if (!names.insert(p.name).second)
            throw std::runtime_error("partition_parameters: duplicate parameter name '" + p.name +
                                     "'");
        (p.trainable ? part.trainable : part.frozen).push_back(p);
    }
    return part;
}

i64 param_count(const ParamList& list) {
    i64 n = 0;
    for (const auto& p : list) n += p.tensor->numel();
    return n;
}

std::uint64_t tensor_hash(const Tensor& t) {
    std::uint64_t h = 1469598103934665603ULL;
    for (Real v : t.data) {
        unsigned char bytes[sizeof(Real)];
        std::memcpy(bytes, &v, sizeof(Real));
        for (unsigned char b : bytes) {
            h ^= b;
            h *= 1099511628211ULL;
        }
    }
    return h;
}

std::uint64_t params_hash(const ParamList& list) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& p : list) {
        const std::uint64_t th = tensor_hash(*p.tensor);
        h ^= th + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
    }
    return h;
}

TensorPtr init_normal(std::vector<int> shape, RngState& rng, double stddev, bool trainable) {
    Tensor t(std::move(shape));
    fill_normal(t, rng, 0.0, stddev);
    return Tensor::leaf(std::move(t), trainable);
}

TensorPtr init_fanin(std::vector<int> shape, RngState& rng, bool trainable) {
    const double fan_in = static_cast<double>(shape.empty() ? 1 : shape.front());
    return init_normal(std::move(shape), rng, 1.0 / std::sqrt(fan_in), trainable);
}

TensorPtr init_zeros(std::vector<int> shape, bool trainable) {
    return Tensor::leaf(Tensor(std::move(shape)), trainable);
}

} // namespace selm
