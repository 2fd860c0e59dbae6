#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "selm/rng.hpp"
#include "selm/tensor.hpp"

namespace selm {

/// A named model weight. trainable == false means the optimizer never touches
/// it and no gradient is ever accumulated into it.
struct Parameter {
    std::string name;
    TensorPtr tensor;
    bool trainable = true;
};

using ParamList = std::vector<Parameter>;

struct ParamPartition {
    ParamList trainable;
    ParamList frozen;
};

/// Splits by the trainable flag; throws on empty or duplicate names.
ParamPartition partition_parameters(const ParamList& all);

i64 param_count(const ParamList& list);

/// FNV-1a over the raw tensor bytes, for frozen-weight audits.
std::uint64_t tensor_hash(const Tensor& t);
std::uint64_t params_hash(const ParamList& list);

TensorPtr init_normal(std::vector<int> shape, RngState& rng, double stddev, bool trainable = true);
/// stddev = 1/sqrt(fan_in) of the first extent.
TensorPtr init_fanin(std::vector<int> shape, RngState& rng, bool trainable = true);
TensorPtr init_zeros(std::vector<int> shape, bool trainable = true);

} // namespace selm
