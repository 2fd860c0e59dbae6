#pragma once

#include <vector>

#include "selm/tensor.hpp"

namespace selm {

/// Median wall time of one attention-core pass (scores, softmax, weighted
/// sum) on [heads, n, dk] operands, single-threaded serial kernels.
double time_attention_core(int n, int heads, int dk, int reps, std::uint64_t seed = 123);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Median wall time of one batched matmul with the given kernel path.
double time_matmul(int m, int k, int n, int reps, bool parallel, std::uint64_t seed = 321);

} // namespace selm
