#pragma once

#include <cstdint>

#include "selm/tensor.hpp"

namespace selm {

/// Deterministic splitmix64 stream. The state is a single counter, so a given
/// seed yields a bit-identical draw sequence on every run of the same build.
class RngState {
public:
    explicit RngState(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64();

    /// Uniform in [0,1) with 53-bit resolution.
    double uniform();
    double uniform(double lo, double hi);

    /// Standard normal via Box-Muller (two uniforms per draw, no cached spare).
    double normal();
    double normal(double mean, double stddev);

    /// Fisher-Yates index for shuffling: uniform integer in [0, n).
    i64 index(i64 n);

    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
};

void fill_normal(Tensor& t, RngState& rng, double mean = 0.0, double stddev = 1.0);
void fill_uniform(Tensor& t, RngState& rng, double lo, double hi);

} // namespace selm
