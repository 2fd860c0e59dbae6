#include "selm/rng.hpp"

#include <cmath>

namespace selm {

std::uint64_t RngState::next_u64() {
    // splitmix64 (Steele, Lea, Flood 2014)
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double RngState::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngState::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double RngState::normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double RngState::normal(double mean, double stddev) {
    return mean + stddev * normal();
}

i64 RngState::index(i64 n) {
    return static_cast<i64>(next_u64() % static_cast<std::uint64_t>(n));
}

void fill_normal(Tensor& t, RngState& rng, double mean, double stddev) {
    for (Real& v : t.data) v = static_cast<Real>(rng.normal(mean, stddev));
}

void fill_uniform(Tensor& t, RngState& rng, double lo, double hi) {
    for (Real& v : t.data) v = static_cast<Real>(rng.uniform(lo, hi));
}

} // namespace selm
