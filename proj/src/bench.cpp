#include "selm/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "selm/kernels.hpp"
#include "selm/rng.hpp"

namespace selm {

namespace {
using Clock = std::chrono::steady_clock;

std::vector<Real> random_buffer(i64 n, RngState& rng) {
    std::vector<Real> v(static_cast<size_t>(n));
    for (auto& x : v) x = static_cast<Real>(rng.normal());
    return v;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}
} // namespace

double time_attention_core(int n, int heads, int dk, int reps, std::uint64_t seed) {
    RngState rng(seed);
    const i64 hb = static_cast<i64>(heads);
    auto q = random_buffer(hb * n * dk, rng);
    auto k = random_buffer(hb * n * dk, rng);
    auto v = random_buffer(hb * n * dk, rng);
    std::vector<Real> kt(static_cast<size_t>(hb * dk * n));
    for (i64 h = 0; h < hb; ++h)
        for (int i = 0; i < n; ++i)
            for (int d = 0; d < dk; ++d)
                kt[static_cast<size_t>((h * dk + d) * n + i)] =
                    k[static_cast<size_t>((h * n + i) * dk + d)];
    std::vector<Real> scores(static_cast<size_t>(hb * n * n));
    std::vector<Real> attn(scores.size());
    std::vector<Real> out(static_cast<size_t>(hb * n * dk));
    const Real scale = Real(1) / std::sqrt(static_cast<Real>(dk));

    std::vector<double> times;
    times.reserve(static_cast<size_t>(reps));
    volatile Real sink = 0;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = Clock::now();
        kernels::serial::matmul(q.data(), kt.data(), scores.data(), hb, hb, n, dk, n);
        for (auto& s : scores) s *= scale;
        kernels::serial::softmax_rows(scores.data(), attn.data(), hb * n, n);
        kernels::serial::matmul(attn.data(), v.data(), out.data(), hb, hb, n, n, dk);
        times.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
        sink = sink + out[0];
    }
    (void)sink;
    return median(times);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const size_t n = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double dn = static_cast<double>(n);
    return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

double time_matmul(int m, int k, int n, int reps, bool parallel, std::uint64_t seed) {
    RngState rng(seed);
    auto a = random_buffer(static_cast<i64>(m) * k, rng);
    auto b = random_buffer(static_cast<i64>(k) * n, rng);
    std::vector<Real> c(static_cast<size_t>(m) * n);
    std::vector<double> times;
    times.reserve(static_cast<size_t>(reps));
    for (int r = 0; r < reps; ++r) {
        const auto t0 = Clock::now();
        if (parallel)
            kernels::matmul(a.data(), b.data(), c.data(), 1, 1, m, k, n);
        else
            kernels::serial::matmul(a.data(), b.data(), c.data(), 1, 1, m, k, n);
        times.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
    }
    return median(times);
}

} // namespace selm
