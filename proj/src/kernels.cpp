#include "selm/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace selm {
namespace kernels {

namespace {
int g_max_threads = 0;
}

void set_max_threads(int n) { g_max_threads = n; }

int max_threads() {
#ifdef _OPENMP
    return g_max_threads > 0 ? g_max_threads : omp_get_max_threads();
#else
    return 1;
#endif
}

void matmul(const Real* a, const Real* b, Real* c, i64 nbatch, i64 bmod, int m, int k, int n) {
    const i64 rows = nbatch * m;
    parallel_for(rows, static_cast<i64>(k) * n, [=](i64 r) {
        const i64 t = r / m;
        const int i = static_cast<int>(r % m);
        const Real* arow = a + (t * m + i) * k;
        const Real* bmat = b + (t % bmod) * static_cast<i64>(k) * n;
        Real* crow = c + r * n;
        for (int j = 0; j < n; ++j) crow[j] = Real(0);
        for (int kk = 0; kk < k; ++kk) {
            const Real av = arow[kk];
            const Real* brow = bmat + static_cast<i64>(kk) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    });
}

void matmul_grad_a(const Real* g, const Real* b, Real* da, i64 nbatch, i64 bmod, int m, int k,
                   int n) {
    const i64 rows = nbatch * m;
    parallel_for(rows, static_cast<i64>(k) * n, [=](i64 r) {
        const i64 t = r / m;
        const Real* grow = g + r * n;
        const Real* bmat = b + (t % bmod) * static_cast<i64>(k) * n;
        Real* darow = da + r * k;
        for (int kk = 0; kk < k; ++kk) {
            const Real* brow = bmat + static_cast<i64>(kk) * n;
            Real acc = Real(0);
            for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
            darow[kk] += acc;
        }
    });
}

void matmul_grad_b(const Real* a, const Real* g, Real* db, i64 nbatch, i64 bmod, int m, int k,
                   int n) {
    // Parallel over output elements of dB; the sum over contributing batches
    // and rows runs in a fixed ascending order.
    const i64 outer = bmod * k;
    parallel_for(outer, (nbatch / bmod) * m * n, [=](i64 sk) {
        const i64 s = sk / k;
        const int kk = static_cast<int>(sk % k);
        Real* dbrow = db + (s * k + kk) * static_cast<i64>(n);
        for (i64 t = s; t < nbatch; t += bmod) {
            const Real* amat = a + t * static_cast<i64>(m) * k;
            const Real* gmat = g + t * static_cast<i64>(m) * n;
            for (int i = 0; i < m; ++i) {
                const Real av = amat[static_cast<i64>(i) * k + kk];
                const Real* grow = gmat + static_cast<i64>(i) * n;
                for (int j = 0; j < n; ++j) dbrow[j] += av * grow[j];
            }
        }
    });
}

namespace serial {

void matmul(const Real* a, const Real* b, Real* c, i64 nbatch, i64 bmod, int m, int k, int n) {
    for (i64 t = 0; t < nbatch; ++t) {
        const Real* amat = a + t * static_cast<i64>(m) * k;
        const Real* bmat = b + (t % bmod) * static_cast<i64>(k) * n;
        Real* cmat = c + t * static_cast<i64>(m) * n;
        for (int i = 0; i < m; ++i) {
            Real* crow = cmat + static_cast<i64>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] = Real(0);
            for (int kk = 0; kk < k; ++kk) {
                const Real av = amat[static_cast<i64>(i) * k + kk];
                const Real* brow = bmat + static_cast<i64>(kk) * n;
                for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    }
}

void gelu(const Real* x, Real* y, i64 n) {
    constexpr Real inv_sqrt2 = Real(0.7071067811865475244);
    for (i64 i = 0; i < n; ++i) {
        y[i] = Real(0.5) * x[i] * (Real(1) + std::erf(x[i] * inv_sqrt2));
    }
}

void softmax_rows(const Real* x, Real* y, i64 rows, int cols) {
    for (i64 r = 0; r < rows; ++r) {
        const Real* xr = x + r * cols;
        Real* yr = y + r * cols;
        Real mx = xr[0];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
        Real sum = Real(0);
        for (int j = 0; j < cols; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            sum += yr[j];
        }
        for (int j = 0; j < cols; ++j) yr[j] /= sum;
    }
}

} // namespace serial

} // namespace kernels
} // namespace selm
