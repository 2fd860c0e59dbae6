#pragma once

#include "selm/tensor.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace selm {
namespace kernels {

/// Worker-thread cap for the parallel kernels. 0 = library default.
/// Results are bit-identical for any thread count: every kernel parallelizes
/// over independent output elements and keeps reduction order fixed.
void set_max_threads(int n);
int max_threads();

inline constexpr i64 kParallelCutoff = 4096;

#ifdef _OPENMP
template <class F>
void parallel_for(i64 n, i64 work_per_item, F&& body) {
    // run small work inline: entering an OpenMP region costs microseconds,
    // which dominates graph-heavy workloads of tiny tensors
    if (n <= 1 || n * work_per_item <= kParallelCutoff) {
        for (i64 i = 0; i < n; ++i) body(i);
        return;
    }
#pragma omp parallel for schedule(static) num_threads(max_threads())
    for (i64 i = 0; i < n; ++i) body(i);
}
#else
template <class F>
void parallel_for(i64 n, i64 /*work_per_item*/, F&& body) {
    for (i64 i = 0; i < n; ++i) body(i);
}
#endif

// Batched row-major matmul with suffix broadcast on the batch axis:
//   C[t,m,n] = sum_k A[t,m,k] * B[t % bmod, k, n]     t in [0, nbatch)
// bmod == nbatch means per-batch B; bmod == 1 means one shared B.
void matmul(const Real* a, const Real* b, Real* c, i64 nbatch, i64 bmod, int m, int k, int n);

// dA[t,m,k] += sum_n G[t,m,n] * B[t % bmod, k, n]   (G x B^T, accumulating)
void matmul_grad_a(const Real* g, const Real* b, Real* da, i64 nbatch, i64 bmod, int m, int k,
                   int n);

// dB[s,k,n] += sum_{t: t % bmod == s} sum_m A[t,m,k] * G[t,m,n]  (accumulating,
// fixed ascending reduction order so any thread count gives identical bits)
void matmul_grad_b(const Real* a, const Real* g, Real* db, i64 nbatch, i64 bmod, int m, int k,
                   int n);

/// Reference implementations: plain serial loops, kept independent of the
/// parallel code paths so tests and the benchmark can compare against them.
namespace serial {
void matmul(const Real* a, const Real* b, Real* c, i64 nbatch, i64 bmod, int m, int k, int n);
void gelu(const Real* x, Real* y, i64 n);
void softmax_rows(const Real* x, Real* y, i64 rows, int cols);
} // namespace serial

} // namespace kernels
} // namespace selm
