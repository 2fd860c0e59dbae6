// Compares the OpenMP kernels against the serial references and reports the
// attention-core cost scaling over the segment count.
#include <cstdio>
#include <vector>

#include "selm/bench.hpp"
#include "selm/kernels.hpp"

int main() {
    std::printf("matmul serial vs parallel (square sizes, median of 5):\n");
    std::printf("%8s %12s %12s %8s\n", "size", "serial[s]", "parallel[s]", "speedup");
    for (int size : {64, 128, 256, 512}) {
        const double ts = selm::time_matmul(size, size, size, 5, false);
        const double tp = selm::time_matmul(size, size, size, 5, true);
        std::printf("%8d %12.6f %12.6f %8.2f\n", size, ts, tp, ts / tp);
    }

    std::printf("\nattention core cost vs segment count (heads=4, dk=64):\n");
    std::vector<double> ns, ts;
    for (int n : {8, 16, 32, 64}) {
        const double t = selm::time_attention_core(n, 4, 64, 200);
        ns.push_back(n);
        ts.push_back(t);
        std::printf("  N=%3d  %.6f s\n", n, t);
    }
    std::printf("log-log slope: %.3f (quadratic attention cost expects ~2)\n",
                selm::loglog_slope(ns, ts));
    return 0;
}
