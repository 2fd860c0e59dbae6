#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "selm/kernels.hpp"
#include "selm/rng.hpp"

using namespace selm;

namespace {
std::vector<Real> random_vec(i64 n, RngState& rng) {
    std::vector<Real> v(static_cast<size_t>(n));
    for (auto& x : v) x = static_cast<Real>(rng.normal());
    return v;
}
} // namespace

TEST_CASE("parallel matmul matches the serial reference bit-exactly") {
    RngState rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        const i64 nbatch = 1 + rng.index(6);
        const bool shared = rng.uniform() < 0.5;
        const i64 bmod = shared ? 1 : nbatch;
        const int m = static_cast<int>(1 + rng.index(16));
        const int k = static_cast<int>(1 + rng.index(16));
        const int n = static_cast<int>(1 + rng.index(16));
        auto a = random_vec(nbatch * m * k, rng);
        auto b = random_vec(bmod * k * n, rng);
        std::vector<Real> c_par(static_cast<size_t>(nbatch * m * n));
        std::vector<Real> c_ser(static_cast<size_t>(nbatch * m * n));

        kernels::set_max_threads(0);
        kernels::matmul(a.data(), b.data(), c_par.data(), nbatch, bmod, m, k, n);
        kernels::serial::matmul(a.data(), b.data(), c_ser.data(), nbatch, bmod, m, k, n);
        for (size_t i = 0; i < c_par.size(); ++i) REQUIRE(c_par[i] == c_ser[i]);
    }
}

TEST_CASE("results do not depend on the thread count") {
    RngState rng(23);
    const i64 nbatch = 4;
    const int m = 24, k = 48, n = 32;
    auto a = random_vec(nbatch * m * k, rng);
    auto b = random_vec(k * n, rng);
    std::vector<Real> c1(static_cast<size_t>(nbatch * m * n)), c4(c1.size());
    std::vector<Real> g1(static_cast<size_t>(k * n), Real(0)), g4(g1.size(), Real(0));
    std::vector<Real> g(static_cast<size_t>(nbatch * m * n));
    g = random_vec(static_cast<i64>(g.size()), rng);

    kernels::set_max_threads(1);
    kernels::matmul(a.data(), b.data(), c1.data(), nbatch, 1, m, k, n);
    kernels::matmul_grad_b(a.data(), g.data(), g1.data(), nbatch, 1, m, k, n);
    kernels::set_max_threads(4);
    kernels::matmul(a.data(), b.data(), c4.data(), nbatch, 1, m, k, n);
    kernels::matmul_grad_b(a.data(), g.data(), g4.data(), nbatch, 1, m, k, n);
    kernels::set_max_threads(0);

    for (size_t i = 0; i < c1.size(); ++i) REQUIRE(c1[i] == c4[i]);
    for (size_t i = 0; i < g1.size(); ++i) REQUIRE(g1[i] == g4[i]);
}

TEST_CASE("matmul gradients match a naive accumulation oracle") {
    RngState rng(5);
    const i64 nbatch = 3, bmod = 1;
    const int m = 4, k = 5, n = 6;
    auto a = random_vec(nbatch * m * k, rng);
    auto b = random_vec(bmod * k * n, rng);
    auto g = random_vec(nbatch * m * n, rng);

    std::vector<Real> da(a.size(), Real(0)), db(b.size(), Real(0));
    kernels::matmul_grad_a(g.data(), b.data(), da.data(), nbatch, bmod, m, k, n);
    kernels::matmul_grad_b(a.data(), g.data(), db.data(), nbatch, bmod, m, k, n);

    std::vector<Real> da_ref(a.size(), Real(0)), db_ref(b.size(), Real(0));
    for (i64 t = 0; t < nbatch; ++t)
        for (int i = 0; i < m; ++i)
            for (int kk = 0; kk < k; ++kk)
                for (int j = 0; j < n; ++j) {
                    da_ref[(t * m + i) * k + kk] += g[(t * m + i) * n + j] * b[kk * n + j];
                    db_ref[kk * n + j] += a[(t * m + i) * k + kk] * g[(t * m + i) * n + j];
                }
    for (size_t i = 0; i < da.size(); ++i) CHECK(da[i] == doctest::Approx(da_ref[i]).epsilon(1e-12));
    for (size_t i = 0; i < db.size(); ++i) CHECK(db[i] == doctest::Approx(db_ref[i]).epsilon(1e-12));
}

TEST_CASE("serial gelu and softmax references behave") {
    std::vector<Real> x{-2, -1, 0, 1, 2};
    std::vector<Real> y(5);
    kernels::serial::gelu(x.data(), y.data(), 5);
    CHECK(y[2] == Real(0));
    CHECK(y[4] > Real(1.9));
    CHECK(y[0] > Real(-0.1));

    std::vector<Real> s{0, 0};
    std::vector<Real> out(2);
    kernels::serial::softmax_rows(s.data(), out.data(), 1, 2);
    CHECK(out[0] == doctest::Approx(0.5));
    CHECK(out[1] == doctest::Approx(0.5));
}
