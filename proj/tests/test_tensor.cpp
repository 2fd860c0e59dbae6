#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "selm/rng.hpp"
#include "selm/tensor.hpp"

using namespace selm;

TEST_CASE("shape bookkeeping") {
    Tensor t({2, 3, 4});
    CHECK(t.numel() == 24);
    CHECK(t.ndim() == 3);
    CHECK(t.extent(1) == 3);
    CHECK(shape_str(t.shape) == "[2,3,4]");
}

TEST_CASE("data/shape mismatch is rejected") {
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<Real>{1, 2, 3}), std::invalid_argument);
}

TEST_CASE("grad buffer lifecycle") {
    Tensor t({3}, std::vector<Real>{1, 2, 3});
    CHECK(t.grad.empty());
    t.ensure_grad();
    REQUIRE(t.grad.size() == 3);
    t.grad[1] = 5;
    t.zero_grad();
    CHECK(t.grad[1] == Real(0));
}

TEST_CASE("finite checks") {
    Tensor t({2}, std::vector<Real>{1, 2});
    CHECK(all_finite(t));
    t.data[0] = std::numeric_limits<Real>::quiet_NaN();
    CHECK_FALSE(all_finite(t));
    CHECK_THROWS_WITH_AS(check_finite(t, "unit"), "unit: non-finite value encountered",
                         std::runtime_error);
}

TEST_CASE("rng streams are reproducible and seed-sensitive") {
    RngState a(1234), b(1234), c(99);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    bool differs = false;
    RngState a2(1234);
    for (int i = 0; i < 10; ++i) differs |= a2.next_u64() != c.next_u64();
    CHECK(differs);
}

TEST_CASE("rng normal has sane first moments") {
    RngState rng(7);
    double sum = 0, sq = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double v = rng.normal();
        sum += v;
        sq += v * v;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sq / n - 1.0) < 0.02);
}

TEST_CASE("rng index stays in range") {
    RngState rng(3);
    for (int i = 0; i < 1000; ++i) {
        i64 v = rng.index(7);
        CHECK(v >= 0);
        CHECK(v < 7);
    }
}
