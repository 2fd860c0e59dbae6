#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "selm/autodiff.hpp"
#include "selm/rng.hpp"

using namespace selm;
namespace o = selm::ops;

namespace {

Tensor random_tensor(std::vector<int> shape, RngState& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    fill_normal(t, rng, 0.0, scale);
    return t;
}

// Scalar wrapper sum(op(x) * w) with a fixed weight so symmetric errors can't
// cancel out.
GradCheckReport check_unary(const std::function<TensorPtr(const TensorPtr&)>& op, const Tensor& x,
                            RngState& rng) {
    auto probe = op(Tensor::leaf(x, false));
    auto w = Tensor::leaf(random_tensor(probe->shape, rng), false);
    auto f = [&](const TensorPtr& in) { return o::sum_all(o::mul(op(in), w)); };
    return gradient_check(f, x, 1e-5, 1e-4);
}

} // namespace

TEST_CASE("standardize: direct formula values") {
    auto x = Tensor::leaf(Tensor({3}, {1, 2, 3}), false);
    auto y = o::standardize(x, 0, Real(1e-12));
    CHECK(y->data[0] == doctest::Approx(-1.2247448713915890).epsilon(1e-6));
    CHECK(y->data[1] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(y->data[2] == doctest::Approx(1.2247448713915890).epsilon(1e-6));
}

TEST_CASE("standardize: constant input maps to zeros") {
    auto x = Tensor::leaf(Tensor({4}, {7, 7, 7, 7}), false);
    auto y = o::standardize(x, 0, kEps);
    for (Real v : y->data) CHECK(v == Real(0));
}

TEST_CASE("standardize: idempotent as eps tends to zero") {
    RngState rng(17);
    auto x = Tensor::leaf(random_tensor({8}, rng), false);
    auto once = o::standardize(x, 0, Real(1e-12));
    auto twice = o::standardize(once, 0, Real(1e-12));
    for (i64 i = 0; i < once->numel(); ++i)
        CHECK(std::abs(once->data[i] - twice->data[i]) < 1e-9);
}

TEST_CASE("standardize: axis errors") {
    auto x = Tensor::leaf(Tensor({2, 2}, {1, 2, 3, 4}), false);
    CHECK_THROWS_AS(o::standardize(x, 2, kEps), std::invalid_argument);
    CHECK_THROWS_AS(o::standardize(x, 0, Real(0)), std::invalid_argument);
}

TEST_CASE("softmax of [0,0] splits evenly, rows sum to one") {
    auto x = Tensor::leaf(Tensor({2}, {0, 0}), false);
    auto y = o::softmax(x, 0);
    CHECK(y->data[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(y->data[1] == doctest::Approx(0.5).epsilon(1e-12));

    RngState rng(3);
    auto z = Tensor::leaf(random_tensor({5, 9}, rng, 3.0), false);
    auto s = o::softmax(z, 1);
    for (int r = 0; r < 5; ++r) {
        Real sum = 0;
        for (int c = 0; c < 9; ++c) sum += s->data[r * 9 + c];
        CHECK(std::abs(sum - Real(1)) < 1e-12);
    }
}

TEST_CASE("sigmoid output stays strictly inside (0,1) for moderate inputs") {
    RngState rng(4);
    auto x = Tensor::leaf(random_tensor({256}, rng, 4.0), false);
    auto y = o::sigmoid(x);
    for (Real v : y->data) {
        CHECK(v > Real(0));
        CHECK(v < Real(1));
    }
}

TEST_CASE("layer_norm with unit gain and zero bias reproduces standardized input") {
    RngState rng(9);
    auto x = Tensor::leaf(random_tensor({3, 7}, rng, 2.0), false);
    auto sx = o::standardize(x, 1, Real(1e-12));
    auto gain = Tensor::leaf(Tensor({7}, Real(1)), false);
    auto bias = Tensor::leaf(Tensor({7}, Real(0)), false);
    auto y = o::layer_norm(sx, gain, bias, 1, Real(1e-12));
    for (i64 i = 0; i < y->numel(); ++i) CHECK(std::abs(y->data[i] - sx->data[i]) < 1e-6);
}

TEST_CASE("recurrent_cell_step: zero weights and zero state give zero state") {
    const int b = 2, in = 3, hid = 4;
    auto x = Tensor::leaf(Tensor({b, in}, Real(0.7)), false);
    auto h = Tensor::leaf(Tensor({b, hid}, Real(0)), false);
    auto c = Tensor::leaf(Tensor({b, hid}, Real(0)), false);
    auto wx = Tensor::leaf(Tensor({in, 4 * hid}, Real(0)), false);
    auto wh = Tensor::leaf(Tensor({hid, 4 * hid}, Real(0)), false);
    auto bb = Tensor::leaf(Tensor({4 * hid}, Real(0)), false);
    auto st = o::recurrent_cell_step(x, h, c, wx, wh, bb);
    for (Real v : st.h->data) CHECK(v == Real(0));
    for (Real v : st.c->data) CHECK(v == Real(0));
}

TEST_CASE("gradient_check: sum of squares has gradient 2x") {
    Tensor x({2}, {1, 2});
    auto f = [](const TensorPtr& in) { return o::sum_all(o::mul(in, in)); };
    auto leaf = Tensor::leaf(x, true);
    auto y = f(leaf);
    backward(y);
    CHECK(leaf->grad[0] == Real(2));
    CHECK(leaf->grad[1] == Real(4));
    auto rep = gradient_check(f, x, 1e-5, 1e-8);
    CHECK(rep.pass);
}

TEST_CASE("gradient_check: sum has all-ones gradient exactly") {
    Tensor x({5}, {3, -1, 2, 0, 9});
    auto leaf = Tensor::leaf(x, true);
    backward(o::sum_all(leaf));
    for (Real g : leaf->grad) CHECK(g == Real(1));
}

TEST_CASE("gradient_check rejects bad inputs") {
    Tensor x({2}, {1, 2});
    auto vec = [](const TensorPtr& in) { return o::mul(in, in); };
    CHECK_THROWS_AS(gradient_check(vec, x, 1e-5, 1e-4), std::invalid_argument);
    auto f = [](const TensorPtr& in) { return o::sum_all(in); };
    CHECK_THROWS_AS(gradient_check(f, x, 1e-2, 1e-4), std::invalid_argument);
    Tensor bad({1}, {std::numeric_limits<Real>::infinity()});
    CHECK_THROWS_AS(gradient_check(f, bad, 1e-5, 1e-4), std::runtime_error);
}

TEST_CASE("every primitive passes gradient_check over 100 seeds") {
    int failures = 0;
    std::string first_failure;
    for (int seed = 0; seed < 100; ++seed) {
        RngState rng(10000 + seed);
        auto dim = [&](int cap = 16) { return static_cast<int>(2 + rng.index(cap - 1)); };
        const int a0 = dim(6), a1 = dim(), a2 = dim(6);

        auto run = [&](const char* name, GradCheckReport rep) {
            if (!rep.pass) {
                ++failures;
                if (first_failure.empty())
                    first_failure = std::string(name) + " seed " + std::to_string(seed) +
                                    " err " + std::to_string(rep.max_rel_err);
            }
        };

        Tensor x2 = random_tensor({a0, a1}, rng);
        Tensor x3 = random_tensor({a0, a1, a2}, rng);
        auto b_full = Tensor::leaf(random_tensor({a0, a1}, rng), false);
        auto b_suffix = Tensor::leaf(random_tensor({a1}, rng), false);

        run("add", check_unary([&](const TensorPtr& t) { return o::add(t, b_full); }, x2, rng));
        run("add.bcast",
            check_unary([&](const TensorPtr& t) { return o::add(t, b_suffix); }, x2, rng));
        run("sub", check_unary([&](const TensorPtr& t) { return o::sub(t, b_suffix); }, x2, rng));
        run("mul", check_unary([&](const TensorPtr& t) { return o::mul(t, b_full); }, x2, rng));
        run("mul.bcast",
            check_unary([&](const TensorPtr& t) { return o::mul(t, b_suffix); }, x2, rng));
        run("scalar", check_unary(
                          [&](const TensorPtr& t) {
                              return o::rsub_scalar(Real(2), o::mul_scalar(o::add_scalar(t, 1), 3));
                          },
                          x2, rng));
        run("exp", check_unary([](const TensorPtr& t) { return o::exp_(t); }, x2, rng));
        run("sigmoid", check_unary([](const TensorPtr& t) { return o::sigmoid(t); }, x2, rng));
        run("tanh", check_unary([](const TensorPtr& t) { return o::tanh_(t); }, x2, rng));
        run("gelu", check_unary([](const TensorPtr& t) { return o::gelu(t); }, x2, rng));
        run("softmax",
            check_unary([](const TensorPtr& t) { return o::softmax(t, 1); }, x2, rng));
        run("standardize",
            check_unary([](const TensorPtr& t) { return o::standardize(t, 1); }, x2, rng));
        run("mean01",
            check_unary([](const TensorPtr& t) { return o::mean(t, {0, 1}); }, x3, rng));
        run("mean1", check_unary([](const TensorPtr& t) { return o::mean(t, {1}); }, x3, rng));
        run("reshape", check_unary(
                           [&](const TensorPtr& t) {
                               return o::reshape(t, {a1, a0});
                           },
                           x2, rng));
        run("transpose",
            check_unary([](const TensorPtr& t) { return o::transpose(t, 0, 2); }, x3, rng));
        run("slice", check_unary(
                         [&](const TensorPtr& t) { return o::slice(t, 1, 1, a1 - 1); }, x2, rng));
        run("clamp",
            check_unary([](const TensorPtr& t) { return o::clamp(t, -10, 10); }, x2, rng));

        {
            auto w = Tensor::leaf(random_tensor({a1, a2}, rng), false);
            run("matmul.lhs",
                check_unary([&](const TensorPtr& t) { return o::matmul(t, w); }, x2, rng));
            Tensor w_rhs = random_tensor({a1, a2}, rng);
            auto lhs = Tensor::leaf(x2, false);
            run("matmul.rhs",
                check_unary([&](const TensorPtr& t) { return o::matmul(lhs, t); }, w_rhs, rng));
        }
        {
            auto other = Tensor::leaf(random_tensor({a0, a1}, rng), false);
            run("concat", check_unary(
                              [&](const TensorPtr& t) { return o::concat(t, other, 1); }, x2, rng));
        }
        {
            auto gain = Tensor::leaf(random_tensor({a1}, rng), false);
            auto bias = Tensor::leaf(random_tensor({a1}, rng), false);
            run("layer_norm.x", check_unary(
                                    [&](const TensorPtr& t) {
                                        return o::layer_norm(t, gain, bias, 1);
                                    },
                                    x2, rng));
            auto xc = Tensor::leaf(x2, false);
            run("layer_norm.gain",
                check_unary([&](const TensorPtr& t) { return o::layer_norm(xc, t, bias, 1); },
                            random_tensor({a1}, rng), rng));
        }
        {
            const int kp = dim(8);
            std::vector<int> idx;
            const int ksel = 2;
            for (int g = 0; g < a0 * ksel; ++g)
                idx.push_back(static_cast<int>(rng.index(kp)));
            run("gather_rows_mean",
                check_unary(
                    [&](const TensorPtr& t) {
                        return o::gather_rows_mean(t, idx, {a0}, ksel);
                    },
                    random_tensor({kp, a1}, rng), rng));
        }
        {
            const int hid = dim(6);
            auto h = Tensor::leaf(random_tensor({a0, hid}, rng), false);
            auto c = Tensor::leaf(random_tensor({a0, hid}, rng), false);
            auto wh = Tensor::leaf(random_tensor({hid, 4 * hid}, rng, 0.3), false);
            auto bb = Tensor::leaf(random_tensor({4 * hid}, rng, 0.3), false);
            Tensor wx = random_tensor({a1, 4 * hid}, rng, 0.3);
            run("lstm.wx", check_unary(
                               [&](const TensorPtr& t) {
                                   auto xc = Tensor::leaf(x2, false);
                                   auto st = o::recurrent_cell_step(xc, h, c, t, wh, bb);
                                   return o::sum_all(o::mul(st.h, st.c));
                               },
                               wx, rng));
        }
    }
    INFO(first_failure);
    CHECK(failures == 0);
}

TEST_CASE("shape errors name the operation and both shapes") {
    auto a = Tensor::leaf(Tensor({2, 3}), false);
    auto b = Tensor::leaf(Tensor({2, 2}), false);
    CHECK_THROWS_WITH_AS(o::add(a, b), "add: incompatible shapes [2,3] and [2,2]",
                         std::invalid_argument);
    CHECK_THROWS_AS(o::matmul(a, b), std::invalid_argument);
    try {
        o::matmul(a, b);
    } catch (const std::invalid_argument& e) {
        std::string msg = e.what();
        CHECK(msg.find("matmul") != std::string::npos);
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[2,2]") != std::string::npos);
    }
}

TEST_CASE("batched matmul broadcasts a shared right-hand side") {
    RngState rng(8);
    auto a = Tensor::leaf(random_tensor({2, 3, 4, 5}, rng), false);
    auto b = Tensor::leaf(random_tensor({3, 5, 6}, rng), false);
    auto c = o::matmul(a, b);
    REQUIRE(c->shape == std::vector<int>{2, 3, 4, 6});
    // spot-check one element against a hand loop
    Real acc = 0;
    const int t = 1 * 3 + 2, i = 3, j = 5;
    for (int k = 0; k < 5; ++k)
        acc += a->data[(t * 4 + i) * 5 + k] * b->data[(2 * 5 + k) * 6 + j];
    CHECK(c->data[(t * 4 + i) * 6 + j] == doctest::Approx(acc).epsilon(1e-12));
}

TEST_CASE("gradients accumulate additively until zeroed") {
    auto x = Tensor::leaf(Tensor({2}, {1, 2}), true);
    backward(o::sum_all(x));
    backward(o::sum_all(x));
    CHECK(x->grad[0] == Real(2));
    x->zero_grad();
    backward(o::sum_all(x));
    CHECK(x->grad[0] == Real(1));
}

TEST_CASE("NoGradGuard suppresses graph construction") {
    auto x = Tensor::leaf(Tensor({2}, {1, 2}), true);
    NoGradGuard ng;
    auto y = o::sum_all(o::mul(x, x));
    CHECK_FALSE(y->requires_grad);
    CHECK_FALSE(y->has_backward());
}
