#include <doctest.h>

#include <cmath>
#include <vector>

#include "jitcast/adam.hpp"
#include "jitcast/autodiff.hpp"
#include "jitcast/errors.hpp"
#include "jitcast/kernels.hpp"
#include "support/gradcheck.hpp"

using namespace jitcast;
using jitcast::testing::check_gradients;
using jitcast::testing::random_tensor;

TEST_CASE("matmul examples") {
    ad::Tape tape;
    auto a = tape.constant(Tensor::from_rows({{1, 2}, {3, 4}}));
    auto eye = tape.constant(Tensor::from_rows({{1, 0}, {0, 1}}));
    CHECK(ad::matmul(a, eye).value() == Tensor::from_rows({{1, 2}, {3, 4}}));

    auto proj = tape.constant(Tensor::from_rows({{1, 0}, {0, 0}}));
    CHECK(ad::matmul(a, proj).value() == Tensor::from_rows({{1, 0}, {3, 0}}));

    auto wide = tape.constant(Tensor::matrix(2, 3, 1.0));
    try {
        ad::matmul(wide, a);
        FAIL("expected shape error");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[2x2]") != std::string::npos);
    }
}

TEST_CASE("softmax examples") {
    auto half = ad::softmax(std::vector<double>{0.0, 0.0});
    CHECK(half[0] == 0.5);
    CHECK(half[1] == 0.5);

    for (double c : {-1e3, -3.5, 0.0, 7.25, 1e3}) {
        auto q = ad::softmax(std::vector<double>{c, c, c, c});
        for (double v : q) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
    }

    auto big = ad::softmax(std::vector<double>{1000.0, 0.0});
    CHECK(std::isfinite(big[0]));
    CHECK(big[0] == doctest::Approx(1.0));
    CHECK(big[1] < 1e-300);

    CHECK_THROWS_AS(ad::softmax(std::vector<double>{0.0, NAN}), NumericError);
    CHECK_THROWS_AS(ad::softmax(std::vector<double>{INFINITY, 0.0}), NumericError);
}

TEST_CASE("softmax sums to one and is shift invariant") {
    for (unsigned seed = 1; seed <= 200; ++seed) {
        const std::size_t n = 1 + seed % 17;
        Tensor x = random_tensor(1, n, seed, -20.0, 20.0);
        const double shift = random_tensor(1, 1, seed + 1000, -50.0, 50.0)[0];
        std::vector<double> xs(x.values().begin(), x.values().end());
        std::vector<double> shifted = xs;
        for (double& v : shifted) v += shift;
        auto p = ad::softmax(xs);
        auto q = ad::softmax(shifted);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(p[i] >= 0.0);
            CHECK(std::abs(p[i] - q[i]) <= 1e-12);
            total += p[i];
        }
        CHECK(std::abs(total - 1.0) <= 1e-12);
    }
}

TEST_CASE("backward examples") {
    {
        ad::Tape tape;
        auto x = tape.variable(Tensor::scalar(3.0));
        auto y = ad::square(x);
        tape.backward(y);
        CHECK(tape.grad(x).item() == 6.0);
    }
    {
        ad::Tape tape;
        auto a = tape.constant(Tensor::row({2.0, 5.0}));
        auto x = tape.variable(Tensor::row({1.0, 1.0}));
        tape.backward(ad::sum(ad::mul(a, x)));
        CHECK(tape.grad(x) == Tensor::row({2.0, 5.0}));
    }
    {
        ad::Tape tape;
        auto c = tape.constant(Tensor::scalar(2.0));
        auto y = ad::square(c);
        CHECK_THROWS_AS(tape.backward(y), std::logic_error);
    }
}

TEST_CASE("two-layer network gradients match finite differences") {
    auto build = [](ad::Tape&, std::span<const ad::Var> v) {
        auto h = ad::relu(ad::add_row(ad::matmul(v[0], v[1]), v[2]));
        auto out = ad::add_row(ad::matmul(h, v[3]), v[4]);
        return ad::mse(out, random_tensor(4, 2, 99));
    };
    for (unsigned seed = 0; seed < 5; ++seed) {
        std::vector<Tensor> inputs{random_tensor(4, 3, 10 + seed), random_tensor(3, 6, 20 + seed),
                                   random_tensor(1, 6, 30 + seed), random_tensor(6, 2, 40 + seed),
                                   random_tensor(1, 2, 50 + seed)};
        auto r = check_gradients(build, inputs, 1e-5, {"x", "w1", "b1", "w2", "b2"});
        INFO(r.worst);
        CHECK(r.max_relative_error < 1e-4);
    }
}

TEST_CASE("every differentiable op matches finite differences") {
    using jitcast::testing::GraphBuilder;
    const Tensor target = random_tensor(3, 4, 7);
    struct Case {
        const char* name;
        GraphBuilder build;
        std::vector<Shape> shapes;
    };
    ad::Mask causal = ad::Mask::causal(4);
    std::vector<Case> cases{
        {"matmul", [&](ad::Tape&, std::span<const ad::Var> v) { return ad::mse(ad::matmul(v[0], v[1]), target); },
         {{3, 5}, {5, 4}}},
        {"matmul_bt", [&](ad::Tape&, std::span<const ad::Var> v) { return ad::mse(ad::matmul_bt(v[0], v[1]), target); },
         {{3, 5}, {4, 5}}},
        {"add", [&](ad::Tape&, std::span<const ad::Var> v) { return ad::mse(v[0] + v[1], target); }, {{3, 4}, {3, 4}}},
        {"sub", [&](ad::Tape&, std::span<const ad::Var> v) { return ad::mse(v[0] - v[1], target); }, {{3, 4}, {3, 4}}},
        {"mul", [&](ad::Tape&, std::span<const ad::Var> v) { return ad::mse(v[0] * v[1], target); }, {{3, 4}, {3, 4}}},
        {"add_row", [&](ad::Tape&, std::span<const ad::Var> v) { return ad::mse(ad::add_row(v[0], v[1]), target); },
         {{3, 4}, {1, 4}}},
        {"scale", [&](ad::Tape&, std::span<const ad::Var> v) { return ad::mse(ad::scale(v[0], -1.7), target); }, {{3, 4}}},
        {"relu", [&](ad::Tape&, std::span<const ad::Var> v) { return ad::mse(ad::relu(v[0]), target); }, {{3, 4}}},
        {"square", [&](ad::Tape&, std::span<const ad::Var> v) { return ad::mse(ad::square(v[0]), target); }, {{3, 4}}},
        {"softmax", [&](ad::Tape&, std::span<const ad::Var> v) { return ad::mse(ad::softmax_rows(v[0]), target); },
         {{3, 4}}},
        {"masked softmax", [&](ad::Tape&, std::span<const ad::Var> v) {
             return ad::sum(ad::square(ad::matmul(ad::softmax_rows(v[0], &causal), v[1])));
         },
         {{4, 4}, {4, 2}}},
        {"layer_norm", [&](ad::Tape&, std::span<const ad::Var> v) {
             return ad::mse(ad::layer_norm(v[0], v[1], v[2], 1e-12), target);
         },
         {{3, 4}, {1, 4}, {1, 4}}},
        {"concat/slice", [&](ad::Tape&, std::span<const ad::Var> v) {
             std::vector<ad::Var> parts{ad::slice_cols(v[0], 1, 2), ad::slice_rows(v[1], 0, 3)};
             return ad::mse(ad::concat_cols(parts), target);
         },
         {{3, 5}, {4, 2}}},
        {"sum/mean", [&](ad::Tape&, std::span<const ad::Var> v) {
             return ad::mul(ad::sum(ad::square(v[0])), ad::mean(v[0]));
         },
         {{3, 4}}},
    };
    unsigned seed = 100;
    for (const auto& c : cases) {
        for (int trial = 0; trial < 4; ++trial) {
            std::vector<Tensor> inputs;
            for (const auto& s : c.shapes) inputs.push_back(random_tensor(s[0], s[1], ++seed, -2.0, 2.0));
            auto r = check_gradients(c.build, inputs);
            INFO(c.name << ": " << r.worst);
            CHECK(r.max_relative_error < 1e-4);
        }
    }
}

TEST_CASE("gradients accumulate across shared uses") {
    for (unsigned seed = 1; seed <= 20; ++seed) {
        const Tensor xv = random_tensor(2, 3, seed);
        const Tensor av = random_tensor(3, 3, seed + 50);
        const Tensor bv = random_tensor(3, 3, seed + 90);

        ad::Tape branched;
        auto x = branched.variable(xv);
        auto a = branched.constant(av);
        auto b = branched.constant(bv);
        branched.backward(ad::sum(ad::matmul(x, a) + ad::matmul(x, b)));

        ad::Tape merged;
        auto x2 = merged.variable(xv);
        Tensor ab = av;
        for (std::size_t i = 0; i < ab.size(); ++i) ab[i] += bv[i];
        auto sum_ab = merged.constant(ab);
        merged.backward(ad::sum(ad::matmul(x2, sum_ab)));

        const Tensor g1 = branched.grad(x);
        const Tensor g2 = merged.grad(x2);
        for (std::size_t i = 0; i < g1.size(); ++i) CHECK(std::abs(g1[i] - g2[i]) <= 1e-12);
    }
}

TEST_CASE("masked softmax gives exact zeros and rejects fully masked rows") {
    ad::Tape tape;
    auto s = tape.constant(random_tensor(3, 3, 5));
    const ad::Mask causal = ad::Mask::causal(3);
    auto w = ad::softmax_rows(s, &causal);
    CHECK(w.value()(0, 1) == 0.0);
    CHECK(w.value()(0, 2) == 0.0);
    CHECK(w.value()(0, 0) == 1.0);
    ad::Mask all(2, 2, true);
    auto s2 = tape.constant(Tensor::matrix(2, 2));
    CHECK_THROWS_AS(ad::softmax_rows(s2, &all), std::invalid_argument);
}

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
    for (unsigned seed = 1; seed <= 6; ++seed) {
        const std::size_t m = 17 + 13 * seed, k = 9 + 7 * seed, n = 5 + 11 * seed;
        const Tensor a = random_tensor(m, k, seed);
        const Tensor b = random_tensor(k, n, seed + 10);
        const Tensor bt = random_tensor(n, k, seed + 20);
        const Tensor g = random_tensor(m, n, seed + 30);

        Tensor c1 = Tensor::matrix(m, n), c2 = Tensor::matrix(m, n);
        kernels::matmul_acc_serial(a.data(), b.data(), c1.data(), m, k, n);
        kernels::matmul_acc_parallel(a.data(), b.data(), c2.data(), m, k, n);
        CHECK(c1 == c2);

        Tensor d1 = Tensor::matrix(m, n), d2 = Tensor::matrix(m, n);
        kernels::matmul_bt_acc_serial(a.data(), bt.data(), d1.data(), m, k, n);
        kernels::matmul_bt_acc_parallel(a.data(), bt.data(), d2.data(), m, k, n);
        CHECK(d1 == d2);

        Tensor e1 = Tensor::matrix(k, n), e2 = Tensor::matrix(k, n);
        kernels::matmul_at_acc_serial(a.data(), g.data(), e1.data(), m, k, n);
        kernels::matmul_at_acc_parallel(a.data(), g.data(), e2.data(), m, k, n);
        CHECK(e1 == e2);

        // Cross-check against a naive triple loop.
        for (std::size_t i = 0; i < m; i += 7)
            for (std::size_t j = 0; j < n; j += 5) {
                double ref = 0.0;
                for (std::size_t p = 0; p < k; ++p) ref += a(i, p) * b(p, j);
                CHECK(c1(i, j) == doctest::Approx(ref).epsilon(1e-12));
            }
    }
}

namespace {

// Scalar Adam written out independently of adam_step.
struct ScalarAdam {
    double m = 0, v = 0;
    int t = 0;
    double step(double p, double g, double lr) {
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        ++t;
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mh = m / (1 - std::pow(b1, t));
        const double vh = v / (1 - std::pow(b2, t));
        return p - lr * mh / (std::sqrt(vh) + eps);
    }
};

ParameterSet scalar_params(double value) {
    ParameterSet ps;
    ps.add("p", Tensor::scalar(value));
    return ps;
}

}  // namespace

TEST_CASE("adam first step, fixed point, and two-step trace") {
    {
        auto ps = scalar_params(0.0);
        auto st = make_adam_state(ps);
        std::vector<Tensor> g{Tensor::scalar(0.5)};
        adam_step(ps, g, st, 0.1);
        CHECK(ps[0].value.item() == doctest::Approx(-0.1).epsilon(1e-7));
        CHECK(st.step_count == 1);
    }
    {
        auto ps = scalar_params(1.25);
        auto st = make_adam_state(ps);
        std::vector<Tensor> g{Tensor::scalar(0.0)};
        adam_step(ps, g, st, 0.1);
        CHECK(ps[0].value.item() == 1.25);
        CHECK(st.step_count == 1);
    }
    {
        auto ps = scalar_params(0.3);
        auto st = make_adam_state(ps);
        ScalarAdam ref;
        double p = 0.3;
        for (double g : {0.5, -0.2}) {
            std::vector<Tensor> grads{Tensor::scalar(g)};
            adam_step(ps, grads, st, 0.01);
            p = ref.step(p, g, 0.01);
            CHECK(std::abs(ps[0].value.item() - p) <= 1e-12);
        }
        CHECK(st.step_count == 2);
    }
}

TEST_CASE("adam rejects NaN gradients without touching state") {
    auto ps = scalar_params(2.0);
    auto st = make_adam_state(ps);
    std::vector<Tensor> g{Tensor::scalar(NAN)};
    CHECK_THROWS_AS(adam_step(ps, g, st, 0.1), NumericError);
    CHECK(ps[0].value.item() == 2.0);
    CHECK(st.step_count == 0);
    CHECK(st.first_moment[0].item() == 0.0);
}
