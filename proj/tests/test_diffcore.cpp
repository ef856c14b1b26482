#include <doctest.h>

#include <cmath>

#include "simrecon/diffcore/adam.hpp"
#include "simrecon/diffcore/gradcheck.hpp"
#include "simrecon/diffcore/graph.hpp"

using namespace simrecon;
using namespace simrecon::diff;

TEST_CASE("evaluate: relu, identity conv, bin of upsample") {
    Graph<float> g;
    const int x = g.constant(Shape4{1, 1, 1, 2}, "x");
    const int y = g.relu(x);
    Session<float> s(g);
    s.leaf(x).v = {-1.0f, 2.0f};
    s.forward();
    CHECK(s.value(y).v[0] == 0.0f);
    CHECK(s.value(y).v[1] == 2.0f);

    Graph<float> g2;
    const int in = g2.constant(Shape4{1, 1, 4, 4}, "in");
    const int k = g2.constant(Shape4{1, 1, 3, 3}, "k");
    const int b = g2.constant(Shape4{1, 1, 1, 1}, "b");
    const int out = g2.conv2d(in, k, b);
    Session<float> s2(g2);
    Rng rng(Seed{3});
    for (auto& v : s2.leaf(in).v) v = float(rng.gaussian());
    s2.leaf(k).fill(0.0f);
    s2.leaf(k).v[4] = 1.0f; // center tap
    s2.leaf(b).v[0] = 0.0f;
    s2.forward();
    CHECK(s2.value(out).v == s2.value(in).v);

    Graph<float> g3;
    const int c = g3.constant(Shape4{1, 2, 4, 4}, "c");
    const int pipe = g3.block_mean(g3.upsample2(c), 2);
    Session<float> s3(g3);
    s3.leaf(c).fill(0.625f);
    s3.forward();
    for (float v : s3.value(pipe).v) CHECK(v == doctest::Approx(0.625f));
}

TEST_CASE("backward: mean gradient and dead relu") {
    Graph<float> g;
    const int x = g.parameter(Shape4{1, 1, 2, 2}, "x");
    const int loss = g.mean(x);
    Session<float> s(g);
    s.leaf(x).v = {1.0f, 2.0f, 3.0f, 4.0f};
    s.forward();
    s.backward(loss);
    for (float v : s.adjoint(x).v) CHECK(v == doctest::Approx(0.25f));

    Graph<float> g2;
    const int x2 = g2.parameter(Shape4{1, 1, 2, 2}, "x");
    const int loss2 = g2.mean(g2.relu(x2));
    Session<float> s2(g2);
    s2.leaf(x2).v = {-1.0f, -0.5f, -2.0f, -3.0f};
    s2.forward();
    s2.backward(loss2);
    for (float v : s2.adjoint(x2).v) CHECK(v == 0.0f);
}

TEST_CASE("finite differences validate every primitive") {
    for (Primitive p : all_primitives()) {
        CAPTURE(primitive_name(p));
        for (uint64_t seed = 0; seed < 3; ++seed) {
            const double err = grad_check(p, Seed{seed * 31 + 1});
            CAPTURE(seed);
            CHECK(err < 1e-4);
        }
    }
    // linear op: a wide step has zero truncation error, leaving only roundoff
    CHECK(grad_check(Primitive::Add, Seed{5}, 0.5) < 1e-10);
}

TEST_CASE("finite differences validate a random 3-op composition") {
    for (uint64_t seed : {11ull, 22ull, 33ull})
        CHECK(grad_check_composition(Seed{seed}) < 1e-4);
}

TEST_CASE("adam: zero gradient leaves parameters, t increments") {
    Tensor4<double> p(Shape4{1, 1, 2, 2});
    p.v = {1.0, -2.0, 0.5, 3.0};
    const auto before = p.v;
    Tensor4<double> zero(Shape4{1, 1, 2, 2});
    AdamState<double> st;
    std::vector<Tensor4<double>*> params{&p};
    std::vector<const Tensor4<double>*> grads{&zero};
    adam_step(params, grads, st, 1e-3);
    CHECK(st.t == 1);
    CHECK(p.v == before);
}

TEST_CASE("adam matches the hand-evaluated scalar recurrence") {
    // g = 1 at every step, lr = 1e-3: evaluate the textbook update by hand
    const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double x_ref = 0.7, m = 0.0, v = 0.0;
    for (int t = 1; t <= 3; ++t) {
        m = b1 * m + (1 - b1) * 1.0;
        v = b2 * v + (1 - b2) * 1.0;
        const double mhat = m / (1 - std::pow(b1, t));
        const double vhat = v / (1 - std::pow(b2, t));
        x_ref -= lr * mhat / (std::sqrt(vhat) + eps);
    }

    Tensor4<double> p(Shape4{1, 1, 1, 1});
    p.v[0] = 0.7;
    Tensor4<double> g(Shape4{1, 1, 1, 1});
    g.v[0] = 1.0;
    AdamState<double> st;
    std::vector<Tensor4<double>*> params{&p};
    std::vector<const Tensor4<double>*> grads{&g};
    for (int t = 0; t < 3; ++t) adam_step(params, grads, st, lr);
    CHECK(std::abs(p.v[0] - x_ref) < 1e-12);
}

TEST_CASE("adam first step magnitude and lr scale equivariance") {
    auto first_step = [](double lr, double g0) {
        Tensor4<double> p(Shape4{1, 1, 1, 1});
        p.v[0] = 0.0;
        Tensor4<double> g(Shape4{1, 1, 1, 1});
        g.v[0] = g0;
        AdamState<double> st;
        std::vector<Tensor4<double>*> params{&p};
        std::vector<const Tensor4<double>*> grads{&g};
        adam_step(params, grads, st, lr);
        return p.v[0];
    };

    // bias-corrected mhat/sqrt(vhat) = sign(g), so |step| ~= lr
    CHECK(std::abs(first_step(1e-3, 0.5) + 1e-3) < 1e-3 * 1e-6);
    CHECK(std::abs(first_step(1e-3, -2.0) - 1e-3) < 1e-3 * 1e-6);
    CHECK(first_step(2e-3, 0.7) == doctest::Approx(2.0 * first_step(1e-3, 0.7)).epsilon(1e-12));
}

TEST_CASE("adam rejects non-finite gradients with the parameter name") {
    Tensor4<float> p(Shape4{1, 1, 1, 1});
    Tensor4<float> g(Shape4{1, 1, 1, 1});
    g.v[0] = std::numeric_limits<float>::quiet_NaN();
    AdamState<float> st;
    std::vector<Tensor4<float>*> params{&p};
    std::vector<const Tensor4<float>*> grads{&g};
    std::vector<std::string> names{"conv3.kernel"};
    CHECK_THROWS_WITH_AS(adam_step(params, grads, st, 1e-3, names),
                         doctest::Contains("conv3.kernel"), std::runtime_error);
}

TEST_CASE("evaluate and backward are deterministic across repeated calls") {
    Graph<float> g;
    const int x = g.parameter(Shape4{1, 2, 8, 8}, "x");
    const int k = g.parameter(Shape4{3, 2, 3, 3}, "k");
    const int b = g.parameter(Shape4{1, 3, 1, 1}, "b");
    const int loss = g.mean(g.relu(g.conv2d(x, k, b)));

    Session<float> s(g);
    Rng rng(Seed{17});
    for (auto& v : s.leaf(x).v) v = float(rng.gaussian());
    for (auto& v : s.leaf(k).v) v = float(rng.gaussian() * 0.3);
    for (auto& v : s.leaf(b).v) v = float(rng.gaussian() * 0.1);

    s.forward();
    s.backward(loss);
    const auto loss1 = s.value(loss).v[0];
    const auto gx1 = s.adjoint(x).v, gk1 = s.adjoint(k).v;

    s.forward();
    s.backward(loss);
    CHECK(s.value(loss).v[0] == loss1);
    CHECK(s.adjoint(x).v == gx1);
    CHECK(s.adjoint(k).v == gk1);
}

TEST_CASE("graph construction errors name the offending node") {
    Graph<float> g;
    const int a = g.constant(Shape4{1, 1, 4, 4}, "a");
    const int b = g.constant(Shape4{1, 1, 3, 4}, "b");
    CHECK_THROWS_WITH_AS(g.add(a, b), doctest::Contains("add"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(g.maxpool2(b), doctest::Contains("maxpool2"),
                         std::invalid_argument);
    const int k = g.constant(Shape4{2, 2, 3, 3}, "k");
    const int bias = g.constant(Shape4{1, 2, 1, 1}, "bias");
    CHECK_THROWS_WITH_AS(g.conv2d(a, k, bias), doctest::Contains("conv2d"),
                         std::invalid_argument);

    // backward requires a scalar loss
    const int big = g.relu(a);
    Session<float> s(g);
    CHECK_THROWS_AS(s.backward(big), std::invalid_argument);
}

TEST_CASE("leaf binding shape is enforced at evaluation") {
    Graph<float> g;
    const int x = g.constant(Shape4{1, 1, 2, 2}, "x");
    g.relu(x);
    Session<float> s(g);
    s.leaf(x).v.resize(3); // corrupt the binding
    CHECK_THROWS_WITH_AS(s.forward(), doctest::Contains("x"), std::runtime_error);
}
