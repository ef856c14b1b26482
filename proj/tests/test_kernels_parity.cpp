#include <doctest.h>

#include <vector>

#include "simrecon/diffcore/graph.hpp"
#include "simrecon/diffcore/kernels.hpp"
#include "simrecon/imgcore.hpp"

// The OpenMP kernels must be bit-identical to the serial reference: threading
// only ever splits outermost independent loops.

using namespace simrecon;
namespace k = simrecon::diff::kernels;

namespace {

std::vector<float> randvec(size_t n, Rng& rng, double scale = 1.0) {
    std::vector<float> v(n);
    for (auto& x : v) x = float(rng.gaussian() * scale);
    return v;
}

} // namespace

TEST_CASE("conv2d kernels: serial == openmp bitwise") {
    Rng rng(Seed{21});
    const int n = 2, cin = 5, cout = 7, h = 20, w = 24;
    const auto x = randvec(size_t(n) * cin * h * w, rng);
    const auto kk = randvec(size_t(cout) * cin * 9, rng, 0.3);
    const auto b = randvec(size_t(cout), rng, 0.1);
    const auto dy = randvec(size_t(n) * cout * h * w, rng);

    std::vector<float> y1(size_t(n) * cout * h * w), y2 = y1;
    k::serial::conv2d_forward(x.data(), kk.data(), b.data(), y1.data(), n, cin, cout, h, w);
    k::par::conv2d_forward(x.data(), kk.data(), b.data(), y2.data(), n, cin, cout, h, w);
    CHECK(y1 == y2);

    std::vector<float> dx1(x.size(), 0.1f), dx2 = dx1;
    k::serial::conv2d_backward_input(dy.data(), kk.data(), dx1.data(), n, cin, cout, h, w);
    k::par::conv2d_backward_input(dy.data(), kk.data(), dx2.data(), n, cin, cout, h, w);
    CHECK(dx1 == dx2);

    std::vector<float> dk1(kk.size(), 0.2f), dk2 = dk1;
    k::serial::conv2d_backward_kernel(x.data(), dy.data(), dk1.data(), n, cin, cout, h, w);
    k::par::conv2d_backward_kernel(x.data(), dy.data(), dk2.data(), n, cin, cout, h, w);
    CHECK(dk1 == dk2);

    std::vector<float> db1(size_t(cout), 0.0f), db2 = db1;
    k::serial::conv2d_backward_bias(dy.data(), db1.data(), n, cout, h, w);
    k::par::conv2d_backward_bias(dy.data(), db2.data(), n, cout, h, w);
    CHECK(db1 == db2);
}

TEST_CASE("elementwise and pooling kernels: serial == openmp bitwise") {
    Rng rng(Seed{22});
    const int planes = 6, h = 16, w = 18;
    const size_t count = size_t(planes) * h * w;
    const auto a = randvec(count, rng);
    const auto b = randvec(count, rng);
    const auto dy = randvec(count, rng);

    std::vector<float> r1(count), r2(count);
    k::serial::relu_forward(a.data(), r1.data(), int64_t(count));
    k::par::relu_forward(a.data(), r2.data(), int64_t(count));
    CHECK(r1 == r2);

    k::serial::add_forward(a.data(), b.data(), r1.data(), int64_t(count));
    k::par::add_forward(a.data(), b.data(), r2.data(), int64_t(count));
    CHECK(r1 == r2);

    k::serial::mul_forward(a.data(), b.data(), r1.data(), int64_t(count));
    k::par::mul_forward(a.data(), b.data(), r2.data(), int64_t(count));
    CHECK(r1 == r2);

    std::vector<float> p1(count / 4), p2(count / 4);
    k::serial::maxpool2_forward(a.data(), p1.data(), planes, h, w);
    k::par::maxpool2_forward(a.data(), p2.data(), planes, h, w);
    CHECK(p1 == p2);

    std::vector<float> mp1(count, 0.0f), mp2(count, 0.0f);
    k::serial::maxpool2_backward(a.data(), p1.data(), mp1.data(), planes, h, w);
    k::par::maxpool2_backward(a.data(), p1.data(), mp2.data(), planes, h, w);
    CHECK(mp1 == mp2);

    std::vector<float> u1(count * 4), u2(count * 4);
    k::serial::upsample2_forward(a.data(), u1.data(), planes, h, w);
    k::par::upsample2_forward(a.data(), u2.data(), planes, h, w);
    CHECK(u1 == u2);

    std::vector<float> ub1(count, 0.0f), ub2(count, 0.0f);
    k::serial::upsample2_backward(u1.data(), ub1.data(), planes, h, w);
    k::par::upsample2_backward(u1.data(), ub2.data(), planes, h, w);
    CHECK(ub1 == ub2);

    std::vector<float> bm1(count / 4), bm2(count / 4);
    k::serial::blockmean_forward(a.data(), bm1.data(), planes, h, w, 2);
    k::par::blockmean_forward(a.data(), bm2.data(), planes, h, w, 2);
    CHECK(bm1 == bm2);

    std::vector<float> bb1(count, 0.0f), bb2(count, 0.0f);
    k::serial::blockmean_backward(bm1.data(), bb1.data(), planes, h, w, 2);
    k::par::blockmean_backward(bm1.data(), bb2.data(), planes, h, w, 2);
    CHECK(bb1 == bb2);

    (void)dy;
}

TEST_CASE("ssim and tv kernels: serial == openmp bitwise") {
    Rng rng(Seed{23});
    const int h = 32, w = 32;
    std::vector<float> x(size_t(h) * w), y(size_t(h) * w);
    for (auto& v : x) v = float(rng.uniform());
    for (auto& v : y) v = float(rng.uniform());
    const k::SsimConsts sc = k::make_ssim_consts();

    CHECK(k::serial::ssim_forward(x.data(), y.data(), h, w, sc) ==
          k::par::ssim_forward(x.data(), y.data(), h, w, sc));

    std::vector<float> dx1(x.size(), 0.0f), dx2 = dx1, dy1 = dx1, dy2 = dx1;
    k::serial::ssim_backward(x.data(), y.data(), h, w, sc, 0.7, dx1.data(), dy1.data());
    k::par::ssim_backward(x.data(), y.data(), h, w, sc, 0.7, dx2.data(), dy2.data());
    CHECK(dx1 == dx2);
    CHECK(dy1 == dy2);

    CHECK(k::serial::tv_forward(x.data(), 1, h, w, 1e-6) ==
          k::par::tv_forward(x.data(), 1, h, w, 1e-6));
    std::fill(dx1.begin(), dx1.end(), 0.0f);
    std::fill(dx2.begin(), dx2.end(), 0.0f);
    k::serial::tv_backward(x.data(), 1, h, w, 1e-6, 1.3, dx1.data());
    k::par::tv_backward(x.data(), 1, h, w, 1e-6, 1.3, dx2.data());
    CHECK(dx1 == dx2);
}

TEST_CASE("graph results do not depend on the parallel toggle") {
    using namespace simrecon::diff;
    Graph<float> g;
    const int x = g.parameter(Shape4{1, 3, 16, 16}, "x");
    const int kk = g.parameter(Shape4{4, 3, 3, 3}, "k");
    const int b = g.parameter(Shape4{1, 4, 1, 1}, "b");
    const int loss = g.mean(g.relu(g.conv2d(g.upsample2(g.maxpool2(x)), kk, b)));

    Session<float> s(g);
    Rng rng(Seed{24});
    for (auto& v : s.leaf(x).v) v = float(rng.gaussian());
    for (auto& v : s.leaf(kk).v) v = float(rng.gaussian() * 0.2);
    for (auto& v : s.leaf(b).v) v = float(rng.gaussian() * 0.1);

    REQUIRE(k::parallel_enabled());
    s.forward();
    s.backward(loss);
    const float loss_par = s.value(loss).v[0];
    const auto gx_par = s.adjoint(x).v;

    k::set_parallel(false);
    s.forward();
    s.backward(loss);
    k::set_parallel(true);

    CHECK(s.value(loss).v[0] == loss_par);
    CHECK(s.adjoint(x).v == gx_par);
}
