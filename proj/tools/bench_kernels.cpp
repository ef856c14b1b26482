#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "simrecon/diffcore/kernels.hpp"
#include "simrecon/imgcore.hpp"

// Times the serial reference kernels against the OpenMP variants on the
// shapes a reconstruction actually runs (128x128 grid, U-Net widths).

using namespace simrecon;
namespace k = simrecon::diff::kernels;

static double time_of(const std::function<void()>& fn, int reps) {
    fn(); // warm up
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count() / reps;
}

static void report(const char* name, double serial_s, double par_s) {
    std::printf("%-24s %10.3f ms %10.3f ms %8.2fx\n", name, serial_s * 1e3, par_s * 1e3,
                serial_s / par_s);
}

int main() {
    Rng rng(Seed{42});
    const int h = 128, w = 128, cin = 32, cout = 32;

    std::vector<float> x(size_t(cin) * h * w), kr(size_t(cout) * cin * 9), b(cout),
        y(size_t(cout) * h * w), dy(size_t(cout) * h * w), dx(x.size()), dk(kr.size());
    for (auto& v : x) v = float(rng.uniform());
    for (auto& v : kr) v = float(rng.gaussian() * 0.1);
    for (auto& v : b) v = float(rng.gaussian() * 0.01);
    for (auto& v : dy) v = float(rng.gaussian());

    std::printf("%-24s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

    report("conv2d_forward",
           time_of([&] { k::serial::conv2d_forward(x.data(), kr.data(), b.data(), y.data(),
                                                   1, cin, cout, h, w); }, 5),
           time_of([&] { k::par::conv2d_forward(x.data(), kr.data(), b.data(), y.data(),
                                                1, cin, cout, h, w); }, 5));

    report("conv2d_backward_input",
           time_of([&] {
               std::fill(dx.begin(), dx.end(), 0.0f);
               k::serial::conv2d_backward_input(dy.data(), kr.data(), dx.data(), 1, cin,
                                                cout, h, w);
           }, 5),
           time_of([&] {
               std::fill(dx.begin(), dx.end(), 0.0f);
               k::par::conv2d_backward_input(dy.data(), kr.data(), dx.data(), 1, cin, cout,
                                             h, w);
           }, 5));

    report("conv2d_backward_kernel",
           time_of([&] {
               std::fill(dk.begin(), dk.end(), 0.0f);
               k::serial::conv2d_backward_kernel(x.data(), dy.data(), dk.data(), 1, cin,
                                                 cout, h, w);
           }, 5),
           time_of([&] {
               std::fill(dk.begin(), dk.end(), 0.0f);
               k::par::conv2d_backward_kernel(x.data(), dy.data(), dk.data(), 1, cin, cout,
                                              h, w);
           }, 5));

    const int sh = 64, sw = 64;
    std::vector<float> sx(size_t(sh) * sw), sy(size_t(sh) * sw), sdx(sx.size()),
        sdy(sx.size());
    for (auto& v : sx) v = float(rng.uniform());
    for (auto& v : sy) v = float(rng.uniform());
    const k::SsimConsts sc = k::make_ssim_consts();

    report("ssim_forward",
           time_of([&] { (void)k::serial::ssim_forward(sx.data(), sy.data(), sh, sw, sc); },
                   20),
           time_of([&] { (void)k::par::ssim_forward(sx.data(), sy.data(), sh, sw, sc); },
                   20));

    report("ssim_backward",
           time_of([&] {
               std::fill(sdx.begin(), sdx.end(), 0.0f);
               k::serial::ssim_backward(sx.data(), sy.data(), sh, sw, sc, 1.0, sdx.data(),
                                        sdy.data());
           }, 20),
           time_of([&] {
               std::fill(sdx.begin(), sdx.end(), 0.0f);
               k::par::ssim_backward(sx.data(), sy.data(), sh, sw, sc, 1.0, sdx.data(),
                                     sdy.data());
           }, 20));

    std::vector<float> up(size_t(4) * h * w * 4);
    report("upsample2_forward",
           time_of([&] { k::serial::upsample2_forward(x.data(), up.data(), 4, h, w); }, 20),
           time_of([&] { k::par::upsample2_forward(x.data(), up.data(), 4, h, w); }, 20));

    return 0;
}
