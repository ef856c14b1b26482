#pragma once

#include <cstdint>
#include <vector>

// Compute kernels behind the graph executor. Every kernel exists twice with
// identical per-element arithmetic: kernels::serial (reference) and
// kernels::par (OpenMP over the outermost independent loop), so the two
// produce bit-identical results and the parallel variant can be validated
// against the serial one. Backward kernels accumulate (+=) into their
// output so adjoints from multiple consumers combine.

namespace simrecon::diff::kernels {

struct SsimConsts {
    int wside = 11;
    std::vector<double> window; // wside*wside, unit sum
    double c1 = 0.0;
    double c2 = 0.0;
};

// Gaussian window (sigma in pixels) plus standard C1/C2 from the data range.
SsimConsts make_ssim_consts(int wside = 11, double sigma = 1.5, double data_range = 1.0);

bool parallel_enabled();
void set_parallel(bool on);

#define SIMRECON_DECLARE_KERNELS                                                          \
    /* x:(n,cin,h,w)  k:(cout,cin,3,3)  b:(cout)  y:(n,cout,h,w); zero-pad same */        \
    template <typename T>                                                                 \
    void conv2d_forward(const T* x, const T* k, const T* b, T* y, int n, int cin,         \
                        int cout, int h, int w);                                          \
    template <typename T>                                                                 \
    void conv2d_backward_input(const T* dy, const T* k, T* dx, int n, int cin, int cout,  \
                               int h, int w);                                             \
    template <typename T>                                                                 \
    void conv2d_backward_kernel(const T* x, const T* dy, T* dk, int n, int cin, int cout, \
                                int h, int w);                                            \
    template <typename T>                                                                 \
    void conv2d_backward_bias(const T* dy, T* db, int n, int cout, int h, int w);         \
                                                                                          \
    template <typename T> void relu_forward(const T* x, T* y, int64_t count);             \
    template <typename T>                                                                 \
    void relu_backward(const T* x, const T* dy, T* dx, int64_t count);                    \
    template <typename T>                                                                 \
    void add_forward(const T* a, const T* b, T* y, int64_t count);                        \
    template <typename T> void accumulate(const T* dy, T* da, int64_t count);             \
    template <typename T>                                                                 \
    void mul_forward(const T* a, const T* b, T* y, int64_t count);                        \
    template <typename T>                                                                 \
    void mul_backward(const T* dy, const T* other, T* da, int64_t count);                 \
                                                                                          \
    /* 2x2 stride-2 max pool; ties resolve to the first sample in scan order */           \
    template <typename T> void maxpool2_forward(const T* x, T* y, int planes, int h, int w); \
    template <typename T>                                                                 \
    void maxpool2_backward(const T* x, const T* dy, T* dx, int planes, int h, int w);     \
                                                                                          \
    /* corner-aligned bilinear x2 */                                                      \
    template <typename T> void upsample2_forward(const T* x, T* y, int planes, int h, int w); \
    template <typename T>                                                                 \
    void upsample2_backward(const T* dy, T* dx, int planes, int h, int w);                \
                                                                                          \
    template <typename T>                                                                 \
    void blockmean_forward(const T* x, T* y, int planes, int h, int w, int s);            \
    template <typename T>                                                                 \
    void blockmean_backward(const T* dy, T* dx, int planes, int h, int w, int s);         \
                                                                                          \
    /* mean over valid window positions of the SSIM index map */                          \
    template <typename T>                                                                 \
    double ssim_forward(const T* x, const T* y, int h, int w, const SsimConsts& sc);      \
    template <typename T>                                                                 \
    void ssim_backward(const T* x, const T* y, int h, int w, const SsimConsts& sc,        \
                       double upstream, T* dx, T* dy_out);                                \
                                                                                          \
    /* mean over pixels of sqrt(gx^2 + gy^2 + eps^2), forward differences */              \
    template <typename T>                                                                 \
    double tv_forward(const T* x, int planes, int h, int w, double eps);                  \
    template <typename T>                                                                 \
    void tv_backward(const T* x, int planes, int h, int w, double eps, double upstream,   \
                     T* dx);

namespace serial {
SIMRECON_DECLARE_KERNELS
}
namespace par {
SIMRECON_DECLARE_KERNELS
}

#undef SIMRECON_DECLARE_KERNELS

} // namespace simrecon::diff::kernels
