// Kernel bodies shared by kernels_serial.cpp and kernels_omp.cpp. The
// including TU defines SIMRECON_KERNELS_PAR to 0 or 1. Threading only ever
// splits outermost independent loops; per-element arithmetic and reduction
// order are identical in both variants, so results are bit-identical.

#include "simrecon/diffcore/kernels.hpp"

#include <algorithm>
#include <cmath>

#if SIMRECON_KERNELS_PAR
#define SR_NS par
#define SR_PARALLEL_FOR _Pragma("omp parallel for schedule(static)")
#define SR_PARALLEL_FOR2 _Pragma("omp parallel for collapse(2) schedule(static)")
#else
#define SR_NS serial
#define SR_PARALLEL_FOR
#define SR_PARALLEL_FOR2
#endif

namespace simrecon::diff::kernels::SR_NS {

template <typename T>
void conv2d_forward(const T* x, const T* k, const T* b, T* y, int n, int cin, int cout,
                    int h, int w) {
    const int64_t plane = int64_t(h) * w;
    SR_PARALLEL_FOR2
    for (int in_ = 0; in_ < n; ++in_) {
        for (int co = 0; co < cout; ++co) {
            T* yp = y + (int64_t(in_) * cout + co) * plane;
            const T bias = b[co];
            for (int64_t i = 0; i < plane; ++i) yp[i] = bias;
            for (int ci = 0; ci < cin; ++ci) {
                const T* xp = x + (int64_t(in_) * cin + ci) * plane;
                const T* kp = k + (int64_t(co) * cin + ci) * 9;
                for (int ky = 0; ky < 3; ++ky) {
                    const int dy = ky - 1;
                    const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
                    for (int kx = 0; kx < 3; ++kx) {
                        const int dx = kx - 1;
                        const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
                        const T wgt = kp[ky * 3 + kx];
                        for (int yy = y0; yy < y1; ++yy) {
                            T* yrow = yp + int64_t(yy) * w;
                            const T* xrow = xp + int64_t(yy + dy) * w + dx;
#pragma omp simd
                            for (int xx = x0; xx < x1; ++xx) yrow[xx] += wgt * xrow[xx];
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void conv2d_backward_input(const T* dy, const T* k, T* dx, int n, int cin, int cout,
                           int h, int w) {
    const int64_t plane = int64_t(h) * w;
    SR_PARALLEL_FOR2
    for (int in_ = 0; in_ < n; ++in_) {
        for (int ci = 0; ci < cin; ++ci) {
            T* dxp = dx + (int64_t(in_) * cin + ci) * plane;
            for (int co = 0; co < cout; ++co) {
                const T* dyp = dy + (int64_t(in_) * cout + co) * plane;
                const T* kp = k + (int64_t(co) * cin + ci) * 9;
                for (int ky = 0; ky < 3; ++ky) {
                    const int dyoff = ky - 1;
                    const int y0 = std::max(0, dyoff), y1 = std::min(h, h + dyoff);
                    for (int kx = 0; kx < 3; ++kx) {
                        const int dxoff = kx - 1;
                        const int x0 = std::max(0, dxoff), x1 = std::min(w, w + dxoff);
                        const T wgt = kp[ky * 3 + kx];
                        for (int yy = y0; yy < y1; ++yy) {
                            T* dxrow = dxp + int64_t(yy) * w;
                            const T* dyrow = dyp + int64_t(yy - dyoff) * w - dxoff;
#pragma omp simd
                            for (int xx = x0; xx < x1; ++xx) dxrow[xx] += wgt * dyrow[xx];
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void conv2d_backward_kernel(const T* x, const T* dy, T* dk, int n, int cin, int cout,
                            int h, int w) {
    const int64_t plane = int64_t(h) * w;
    SR_PARALLEL_FOR
    for (int co = 0; co < cout; ++co) {
        for (int ci = 0; ci < cin; ++ci) {
            T* dkp = dk + (int64_t(co) * cin + ci) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                const int dyoff = ky - 1;
                for (int kx = 0; kx < 3; ++kx) {
                    const int dxoff = kx - 1;
                    const int x0 = std::max(0, -dxoff), x1 = std::min(w, w - dxoff);
                    double acc = 0.0;
                    for (int in_ = 0; in_ < n; ++in_) {
                        const T* dyp = dy + (int64_t(in_) * cout + co) * plane;
                        const T* xp = x + (int64_t(in_) * cin + ci) * plane;
                        const int y0 = std::max(0, -dyoff), y1 = std::min(h, h - dyoff);
                        for (int yy = y0; yy < y1; ++yy) {
                            const T* dyrow = dyp + int64_t(yy) * w;
                            const T* xrow = xp + int64_t(yy + dyoff) * w + dxoff;
                            T rowacc = T(0);
#pragma omp simd reduction(+ : rowacc)
                            for (int xx = x0; xx < x1; ++xx) rowacc += dyrow[xx] * xrow[xx];
                            acc += double(rowacc);
                        }
                    }
                    dkp[ky * 3 + kx] += T(acc);
                }
            }
        }
    }
}

template <typename T>
void conv2d_backward_bias(const T* dy, T* db, int n, int cout, int h, int w) {
    const int64_t plane = int64_t(h) * w;
    SR_PARALLEL_FOR
    for (int co = 0; co < cout; ++co) {
        double acc = 0.0;
        for (int in_ = 0; in_ < n; ++in_) {
            const T* dyp = dy + (int64_t(in_) * cout + co) * plane;
            for (int yy = 0; yy < h; ++yy) {
                T rowacc = T(0);
#pragma omp simd reduction(+ : rowacc)
                for (int xx = 0; xx < w; ++xx) rowacc += dyp[int64_t(yy) * w + xx];
                acc += double(rowacc);
            }
        }
        db[co] += T(acc);
    }
}

template <typename T>
void relu_forward(const T* x, T* y, int64_t count) {
    SR_PARALLEL_FOR
    for (int64_t i = 0; i < count; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(const T* x, const T* dy, T* dx, int64_t count) {
    SR_PARALLEL_FOR
    for (int64_t i = 0; i < count; ++i)
        if (x[i] > T(0)) dx[i] += dy[i];
}

template <typename T>
void add_forward(const T* a, const T* b, T* y, int64_t count) {
    SR_PARALLEL_FOR
    for (int64_t i = 0; i < count; ++i) y[i] = a[i] + b[i];
}

template <typename T>
void accumulate(const T* dy, T* da, int64_t count) {
    SR_PARALLEL_FOR
    for (int64_t i = 0; i < count; ++i) da[i] += dy[i];
}

template <typename T>
void mul_forward(const T* a, const T* b, T* y, int64_t count) {
    SR_PARALLEL_FOR
    for (int64_t i = 0; i < count; ++i) y[i] = a[i] * b[i];
}

template <typename T>
void mul_backward(const T* dy, const T* other, T* da, int64_t count) {
    SR_PARALLEL_FOR
    for (int64_t i = 0; i < count; ++i) da[i] += dy[i] * other[i];
}

template <typename T>
void maxpool2_forward(const T* x, T* y, int planes, int h, int w) {
    const int oh = h / 2, ow = w / 2;
    SR_PARALLEL_FOR
    for (int p = 0; p < planes; ++p) {
        const T* xp = x + int64_t(p) * h * w;
        T* yp = y + int64_t(p) * oh * ow;
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                T best = xp[int64_t(2 * oy) * w + 2 * ox];
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const T v = xp[int64_t(2 * oy + dy) * w + 2 * ox + dx];
                        if (v > best) best = v;
                    }
                yp[int64_t(oy) * ow + ox] = best;
            }
    }
}

template <typename T>
void maxpool2_backward(const T* x, const T* dy, T* dx, int planes, int h, int w) {
    const int oh = h / 2, ow = w / 2;
    SR_PARALLEL_FOR
    for (int p = 0; p < planes; ++p) {
        const T* xp = x + int64_t(p) * h * w;
        const T* dyp = dy + int64_t(p) * oh * ow;
        T* dxp = dx + int64_t(p) * h * w;
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                // first strict maximum in scan order, matching the forward tie rule
                int by = 0, bx = 0;
                T best = xp[int64_t(2 * oy) * w + 2 * ox];
                for (int dy2 = 0; dy2 < 2; ++dy2)
                    for (int dx2 = 0; dx2 < 2; ++dx2) {
                        const T v = xp[int64_t(2 * oy + dy2) * w + 2 * ox + dx2];
                        if (v > best) {
                            best = v;
                            by = dy2;
                            bx = dx2;
                        }
                    }
                dxp[int64_t(2 * oy + by) * w + 2 * ox + bx] += dyp[int64_t(oy) * ow + ox];
            }
    }
}

template <typename T>
void upsample2_forward(const T* x, T* y, int planes, int h, int w) {
    const int oh = 2 * h, ow = 2 * w;
    const double sy = oh > 1 ? double(h - 1) / (oh - 1) : 0.0;
    const double sx = ow > 1 ? double(w - 1) / (ow - 1) : 0.0;
    SR_PARALLEL_FOR
    for (int p = 0; p < planes; ++p) {
        const T* xp = x + int64_t(p) * h * w;
        T* yp = y + int64_t(p) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
            const double fy = oy * sy;
            const int y0 = std::min(int(fy), h - 1);
            const int y1 = std::min(y0 + 1, h - 1);
            const double ty = fy - y0;
            for (int ox = 0; ox < ow; ++ox) {
                const double fx = ox * sx;
                const int x0 = std::min(int(fx), w - 1);
                const int x1 = std::min(x0 + 1, w - 1);
                const double tx = fx - x0;
                const double top =
                    (1.0 - tx) * double(xp[int64_t(y0) * w + x0]) + tx * double(xp[int64_t(y0) * w + x1]);
                const double bot =
                    (1.0 - tx) * double(xp[int64_t(y1) * w + x0]) + tx * double(xp[int64_t(y1) * w + x1]);
                yp[int64_t(oy) * ow + ox] = T((1.0 - ty) * top + ty * bot);
            }
        }
    }
}

template <typename T>
void upsample2_backward(const T* dy, T* dx, int planes, int h, int w) {
    const int oh = 2 * h, ow = 2 * w;
    const double sy = oh > 1 ? double(h - 1) / (oh - 1) : 0.0;
    const double sx = ow > 1 ? double(w - 1) / (ow - 1) : 0.0;
    // scatter within a plane; planes are independent
    SR_PARALLEL_FOR
    for (int p = 0; p < planes; ++p) {
        const T* dyp = dy + int64_t(p) * oh * ow;
        T* dxp = dx + int64_t(p) * h * w;
        for (int oy = 0; oy < oh; ++oy) {
            const double fy = oy * sy;
            const int y0 = std::min(int(fy), h - 1);
            const int y1 = std::min(y0 + 1, h - 1);
            const double ty = fy - y0;
            for (int ox = 0; ox < ow; ++ox) {
                const double fx = ox * sx;
                const int x0 = std::min(int(fx), w - 1);
                const int x1 = std::min(x0 + 1, w - 1);
                const double tx = fx - x0;
                const double g = double(dyp[int64_t(oy) * ow + ox]);
                dxp[int64_t(y0) * w + x0] += T((1.0 - ty) * (1.0 - tx) * g);
                dxp[int64_t(y0) * w + x1] += T((1.0 - ty) * tx * g);
                dxp[int64_t(y1) * w + x0] += T(ty * (1.0 - tx) * g);
                dxp[int64_t(y1) * w + x1] += T(ty * tx * g);
            }
        }
    }
}

template <typename T>
void blockmean_forward(const T* x, T* y, int planes, int h, int w, int s) {
    const int oh = h / s, ow = w / s;
    const T inv = T(1) / T(s * s);
    SR_PARALLEL_FOR
    for (int p = 0; p < planes; ++p) {
        const T* xp = x + int64_t(p) * h * w;
        T* yp = y + int64_t(p) * oh * ow;
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                T acc = T(0);
                for (int dy = 0; dy < s; ++dy)
                    for (int dx = 0; dx < s; ++dx)
                        acc += xp[int64_t(oy * s + dy) * w + ox * s + dx];
                yp[int64_t(oy) * ow + ox] = acc * inv;
            }
    }
}

template <typename T>
void blockmean_backward(const T* dy, T* dx, int planes, int h, int w, int s) {
    const int oh = h / s, ow = w / s;
    const T inv = T(1) / T(s * s);
    SR_PARALLEL_FOR
    for (int p = 0; p < planes; ++p) {
        const T* dyp = dy + int64_t(p) * oh * ow;
        T* dxp = dx + int64_t(p) * h * w;
        for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx)
                dxp[int64_t(yy) * w + xx] += dyp[int64_t(yy / s) * ow + xx / s] * inv;
    }
}

// Windowed SSIM statistics at one valid position.
template <typename T>
static inline void ssim_stats_at(const T* x, const T* y, int w, int px, int py,
                                 const SsimConsts& sc, double& mx, double& my,
                                 double& sxx, double& syy, double& sxy) {
    const int S = sc.wside;
    mx = my = 0.0;
    double exx = 0.0, eyy = 0.0, exy = 0.0;
    for (int wy = 0; wy < S; ++wy) {
        const T* xrow = x + int64_t(py + wy) * w + px;
        const T* yrow = y + int64_t(py + wy) * w + px;
        const double* wrow = sc.window.data() + size_t(wy) * S;
        for (int wx = 0; wx < S; ++wx) {
            const double wv = wrow[wx];
            const double xv = double(xrow[wx]), yv = double(yrow[wx]);
            mx += wv * xv;
            my += wv * yv;
            exx += wv * xv * xv;
            eyy += wv * yv * yv;
            exy += wv * xv * yv;
        }
    }
    sxx = exx - mx * mx;
    syy = eyy - my * my;
    sxy = exy - mx * my;
}

template <typename T>
double ssim_forward(const T* x, const T* y, int h, int w, const SsimConsts& sc) {
    const int S = sc.wside;
    const int vh = h - S + 1, vw = w - S + 1;
    std::vector<double> map(size_t(vh) * vw);
    SR_PARALLEL_FOR
    for (int py = 0; py < vh; ++py) {
        for (int px = 0; px < vw; ++px) {
            double mx, my, sxx, syy, sxy;
            ssim_stats_at(x, y, w, px, py, sc, mx, my, sxx, syy, sxy);
            const double a1 = 2.0 * mx * my + sc.c1;
            const double b1 = mx * mx + my * my + sc.c1;
            const double a2 = 2.0 * sxy + sc.c2;
            const double b2 = sxx + syy + sc.c2;
            map[size_t(py) * vw + px] = (a1 * a2) / (b1 * b2);
        }
    }
    double total = 0.0; // fixed-order reduction
    for (double v : map) total += v;
    return total / double(map.size());
}

template <typename T>
void ssim_backward(const T* x, const T* y, int h, int w, const SsimConsts& sc,
                   double upstream, T* dx, T* dy_out) {
    const int S = sc.wside;
    const int vh = h - S + 1, vw = w - S + 1;
    const int64_t P = int64_t(vh) * vw;

    // per-position factors of dS/dmu_x, dS/dmu_y, dS/ds_xx(=ds_yy), dS/ds_xy
    const auto np = static_cast<size_t>(P);
    std::vector<double> mxm(np), mym(np), f1(np), g1(np), f2(np), f3(np);
    SR_PARALLEL_FOR
    for (int py = 0; py < vh; ++py) {
        for (int px = 0; px < vw; ++px) {
            double mx, my, sxx, syy, sxy;
            ssim_stats_at(x, y, w, px, py, sc, mx, my, sxx, syy, sxy);
            const double a1 = 2.0 * mx * my + sc.c1;
            const double b1 = mx * mx + my * my + sc.c1;
            const double a2 = 2.0 * sxy + sc.c2;
            const double b2 = sxx + syy + sc.c2;
            const size_t i = size_t(py) * vw + px;
            mxm[i] = mx;
            mym[i] = my;
            f1[i] = 2.0 * my * a2 / (b1 * b2) - 2.0 * mx * a1 * a2 / (b1 * b1 * b2);
            g1[i] = 2.0 * mx * a2 / (b1 * b2) - 2.0 * my * a1 * a2 / (b1 * b1 * b2);
            f2[i] = -a1 * a2 / (b1 * b2 * b2);
            f3[i] = 2.0 * a1 / (b1 * b2);
        }
    }

    const double scale = upstream / double(P);
    SR_PARALLEL_FOR
    for (int qy = 0; qy < h; ++qy) {
        const int py0 = std::max(0, qy - S + 1), py1 = std::min(vh - 1, qy);
        for (int qx = 0; qx < w; ++qx) {
            const int px0 = std::max(0, qx - S + 1), px1 = std::min(vw - 1, qx);
            const double xq = double(x[int64_t(qy) * w + qx]);
            const double yq = double(y[int64_t(qy) * w + qx]);
            double accx = 0.0, accy = 0.0;
            for (int py = py0; py <= py1; ++py) {
                const double* wrow = sc.window.data() + size_t(qy - py) * S;
                const size_t base = size_t(py) * vw;
                for (int px = px0; px <= px1; ++px) {
                    const double wv = wrow[qx - px];
                    const size_t i = base + px;
                    accx += wv * (f1[i] + 2.0 * (xq - mxm[i]) * f2[i] + (yq - mym[i]) * f3[i]);
                    if (dy_out)
                        accy += wv * (g1[i] + 2.0 * (yq - mym[i]) * f2[i] + (xq - mxm[i]) * f3[i]);
                }
            }
            dx[int64_t(qy) * w + qx] += T(scale * accx);
            if (dy_out) dy_out[int64_t(qy) * w + qx] += T(scale * accy);
        }
    }
}

template <typename T>
double tv_forward(const T* x, int planes, int h, int w, double eps) {
    std::vector<double> rows(size_t(planes) * h, 0.0);
    SR_PARALLEL_FOR
    for (int p = 0; p < planes; ++p) {
        const T* xp = x + int64_t(p) * h * w;
        for (int yy = 0; yy < h; ++yy) {
            double acc = 0.0;
            for (int xx = 0; xx < w; ++xx) {
                const double gx = xx + 1 < w ? double(xp[int64_t(yy) * w + xx + 1]) -
                                                   double(xp[int64_t(yy) * w + xx])
                                             : 0.0;
                const double gy = yy + 1 < h ? double(xp[int64_t(yy + 1) * w + xx]) -
                                                   double(xp[int64_t(yy) * w + xx])
                                             : 0.0;
                acc += std::sqrt(gx * gx + gy * gy + eps * eps);
            }
            rows[size_t(p) * h + yy] = acc;
        }
    }
    double total = 0.0;
    for (double v : rows) total += v;
    return total / (double(planes) * h * w);
}

template <typename T>
void tv_backward(const T* x, int planes, int h, int w, double eps, double upstream,
                 T* dx) {
    const double scale = upstream / (double(planes) * h * w);
    SR_PARALLEL_FOR
    for (int p = 0; p < planes; ++p) {
        const T* xp = x + int64_t(p) * h * w;
        T* dxp = dx + int64_t(p) * h * w;
        auto norm_at = [&](int yy, int xx, double& gx, double& gy) {
            gx = xx + 1 < w ? double(xp[int64_t(yy) * w + xx + 1]) -
                                  double(xp[int64_t(yy) * w + xx])
                            : 0.0;
            gy = yy + 1 < h ? double(xp[int64_t(yy + 1) * w + xx]) -
                                  double(xp[int64_t(yy) * w + xx])
                            : 0.0;
            return std::sqrt(gx * gx + gy * gy + eps * eps);
        };
        for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx) {
                double gx, gy, acc = 0.0;
                const double n0 = norm_at(yy, xx, gx, gy);
                acc += -(gx + gy) / n0;
                if (xx > 0) {
                    const double nl = norm_at(yy, xx - 1, gx, gy);
                    acc += gx / nl;
                }
                if (yy > 0) {
                    const double nu = norm_at(yy - 1, xx, gx, gy);
                    acc += gy / nu;
                }
                dxp[int64_t(yy) * w + xx] += T(scale * acc);
            }
    }
}

#define SR_INSTANTIATE(T)                                                                  \
    template void conv2d_forward<T>(const T*, const T*, const T*, T*, int, int, int, int,  \
                                    int);                                                  \
    template void conv2d_backward_input<T>(const T*, const T*, T*, int, int, int, int,     \
                                           int);                                           \
    template void conv2d_backward_kernel<T>(const T*, const T*, T*, int, int, int, int,    \
                                            int);                                          \
    template void conv2d_backward_bias<T>(const T*, T*, int, int, int, int);               \
    template void relu_forward<T>(const T*, T*, int64_t);                                  \
    template void relu_backward<T>(const T*, const T*, T*, int64_t);                       \
    template void add_forward<T>(const T*, const T*, T*, int64_t);                         \
    template void accumulate<T>(const T*, T*, int64_t);                                    \
    template void mul_forward<T>(const T*, const T*, T*, int64_t);                         \
    template void mul_backward<T>(const T*, const T*, T*, int64_t);                        \
    template void maxpool2_forward<T>(const T*, T*, int, int, int);                        \
    template void maxpool2_backward<T>(const T*, const T*, T*, int, int, int);             \
    template void upsample2_forward<T>(const T*, T*, int, int, int);                       \
    template void upsample2_backward<T>(const T*, T*, int, int, int);                      \
    template void blockmean_forward<T>(const T*, T*, int, int, int, int);                  \
    template void blockmean_backward<T>(const T*, T*, int, int, int, int);                 \
    template double ssim_forward<T>(const T*, const T*, int, int, const SsimConsts&);      \
    template void ssim_backward<T>(const T*, const T*, int, int, const SsimConsts&,       \
                                   double, T*, T*);                                        \
    template double tv_forward<T>(const T*, int, int, int, double);                        \
    template void tv_backward<T>(const T*, int, int, int, double, double, T*);

SR_INSTANTIATE(float)
SR_INSTANTIATE(double)

#undef SR_INSTANTIATE

} // namespace simrecon::diff::kernels::SR_NS

#undef SR_NS
#undef SR_PARALLEL_FOR
#undef SR_PARALLEL_FOR2
