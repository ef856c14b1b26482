#include "simrecon/fft.hpp"

#include <map>
#include <mutex>
#include <stdexcept>

#include <fftw3.h>

namespace simrecon::fft {

namespace {

std::mutex plan_mutex;
std::map<std::tuple<int, int, int>, fftw_plan> plan_cache;

fftw_plan get_plan(int h, int w, int sign) {
    std::lock_guard<std::mutex> lock(plan_mutex);
    auto key = std::make_tuple(h, w, sign);
    auto it = plan_cache.find(key);
    if (it != plan_cache.end()) return it->second;

    // UNALIGNED lets one plan serve any caller-provided buffers.
    std::vector<std::complex<double>> tmp(size_t(h) * w);
    fftw_plan p = fftw_plan_dft_2d(
        h, w, reinterpret_cast<fftw_complex*>(tmp.data()),
        reinterpret_cast<fftw_complex*>(tmp.data()), sign,
        FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!p) throw std::runtime_error("fftw plan creation failed");
    plan_cache.emplace(key, p);
    return p;
}

void execute(int h, int w, int sign, const std::complex<double>* in,
             std::complex<double>* out) {
    fftw_plan p = get_plan(h, w, sign);
    // in is not modified for out-of-place c2c transforms
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

} // namespace

void forward_c2c(int h, int w, const std::complex<double>* in, std::complex<double>* out) {
    execute(h, w, FFTW_FORWARD, in, out);
}

void inverse_c2c(int h, int w, const std::complex<double>* in, std::complex<double>* out) {
    execute(h, w, FFTW_BACKWARD, in, out);
    const double norm = 1.0 / (double(h) * double(w));
    for (int64_t i = 0; i < int64_t(h) * w; ++i) out[i] *= norm;
}

std::vector<std::complex<double>> forward_r2c(int h, int w, const float* in) {
    std::vector<std::complex<double>> buf(size_t(h) * w);
    for (int64_t i = 0; i < int64_t(h) * w; ++i) buf[size_t(i)] = double(in[i]);
    std::vector<std::complex<double>> out(buf.size());
    forward_c2c(h, w, buf.data(), out.data());
    return out;
}

FreqKernel::FreqKernel(const Raster& kernel, int grid_h, int grid_w)
    : h_(grid_h), w_(grid_w) {
    const int kh = kernel.grid.height, kw = kernel.grid.width;
    if (kh > grid_h || kw > grid_w)
        throw std::invalid_argument("FreqKernel: kernel does not fit the grid");
    // odd-sided kernels center unambiguously; even sides only as a full-grid
    // impulse response
    if ((kh % 2 == 0 && kh != grid_h) || (kw % 2 == 0 && kw != grid_w))
        throw std::invalid_argument("FreqKernel: kernel side must be odd or span the grid");

    // Zero-pad and rotate so the kernel center lands on (0,0); the DFT then
    // realizes circular convolution about the image origin.
    std::vector<std::complex<double>> padded(size_t(grid_h) * grid_w, 0.0);
    const int cy = kh / 2, cx = kw / 2;
    for (int y = 0; y < kh; ++y) {
        for (int x = 0; x < kw; ++x) {
            int py = ((y - cy) % grid_h + grid_h) % grid_h;
            int px = ((x - cx) % grid_w + grid_w) % grid_w;
            padded[size_t(py) * grid_w + px] = double(kernel.at(y, x));
        }
    }
    spectrum_.resize(padded.size());
    forward_c2c(grid_h, grid_w, padded.data(), spectrum_.data());
}

template <typename T>
void FreqKernel::apply(const T* in, T* out, bool conjugate) const {
    const int64_t n = int64_t(h_) * w_;
    std::vector<std::complex<double>> buf(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) buf[size_t(i)] = double(in[i]);

    std::vector<std::complex<double>> freq(static_cast<size_t>(n));
    forward_c2c(h_, w_, buf.data(), freq.data());
    if (conjugate) {
        for (int64_t i = 0; i < n; ++i) freq[size_t(i)] *= std::conj(spectrum_[size_t(i)]);
    } else {
        for (int64_t i = 0; i < n; ++i) freq[size_t(i)] *= spectrum_[size_t(i)];
    }
    inverse_c2c(h_, w_, freq.data(), buf.data());
    for (int64_t i = 0; i < n; ++i) out[i] = T(buf[size_t(i)].real());
}

void FreqKernel::convolve(const float* in, float* out) const { apply(in, out, false); }
void FreqKernel::convolve(const double* in, double* out) const { apply(in, out, false); }
void FreqKernel::convolve_adjoint(const float* in, float* out) const { apply(in, out, true); }
void FreqKernel::convolve_adjoint(const double* in, double* out) const { apply(in, out, true); }

} // namespace simrecon::fft
