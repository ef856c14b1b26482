#pragma once

#include <complex>
#include <vector>

#include "simrecon/imgcore.hpp"

// Thin FFTW wrapper. All transforms run in double precision with
// FFTW_ESTIMATE plans so results depend only on the build, not on runtime
// measurements. Plan creation is serialized internally.

namespace simrecon::fft {

// Unnormalized forward DFT, row-major h x w.
void forward_c2c(int h, int w, const std::complex<double>* in, std::complex<double>* out);
// Inverse DFT including the 1/(h*w) normalization.
void inverse_c2c(int h, int w, const std::complex<double>* in, std::complex<double>* out);

std::vector<std::complex<double>> forward_r2c(int h, int w, const float* in);

// Frequency-domain kernel for circular convolution on a fixed grid: the DFT
// of the zero-padded kernel with its center sample moved to (0,0). Used both
// by the optics convolution and by the in-graph PSF operator so the two
// paths are numerically identical.
class FreqKernel {
  public:
    FreqKernel() = default;
    // kernel: odd-sided raster, center at (side/2, side/2); must fit the grid.
    FreqKernel(const Raster& kernel, int grid_h, int grid_w);

    void convolve(const float* in, float* out) const;
    void convolve(const double* in, double* out) const;
    // Adjoint of `convolve` (correlation): multiplies by the conjugate spectrum.
    void convolve_adjoint(const float* in, float* out) const;
    void convolve_adjoint(const double* in, double* out) const;

    int height() const { return h_; }
    int width() const { return w_; }

  private:
    template <typename T>
    void apply(const T* in, T* out, bool conjugate) const;
    int h_ = 0, w_ = 0;
    std::vector<std::complex<double>> spectrum_;
};

} // namespace simrecon::fft
