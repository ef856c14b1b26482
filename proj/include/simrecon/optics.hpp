#pragma once

#include <optional>

#include "simrecon/imgcore.hpp"

// Diffraction-limited imaging physics: Airy PSF, OTF, frequency-domain
// convolution, camera binning, noise injection, and the f_sim = f_det + f_ill
// resolution model.

namespace simrecon {

struct OpticalModel {
    double na = 1.4;
    double wavelength_nm = 525.0;
    GridSpec grid; // high-resolution object/reconstruction grid

    double f_det() const { return 2.0 * na / wavelength_nm; } // incoherent cutoff, cycles/nm
    double abbe_limit_nm() const { return wavelength_nm / (2.0 * na); }
    double rayleigh_radius_nm() const { return 0.61 * wavelength_nm / na; }
};

// Throws unless 0 < na < 2, wavelength > 0 and grid Nyquist >= f_det.
void validate_optical_model(const OpticalModel& m);

// Centered odd-sided Airy kernel on the model's grid pitch, unit sum.
struct PsfKernel {
    Raster raster; // raster.grid.pitch_nm carries the kernel pitch
};

PsfKernel airy_psf(const OpticalModel& model, double support_radius = 4.0);

// Analytic incoherent OTF of a circular pupil: (2/pi)(acos(rho) -
// rho sqrt(1-rho^2)) for rho = f/f_det <= 1, zero beyond.
double diffraction_otf(double f_cyc_per_nm, double f_det);

// Full-grid PSF synthesized from the analytic OTF. Its discrete spectrum is
// exactly zero beyond the 2NA/lambda cutoff, which no truncated spatial
// kernel achieves; use where the hard band limit matters.
PsfKernel airy_psf_bandlimited(const OpticalModel& model);

// |DFT| of the zero-padded centered PSF, DC bin normalized to 1.
// Layout matches the unshifted DFT: bin (0,0) is DC.
Raster otf_magnitude(const PsfKernel& psf, const GridSpec& grid);

// Circular convolution via the frequency domain; output size == input size.
Raster convolve_fft(const Raster& image, const PsfKernel& psf);

// Block-mean downsampling (camera pixel integration). Output pitch is
// factor * input pitch.
Raster bin_down(const Raster& image, int factor);

// sigma = max(stack)/snr, i.i.d. per pixel, clamped at 0 from below.
// Per-frame streams are forked as "noise/<index>" so frame order is free.
ImageStack add_gaussian_noise(const ImageStack& stack, double snr, Seed seed);
Raster add_gaussian_noise_frame(const Raster& frame, double sigma, const Rng& frame_rng);

struct ResolutionPrediction {
    double f_sim;       // cycles/nm
    double improvement; // f_sim / f_det
};
ResolutionPrediction predicted_resolution(double f_det, double f_ill);

// Radial frequency of DFT bin (iy, ix) on an h x w grid, cycles/nm.
double bin_frequency(int iy, int ix, int h, int w, double pitch_nm);

} // namespace simrecon
