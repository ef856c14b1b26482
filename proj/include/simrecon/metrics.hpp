#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "simrecon/forward.hpp"
#include "simrecon/imgcore.hpp"

// Quality metrics (PSNR/SSIM/NRMSE), line-profile resolvability tests and
// spectral-support estimation.

namespace simrecon::metrics {

struct SsimParams {
    int window_side = 11;
    double sigma = 1.5;
    double data_range = 1.0;
};

struct MetricsReport {
    double psnr_db = 0.0; // +inf sentinel when images are identical
    double ssim = 0.0;
    double nrmse = 0.0;
    std::string against;
};

// 10 log10(range^2 / MSE); +inf when MSE == 0.
double psnr(const Raster& x, const Raster& ref, double data_range = 1.0);

// Mean over valid window positions of the standard SSIM index.
double ssim(const Raster& x, const Raster& ref, const SsimParams& params = {});

// ||x - ref||_2 / ||ref||_2.
double nrmse(const Raster& x, const Raster& ref);

MetricsReport compare(const Raster& x, const Raster& ref, const std::string& label,
                      double data_range = 1.0);

// Bilinear samples at `samples` evenly spaced points from p0 to p1
// (pixel coordinates, inclusive endpoints).
std::vector<double> line_profile(const Raster& image, std::pair<double, double> p0,
                                 std::pair<double, double> p1, int samples);

struct ResolvabilityResult {
    bool resolved = false;
    double dip_contrast = 0.0; // (min(peaks) - valley) / min(peaks)
    double peak_separation_px = 0.0;
};

// Profiles perpendicular through both line centers and requires two maxima
// near the true positions with a central dip of at least 20%.
ResolvabilityResult two_line_resolved(const Raster& image, const TwoLineGeometry& geometry);

struct SpectralSupport {
    double cutoff_cyc_per_nm = 0.0;
    double noise_floor = 0.0;
};

// Radially averaged power spectrum; cutoff = largest radial frequency whose
// average exceeds the noise floor (percentile of the outermost 5% annulus)
// by >= 2x.
SpectralSupport spectral_support(const Raster& image, double noise_floor_percentile = 99.0);

double spectral_support_ratio(const Raster& image, const Raster& reference);

} // namespace simrecon::metrics
