#pragma once

#include <optional>
#include <string>

#include "simrecon/optics.hpp"
#include "simrecon/patterns.hpp"

// The acquisition operator (illuminate, blur, bin, noise) and synthetic
// ground-truth phantoms.

namespace simrecon {

struct AcquisitionSpec {
    OpticalModel optics;
    PatternSet patterns;
    int downsample = 2;              // 1, 2 or 4
    std::optional<double> snr;       // disabled when unset
    Seed seed{1234};
    double psf_support_radius = 4.0; // kernel extent in Rayleigh radii
};

void validate_acquisition(const AcquisitionSpec& spec);

struct Phantom {
    Raster image; // values in [0, 1] on the high-res grid
    std::string description;
};

enum class Orientation { Vertical, Horizontal };

// Noiseless single sub-frame: bin_down(convolve(object .* pattern, psf)).
// When spec.snr is set, adds noise with sigma = max(frame)/snr keyed to
// (seed, frame_index).
Raster forward_subframe(const Raster& object, const Raster& pattern,
                        const AcquisitionSpec& spec, int frame_index);

// One sub-frame per pattern, order preserved. Noise sigma is referenced to
// the global max of the noiseless stack.
ImageStack forward_stack(const Raster& object, const AcquisitionSpec& spec);

// Gaussian blur (sigma in high-res pixels, 0 = none) then rescale to [0, 1].
Phantom prepare_ground_truth(const Raster& image, double smooth_sigma_px = 1.0);

Phantom gen_two_line_phantom(const GridSpec& grid, double separation_nm,
                             int line_width_px = 2,
                             Orientation orientation = Orientation::Vertical);
Phantom gen_filament_phantom(const GridSpec& grid, int count, double curvature, Seed seed);
Phantom gen_dot_phantom(const GridSpec& grid, int count, double radius_px, Seed seed);
Phantom gen_siemens_star(const GridSpec& grid, int spokes);

// Rounded pixel geometry of the two-line phantom, used by resolvability checks.
struct TwoLineGeometry {
    Orientation orientation;
    int first_px;      // line-center coordinate across the pair
    int second_px;
    double separation_nm;
};
TwoLineGeometry two_line_geometry(const GridSpec& grid, double separation_nm,
                                  Orientation orientation = Orientation::Vertical);

struct Simulation {
    ImageStack subframes;  // with noise if enabled
    Raster widefield;      // uniform-pattern reference at the same noise level
    Raster ground_truth;   // phantom on the high-res grid
    double noise_sigma = 0.0;
};

Simulation simulate_acquisition(const Phantom& phantom, const AcquisitionSpec& spec);

// Writes subframes/widefield/ground_truth/patterns RAW32 pairs plus
// manifest.json into `dir`.
void save_simulation(const Simulation& sim, const AcquisitionSpec& spec,
                     const std::string& dir);

} // namespace simrecon
