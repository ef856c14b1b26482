#pragma once

#include <optional>
#include <string>
#include <vector>

#include "simrecon/imgcore.hpp"

// Illumination pattern sets for the three SIM modalities, each with a known
// maximum illumination frequency f_ill.

namespace simrecon {

enum class Modality { LinearSIM, NLSIM, LPSIM, Custom };

std::string modality_name(Modality m);
Modality modality_from_name(const std::string& name);

struct PatternSet {
    ImageStack stack;           // one frame per pattern, on the high-res grid
    Modality modality = Modality::Custom;
    double f_ill = 0.0;         // cycles/nm
    std::vector<std::string> params; // "key=value" generator parameters

    int count() const { return int(stack.frames.size()); }
};

// frame(theta, phi)[r] = 1 + m cos(2 pi k0 (r . u(theta)) + phi), angle-major.
// Defaults: 3 angles 60 deg apart, 3 phases 120 deg apart, m = 1.
PatternSet gen_linear_sim(const GridSpec& grid, double k0, double modulation = 1.0,
                          std::optional<std::vector<double>> angles_rad = std::nullopt,
                          std::optional<std::vector<double>> phases_rad = std::nullopt);

// frame = 1 + sum_h a_h cos(h (2 pi k0 (r . u) + phi)), shifted up if needed
// so min >= 0; f_ill = H k0. Defaults: a = {1, 0.5, 0.25}, 5 angles 36 deg
// apart, 5 phases 72 deg apart.
PatternSet gen_nlsim(const GridSpec& grid, double k0,
                     std::optional<std::vector<double>> harmonic_amps = std::nullopt,
                     std::optional<std::vector<double>> angles_rad = std::nullopt,
                     std::optional<std::vector<double>> phases_rad = std::nullopt);

// Square lattice of isotropic Gaussian hotspots translated by 24 offsets
// tiling the unit cell on a 12 x 2 sub-grid. f_ill is measured from the
// hotspot spectrum (where magnitude falls to 1e-2 of DC), not assumed.
PatternSet gen_lpsim_proxy(const GridSpec& grid, double lattice_pitch_nm = 220.0,
                           double hotspot_fwhm_nm = 105.0);

// RAW32 stack whose labels carry "modality=..." and "f_ill_cyc_per_nm=...".
PatternSet load_patterns(const std::string& path);
void save_patterns(const PatternSet& set, const std::string& path);

} // namespace simrecon
