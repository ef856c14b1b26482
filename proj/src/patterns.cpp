#include "simrecon/patterns.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "simrecon/fft.hpp"
#include "simrecon/optics.hpp"

namespace simrecon {

std::string modality_name(Modality m) {
    switch (m) {
        case Modality::LinearSIM: return "linear_sim";
        case Modality::NLSIM: return "nlsim";
        case Modality::LPSIM: return "lpsim";
        case Modality::Custom: return "custom";
    }
    return "custom";
}

Modality modality_from_name(const std::string& name) {
    if (name == "linear_sim" || name == "linear") return Modality::LinearSIM;
    if (name == "nlsim") return Modality::NLSIM;
    if (name == "lpsim") return Modality::LPSIM;
    if (name == "custom") return Modality::Custom;
    throw std::invalid_argument("unknown modality '" + name +
                                "' (valid: linear, nlsim, lpsim, custom)");
}

static std::vector<double> default_angles(int n, double step_rad) {
    std::vector<double> a(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) a[size_t(i)] = i * step_rad;
    return a;
}

PatternSet gen_linear_sim(const GridSpec& grid, double k0, double modulation,
                          std::optional<std::vector<double>> angles,
                          std::optional<std::vector<double>> phases) {
    if (!(modulation > 0.0 && modulation <= 1.0))
        throw std::invalid_argument("gen_linear_sim: modulation must be in (0, 1]");
    return gen_nlsim(grid, k0, std::vector<double>{modulation},
                     angles ? *angles : default_angles(3, M_PI / 3.0),
                     phases ? *phases : default_angles(3, 2.0 * M_PI / 3.0));
}

PatternSet gen_nlsim(const GridSpec& grid, double k0,
                     std::optional<std::vector<double>> amps_opt,
                     std::optional<std::vector<double>> angles_opt,
                     std::optional<std::vector<double>> phases_opt) {
    validate_grid(grid);
    const std::vector<double> amps =
        amps_opt ? *amps_opt : std::vector<double>{1.0, 0.5, 0.25};
    const std::vector<double> angles =
        angles_opt ? *angles_opt : default_angles(5, M_PI / 5.0);
    const std::vector<double> phases =
        phases_opt ? *phases_opt : default_angles(5, 2.0 * M_PI / 5.0);
    if (amps.empty() || angles.empty() || phases.empty())
        throw std::invalid_argument("pattern generator: empty amplitude/angle/phase list");

    const int harmonics = int(amps.size());
    if (!(k0 > 0.0) || harmonics * k0 > grid.nyquist())
        throw std::invalid_argument(
            "pattern generator: highest harmonic frequency above grid Nyquist");

    PatternSet set;
    set.modality = harmonics == 1 ? Modality::LinearSIM : Modality::NLSIM;
    set.f_ill = harmonics * k0;
    set.stack.grid = grid;

    for (double theta : angles) {
        const double ux = std::cos(theta), uy = std::sin(theta);
        for (double phi : phases) {
            Raster frame(grid);
            for (int y = 0; y < grid.height; ++y) {
                const double ry = y * grid.pitch_nm;
                for (int x = 0; x < grid.width; ++x) {
                    const double rx = x * grid.pitch_nm;
                    const double psi = 2.0 * M_PI * k0 * (rx * ux + ry * uy) + phi;
                    double val = 1.0;
                    for (int h = 1; h <= harmonics; ++h)
                        val += amps[size_t(h - 1)] * std::cos(h * psi);
                    frame.at(y, x) = float(val);
                }
            }
            set.stack.push(frame);
        }
    }

    // A common shift keeps every frame nonnegative without breaking the
    // constant phase-sum property.
    float mn = set.stack.frames[0][0];
    for (const auto& f : set.stack.frames)
        for (float v : f) mn = std::min(mn, v);
    if (mn < 0.0f)
        for (auto& f : set.stack.frames)
            for (float& v : f) v -= mn;

    set.params = {"k0_cyc_per_nm=" + std::to_string(k0),
                  "harmonics=" + std::to_string(harmonics),
                  "angles=" + std::to_string(angles.size()),
                  "phases=" + std::to_string(phases.size())};
    return set;
}

// Spectral half-width of a centered Gaussian hotspot: largest radial bin
// frequency whose DFT magnitude still exceeds 1e-2 of DC.
static double measure_hotspot_cutoff(const GridSpec& grid, double sigma_nm) {
    Raster spot(grid);
    const double cy = (grid.height - 1) / 2.0, cx = (grid.width - 1) / 2.0;
    for (int y = 0; y < grid.height; ++y)
        for (int x = 0; x < grid.width; ++x) {
            const double r2 = std::pow((y - cy) * grid.pitch_nm, 2) +
                              std::pow((x - cx) * grid.pitch_nm, 2);
            spot.at(y, x) = float(std::exp(-r2 / (2.0 * sigma_nm * sigma_nm)));
        }
    auto freq = fft::forward_r2c(grid.height, grid.width, spot.v.data());
    const double dc = std::abs(freq[0]);
    double cutoff = 0.0;
    for (int y = 0; y < grid.height; ++y)
        for (int x = 0; x < grid.width; ++x) {
            if (std::abs(freq[size_t(y) * grid.width + x]) >= 1e-2 * dc)
                cutoff = std::max(cutoff, bin_frequency(y, x, grid.height, grid.width,
                                                        grid.pitch_nm));
        }
    return cutoff;
}

PatternSet gen_lpsim_proxy(const GridSpec& grid, double lattice_pitch_nm,
                           double hotspot_fwhm_nm) {
    validate_grid(grid);
    if (hotspot_fwhm_nm < 2.0 * grid.pitch_nm)
        throw std::invalid_argument("gen_lpsim_proxy: hotspot FWHM below grid support");
    if (!(lattice_pitch_nm > 0.0))
        throw std::invalid_argument("gen_lpsim_proxy: lattice pitch must be > 0");

    const double sigma_nm = hotspot_fwhm_nm / (2.0 * std::sqrt(2.0 * std::log(2.0)));

    PatternSet set;
    set.modality = Modality::LPSIM;
    set.stack.grid = grid;
    set.f_ill = measure_hotspot_cutoff(grid, sigma_nm);

    // 24 lateral offsets on a 12 x 2 sub-grid of the unit cell.
    const int nx_shift = 12, ny_shift = 2;
    for (int sy = 0; sy < ny_shift; ++sy) {
        for (int sx = 0; sx < nx_shift; ++sx) {
            const double offx = lattice_pitch_nm * sx / nx_shift;
            const double offy = lattice_pitch_nm * sy / ny_shift;
            Raster frame(grid);
            // Sum Gaussians from all lattice sites within 4 sigma of the field.
            const double margin = 4.0 * sigma_nm;
            const double field_w = grid.width * grid.pitch_nm;
            const double field_h = grid.height * grid.pitch_nm;
            const int i0 = int(std::floor((-margin - offx) / lattice_pitch_nm));
            const int i1 = int(std::ceil((field_w + margin - offx) / lattice_pitch_nm));
            const int j0 = int(std::floor((-margin - offy) / lattice_pitch_nm));
            const int j1 = int(std::ceil((field_h + margin - offy) / lattice_pitch_nm));
            for (int j = j0; j <= j1; ++j) {
                for (int i = i0; i <= i1; ++i) {
                    const double hx = offx + i * lattice_pitch_nm;
                    const double hy = offy + j * lattice_pitch_nm;
                    const int px0 = std::max(0, int((hx - margin) / grid.pitch_nm));
                    const int px1 = std::min(grid.width - 1, int((hx + margin) / grid.pitch_nm));
                    const int py0 = std::max(0, int((hy - margin) / grid.pitch_nm));
                    const int py1 = std::min(grid.height - 1, int((hy + margin) / grid.pitch_nm));
                    for (int y = py0; y <= py1; ++y)
                        for (int x = px0; x <= px1; ++x) {
                            const double r2 = std::pow(x * grid.pitch_nm - hx, 2) +
                                              std::pow(y * grid.pitch_nm - hy, 2);
                            frame.at(y, x) +=
                                float(std::exp(-r2 / (2.0 * sigma_nm * sigma_nm)));
                        }
                }
            }
            set.stack.push(frame);
        }
    }

    set.params = {"lattice_pitch_nm=" + std::to_string(lattice_pitch_nm),
                  "hotspot_fwhm_nm=" + std::to_string(hotspot_fwhm_nm)};
    return set;
}

void save_patterns(const PatternSet& set, const std::string& path) {
    ImageStack stack = set.stack;
    stack.labels.clear();
    stack.labels.push_back("modality=" + modality_name(set.modality));
    stack.labels.push_back("f_ill_cyc_per_nm=" + std::to_string(set.f_ill));
    for (const auto& p : set.params) stack.labels.push_back("param:" + p);
    save_raster(stack, path);
}

PatternSet load_patterns(const std::string& path) {
    ImageStack stack = load_raster(path);

    PatternSet set;
    bool have_modality = false, have_fill = false;
    for (const auto& label : stack.labels) {
        if (label.rfind("modality=", 0) == 0) {
            set.modality = modality_from_name(label.substr(9));
            have_modality = true;
        } else if (label.rfind("f_ill_cyc_per_nm=", 0) == 0) {
            set.f_ill = std::stod(label.substr(17));
            have_fill = true;
        } else if (label.rfind("param:", 0) == 0) {
            set.params.push_back(label.substr(6));
        }
    }
    if (!have_modality)
        throw std::runtime_error("load_patterns: missing 'modality' label in " + path);
    if (!have_fill)
        throw std::runtime_error("load_patterns: missing 'f_ill_cyc_per_nm' label in " + path);

    for (const auto& f : stack.frames)
        for (float v : f)
            if (v < 0.0f)
                throw std::runtime_error("load_patterns: negative pattern sample in " + path);

    set.stack = std::move(stack);
    return set;
}

} // namespace simrecon
