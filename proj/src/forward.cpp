#include "simrecon/forward.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace simrecon {

void validate_acquisition(const AcquisitionSpec& spec) {
    validate_optical_model(spec.optics);
    if (!(spec.patterns.stack.grid == spec.optics.grid))
        throw std::invalid_argument("acquisition: pattern grid != optics grid");
    if (spec.patterns.count() < 1)
        throw std::invalid_argument("acquisition: empty pattern set");
    if (spec.downsample != 1 && spec.downsample != 2 && spec.downsample != 4)
        throw std::invalid_argument("acquisition: downsample must be 1, 2 or 4");
    if (spec.optics.grid.width % spec.downsample || spec.optics.grid.height % spec.downsample)
        throw std::invalid_argument("acquisition: grid not divisible by downsample");
    if (spec.snr && !(*spec.snr > 0.0))
        throw std::invalid_argument("acquisition: snr must be > 0");
}

static Raster noiseless_subframe(const Raster& object, const Raster& pattern,
                                 const PsfKernel& psf, int downsample) {
    if (!(object.grid == pattern.grid))
        throw std::invalid_argument("forward_subframe: object/pattern grid mismatch");
    Raster illuminated = object;
    for (size_t i = 0; i < illuminated.v.size(); ++i) illuminated.v[i] *= pattern.v[i];
    return bin_down(convolve_fft(illuminated, psf), downsample);
}

Raster forward_subframe(const Raster& object, const Raster& pattern,
                        const AcquisitionSpec& spec, int frame_index) {
    validate_acquisition(spec);
    const PsfKernel psf = airy_psf(spec.optics, spec.psf_support_radius);
    Raster frame = noiseless_subframe(object, pattern, psf, spec.downsample);
    if (spec.snr) {
        float mx = 0.0f;
        for (float v : frame.v) mx = std::max(mx, v);
        if (mx > 0.0f) {
            Rng rng = Rng(spec.seed).fork("noise/" + std::to_string(frame_index));
            frame = add_gaussian_noise_frame(frame, double(mx) / *spec.snr, rng);
        }
    }
    return frame;
}

ImageStack forward_stack(const Raster& object, const AcquisitionSpec& spec) {
    validate_acquisition(spec);
    const PsfKernel psf = airy_psf(spec.optics, spec.psf_support_radius);

    ImageStack stack;
    for (int i = 0; i < spec.patterns.count(); ++i)
        stack.push(noiseless_subframe(object, spec.patterns.stack.frame(i), psf,
                                      spec.downsample));
    if (spec.snr) stack = add_gaussian_noise(stack, *spec.snr, spec.seed);
    require_finite(stack, "forward_stack");
    return stack;
}

Phantom prepare_ground_truth(const Raster& image, double sigma_px) {
    if (sigma_px < 0.0)
        throw std::invalid_argument("prepare_ground_truth: sigma must be >= 0");
    require_finite(image, "prepare_ground_truth");
    for (float v : image.v)
        if (v < 0.0f)
            throw std::invalid_argument("prepare_ground_truth: image must be nonnegative");

    Raster blurred = image;
    if (sigma_px > 0.0) {
        // Separable Gaussian, zero boundary; radius 3 sigma.
        const int radius = std::max(1, int(std::ceil(3.0 * sigma_px)));
        std::vector<double> k(size_t(2 * radius + 1));
        double ksum = 0.0;
        for (int i = -radius; i <= radius; ++i) {
            k[size_t(i + radius)] = std::exp(-0.5 * i * i / (sigma_px * sigma_px));
            ksum += k[size_t(i + radius)];
        }
        for (double& v : k) v /= ksum;

        const int w = image.grid.width, h = image.grid.height;
        Raster tmp(image.grid);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const int xx = x + i;
                    if (xx >= 0 && xx < w) acc += k[size_t(i + radius)] * image.at(y, xx);
                }
                tmp.at(y, x) = float(acc);
            }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const int yy = y + i;
                    if (yy >= 0 && yy < h) acc += k[size_t(i + radius)] * tmp.at(yy, x);
                }
                blurred.at(y, x) = float(acc);
            }
    }

    float mx = 0.0f;
    for (float v : blurred.v) mx = std::max(mx, v);
    if (mx > 0.0f)
        for (float& v : blurred.v) v = v / mx;

    Phantom p;
    p.image = std::move(blurred);
    p.description = "prepared(sigma_px=" + std::to_string(sigma_px) + ")";
    return p;
}

TwoLineGeometry two_line_geometry(const GridSpec& grid, double separation_nm,
                                  Orientation orientation) {
    if (separation_nm < grid.pitch_nm)
        throw std::invalid_argument("two_line: separation below grid pitch");
    const int extent = orientation == Orientation::Vertical ? grid.width : grid.height;
    const int d = int(std::lround(separation_nm / grid.pitch_nm));
    const int first = (extent - d) / 2;
    if (first < extent / 4 || first + d > 3 * extent / 4)
        throw std::invalid_argument("two_line: separation too large for 25% padding");
    return TwoLineGeometry{orientation, first, first + d, separation_nm};
}

Phantom gen_two_line_phantom(const GridSpec& grid, double separation_nm,
                             int line_width_px, Orientation orientation) {
    validate_grid(grid);
    if (line_width_px < 1)
        throw std::invalid_argument("two_line: line width must be >= 1 px");
    const TwoLineGeometry geo = two_line_geometry(grid, separation_nm, orientation);

    Raster img(grid);
    // Lines run along the other axis over the central half of the field.
    const int along = orientation == Orientation::Vertical ? grid.height : grid.width;
    const int a0 = along / 4, a1 = along - along / 4;
    for (int center : {geo.first_px, geo.second_px}) {
        for (int dw = 0; dw < line_width_px; ++dw) {
            const int c = center - line_width_px / 2 + dw;
            for (int a = a0; a < a1; ++a) {
                if (orientation == Orientation::Vertical)
                    img.at(a, c) = 1.0f;
                else
                    img.at(c, a) = 1.0f;
            }
        }
    }

    Phantom p;
    p.image = std::move(img);
    p.description = "two_line(separation_nm=" + std::to_string(separation_nm) + ")";
    return p;
}

Phantom gen_filament_phantom(const GridSpec& grid, int count, double curvature, Seed seed) {
    validate_grid(grid);
    if (count < 1) throw std::invalid_argument("filament phantom: count must be >= 1");

    Raster img(grid);
    Rng root = Rng(seed).fork("filaments");
    const double step = 0.7; // px per walk step

    for (int f = 0; f < count; ++f) {
        Rng rng = root.fork("filament/" + std::to_string(f));
        // Start inside the central 60% so padding stays object-free.
        double x = grid.width * (0.2 + 0.6 * rng.uniform());
        double y = grid.height * (0.2 + 0.6 * rng.uniform());
        double heading = 2.0 * M_PI * rng.uniform();
        const int steps = int(1.2 * std::max(grid.width, grid.height));
        for (int s = 0; s < steps; ++s) {
            heading += curvature * 0.2 * rng.gaussian();
            x += step * std::cos(heading);
            y += step * std::sin(heading);
            if (x < grid.width * 0.1 || x > grid.width * 0.9 || y < grid.height * 0.1 ||
                y > grid.height * 0.9)
                break;
            // Deposit a 2x2 bilinear footprint.
            const int x0 = int(x), y0 = int(y);
            const double tx = x - x0, ty = y - y0;
            for (int dy = 0; dy <= 1; ++dy)
                for (int dx = 0; dx <= 1; ++dx) {
                    const int xx = x0 + dx, yy = y0 + dy;
                    if (xx < 0 || yy < 0 || xx >= grid.width || yy >= grid.height) continue;
                    const double wgt = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty);
                    img.at(yy, xx) = float(std::min(1.0, img.at(yy, xx) + wgt));
                }
        }
    }

    Phantom p;
    p.image = std::move(img);
    p.description = "filaments(count=" + std::to_string(count) + ")";
    return p;
}

Phantom gen_dot_phantom(const GridSpec& grid, int count, double radius_px, Seed seed) {
    validate_grid(grid);
    if (count < 1) throw std::invalid_argument("dot phantom: count must be >= 1");
    if (!(radius_px > 0.0)) throw std::invalid_argument("dot phantom: radius must be > 0");

    Raster img(grid);
    Rng rng = Rng(seed).fork("dots");
    std::vector<std::pair<double, double>> centers;
    int attempts = 0;
    while (int(centers.size()) < count && attempts < 1000 * count) {
        ++attempts;
        const double cx = grid.width * (0.15 + 0.7 * rng.uniform());
        const double cy = grid.height * (0.15 + 0.7 * rng.uniform());
        bool ok = true;
        for (auto& [ox, oy] : centers)
            if (std::hypot(cx - ox, cy - oy) < 4.0 * radius_px) ok = false;
        if (!ok) continue;
        centers.emplace_back(cx, cy);
    }
    if (int(centers.size()) < count)
        throw std::runtime_error("dot phantom: could not place all dots without overlap");

    for (auto& [cx, cy] : centers) {
        const int x0 = std::max(0, int(cx - radius_px - 1));
        const int x1 = std::min(grid.width - 1, int(cx + radius_px + 1));
        const int y0 = std::max(0, int(cy - radius_px - 1));
        const int y1 = std::min(grid.height - 1, int(cy + radius_px + 1));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x)
                if (std::hypot(x - cx, y - cy) <= radius_px) img.at(y, x) = 1.0f;
    }

    Phantom p;
    p.image = std::move(img);
    p.description = "dots(count=" + std::to_string(count) + ")";
    return p;
}

Phantom gen_siemens_star(const GridSpec& grid, int spokes) {
    validate_grid(grid);
    if (spokes < 1) throw std::invalid_argument("siemens star: spokes must be >= 1");

    Raster img(grid);
    const double cx = (grid.width - 1) / 2.0, cy = (grid.height - 1) / 2.0;
    const double r_max = 0.375 * std::min(grid.width, grid.height);
    const double r_min = 2.0;
    for (int y = 0; y < grid.height; ++y)
        for (int x = 0; x < grid.width; ++x) {
            const double r = std::hypot(x - cx, y - cy);
            if (r < r_min || r > r_max) continue;
            const double theta = std::atan2(y - cy, x - cx);
            img.at(y, x) = std::sin(spokes * theta) > 0.0 ? 1.0f : 0.0f;
        }

    Phantom p;
    p.image = std::move(img);
    p.description = "siemens(spokes=" + std::to_string(spokes) + ")";
    return p;
}

Simulation simulate_acquisition(const Phantom& phantom, const AcquisitionSpec& spec) {
    validate_acquisition(spec);
    if (!(phantom.image.grid == spec.optics.grid))
        throw std::invalid_argument("simulate_acquisition: phantom grid != optics grid");

    const PsfKernel psf = airy_psf(spec.optics, spec.psf_support_radius);

    ImageStack noiseless;
    for (int i = 0; i < spec.patterns.count(); ++i)
        noiseless.push(noiseless_subframe(phantom.image, spec.patterns.stack.frame(i), psf,
                                          spec.downsample));
    Raster uniform(spec.optics.grid, 1.0f);
    Raster widefield = noiseless_subframe(phantom.image, uniform, psf, spec.downsample);

    Simulation sim;
    sim.ground_truth = phantom.image;
    if (spec.snr) {
        const double sigma = double(stack_max(noiseless)) / *spec.snr;
        sim.noise_sigma = sigma;
        Rng root(spec.seed);
        sim.subframes = noiseless;
        for (size_t i = 0; i < noiseless.frames.size(); ++i)
            sim.subframes.frames[i] =
                add_gaussian_noise_frame(noiseless.frame(int(i)), sigma,
                                         root.fork("noise/" + std::to_string(i)))
                    .v;
        sim.widefield =
            add_gaussian_noise_frame(widefield, sigma, root.fork("noise/widefield"));
    } else {
        sim.subframes = std::move(noiseless);
        sim.widefield = std::move(widefield);
    }
    require_finite(sim.subframes, "simulate_acquisition");
    return sim;
}

void save_simulation(const Simulation& sim, const AcquisitionSpec& spec,
                     const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    ImageStack sub = sim.subframes;
    sub.labels = {"content=subframes", "modality=" + modality_name(spec.patterns.modality)};
    save_raster(sub, dir + "/subframes");

    ImageStack wf;
    wf.push(sim.widefield);
    wf.labels = {"content=widefield"};
    save_raster(wf, dir + "/widefield");

    ImageStack gt;
    gt.push(sim.ground_truth);
    gt.labels = {"content=ground_truth"};
    save_raster(gt, dir + "/ground_truth");

    save_patterns(spec.patterns, dir + "/patterns");

    nlohmann::json manifest = {
        {"optics",
         {{"na", spec.optics.na},
          {"wavelength_nm", spec.optics.wavelength_nm},
          {"grid",
           {{"width", spec.optics.grid.width},
            {"height", spec.optics.grid.height},
            {"pitch_nm", spec.optics.grid.pitch_nm}}}}},
        {"patterns",
         {{"modality", modality_name(spec.patterns.modality)},
          {"f_ill_cyc_per_nm", spec.patterns.f_ill},
          {"count", spec.patterns.count()}}},
        {"downsample", spec.downsample},
        {"seed", spec.seed.value},
        {"psf_support_radius", spec.psf_support_radius},
        {"noise_sigma", sim.noise_sigma},
    };
    if (spec.snr)
        manifest["snr"] = *spec.snr;
    else
        manifest["snr"] = nullptr;

    std::ofstream out(dir + "/manifest.json", std::ios::trunc);
    if (!out) throw std::runtime_error("save_simulation: cannot write manifest.json");
    out << manifest.dump(2) << "\n";
}

} // namespace simrecon
