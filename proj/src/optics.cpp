#include "simrecon/optics.hpp"

#include <cmath>
#include <stdexcept>

#include "simrecon/fft.hpp"

namespace simrecon {

void validate_optical_model(const OpticalModel& m) {
    if (!(m.na > 0.0 && m.na < 2.0))
        throw std::invalid_argument("optical model: na must be in (0, 2)");
    if (!(m.wavelength_nm > 0.0))
        throw std::invalid_argument("optical model: wavelength must be > 0");
    validate_grid(m.grid);
    if (m.grid.nyquist() < m.f_det())
        throw std::invalid_argument(
            "optical model: grid pitch too coarse, Nyquist below the OTF cutoff 2NA/lambda");
}

PsfKernel airy_psf(const OpticalModel& model, double support_radius) {
    validate_optical_model(model);
    if (!(support_radius > 0.0))
        throw std::invalid_argument("airy_psf: support_radius must be > 0");

    const double pitch = model.grid.pitch_nm;
    const int radius_px = int(std::ceil(support_radius * model.rayleigh_radius_nm() / pitch));
    const int side = 2 * radius_px + 1;

    PsfKernel psf;
    psf.raster = Raster(GridSpec{side, side, pitch});

    // Airy intensity [2 J1(v)/v]^2 with v = 2 pi NA r / lambda; v->0 limit is 1.
    const double k = 2.0 * M_PI * model.na / model.wavelength_nm;
    double sum = 0.0;
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            const double r = pitch * std::hypot(double(y - radius_px), double(x - radius_px));
            const double v = k * r;
            double val = 1.0;
            if (v > 0.0) {
                const double a = 2.0 * std::cyl_bessel_j(1.0, v) / v;
                val = a * a;
            }
            psf.raster.at(y, x) = float(val);
            sum += val;
        }
    }
    for (float& s : psf.raster.v) s = float(double(s) / sum);
    return psf;
}

double diffraction_otf(double f, double f_det) {
    const double rho = f / f_det;
    if (rho >= 1.0) return 0.0;
    return (2.0 / M_PI) * (std::acos(rho) - rho * std::sqrt(1.0 - rho * rho));
}

PsfKernel airy_psf_bandlimited(const OpticalModel& model) {
    validate_optical_model(model);
    const int h = model.grid.height, w = model.grid.width;

    std::vector<std::complex<double>> spectrum(size_t(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            spectrum[size_t(y) * w + x] = diffraction_otf(
                bin_frequency(y, x, h, w, model.grid.pitch_nm), model.f_det());

    std::vector<std::complex<double>> spatial(spectrum.size());
    fft::inverse_c2c(h, w, spectrum.data(), spatial.data());

    // center the wrapped impulse response; unit DC makes the sum exactly 1
    PsfKernel psf;
    psf.raster = Raster(GridSpec{w, h, model.grid.pitch_nm});
    const int cy = h / 2, cx = w / 2;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int sy = (y + cy) % h, sx = (x + cx) % w;
            psf.raster.at(sy, sx) = float(spatial[size_t(y) * w + x].real());
        }
    return psf;
}

Raster otf_magnitude(const PsfKernel& psf, const GridSpec& grid) {
    if (psf.raster.grid.width > grid.width || psf.raster.grid.height > grid.height)
        throw std::invalid_argument("otf_magnitude: psf does not fit the grid");

    std::vector<std::complex<double>> padded(size_t(grid.height) * grid.width, 0.0);
    const int kh = psf.raster.grid.height, kw = psf.raster.grid.width;
    const int cy = kh / 2, cx = kw / 2;
    for (int y = 0; y < kh; ++y)
        for (int x = 0; x < kw; ++x) {
            int py = ((y - cy) % grid.height + grid.height) % grid.height;
            int px = ((x - cx) % grid.width + grid.width) % grid.width;
            padded[size_t(py) * grid.width + px] = double(psf.raster.at(y, x));
        }
    std::vector<std::complex<double>> freq(padded.size());
    fft::forward_c2c(grid.height, grid.width, padded.data(), freq.data());

    Raster out(GridSpec{grid.width, grid.height, grid.pitch_nm});
    const double dc = std::abs(freq[0]);
    if (!(dc > 0.0)) throw std::runtime_error("otf_magnitude: zero DC response");
    for (size_t i = 0; i < freq.size(); ++i) out.v[i] = float(std::abs(freq[i]) / dc);
    return out;
}

Raster convolve_fft(const Raster& image, const PsfKernel& psf) {
    if (std::abs(image.grid.pitch_nm - psf.raster.grid.pitch_nm) >
        1e-9 * image.grid.pitch_nm)
        throw std::invalid_argument("convolve_fft: image/psf pitch mismatch");

    fft::FreqKernel fk(psf.raster, image.grid.height, image.grid.width);
    Raster out(image.grid);
    fk.convolve(image.v.data(), out.v.data());
    return out;
}

Raster bin_down(const Raster& image, int factor) {
    if (factor != 1 && factor != 2 && factor != 4)
        throw std::invalid_argument("bin_down: factor must be 1, 2 or 4");
    if (factor == 1) return image;
    if (image.grid.width % factor || image.grid.height % factor)
        throw std::invalid_argument("bin_down: dimensions not divisible by factor");

    GridSpec og{image.grid.width / factor, image.grid.height / factor,
                image.grid.pitch_nm * factor};
    Raster out(og);
    const float inv = 1.0f / float(factor * factor);
    for (int y = 0; y < og.height; ++y)
        for (int x = 0; x < og.width; ++x) {
            float acc = 0.0f;
            for (int dy = 0; dy < factor; ++dy)
                for (int dx = 0; dx < factor; ++dx)
                    acc += image.at(y * factor + dy, x * factor + dx);
            out.at(y, x) = acc * inv;
        }
    return out;
}

Raster add_gaussian_noise_frame(const Raster& frame, double sigma, const Rng& frame_rng) {
    Rng rng = frame_rng; // local draw state
    Raster out = frame;
    for (float& x : out.v) {
        double noisy = double(x) + sigma * rng.gaussian();
        x = float(std::max(noisy, 0.0));
    }
    return out;
}

ImageStack add_gaussian_noise(const ImageStack& stack, double snr, Seed seed) {
    if (!(snr > 0.0)) throw std::invalid_argument("add_gaussian_noise: snr must be > 0");
    if (std::isinf(snr)) return stack; // noise-disabled sentinel
    require_finite(stack, "add_gaussian_noise");
    const float mx = stack_max(stack);
    if (!(mx > 0.0f)) throw std::invalid_argument("add_gaussian_noise: stack max must be > 0");

    const double sigma = double(mx) / snr;
    Rng root(seed);
    ImageStack out = stack;
    for (size_t i = 0; i < stack.frames.size(); ++i) {
        Rng frame_rng = root.fork("noise/" + std::to_string(i));
        out.frames[i] =
            add_gaussian_noise_frame(stack.frame(int(i)), sigma, frame_rng).v;
    }
    return out;
}

ResolutionPrediction predicted_resolution(double f_det, double f_ill) {
    if (f_det < 0.0 || f_ill < 0.0)
        throw std::invalid_argument("predicted_resolution: frequencies must be >= 0");
    ResolutionPrediction r;
    r.f_sim = f_det + f_ill;
    r.improvement = f_det > 0.0 ? r.f_sim / f_det : 1.0;
    return r;
}

double bin_frequency(int iy, int ix, int h, int w, double pitch_nm) {
    const int fy = iy <= h / 2 ? iy : iy - h;
    const int fx = ix <= w / 2 ? ix : ix - w;
    const double cy = double(fy) / (double(h) * pitch_nm);
    const double cx = double(fx) / (double(w) * pitch_nm);
    return std::hypot(cy, cx);
}

} // namespace simrecon
