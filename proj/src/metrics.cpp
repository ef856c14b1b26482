#include "simrecon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

#include "simrecon/fft.hpp"

namespace simrecon::metrics {

static void require_same_shape(const Raster& x, const Raster& ref, const char* what) {
    if (x.grid.width != ref.grid.width || x.grid.height != ref.grid.height)
        throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

double psnr(const Raster& x, const Raster& ref, double data_range) {
    require_same_shape(x, ref, "psnr");
    if (!(data_range > 0.0)) throw std::invalid_argument("psnr: data_range must be > 0");
    double mse = 0.0;
    for (size_t i = 0; i < x.v.size(); ++i) {
        const double d = double(x.v[i]) - double(ref.v[i]);
        mse += d * d;
    }
    mse /= double(x.v.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(data_range * data_range / mse);
}

double ssim(const Raster& x, const Raster& ref, const SsimParams& params) {
    require_same_shape(x, ref, "ssim");
    const int S = params.window_side;
    const int h = x.grid.height, w = x.grid.width;
    if (h < S || w < S) throw std::invalid_argument("ssim: image smaller than window");

    // Gaussian window, unit sum.
    std::vector<double> win(size_t(S) * S);
    const int r = S / 2;
    double wsum = 0.0;
    for (int yy = 0; yy < S; ++yy)
        for (int xx = 0; xx < S; ++xx) {
            const double d2 = double(yy - r) * (yy - r) + double(xx - r) * (xx - r);
            win[size_t(yy) * S + xx] = std::exp(-d2 / (2.0 * params.sigma * params.sigma));
            wsum += win[size_t(yy) * S + xx];
        }
    for (double& v : win) v /= wsum;

    const double c1 = std::pow(0.01 * params.data_range, 2);
    const double c2 = std::pow(0.03 * params.data_range, 2);

    const int vh = h - S + 1, vw = w - S + 1;
    double total = 0.0;
    for (int py = 0; py < vh; ++py)
        for (int px = 0; px < vw; ++px) {
            double mx = 0, my = 0, exx = 0, eyy = 0, exy = 0;
            for (int wy = 0; wy < S; ++wy)
                for (int wx = 0; wx < S; ++wx) {
                    const double wv = win[size_t(wy) * S + wx];
                    const double a = x.at(py + wy, px + wx);
                    const double b = ref.at(py + wy, px + wx);
                    mx += wv * a;
                    my += wv * b;
                    exx += wv * a * a;
                    eyy += wv * b * b;
                    exy += wv * a * b;
                }
            const double sxx = exx - mx * mx, syy = eyy - my * my, sxy = exy - mx * my;
            const double num = (2.0 * mx * my + c1) * (2.0 * sxy + c2);
            const double den = (mx * mx + my * my + c1) * (sxx + syy + c2);
            total += num / den;
        }
    return total / (double(vh) * vw);
}

double nrmse(const Raster& x, const Raster& ref) {
    require_same_shape(x, ref, "nrmse");
    double diff2 = 0.0, ref2 = 0.0;
    for (size_t i = 0; i < x.v.size(); ++i) {
        const double d = double(x.v[i]) - double(ref.v[i]);
        diff2 += d * d;
        ref2 += double(ref.v[i]) * double(ref.v[i]);
    }
    if (!(ref2 > 0.0)) throw std::invalid_argument("nrmse: zero reference");
    return std::sqrt(diff2 / ref2);
}

MetricsReport compare(const Raster& x, const Raster& ref, const std::string& label,
                      double data_range) {
    MetricsReport r;
    r.psnr_db = psnr(x, ref, data_range);
    r.ssim = ssim(x, ref, SsimParams{11, 1.5, data_range});
    r.nrmse = nrmse(x, ref);
    r.against = label;
    return r;
}

static double bilinear_at(const Raster& img, double fy, double fx) {
    const int w = img.grid.width, h = img.grid.height;
    const int x0 = std::clamp(int(std::floor(fx)), 0, w - 1);
    const int y0 = std::clamp(int(std::floor(fy)), 0, h - 1);
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double tx = std::clamp(fx - x0, 0.0, 1.0);
    const double ty = std::clamp(fy - y0, 0.0, 1.0);
    const double top = (1 - tx) * img.at(y0, x0) + tx * img.at(y0, x1);
    const double bot = (1 - tx) * img.at(y1, x0) + tx * img.at(y1, x1);
    return (1 - ty) * top + ty * bot;
}

std::vector<double> line_profile(const Raster& image, std::pair<double, double> p0,
                                 std::pair<double, double> p1, int samples) {
    if (samples < 2) throw std::invalid_argument("line_profile: need >= 2 samples");
    auto inside = [&](const std::pair<double, double>& p) {
        return p.first >= 0 && p.first <= image.grid.width - 1 && p.second >= 0 &&
               p.second <= image.grid.height - 1;
    };
    if (!inside(p0) || !inside(p1))
        throw std::invalid_argument("line_profile: endpoint outside image");

    std::vector<double> out(static_cast<size_t>(samples));
    for (int i = 0; i < samples; ++i) {
        const double t = double(i) / (samples - 1);
        const double fx = p0.first + t * (p1.first - p0.first);
        const double fy = p0.second + t * (p1.second - p0.second);
        out[size_t(i)] = bilinear_at(image, fy, fx);
    }
    return out;
}

ResolvabilityResult two_line_resolved(const Raster& image, const TwoLineGeometry& geo) {
    // Profile across the pair through the field center, 4 samples per pixel,
    // extended one separation beyond each line.
    const bool vertical = geo.orientation == Orientation::Vertical;
    const int extent = vertical ? image.grid.width : image.grid.height;
    const double mid = ((vertical ? image.grid.height : image.grid.width) - 1) / 2.0;
    const double sep = double(geo.second_px - geo.first_px);
    const double lo = std::max(0.0, geo.first_px - sep);
    const double hi = std::min(double(extent - 1), geo.second_px + sep);
    const int samples = std::max(32, int((hi - lo) * 4));

    auto point = [&](double c) {
        return vertical ? std::pair<double, double>{c, mid}
                        : std::pair<double, double>{mid, c};
    };
    const std::vector<double> prof = line_profile(image, point(lo), point(hi), samples);

    const double vmin = *std::min_element(prof.begin(), prof.end());
    const double vmax = *std::max_element(prof.begin(), prof.end());
    if (!(vmax > vmin))
        throw std::invalid_argument("two_line_resolved: degenerate (constant) profile");

    // Peak search near each true line position (+- 25% of the separation).
    const double step = (hi - lo) / (samples - 1);
    auto peak_near = [&](double center) {
        const double tol = 0.25 * sep;
        int best = -1;
        for (int i = 0; i < samples; ++i) {
            const double pos = lo + i * step;
            if (std::abs(pos - center) > tol) continue;
            if (best < 0 || prof[size_t(i)] > prof[size_t(best)]) best = i;
        }
        return best;
    };
    const int i1 = peak_near(double(geo.first_px));
    const int i2 = peak_near(double(geo.second_px));

    ResolvabilityResult res;
    if (i1 < 0 || i2 < 0 || i1 >= i2) return res;

    // The found maxima must be local peaks of the window, not edges of the
    // search range riding a single blurred lobe.
    const double p1v = prof[size_t(i1)], p2v = prof[size_t(i2)];
    double valley = p1v;
    for (int i = i1; i <= i2; ++i) valley = std::min(valley, prof[size_t(i)]);
    const double lower_peak = std::min(p1v, p2v);
    if (!(lower_peak > 0.0)) return res;

    res.peak_separation_px = (i2 - i1) * step;
    res.dip_contrast = (lower_peak - valley) / lower_peak;
    const bool two_maxima = valley < p1v && valley < p2v;
    res.resolved = two_maxima && res.dip_contrast >= 0.20;
    return res;
}

SpectralSupport spectral_support(const Raster& image, double noise_floor_percentile) {
    const int h = image.grid.height, w = image.grid.width;
    if (h < 64 || w < 64)
        throw std::invalid_argument("spectral_support: image too small (< 64 px)");
    if (h != w)
        throw std::invalid_argument("spectral_support: image must be square (pad first)");

    auto freq = fft::forward_r2c(h, w, image.v.data());

    // Radial power average up to the axis Nyquist.
    const double f_max = image.grid.nyquist();
    const int nbins = h / 2;
    std::vector<double> power(size_t(nbins), 0.0);
    std::vector<int64_t> counts(size_t(nbins), 0);
    std::vector<double> annulus; // outermost 5% of radii, per-bin powers
    double peak_power = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (y == 0 && x == 0) continue; // skip DC
            const double f = bin_frequency(y, x, h, w, image.grid.pitch_nm);
            const double p = std::norm(freq[size_t(y) * w + x]);
            peak_power = std::max(peak_power, p);
            if (f >= 0.95 * f_max && f <= f_max) annulus.push_back(p);
            if (f > f_max) continue;
            const int bin = std::min(nbins - 1, int(f / f_max * nbins));
            power[size_t(bin)] += p;
            counts[size_t(bin)] += 1;
        }
    for (int i = 0; i < nbins; ++i)
        if (counts[size_t(i)]) power[size_t(i)] /= double(counts[size_t(i)]);

    if (annulus.empty()) throw std::runtime_error("spectral_support: empty noise annulus");
    std::sort(annulus.begin(), annulus.end());
    const double q = std::clamp(noise_floor_percentile / 100.0, 0.0, 1.0);
    double floor = annulus[size_t(std::min(annulus.size() - 1,
                                           size_t(q * double(annulus.size()))))];
    // Numerically-clean images have an effectively zero annulus; keep the
    // floor above roundoff so leakage does not read as signal.
    floor = std::max(floor, 1e-12 * peak_power);

    SpectralSupport out;
    out.noise_floor = floor;
    for (int i = nbins - 1; i >= 0; --i) {
        if (counts[size_t(i)] && power[size_t(i)] >= 2.0 * floor) {
            out.cutoff_cyc_per_nm = (double(i) + 0.5) / nbins * f_max;
            break;
        }
    }
    return out;
}

double spectral_support_ratio(const Raster& image, const Raster& reference) {
    const double a = spectral_support(image).cutoff_cyc_per_nm;
    const double b = spectral_support(reference).cutoff_cyc_per_nm;
    if (!(b > 0.0)) throw std::runtime_error("spectral_support_ratio: empty reference support");
    return a / b;
}

} // namespace simrecon::metrics
