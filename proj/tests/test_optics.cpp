#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "simrecon/optics.hpp"

using namespace simrecon;

namespace {

// test-scale model: kernel stays small but OTF cutoff is well inside Nyquist
OpticalModel test_model(int side = 64, double pitch = 30.0) {
    OpticalModel m;
    m.na = 1.4;
    m.wavelength_nm = 525.0;
    m.grid = GridSpec{side, side, pitch};
    return m;
}

Raster random_raster(const GridSpec& g, Seed seed) {
    Raster r(g);
    Rng rng(seed);
    for (auto& v : r.v) v = float(rng.uniform());
    return r;
}

// brute-force circular convolution with the centered kernel
Raster spatial_convolve(const Raster& image, const Raster& kernel) {
    const int h = image.grid.height, w = image.grid.width;
    const int kh = kernel.grid.height, kw = kernel.grid.width;
    const int cy = kh / 2, cx = kw / 2;
    Raster out(image.grid);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int ky = 0; ky < kh; ++ky)
                for (int kx = 0; kx < kw; ++kx) {
                    const int sy = ((y - (ky - cy)) % h + h) % h;
                    const int sx = ((x - (kx - cx)) % w + w) % w;
                    acc += double(kernel.at(ky, kx)) * image.at(sy, sx);
                }
            out.at(y, x) = float(acc);
        }
    return out;
}

} // namespace

TEST_CASE("optical model invariants") {
    OpticalModel m = test_model();
    validate_optical_model(m);
    CHECK(m.f_det() == doctest::Approx(2.0 * 1.4 / 525.0));
    CHECK(m.abbe_limit_nm() == doctest::Approx(525.0 / 2.8));
    CHECK(m.rayleigh_radius_nm() == doctest::Approx(0.61 * 525.0 / 1.4));

    // grid too coarse: Nyquist below the OTF cutoff
    m.grid.pitch_nm = 120.0;
    CHECK_THROWS_AS(validate_optical_model(m), std::invalid_argument);
    m = test_model();
    m.na = 2.5;
    CHECK_THROWS_AS(validate_optical_model(m), std::invalid_argument);
}

TEST_CASE("airy psf peaks at center, has the right first zero, unit sum") {
    const OpticalModel m = test_model();
    const PsfKernel psf = airy_psf(m);
    const int side = psf.raster.grid.width;
    REQUIRE(side % 2 == 1);
    const int c = side / 2;

    // center sample is the global max
    float mx = -1.0f;
    int arg = -1;
    for (int i = 0; i < side * side; ++i)
        if (psf.raster.v[size_t(i)] > mx) {
            mx = psf.raster.v[size_t(i)];
            arg = i;
        }
    CHECK(arg == c * side + c);

    // first zero along the +x axis within half a pixel of the Rayleigh radius
    int first_min = -1;
    for (int x = c + 1; x < side - 1; ++x) {
        if (psf.raster.at(c, x) < psf.raster.at(c, x + 1)) {
            first_min = x;
            break;
        }
    }
    REQUIRE(first_min > 0);
    const double r_zero = (first_min - c) * m.grid.pitch_nm;
    CHECK(std::abs(r_zero - m.rayleigh_radius_nm()) <= 0.5 * m.grid.pitch_nm + 1e-9);

    double sum = 0.0;
    for (float v : psf.raster.v) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));

    // fine-pitch configuration sums to 1 as well
    OpticalModel fine = test_model(256, 15.0);
    double fsum = 0.0;
    for (float v : airy_psf(fine).raster.v) fsum += v;
    CHECK(fsum == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("otf magnitude: unit DC, zero beyond cutoff, flat for delta") {
    const OpticalModel m = test_model();
    const double f_det = m.f_det();

    // the band-limited kernel carries the analytic cutoff exactly
    const PsfKernel bl = airy_psf_bandlimited(m);
    const Raster otf = otf_magnitude(bl, m.grid);
    CHECK(otf.v[0] == 1.0f); // DC bin, exact after normalization
    int beyond = 0;
    for (int y = 0; y < otf.grid.height; ++y)
        for (int x = 0; x < otf.grid.width; ++x) {
            const double f = bin_frequency(y, x, otf.grid.height, otf.grid.width,
                                           m.grid.pitch_nm);
            if (f <= f_det) continue;
            ++beyond;
            CHECK(otf.at(y, x) < 1e-6f);
        }
    CHECK(beyond > 100);

    // a spatially truncated kernel leaks near the edge; keep it bounded
    const Raster otf_trunc = otf_magnitude(airy_psf(m), m.grid);
    CHECK(otf_trunc.v[0] == 1.0f);
    for (int y = 0; y < otf.grid.height; ++y)
        for (int x = 0; x < otf.grid.width; ++x) {
            const double f = bin_frequency(y, x, otf.grid.height, otf.grid.width,
                                           m.grid.pitch_nm);
            if (f > f_det * 1.05) CHECK(otf_trunc.at(y, x) < 5e-3f);
        }

    PsfKernel delta;
    delta.raster = Raster(GridSpec{1, 1, m.grid.pitch_nm});
    delta.raster.v[0] = 1.0f;
    const Raster flat = otf_magnitude(delta, m.grid);
    for (float v : flat.v) CHECK(v == doctest::Approx(1.0f));
}

TEST_CASE("band-limited psf: unit sum and radial symmetry") {
    const OpticalModel m = test_model();
    const PsfKernel bl = airy_psf_bandlimited(m);
    double sum = 0.0;
    for (float v : bl.raster.v) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

    const int cy = m.grid.height / 2, cx = m.grid.width / 2;
    CHECK(bl.raster.at(cy, cx) ==
          *std::max_element(bl.raster.v.begin(), bl.raster.v.end()));
    for (int d = 1; d < 8; ++d) { // four-fold symmetry of the synthesis
        CHECK(bl.raster.at(cy, cx + d) == doctest::Approx(bl.raster.at(cy, cx - d)));
        CHECK(bl.raster.at(cy + d, cx) == doctest::Approx(bl.raster.at(cy, cx + d)));
    }
}

TEST_CASE("otf is radially non-increasing up to the cutoff") {
    const OpticalModel m = test_model();
    const Raster otf = otf_magnitude(airy_psf(m), m.grid);
    const int nbins = 24;
    std::vector<double> radial(nbins, 0.0);
    std::vector<int> count(nbins, 0);
    for (int y = 0; y < otf.grid.height; ++y)
        for (int x = 0; x < otf.grid.width; ++x) {
            const double f =
                bin_frequency(y, x, otf.grid.height, otf.grid.width, m.grid.pitch_nm);
            if (f >= m.f_det()) continue;
            const int b = int(f / m.f_det() * nbins);
            radial[size_t(b)] += otf.at(y, x);
            count[size_t(b)] += 1;
        }
    double prev = 2.0;
    for (int b = 0; b < nbins; ++b) {
        if (!count[size_t(b)]) continue;
        const double avg = radial[size_t(b)] / count[size_t(b)];
        CHECK(avg <= prev + 1e-3);
        prev = avg;
    }
}

TEST_CASE("convolve_fft: delta identity, DC preservation, spatial oracle") {
    const OpticalModel m = test_model();
    const PsfKernel psf = airy_psf(m, 2.0);

    Raster delta(m.grid);
    delta.at(m.grid.height / 2, m.grid.width / 2) = 1.0f;
    const Raster img = convolve_fft(delta, psf);
    const int side = psf.raster.grid.width, c = side / 2;
    for (int ky = 0; ky < side; ++ky)
        for (int kx = 0; kx < side; ++kx)
            CHECK(img.at(m.grid.height / 2 + ky - c, m.grid.width / 2 + kx - c) ==
                  doctest::Approx(psf.raster.at(ky, kx)).epsilon(1e-5));

    Raster constant(m.grid, 0.8f);
    for (float v : convolve_fft(constant, psf).v)
        CHECK(v == doctest::Approx(0.8f).epsilon(1e-5));

    // 32x32 random image against the double-loop oracle
    OpticalModel small = test_model(32, 30.0);
    const PsfKernel spsf = airy_psf(small, 1.0);
    const Raster x = random_raster(small.grid, Seed{42});
    const Raster fast = convolve_fft(x, spsf);
    const Raster slow = spatial_convolve(x, spsf.raster);
    for (size_t i = 0; i < fast.v.size(); ++i)
        CHECK(std::abs(fast.v[i] - slow.v[i]) < 1e-5);

    Raster wrong_pitch = x;
    wrong_pitch.grid.pitch_nm *= 2.0;
    CHECK_THROWS_AS(convolve_fft(wrong_pitch, spsf), std::invalid_argument);
}

TEST_CASE("convolution is linear and conserves energy") {
    const OpticalModel m = test_model(48, 30.0);
    const PsfKernel psf = airy_psf(m, 1.5);
    const Raster a = random_raster(m.grid, Seed{1});
    const Raster b = random_raster(m.grid, Seed{2});

    Raster combo(m.grid);
    for (size_t i = 0; i < combo.v.size(); ++i) combo.v[i] = 2.0f * a.v[i] + 3.0f * b.v[i];
    const Raster ca = convolve_fft(a, psf), cb = convolve_fft(b, psf),
                 cc = convolve_fft(combo, psf);
    for (size_t i = 0; i < cc.v.size(); ++i) {
        const double want = 2.0 * ca.v[i] + 3.0 * cb.v[i];
        CHECK(cc.v[i] == doctest::Approx(want).epsilon(1e-5));
    }

    double in_sum = 0.0, out_sum = 0.0;
    for (float v : a.v) in_sum += v;
    for (float v : ca.v) out_sum += v;
    CHECK(out_sum == doctest::Approx(in_sum).epsilon(1e-4));
}

TEST_CASE("bin_down block means") {
    Raster r(GridSpec{2, 2, 10.0});
    r.at(0, 0) = 1.0f;
    r.at(0, 1) = 3.0f;
    r.at(1, 0) = 5.0f;
    r.at(1, 1) = 7.0f;
    const Raster b = bin_down(r, 2);
    CHECK(b.grid.width == 1);
    CHECK(b.v[0] == doctest::Approx(4.0f));
    CHECK(b.grid.pitch_nm == doctest::Approx(20.0));

    CHECK(bin_down(r, 1).v == r.v);

    Raster c(GridSpec{8, 8, 10.0}, 0.3f);
    for (float v : bin_down(c, 4).v) CHECK(v == doctest::Approx(0.3f));

    Raster odd(GridSpec{6, 6, 10.0});
    CHECK_THROWS_AS(bin_down(odd, 4), std::invalid_argument);
    CHECK_THROWS_AS(bin_down(odd, 3), std::invalid_argument);

    // mean conservation
    const Raster x = random_raster(GridSpec{16, 16, 10.0}, Seed{3});
    double min = 0.0, mout = 0.0;
    for (float v : x.v) min += v;
    for (float v : bin_down(x, 4).v) mout += v;
    CHECK(mout / 16.0 == doctest::Approx(min / 256.0).epsilon(1e-6));
}

TEST_CASE("gaussian noise: sigma, determinism, sentinel, clamping") {
    ImageStack s;
    s.grid = GridSpec{256, 256, 15.0};
    Raster bright(s.grid, 100.0f); // bright so the zero clamp never triggers
    s.push(bright);

    const ImageStack noisy = add_gaussian_noise(s, 10.0, Seed{5});
    double mean = 0.0, var = 0.0;
    for (size_t i = 0; i < noisy.frames[0].size(); ++i)
        mean += noisy.frames[0][i] - s.frames[0][i];
    mean /= double(noisy.frames[0].size());
    for (size_t i = 0; i < noisy.frames[0].size(); ++i) {
        const double d = noisy.frames[0][i] - s.frames[0][i] - mean;
        var += d * d;
    }
    const double sigma = std::sqrt(var / double(noisy.frames[0].size() - 1));
    CHECK(sigma == doctest::Approx(10.0).epsilon(0.02)); // max/snr = 100/10

    const ImageStack again = add_gaussian_noise(s, 10.0, Seed{5});
    CHECK(again.frames[0] == noisy.frames[0]);

    const ImageStack other = add_gaussian_noise(s, 10.0, Seed{6});
    CHECK(other.frames[0] != noisy.frames[0]);

    // infinite snr = disabled
    const ImageStack off = add_gaussian_noise(s, std::numeric_limits<double>::infinity(),
                                              Seed{5});
    CHECK(off.frames[0] == s.frames[0]);

    CHECK_THROWS_AS(add_gaussian_noise(s, 0.0, Seed{5}), std::invalid_argument);

    // dark image: clamped at zero from below
    ImageStack dark;
    dark.grid = GridSpec{64, 64, 15.0};
    Raster dim(dark.grid, 0.01f);
    dim.at(0, 0) = 1.0f;
    dark.push(dim);
    const ImageStack clamped = add_gaussian_noise(dark, 5.0, Seed{9});
    for (float v : clamped.frames[0]) CHECK(v >= 0.0f);
}

TEST_CASE("predicted resolution model") {
    CHECK(predicted_resolution(0.005, 0.005).improvement == doctest::Approx(2.0));
    CHECK(predicted_resolution(0.005, 0.010).improvement == doctest::Approx(3.0));
    CHECK(predicted_resolution(0.005, 0.0).improvement == doctest::Approx(1.0));
    CHECK_THROWS_AS(predicted_resolution(-0.001, 0.005), std::invalid_argument);

    // symmetric and additive
    Rng rng(Seed{11});
    for (int i = 0; i < 10; ++i) {
        const double a = rng.uniform() * 0.01, b = rng.uniform() * 0.01;
        CHECK(predicted_resolution(a, b).f_sim == doctest::Approx(a + b));
        CHECK(predicted_resolution(a, b).f_sim ==
              doctest::Approx(predicted_resolution(b, a).f_sim));
    }
}
