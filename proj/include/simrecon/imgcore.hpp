#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

// Raster containers, seeded randomness, RAW32 file I/O, resampling and
// normalization shared by every other module.

namespace simrecon {

struct GridSpec {
    int width = 0;
    int height = 0;
    double pitch_nm = 0.0; // physical pixel pitch

    // cycles/nm
    double nyquist() const { return 1.0 / (2.0 * pitch_nm); }
    int64_t pixels() const { return int64_t(width) * height; }
    bool operator==(const GridSpec&) const = default;
};

void validate_grid(const GridSpec& g);

// Single-frame float32 raster, row-major.
struct Raster {
    GridSpec grid;
    std::vector<float> v;

    Raster() = default;
    Raster(const GridSpec& g, float fill = 0.0f)
        : grid(g), v(size_t(g.pixels()), fill) {}
    Raster(const GridSpec& g, std::vector<float> samples)
        : grid(g), v(std::move(samples)) {}

    float& at(int y, int x) { return v[size_t(y) * grid.width + x]; }
    float at(int y, int x) const { return v[size_t(y) * grid.width + x]; }
};

// One or more frames on a common grid. Labels are free-form tags stored in
// the sidecar ("modality=...", per-frame notes, ...), not forced per-frame.
struct ImageStack {
    GridSpec grid;
    std::vector<std::vector<float>> frames;
    std::vector<std::string> labels;

    Raster frame(int i) const { return Raster{grid, frames.at(size_t(i))}; }
    void push(const Raster& r);
};

struct Seed {
    uint64_t value = 0;
};

// One generator per run, forked per purpose by label so that e.g. adding
// noise frames never perturbs weight initialization. Children are derived
// from the parent seed, not from engine state.
class Rng {
  public:
    explicit Rng(Seed s);
    Rng fork(std::string_view label) const;

    uint64_t next_u64() { return engine_(); }
    double uniform();              // [0, 1)
    double gaussian();             // N(0, 1)
    Seed seed() const { return seed_; }

  private:
    Seed seed_;
    std::mt19937_64 engine_;
};

// RAW32: <base>.json sidecar + <base>.f32 little-endian float32 payload,
// frame-major then row-major. `path` may name the base, the .json or the
// .f32 file.
void save_raster(const ImageStack& stack, const std::string& path);
ImageStack load_raster(const std::string& path);

// 16-bit binary PGM, values mapped linearly from [0, max]. Viewing only.
void save_pgm16(const Raster& image, const std::string& path);

// Corner-aligned bilinear interpolation; factor 1 is the identity.
// Output grid is (factor*width, factor*height) at pitch/factor.
Raster upsample_bilinear(const Raster& image, int factor);

// Divides by the global maximum; output max is exactly 1.
ImageStack normalize_unit(const ImageStack& stack);

float stack_max(const ImageStack& stack);
void require_finite(const ImageStack& stack, const std::string& what);
void require_finite(const Raster& image, const std::string& what);

} // namespace simrecon
