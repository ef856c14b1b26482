#include "simrecon/imgcore.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace simrecon {

using nlohmann::json;

void validate_grid(const GridSpec& g) {
    if (g.width < 1 || g.height < 1)
        throw std::invalid_argument("grid dimensions must be >= 1");
    if (!(g.pitch_nm > 0.0) || !std::isfinite(g.pitch_nm))
        throw std::invalid_argument("grid pitch_nm must be finite and > 0");
}

void ImageStack::push(const Raster& r) {
    if (frames.empty() && grid.pixels() == 0)
        grid = r.grid;
    if (!(r.grid == grid))
        throw std::invalid_argument("frame grid does not match stack grid");
    frames.push_back(r.v);
}

// splitmix64, used to turn (seed, label) into child seeds.
static uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

static uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

Rng::Rng(Seed s) : seed_(s), engine_(splitmix64(s.value)) {}

Rng Rng::fork(std::string_view label) const {
    return Rng(Seed{splitmix64(seed_.value ^ fnv1a64(label))});
}

double Rng::uniform() {
    std::uniform_real_distribution<double> d(0.0, 1.0);
    return d(engine_);
}

double Rng::gaussian() {
    std::normal_distribution<double> d(0.0, 1.0);
    return d(engine_);
}

float stack_max(const ImageStack& stack) {
    float m = -std::numeric_limits<float>::infinity();
    for (const auto& f : stack.frames)
        for (float x : f) m = std::max(m, x);
    return m;
}

void require_finite(const ImageStack& stack, const std::string& what) {
    for (const auto& f : stack.frames)
        for (float x : f)
            if (!std::isfinite(x))
                throw std::runtime_error(what + ": non-finite sample");
}

void require_finite(const Raster& image, const std::string& what) {
    for (float x : image.v)
        if (!std::isfinite(x))
            throw std::runtime_error(what + ": non-finite sample");
}

static std::string strip_raw32_ext(const std::string& path) {
    for (const char* ext : {".json", ".f32"}) {
        if (path.size() > std::strlen(ext) &&
            path.compare(path.size() - std::strlen(ext), std::string::npos, ext) == 0)
            return path.substr(0, path.size() - std::strlen(ext));
    }
    return path;
}

void save_raster(const ImageStack& stack, const std::string& path) {
    validate_grid(stack.grid);
    require_finite(stack, "save_raster");
    for (const auto& f : stack.frames)
        if (int64_t(f.size()) != stack.grid.pixels())
            throw std::invalid_argument("save_raster: frame size does not match grid");

    const std::string base = strip_raw32_ext(path);

    json header = {
        {"magic", "SIMR1"},
        {"width", stack.grid.width},
        {"height", stack.grid.height},
        {"frames", int(stack.frames.size())},
        {"pitch_nm", stack.grid.pitch_nm},
        {"labels", stack.labels},
    };
    {
        std::ofstream js(base + ".json", std::ios::trunc);
        if (!js) throw std::runtime_error("save_raster: cannot write " + base + ".json");
        js << header.dump(2) << "\n";
    }

    std::ofstream payload(base + ".f32", std::ios::binary | std::ios::trunc);
    if (!payload) throw std::runtime_error("save_raster: cannot write " + base + ".f32");
    static_assert(sizeof(float) == 4);
    // Little-endian IEEE-754; memcpy of the native representation on x86.
    for (const auto& f : stack.frames)
        payload.write(reinterpret_cast<const char*>(f.data()),
                      std::streamsize(f.size() * sizeof(float)));
    if (!payload) throw std::runtime_error("save_raster: short write to " + base + ".f32");
}

ImageStack load_raster(const std::string& path) {
    const std::string base = strip_raw32_ext(path);
    std::ifstream js(base + ".json");
    if (!js) throw std::runtime_error("load_raster: missing file " + base + ".json");
    json header = json::parse(js, nullptr, true);

    if (header.value("magic", "") != std::string("SIMR1"))
        throw std::runtime_error("load_raster: bad magic in " + base + ".json");

    ImageStack stack;
    stack.grid.width = header.at("width").get<int>();
    stack.grid.height = header.at("height").get<int>();
    stack.grid.pitch_nm = header.at("pitch_nm").get<double>();
    const int nframes = header.at("frames").get<int>();
    if (header.contains("labels"))
        stack.labels = header.at("labels").get<std::vector<std::string>>();
    validate_grid(stack.grid);
    if (nframes < 0) throw std::runtime_error("load_raster: negative frame count");

    std::ifstream payload(base + ".f32", std::ios::binary);
    if (!payload) throw std::runtime_error("load_raster: missing file " + base + ".f32");
    payload.seekg(0, std::ios::end);
    const int64_t bytes = payload.tellg();
    payload.seekg(0);
    const int64_t expected = int64_t(nframes) * stack.grid.pixels() * 4;
    if (bytes != expected)
        throw std::runtime_error("load_raster: payload size mismatch in " + base +
                                 ".f32 (got " + std::to_string(bytes) + " bytes, expected " +
                                 std::to_string(expected) + ")");

    stack.frames.assign(size_t(nframes), std::vector<float>(size_t(stack.grid.pixels())));
    for (auto& f : stack.frames)
        payload.read(reinterpret_cast<char*>(f.data()), std::streamsize(f.size() * 4));
    if (!payload) throw std::runtime_error("load_raster: short read from " + base + ".f32");

    require_finite(stack, "load_raster(" + base + ")");
    return stack;
}

void save_pgm16(const Raster& image, const std::string& path) {
    require_finite(image, "save_pgm16");
    float mx = 0.0f;
    for (float x : image.v) mx = std::max(mx, x);
    const double scale = mx > 0.0f ? 65535.0 / mx : 0.0;

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_pgm16: cannot write " + path);
    out << "P5\n" << image.grid.width << " " << image.grid.height << "\n65535\n";
    for (float x : image.v) {
        long q = std::lround(std::clamp(double(x) * scale, 0.0, 65535.0));
        unsigned char hi = (unsigned char)(q >> 8), lo = (unsigned char)(q & 0xff);
        out.put(char(hi)).put(char(lo)); // PGM samples are big-endian
    }
}

Raster upsample_bilinear(const Raster& image, int factor) {
    if (factor < 1) throw std::invalid_argument("upsample_bilinear: factor must be >= 1");
    if (factor == 1) return image;

    const int w = image.grid.width, h = image.grid.height;
    GridSpec out_grid{w * factor, h * factor, image.grid.pitch_nm / factor};
    Raster out(out_grid);

    // Corner-aligned: output corners map onto input corners.
    const double sx = out_grid.width > 1 ? double(w - 1) / (out_grid.width - 1) : 0.0;
    const double sy = out_grid.height > 1 ? double(h - 1) / (out_grid.height - 1) : 0.0;
    for (int y = 0; y < out_grid.height; ++y) {
        const double fy = y * sy;
        const int y0 = std::min(int(fy), h - 1);
        const int y1 = std::min(y0 + 1, h - 1);
        const double ty = fy - y0;
        for (int x = 0; x < out_grid.width; ++x) {
            const double fx = x * sx;
            const int x0 = std::min(int(fx), w - 1);
            const int x1 = std::min(x0 + 1, w - 1);
            const double tx = fx - x0;
            const double top = (1.0 - tx) * image.at(y0, x0) + tx * image.at(y0, x1);
            const double bot = (1.0 - tx) * image.at(y1, x0) + tx * image.at(y1, x1);
            out.at(y, x) = float((1.0 - ty) * top + ty * bot);
        }
    }
    return out;
}

ImageStack normalize_unit(const ImageStack& stack) {
    require_finite(stack, "normalize_unit");
    const float mx = stack_max(stack);
    if (!(mx > 0.0f))
        throw std::invalid_argument("normalize_unit: global maximum must be > 0");

    ImageStack out = stack;
    for (auto& f : out.frames)
        for (float& x : f) x = x / mx; // v/v == 1 exactly, so max lands on 1
    return out;
}

} // namespace simrecon
