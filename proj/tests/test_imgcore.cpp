#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "simrecon/imgcore.hpp"

using namespace simrecon;
namespace fs = std::filesystem;

namespace {

std::string temp_dir() {
    static int counter = 0;
    auto dir = fs::temp_directory_path() / ("simrecon_imgcore_" + std::to_string(counter++));
    fs::create_directories(dir);
    return dir.string();
}

ImageStack random_stack(Rng& rng, int w, int h, int frames) {
    ImageStack s;
    s.grid = GridSpec{w, h, 10.0 + 55.0 * rng.uniform()};
    for (int f = 0; f < frames; ++f) {
        Raster r(s.grid);
        for (auto& v : r.v) v = float(rng.gaussian() * 3.0);
        s.push(r);
        s.labels.push_back("frame" + std::to_string(f));
    }
    return s;
}

} // namespace

TEST_CASE("raw32 round-trip is bit exact") {
    const std::string dir = temp_dir();
    Rng rng(Seed{101});
    // property: randomized stacks survive save/load unchanged
    for (int trial = 0; trial < 8; ++trial) {
        Rng trial_rng = rng.fork("trial/" + std::to_string(trial));
        const ImageStack s = random_stack(trial_rng, 3 + trial, 5, 1 + trial % 3);
        const std::string base = dir + "/t" + std::to_string(trial);
        save_raster(s, base);
        const ImageStack back = load_raster(base);
        REQUIRE(back.frames.size() == s.frames.size());
        CHECK(back.grid == s.grid);
        CHECK(back.labels == s.labels);
        for (size_t f = 0; f < s.frames.size(); ++f)
            CHECK(std::memcmp(back.frames[f].data(), s.frames[f].data(),
                              s.frames[f].size() * 4) == 0);
    }
}

TEST_CASE("raw32 save writes header plus payload") {
    const std::string dir = temp_dir();
    ImageStack s;
    s.grid = GridSpec{4, 4, 65.0};
    s.push(Raster(s.grid)); // all zeros

    save_raster(s, dir + "/zero");
    CHECK(fs::exists(dir + "/zero.json"));
    CHECK(fs::exists(dir + "/zero.f32"));
    CHECK(fs::file_size(dir + "/zero.f32") == 4u * 4u * 4u);

    // all-zero frame -> all-zero payload bytes
    std::ifstream payload(dir + "/zero.f32", std::ios::binary);
    std::vector<char> bytes(64);
    payload.read(bytes.data(), 64);
    for (char b : bytes) CHECK(b == 0);

    // declared pitch comes back as-is
    CHECK(load_raster(dir + "/zero").grid.pitch_nm == 65.0);
}

TEST_CASE("raw32 header frame count matches a 9-frame stack") {
    const std::string dir = temp_dir();
    Rng rng(Seed{7});
    const ImageStack s = random_stack(rng, 4, 4, 9);
    save_raster(s, dir + "/nine");
    std::ifstream js(dir + "/nine.json");
    std::string text((std::istreambuf_iterator<char>(js)), {});
    CHECK(text.find("\"frames\": 9") != std::string::npos);
}

TEST_CASE("raw32 load rejects short payloads and bad input") {
    const std::string dir = temp_dir();
    Rng rng(Seed{8});
    const ImageStack s = random_stack(rng, 4, 4, 2);
    save_raster(s, dir + "/cut");
    fs::resize_file(dir + "/cut.f32", 4 * 4 * 4 * 2 - 8); // drop 2 samples
    CHECK_THROWS_WITH_AS(load_raster(dir + "/cut"),
                         doctest::Contains("size mismatch"), std::runtime_error);

    CHECK_THROWS_AS(load_raster(dir + "/does_not_exist"), std::runtime_error);

    // non-finite payload rejected
    ImageStack bad = s;
    bad.frames[0][3] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(save_raster(bad, dir + "/nan"), std::runtime_error);
    save_raster(s, dir + "/hack");
    {
        std::fstream f(dir + "/hack.f32", std::ios::in | std::ios::out | std::ios::binary);
        const float inf = std::numeric_limits<float>::infinity();
        f.write(reinterpret_cast<const char*>(&inf), 4);
    }
    CHECK_THROWS_AS(load_raster(dir + "/hack"), std::runtime_error);
}

TEST_CASE("pgm export writes a 16-bit P5 file") {
    const std::string dir = temp_dir();
    Raster r(GridSpec{3, 2, 15.0});
    r.at(0, 0) = 2.0f;
    r.at(1, 2) = 1.0f;
    save_pgm16(r, dir + "/img.pgm");
    std::ifstream in(dir + "/img.pgm", std::ios::binary);
    std::string magic, dims;
    std::getline(in, magic);
    CHECK(magic == "P5");
    std::getline(in, dims);
    CHECK(dims == "3 2");
    std::getline(in, dims);
    CHECK(dims == "65535");
    unsigned char hi = 0, lo = 0;
    in.read(reinterpret_cast<char*>(&hi), 1);
    in.read(reinterpret_cast<char*>(&lo), 1);
    CHECK(int(hi) * 256 + lo == 65535); // max sample maps to full scale
}

TEST_CASE("upsample_bilinear identity and constants") {
    Rng rng(Seed{9});
    Raster r(GridSpec{6, 5, 30.0});
    for (auto& v : r.v) v = float(rng.uniform());

    const Raster same = upsample_bilinear(r, 1);
    CHECK(same.grid == r.grid);
    CHECK(same.v == r.v);

    Raster c(GridSpec{4, 4, 20.0}, 0.37f);
    const Raster up = upsample_bilinear(c, 4);
    CHECK(up.grid.width == 16);
    CHECK(up.grid.height == 16);
    CHECK(up.grid.pitch_nm == doctest::Approx(5.0));
    for (float v : up.v) CHECK(v == doctest::Approx(0.37f).epsilon(1e-6));

    CHECK_THROWS_AS(upsample_bilinear(r, 0), std::invalid_argument);
}

TEST_CASE("upsample_bilinear corner-aligned ramp") {
    // [[0,1],[0,1]] at factor 2: each row becomes 0, 1/3, 2/3, 1
    Raster r(GridSpec{2, 2, 10.0});
    r.at(0, 0) = 0.0f;
    r.at(0, 1) = 1.0f;
    r.at(1, 0) = 0.0f;
    r.at(1, 1) = 1.0f;
    const Raster up = upsample_bilinear(r, 2);
    for (int y = 0; y < 4; ++y) {
        CHECK(up.at(y, 0) == doctest::Approx(0.0));
        CHECK(up.at(y, 1) == doctest::Approx(1.0 / 3.0));
        CHECK(up.at(y, 2) == doctest::Approx(2.0 / 3.0));
        CHECK(up.at(y, 3) == doctest::Approx(1.0));
    }
}

TEST_CASE("upsample_bilinear preserves value bounds") {
    Rng rng(Seed{10});
    for (int trial = 0; trial < 5; ++trial) {
        Rng t = rng.fork(std::to_string(trial));
        Raster r(GridSpec{7, 9, 12.0});
        for (auto& v : r.v) v = float(t.gaussian());
        const auto [mn, mx] = std::minmax_element(r.v.begin(), r.v.end());
        const Raster up = upsample_bilinear(r, 3);
        for (float v : up.v) {
            CHECK(v >= *mn - 1e-6f);
            CHECK(v <= *mx + 1e-6f);
        }
    }
}

TEST_CASE("normalize_unit scales to exact unit max and is idempotent") {
    ImageStack s;
    s.grid = GridSpec{4, 4, 15.0};
    Raster r(s.grid);
    for (size_t i = 0; i < r.v.size(); ++i) r.v[i] = float(i) * 10.0f / 15.0f;
    r.v[5] = 10.0f;
    s.push(r);

    const ImageStack n = normalize_unit(s);
    CHECK(stack_max(n) == 1.0f); // exact
    for (size_t i = 0; i < r.v.size(); ++i)
        CHECK(n.frames[0][i] == doctest::Approx(r.v[i] / 10.0f));

    // already unit max -> unchanged bit for bit
    const ImageStack again = normalize_unit(n);
    CHECK(again.frames[0] == n.frames[0]);

    ImageStack zeros;
    zeros.grid = s.grid;
    zeros.push(Raster(s.grid));
    CHECK_THROWS_AS(normalize_unit(zeros), std::invalid_argument);
}

TEST_CASE("seeded rng streams are deterministic and label-forked") {
    Rng a(Seed{1234});
    Rng b(Seed{1234});
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    // forks depend on the root seed, not on how much the parent has drawn
    Rng parent(Seed{77});
    Rng f1 = parent.fork("noise/0");
    parent.next_u64();
    parent.next_u64();
    Rng f2 = parent.fork("noise/0");
    for (int i = 0; i < 10; ++i) CHECK(f1.next_u64() == f2.next_u64());

    Rng other = parent.fork("winit");
    CHECK(other.next_u64() != Rng(Seed{77}).fork("noise/0").next_u64());
}

TEST_CASE("grid validation") {
    CHECK_THROWS_AS(validate_grid(GridSpec{0, 4, 15.0}), std::invalid_argument);
    CHECK_THROWS_AS(validate_grid(GridSpec{4, 4, 0.0}), std::invalid_argument);
    validate_grid(GridSpec{1, 1, 1e-3});
    CHECK(GridSpec{4, 4, 15.0}.nyquist() == doctest::Approx(1.0 / 30.0));
}
