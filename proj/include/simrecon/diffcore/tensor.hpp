#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace simrecon::diff {

// Dense 4-D array layout: (batch, channel, height, width), row-major.
struct Shape4 {
    int n = 1, c = 1, h = 1, w = 1;

    int64_t numel() const { return int64_t(n) * c * h * w; }
    bool operator==(const Shape4&) const = default;
    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + ")";
    }
};

template <typename T>
struct Tensor4 {
    Shape4 shape;
    std::vector<T> v;

    Tensor4() = default;
    explicit Tensor4(Shape4 s) : shape(s), v(size_t(s.numel()), T(0)) {}

    T* data() { return v.data(); }
    const T* data() const { return v.data(); }
    int64_t numel() const { return shape.numel(); }

    T& at(int n_, int c_, int y, int x) {
        return v[((size_t(n_) * shape.c + c_) * shape.h + y) * shape.w + x];
    }
    T at(int n_, int c_, int y, int x) const {
        return v[((size_t(n_) * shape.c + c_) * shape.h + y) * shape.w + x];
    }
    void fill(T val) { std::fill(v.begin(), v.end(), val); }
};

} // namespace simrecon::diff
