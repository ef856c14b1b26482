#pragma once

#include <string>
#include <vector>

#include "simrecon/diffcore/tensor.hpp"

namespace simrecon::diff {

// Standard Adam with bias correction. Moments are lazily shaped on the first
// step; t counts completed steps.
template <typename T>
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t t = 0;
    std::vector<std::vector<double>> m, v;
};

// params[i] and grads[i] must agree in shape; names are used in diagnostics
// when a gradient is non-finite.
template <typename T>
void adam_step(std::vector<Tensor4<T>*>& params, const std::vector<const Tensor4<T>*>& grads,
               AdamState<T>& state, double lr,
               const std::vector<std::string>& names = {});

} // namespace simrecon::diff
