#include "simrecon/diffcore/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace simrecon::diff {

template <typename T>
void adam_step(std::vector<Tensor4<T>*>& params, const std::vector<const Tensor4<T>*>& grads,
               AdamState<T>& state, double lr, const std::vector<std::string>& names) {
    if (params.size() != grads.size())
        throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
    if (!(lr > 0.0)) throw std::invalid_argument("adam_step: lr must be > 0");

    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(size_t(params[i]->numel()), 0.0);
            state.v[i].assign(size_t(params[i]->numel()), 0.0);
        }
    }

    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, double(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, double(state.t));

    for (size_t i = 0; i < params.size(); ++i) {
        Tensor4<T>& p = *params[i];
        const Tensor4<T>& g = *grads[i];
        if (!(p.shape == g.shape))
            throw std::invalid_argument("adam_step: shape mismatch at parameter " +
                                        std::to_string(i));
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (int64_t j = 0; j < p.numel(); ++j) {
            const double gj = double(g.v[size_t(j)]);
            if (!std::isfinite(gj)) {
                const std::string who =
                    i < names.size() ? names[i] : ("parameter " + std::to_string(i));
                throw std::runtime_error("adam_step: non-finite gradient in " + who);
            }
            m[size_t(j)] = state.beta1 * m[size_t(j)] + (1.0 - state.beta1) * gj;
            v[size_t(j)] = state.beta2 * v[size_t(j)] + (1.0 - state.beta2) * gj * gj;
            const double mhat = m[size_t(j)] / bc1;
            const double vhat = v[size_t(j)] / bc2;
            p.v[size_t(j)] =
                T(double(p.v[size_t(j)]) - lr * mhat / (std::sqrt(vhat) + state.eps));
        }
    }
}

template void adam_step<float>(std::vector<Tensor4<float>*>&,
                               const std::vector<const Tensor4<float>*>&, AdamState<float>&,
                               double, const std::vector<std::string>&);
template void adam_step<double>(std::vector<Tensor4<double>*>&,
                                const std::vector<const Tensor4<double>*>&,
                                AdamState<double>&, double, const std::vector<std::string>&);

} // namespace simrecon::diff
