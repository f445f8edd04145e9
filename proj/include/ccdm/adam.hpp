#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "ccdm/tensor.hpp"

namespace ccdm {

template <typename S>
using ParamStore = std::map<std::string, Tensor<S>>;

template <typename S>
using GradMap = std::map<std::string, Tensor<S>>;

template <typename S>
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t step = 0;
    std::map<std::string, Tensor<S>> m, v;
};

// Bias-corrected Adam update. Parameters missing from `grads` are treated as
// having exact zero gradient. Moment tensors are created on first use and
// must keep the parameter's shape afterwards.
template <typename S>
void adam_step(ParamStore<S>& params, const GradMap<S>& grads, AdamState<S>& state) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (auto& [name, p] : params) {
        auto mit = state.m.find(name);
        if (mit == state.m.end()) {
            mit = state.m.emplace(name, Tensor<S>::zeros(p.shape)).first;
            state.v.emplace(name, Tensor<S>::zeros(p.shape));
        }
        Tensor<S>& m = mit->second;
        Tensor<S>& v = state.v.at(name);
        if (!m.same_shape(p))
            throw ShapeError("adam moment shape " + shape_str(m.shape) + " does not match parameter " +
                             name + " " + shape_str(p.shape));
        const Tensor<S>* gp = nullptr;
        auto git = grads.find(name);
        if (git != grads.end()) {
            if (!git->second.same_shape(p))
                throw ShapeError("gradient shape " + shape_str(git->second.shape) +
                                 " does not match parameter " + name);
            gp = &git->second;
        }
        for (size_t i = 0; i < p.size(); ++i) {
            const double gv = gp ? static_cast<double>(gp->values[i]) : 0.0;
            if (std::isnan(gv)) throw TrainingError("NaN gradient for parameter " + name);
            double mi = state.beta1 * m.values[i] + (1.0 - state.beta1) * gv;
            double vi = state.beta2 * v.values[i] + (1.0 - state.beta2) * gv * gv;
            m.values[i] = static_cast<S>(mi);
            v.values[i] = static_cast<S>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            p.values[i] = static_cast<S>(p.values[i] - state.lr * mhat / (std::sqrt(vhat) + state.eps));
        }
    }
}

template <typename S>
double global_grad_norm(const GradMap<S>& grads) {
    double sq = 0;
    for (const auto& [name, g] : grads)
        for (S v : g.values) sq += static_cast<double>(v) * static_cast<double>(v);
    return std::sqrt(sq);
}

// Scales gradients so their global L2 norm is at most `max_norm`.
template <typename S>
void clip_global_norm(GradMap<S>& grads, double max_norm) {
    const double norm = global_grad_norm(grads);
    if (norm <= max_norm || norm == 0.0) return;
    const S f = static_cast<S>(max_norm / norm);
    for (auto& [name, g] : grads)
        for (S& v : g.values) v *= f;
}

template <typename S>
uint64_t hash_params(const ParamStore<S>& params) {
    uint64_t h = 1469598103934665603ULL;
    for (const auto& [name, t] : params) {
        h = fnv1a64_bytes(name.data(), name.size(), h);
        h = hash_tensor(t, h);
    }
    return h;
}

} // namespace ccdm
