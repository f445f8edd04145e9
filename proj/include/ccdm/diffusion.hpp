#pragma once

#include <functional>

#include "ccdm/rng.hpp"
#include "ccdm/schedule.hpp"
#include "ccdm/tensor.hpp"

namespace ccdm {

template <typename S>
struct NoisyTarget {
    Tensor<S> y_k;
    int k = 0;
    Tensor<S> eps; // the Gaussian draw that produced y_k
};

// y_k = sqrt(alpha_bar_k) * y0 + sqrt(1 - alpha_bar_k) * eps, eps given.
template <typename S>
NoisyTarget<S> forward_noise_with(const Tensor<S>& y0, int k, const NoiseSchedule& sched,
                                  Tensor<S> eps) {
    sched.require_step(k);
    if (!y0.same_shape(eps))
        throw ShapeError("forward_noise: eps " + shape_str(eps.shape) + " vs y0 " +
                         shape_str(y0.shape));
    const S a = static_cast<S>(std::sqrt(sched.alpha_bar_at(k)));
    const S b = static_cast<S>(std::sqrt(1.0 - sched.alpha_bar_at(k)));
    NoisyTarget<S> out;
    out.k = k;
    out.y_k = y0;
    for (size_t i = 0; i < y0.size(); ++i) out.y_k.values[i] = a * y0.values[i] + b * eps.values[i];
    out.eps = std::move(eps);
    return out;
}

template <typename S>
NoisyTarget<S> forward_noise(const Tensor<S>& y0, int k, const NoiseSchedule& sched, RngStream& rng) {
    return forward_noise_with(y0, k, sched, Tensor<S>::normal(y0.shape, rng));
}

// One ancestral reverse step: posterior mean from the predicted noise, plus
// sqrt(beta_tilde_k) * z for k > 1. The final step (k = 1) is deterministic.
template <typename S>
Tensor<S> reverse_step(const Tensor<S>& y_k, const Tensor<S>& eps_pred, int k,
                       const NoiseSchedule& sched, RngStream& rng) {
    sched.require_step(k);
    if (!y_k.same_shape(eps_pred))
        throw ShapeError("reverse_step: eps_pred " + shape_str(eps_pred.shape) + " vs y_k " +
                         shape_str(y_k.shape));
    const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha_at(k));
    const double coef = sched.beta_at(k) / std::sqrt(1.0 - sched.alpha_bar_at(k));
    const double sigma = (k > 1) ? std::sqrt(sched.beta_tilde_at(k)) : 0.0;
    Tensor<S> out = y_k;
    for (size_t i = 0; i < out.size(); ++i) {
        double mu = inv_sqrt_alpha * (static_cast<double>(y_k.values[i]) -
                                      coef * static_cast<double>(eps_pred.values[i]));
        if (k > 1) mu += sigma * rng.normal();
        out.values[i] = static_cast<S>(mu);
    }
    return out;
}

template <typename S>
using EpsFn = std::function<Tensor<S>(const Tensor<S>& y, int k)>;

// Full reverse chain from y_K ~ N(0, I) down to y_0. The denoiser is called
// exactly K times. Any non-finite state aborts with the offending step.
template <typename S>
Tensor<S> sample_trajectory(int horizon, int channels, const EpsFn<S>& denoiser,
                            const NoiseSchedule& sched, RngStream& rng) {
    Tensor<S> y = Tensor<S>::normal({horizon, channels}, rng);
    for (int k = sched.steps; k >= 1; --k) {
        Tensor<S> eps_pred = denoiser(y, k);
        y = reverse_step(y, eps_pred, k, sched, rng);
        if (!y.finite())
            throw SamplingError("non-finite trajectory state at diffusion step " + std::to_string(k));
    }
    return y;
}

} // namespace ccdm
