#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "ccdm/denoiser.hpp"

namespace ccdm {

struct ContrastiveConfig {
    double lambda = 0.001;      // contrastive weight
    int negatives_per_type = 64; // N = 2 * negatives_per_type (shuffle + scale)
    double tau = 0.1;            // temperature
    int patch_count = 4;
    bool shuffle_shared_across_channels = true;
    // magnitude-scale bands [low_min, low_max] U [high_min, high_max]
    double scale_low_min = 0.0, scale_low_max = 0.5;
    double scale_high_min = 1.5, scale_high_max = 2.0;

    int total_negatives() const { return 2 * negatives_per_type; }

    void validate() const {
        if (lambda < 0) throw ConfigError("contrastive lambda must be >= 0");
        if (negatives_per_type < 0) throw ConfigError("negatives_per_type must be >= 0");
        if (tau <= 0) throw ConfigError("contrastive tau must be > 0");
        if (patch_count < 2) throw ConfigError("patch_count must be >= 2");
    }
};

enum class NegativeKind { PatchShuffle, MagnitudeScale };

template <typename S>
struct NegativeSet {
    std::vector<Tensor<S>> series;
    std::vector<NegativeKind> kinds;
    size_t size() const { return series.size(); }
};

// Splits [a, b) time steps into `patch_count` contiguous patches; the last
// patch absorbs the remainder. Applies the given patch permutation to every
// channel identically.
template <typename S>
Tensor<S> apply_patch_permutation(const Tensor<S>& y0, int patch_count,
                                  const std::vector<int>& perm) {
    const int H = y0.rows(), D = y0.cols();
    if (patch_count < 2) throw ConfigError("patch_count must be >= 2");
    if (H < patch_count)
        throw ConfigError("horizon " + std::to_string(H) + " shorter than patch_count " +
                          std::to_string(patch_count));
    const int base = H / patch_count;
    std::vector<std::pair<int, int>> patches(patch_count); // (start, len)
    for (int i = 0; i < patch_count; ++i) {
        const int start = i * base;
        const int len = (i == patch_count - 1) ? H - start : base;
        patches[i] = {start, len};
    }
    Tensor<S> out = Tensor<S>::zeros(y0.shape);
    int row = 0;
    for (int i = 0; i < patch_count; ++i) {
        const auto [start, len] = patches[perm[i]];
        for (int t = 0; t < len; ++t, ++row)
            for (int d = 0; d < D; ++d) out.at(row, d) = y0.at(start + t, d);
    }
    return out;
}

inline std::vector<int> draw_nonidentity_permutation(int n, RngStream& rng) {
    if (n < 2) throw ConfigError("need at least 2 patches for a non-identity permutation");
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    auto shuffle_once = [&] {
        for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(0, i)]);
    };
    shuffle_once();
    while (std::is_sorted(perm.begin(), perm.end())) shuffle_once();
    return perm;
}

// Shuffle-type negative: reorders patches, preserving each channel's value
// multiset. The identity permutation is re-drawn.
template <typename S>
Tensor<S> augment_patch_shuffle(const Tensor<S>& y0, int patch_count, RngStream& rng,
                                bool shared_across_channels = true) {
    if (patch_count < 2) throw ConfigError("patch_count must be >= 2");
    if (y0.rows() < patch_count)
        throw ConfigError("horizon " + std::to_string(y0.rows()) + " shorter than patch_count " +
                          std::to_string(patch_count));
    if (shared_across_channels)
        return apply_patch_permutation(y0, patch_count,
                                       draw_nonidentity_permutation(patch_count, rng));
    const int D = y0.cols();
    Tensor<S> out = Tensor<S>::zeros(y0.shape);
    for (int d = 0; d < D; ++d) {
        Tensor<S> col = Tensor<S>::zeros({y0.rows(), 1});
        for (int t = 0; t < y0.rows(); ++t) col.at(t, 0) = y0.at(t, d);
        Tensor<S> shuffled = apply_patch_permutation(
            col, patch_count, draw_nonidentity_permutation(patch_count, rng));
        for (int t = 0; t < y0.rows(); ++t) out.at(t, d) = shuffled.at(t, 0);
    }
    return out;
}

// One factor from U([low] U [high]); both bands have equal width so each is
// picked with probability 1/2.
inline double draw_scale_factor(const ContrastiveConfig& cfg, RngStream& rng) {
    const bool low = rng.uniform() <= 0.5;
    return low ? rng.uniform(cfg.scale_low_min, cfg.scale_low_max)
               : rng.uniform(cfg.scale_high_min, cfg.scale_high_max);
}

template <typename S>
Tensor<S> apply_channel_scale(const Tensor<S>& y0, const std::vector<double>& factors) {
    if (static_cast<int>(factors.size()) != y0.cols())
        throw ShapeError("need one scale factor per channel");
    Tensor<S> out = y0;
    for (int t = 0; t < y0.rows(); ++t)
        for (int d = 0; d < y0.cols(); ++d) out.at(t, d) = static_cast<S>(factors[d] * y0.at(t, d));
    return out;
}

// Scale-type negative: independent per-channel factor outside (0.5, 1.5).
template <typename S>
Tensor<S> augment_magnitude_scale(const Tensor<S>& y0, const ContrastiveConfig& cfg, RngStream& rng) {
    std::vector<double> factors(y0.cols());
    for (auto& f : factors) f = draw_scale_factor(cfg, rng);
    return apply_channel_scale(y0, factors);
}

// N negatives per positive: negatives_per_type of each augmentation family,
// shuffle-type first. Factors and permutations are re-drawn per negative.
template <typename S>
NegativeSet<S> build_negatives(const Tensor<S>& y0, const ContrastiveConfig& cfg, RngStream& rng) {
    cfg.validate();
    NegativeSet<S> out;
    out.series.reserve(cfg.total_negatives());
    for (int i = 0; i < cfg.negatives_per_type; ++i) {
        out.series.push_back(
            augment_patch_shuffle(y0, cfg.patch_count, rng, cfg.shuffle_shared_across_channels));
        out.kinds.push_back(NegativeKind::PatchShuffle);
    }
    for (int i = 0; i < cfg.negatives_per_type; ++i) {
        out.series.push_back(augment_magnitude_scale(y0, cfg, rng));
        out.kinds.push_back(NegativeKind::MagnitudeScale);
    }
    return out;
}

// Denoiser evaluation as a tape expression with the lookback window bound.
template <typename S>
using TapeEpsModel = std::function<Var<S>(Graph<S>&, Var<S> y_noisy, int k)>;

template <typename S>
TapeEpsModel<S> make_tape_eps_model(const DenoiserConfig& cfg, const std::map<std::string, Var<S>>& p,
                                    Var<S> x) {
    return [&cfg, &p, x](Graph<S>& g, Var<S> y_noisy, int k) {
        return denoise_expr(g, cfg, p, y_noisy, x, k);
    };
}

// log f = -||eps' - eps_theta(sqrt(a_bar_k) y + sqrt(1-a_bar_k) eps', x, k)||^2 / tau.
// The same eps' leaf is shared by the positive and every negative.
template <typename S>
Var<S> log_density_ratio_expr(Graph<S>& g, const TapeEpsModel<S>& model, const Tensor<S>& y,
                              Var<S> eps_prime, int k, const NoiseSchedule& sched, double tau) {
    if (tau <= 0) throw ConfigError("density ratio tau must be > 0");
    NoisyTarget<S> nt = forward_noise_with(y, k, sched, g.value(eps_prime));
    Var<S> pred = model(g, g.leaf(nt.y_k), k);
    Var<S> sse = sse_loss(g, pred, eps_prime);
    return g.scale(sse, static_cast<S>(-1.0 / tau));
}

// f in (0, 1]; the public non-tape form of Eq. 3a/3b.
template <typename S>
double density_ratio(const DenoiserConfig& cfg, const ParamStore<S>& params,
                     const NoiseSchedule& sched, const Tensor<S>& y, const Tensor<S>& x, int k,
                     const Tensor<S>& eps_prime, double tau) {
    Graph<S> g;
    auto p = mount_params(g, params);
    Var<S> xv = g.leaf(x);
    auto model = make_tape_eps_model(cfg, p, xv);
    Var<S> lr = log_density_ratio_expr(g, model, y, g.leaf(eps_prime), k, sched, tau);
    return std::exp(static_cast<double>(g.value(lr).values[0]));
}

// InfoNCE over log ratios (positive first): -log f_pos + logsumexp(all).
inline double contrastive_loss_from_log_ratios(std::span<const double> log_ratios) {
    if (log_ratios.empty()) throw ContractError("need at least the positive log ratio");
    double m = *std::max_element(log_ratios.begin(), log_ratios.end());
    double sum = 0;
    for (double lr : log_ratios) sum += std::exp(lr - m);
    return m + std::log(sum) - log_ratios[0];
}

// Tape form of Eq. 4. Returns a scalar >= 0; exactly 0 for an empty negative set.
template <typename S>
Var<S> contrastive_loss_expr(Graph<S>& g, const TapeEpsModel<S>& model, const Tensor<S>& y0,
                             const NegativeSet<S>& negatives, Var<S> eps_prime, int k,
                             const NoiseSchedule& sched, double tau) {
    Var<S> log_pos = log_density_ratio_expr(g, model, y0, eps_prime, k, sched, tau);
    if (negatives.size() == 0) return g.scale(log_pos, S(0));
    Var<S> lse = log_pos;
    for (const auto& neg : negatives.series) {
        Var<S> lr = log_density_ratio_expr(g, model, neg, eps_prime, k, sched, tau);
        lse = g.logsumexp2(lse, lr);
    }
    return g.sub(lse, log_pos);
}

// Public non-tape form of Eq. 4.
template <typename S>
double contrastive_loss(const DenoiserConfig& cfg, const ParamStore<S>& params,
                        const NoiseSchedule& sched, const Tensor<S>& y0,
                        const NegativeSet<S>& negatives, const Tensor<S>& x, int k,
                        const Tensor<S>& eps_prime, double tau) {
    Graph<S> g;
    auto p = mount_params(g, params);
    Var<S> xv = g.leaf(x);
    auto model = make_tape_eps_model(cfg, p, xv);
    Var<S> loss = contrastive_loss_expr(g, model, y0, negatives, g.leaf(eps_prime), k, sched, tau);
    return static_cast<double>(g.value(loss).values[0]);
}

struct StepLoss {
    double total = 0;
    double denoise_part = 0;
    double contrast_part = 0;
};

// One Algorithm-1 step for a single (x, y0) sample at a caller-drawn k, as a
// tape expression over an arbitrary eps model: eps comes from eps_rng for the
// denoise term; eps' and the negatives come from contrast_rng. With
// lambda == 0 (or N == 0) no contrastive draw or forward pass happens at all,
// so the eps stream matches a plain denoising run exactly. Returns the total
// expression and fills `out` with the loss parts.
template <typename S>
Var<S> ccdm_step_loss_expr(Graph<S>& g, const TapeEpsModel<S>& model, const ContrastiveConfig& ccfg,
                           const NoiseSchedule& sched, const Tensor<S>& y0, int k,
                           RngStream& eps_rng, RngStream& contrast_rng, StepLoss& out) {
    sched.require_step(k);
    NoisyTarget<S> nt = forward_noise(y0, k, sched, eps_rng);
    Var<S> eps_leaf = g.leaf(nt.eps);
    Var<S> pred = model(g, g.leaf(nt.y_k), k);
    Var<S> denoise_l = mse_loss(g, pred, eps_leaf);

    Var<S> total = denoise_l;
    const bool with_contrast = ccfg.lambda > 0 && ccfg.total_negatives() > 0;
    if (with_contrast) {
        Tensor<S> eps_prime = Tensor<S>::normal(y0.shape, contrast_rng);
        NegativeSet<S> negs = build_negatives(y0, ccfg, contrast_rng);
        Var<S> contrast =
            contrastive_loss_expr(g, model, y0, negs, g.leaf(eps_prime), k, sched, ccfg.tau);
        out.contrast_part = static_cast<double>(g.value(contrast).values[0]);
        total = g.add(denoise_l, g.scale(contrast, static_cast<S>(ccfg.lambda)));
    }
    out.denoise_part = static_cast<double>(g.value(denoise_l).values[0]);
    out.total = static_cast<double>(g.value(total).values[0]);
    return total;
}

// The params-bound form used by training. If grad_acc is given,
// d total / d params is accumulated into it.
template <typename S>
StepLoss ccdm_step_loss(const DenoiserConfig& dcfg, const ParamStore<S>& params,
                        const ContrastiveConfig& ccfg, const NoiseSchedule& sched,
                        const Tensor<S>& y0, const Tensor<S>& x, int k, RngStream& eps_rng,
                        RngStream& contrast_rng, GradMap<S>* grad_acc = nullptr) {
    Graph<S> g;
    auto p = mount_params(g, params);
    Var<S> xv = g.leaf(x);
    auto model = make_tape_eps_model(dcfg, p, xv);
    StepLoss out;
    Var<S> total = ccdm_step_loss_expr(g, model, ccfg, sched, y0, k, eps_rng, contrast_rng, out);
    if (std::isnan(out.total))
        throw TrainingError("NaN training loss at diffusion step " + std::to_string(k));
    if (grad_acc) {
        g.backward(total);
        for (const auto& [name, var] : p) {
            const Tensor<S>& grad = g.grad(var);
            auto it = grad_acc->find(name);
            if (it == grad_acc->end()) {
                grad_acc->emplace(name, grad);
            } else {
                for (size_t i = 0; i < grad.size(); ++i) it->second.values[i] += grad.values[i];
            }
        }
    }
    return out;
}

} // namespace ccdm
