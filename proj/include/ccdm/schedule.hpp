#pragma once

#include <string>
#include <vector>

#include "ccdm/common.hpp"

namespace ccdm {

// Noise schedule tables for K diffusion steps. All arrays are 0-based over
// steps k = 1..K; use the *_at(k) accessors for 1-based indexing.
//
// beta_tilde[0] is exactly 0 by the alpha_bar_0 := 1 convention, which makes
// the generic A_k formula undefined at k = 1; A_1 instead uses the same
// coefficient with beta_tilde replaced by beta_1, and the reverse process adds
// no noise at the final step.
struct NoiseSchedule {
    int steps = 0;
    std::vector<double> beta, alpha, alpha_bar, beta_tilde, a_weight;
    std::vector<std::string> warnings;

    double beta_at(int k) const { return beta[k - 1]; }
    double alpha_at(int k) const { return alpha[k - 1]; }
    double alpha_bar_at(int k) const { return alpha_bar[k - 1]; }
    double beta_tilde_at(int k) const { return beta_tilde[k - 1]; }
    double a_weight_at(int k) const { return a_weight[k - 1]; }

    void require_step(int k) const {
        if (k < 1 || k > steps)
            throw ContractError("diffusion step " + std::to_string(k) + " outside 1.." +
                                std::to_string(steps));
    }
};

// beta_k interpolates linearly in sqrt-space between sqrt(beta_1) and
// sqrt(beta_K), then squares ("quadratic" schedule).
NoiseSchedule build_quadratic_schedule(double beta_1, double beta_K, int K);

// Builds a schedule from an explicit beta array (derived tables recomputed).
NoiseSchedule schedule_from_betas(const std::vector<double>& beta);

std::vector<double> compute_beta_tilde(const std::vector<double>& beta,
                                       const std::vector<double>& alpha_bar);

// A_k = beta_k^2 / (2 beta_tilde_k^2 alpha_k (1 - alpha_bar_k)), with the k=1
// special case substituting beta_1 for beta_tilde_1.
std::vector<double> compute_a_weight(const std::vector<double>& beta,
                                     const std::vector<double>& alpha,
                                     const std::vector<double>& alpha_bar,
                                     const std::vector<double>& beta_tilde);

inline std::vector<double> ak_diagnostic(const NoiseSchedule& s) { return s.a_weight; }

} // namespace ccdm
