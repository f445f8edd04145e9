#include "ccdm/schedule.hpp"

#include <cmath>

namespace ccdm {

std::vector<double> compute_beta_tilde(const std::vector<double>& beta,
                                       const std::vector<double>& alpha_bar) {
    std::vector<double> bt(beta.size());
    for (size_t i = 0; i < beta.size(); ++i) {
        const double prev = (i == 0) ? 1.0 : alpha_bar[i - 1]; // alpha_bar_0 := 1
        bt[i] = (1.0 - prev) / (1.0 - alpha_bar[i]) * beta[i];
    }
    return bt;
}

std::vector<double> compute_a_weight(const std::vector<double>& beta,
                                     const std::vector<double>& alpha,
                                     const std::vector<double>& alpha_bar,
                                     const std::vector<double>& beta_tilde) {
    std::vector<double> a(beta.size());
    for (size_t i = 0; i < beta.size(); ++i) {
        const double bt = (i == 0) ? beta[0] : beta_tilde[i];
        a[i] = beta[i] * beta[i] / (2.0 * bt * bt * alpha[i] * (1.0 - alpha_bar[i]));
    }
    return a;
}

NoiseSchedule schedule_from_betas(const std::vector<double>& beta) {
    if (beta.empty()) throw ConfigError("noise schedule needs at least one step");
    NoiseSchedule s;
    s.steps = static_cast<int>(beta.size());
    s.beta = beta;
    s.alpha.resize(beta.size());
    s.alpha_bar.resize(beta.size());
    double prod = 1.0;
    for (size_t i = 0; i < beta.size(); ++i) {
        if (!(beta[i] > 0.0 && beta[i] < 1.0))
            throw ConfigError("beta_" + std::to_string(i + 1) + " = " + std::to_string(beta[i]) +
                              " outside (0,1)");
        if (i > 0 && beta[i] < beta[i - 1])
            throw ConfigError("beta sequence must be non-decreasing");
        s.alpha[i] = 1.0 - beta[i];
        prod *= s.alpha[i];
        s.alpha_bar[i] = prod;
    }
    s.beta_tilde = compute_beta_tilde(s.beta, s.alpha_bar);
    s.a_weight = compute_a_weight(s.beta, s.alpha, s.alpha_bar, s.beta_tilde);
    if (s.alpha_bar.back() > 0.01)
        s.warnings.push_back("alpha_bar_K = " + std::to_string(s.alpha_bar.back()) +
                             " > 0.01; terminal state is far from standard normal");
    return s;
}

NoiseSchedule build_quadratic_schedule(double beta_1, double beta_K, int K) {
    if (K < 1) throw ConfigError("schedule steps must be >= 1");
    if (K == 1) {
        if (!(beta_1 > 0.0 && beta_1 < 1.0)) throw ConfigError("beta_1 outside (0,1)");
        return schedule_from_betas({beta_1});
    }
    if (!(0.0 < beta_1 && beta_1 < beta_K && beta_K < 1.0))
        throw ConfigError("need 0 < beta_start < beta_end < 1, got (" + std::to_string(beta_1) +
                          ", " + std::to_string(beta_K) + ")");
    const double r1 = std::sqrt(beta_1), rK = std::sqrt(beta_K);
    std::vector<double> beta(K);
    for (int k = 1; k <= K; ++k) {
        const double r = r1 + (rK - r1) * static_cast<double>(k - 1) / (K - 1);
        beta[k - 1] = r * r;
    }
    // exact endpoints despite rounding
    beta.front() = beta_1;
    beta.back() = beta_K;
    return schedule_from_betas(beta);
}

} // namespace ccdm
