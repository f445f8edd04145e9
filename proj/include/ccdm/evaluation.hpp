#pragma once

#include <span>
#include <string>
#include <vector>

#include "ccdm/data.hpp"
#include "ccdm/denoiser.hpp"

namespace ccdm {

// S sampled trajectories plus per-point sorted caches and the 50%-quantile
// point forecast (midpoint of the two central order statistics for even S).
struct ForecastEnsemble {
    int horizon = 0;
    int channels = 0;
    std::vector<Tensor<double>> samples;
    std::vector<double> sorted;    // [H * D * S], ascending per (t, d)
    Tensor<double> point_forecast; // [H, D]

    std::span<const double> sorted_at(int t, int d) const {
        const size_t s = samples.size();
        return {sorted.data() + (static_cast<size_t>(t) * channels + d) * s, s};
    }

    // Linear interpolation between order statistics; p = 0.5 reproduces the
    // even-S midpoint convention of the point forecast.
    double quantile(int t, int d, double p) const;

    static ForecastEnsemble from_samples(std::vector<Tensor<double>> samples);
};

// S independent reverse-chain trajectories with per-trajectory substreams
// derived from the master seed.
ForecastEnsemble assemble_ensemble(const DenoiserConfig& cfg, const ParamStore<float>& params,
                                   const Tensor<float>& x, const NoiseSchedule& sched, int samples,
                                   uint64_t master_seed);

// Generic form for stubbed denoisers in tests.
ForecastEnsemble assemble_ensemble_fn(int horizon, int channels, const EpsFn<float>& denoiser,
                                      const NoiseSchedule& sched, int samples, uint64_t master_seed);

double mse(const Tensor<double>& point_forecast, const Tensor<double>& truth);

// Empirical CRPS of one sorted sample set against a scalar truth:
// (1/S) sum |x_s - y|  -  (1/(2 S^2)) sum_{s,s'} |x_s - x_s'|.
double crps_sorted(std::span<const double> sorted_samples, double truth);

double crps(const ForecastEnsemble& ensemble, const Tensor<double>& truth);

struct WindowMetrics {
    double mse = 0;
    double crps = 0;
};

struct MetricsReport {
    double mse = 0;
    double crps = 0;
    std::vector<double> per_channel_mse, per_channel_crps;
    std::vector<double> per_horizon_mse, per_horizon_crps;
    std::vector<WindowMetrics> per_window;
    int samples = 0;
    int windows = 0;
    std::string config_fingerprint;
};

// Aggregates per-point metrics over a set of (ensemble, truth) pairs.
// Aggregate values are means over windows.
class MetricsAccumulator {
public:
    MetricsAccumulator(int horizon, int channels) : h_(horizon), d_(channels) {
        mse_td_.assign(static_cast<size_t>(horizon) * channels, 0.0);
        crps_td_.assign(static_cast<size_t>(horizon) * channels, 0.0);
    }
    void add(const ForecastEnsemble& ens, const Tensor<double>& truth);
    MetricsReport finish() const;

private:
    int h_, d_;
    std::vector<double> mse_td_, crps_td_;
    std::vector<WindowMetrics> windows_;
};

// Climatology baseline: the point forecast is the per-channel train mean and
// the predictive ensemble is the per-channel train marginal, both constant
// over the horizon.
MetricsReport evaluate_climatology(const SeriesFrame& train, const std::vector<TimeWindow>& tests);

std::string metrics_report_json(const MetricsReport& report);

// Plot-ready CSVs for one window: per channel, rows are horizon steps.
void write_ensemble_csv(const ForecastEnsemble& ens, const std::string& dir,
                        const std::vector<std::string>& channel_names);
void write_quantile_csv(const ForecastEnsemble& ens, const Tensor<double>& truth,
                        const std::string& dir, const std::vector<std::string>& channel_names);

} // namespace ccdm
