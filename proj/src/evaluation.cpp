#include "ccdm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace ccdm {

ForecastEnsemble ForecastEnsemble::from_samples(std::vector<Tensor<double>> samples) {
    if (samples.empty()) throw ContractError("ensemble needs at least one sample");
    ForecastEnsemble ens;
    ens.horizon = samples[0].rows();
    ens.channels = samples[0].cols();
    for (const auto& s : samples)
        if (s.rows() != ens.horizon || s.cols() != ens.channels)
            throw ShapeError("ensemble samples disagree in shape");
    ens.samples = std::move(samples);
    const size_t s = ens.samples.size();
    ens.sorted.resize(static_cast<size_t>(ens.horizon) * ens.channels * s);
    ens.point_forecast = Tensor<double>::zeros({ens.horizon, ens.channels});
    std::vector<double> buf(s);
    for (int t = 0; t < ens.horizon; ++t)
        for (int d = 0; d < ens.channels; ++d) {
            for (size_t i = 0; i < s; ++i) buf[i] = ens.samples[i].at(t, d);
            std::sort(buf.begin(), buf.end());
            std::copy(buf.begin(), buf.end(),
                      ens.sorted.begin() + (static_cast<size_t>(t) * ens.channels + d) * s);
            const double median = (s % 2 == 1) ? buf[s / 2] : 0.5 * (buf[s / 2 - 1] + buf[s / 2]);
            ens.point_forecast.at(t, d) = median;
        }
    return ens;
}

double ForecastEnsemble::quantile(int t, int d, double p) const {
    const auto v = sorted_at(t, d);
    const size_t s = v.size();
    if (s == 1) return v[0];
    const double h = p * static_cast<double>(s - 1);
    const size_t lo = static_cast<size_t>(std::floor(h));
    const size_t hi = std::min(lo + 1, s - 1);
    const double frac = h - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

ForecastEnsemble assemble_ensemble_fn(int horizon, int channels, const EpsFn<float>& denoiser,
                                      const NoiseSchedule& sched, int samples,
                                      uint64_t master_seed) {
    if (samples < 1) throw ConfigError("ensemble size must be >= 1");
    std::vector<Tensor<double>> out;
    out.reserve(samples);
    for (int s = 0; s < samples; ++s) {
        RngStream rng = make_stream(master_seed, "trajectory", static_cast<uint64_t>(s));
        try {
            out.push_back(
                sample_trajectory<float>(horizon, channels, denoiser, sched, rng).cast<double>());
        } catch (const SamplingError& e) {
            throw SamplingError(std::string(e.what()) + " (trajectory seed index " +
                                std::to_string(s) + ")");
        }
    }
    return ForecastEnsemble::from_samples(std::move(out));
}

ForecastEnsemble assemble_ensemble(const DenoiserConfig& cfg, const ParamStore<float>& params,
                                   const Tensor<float>& x, const NoiseSchedule& sched, int samples,
                                   uint64_t master_seed) {
    EpsFn<float> fn = [&](const Tensor<float>& y, int k) { return denoise(cfg, params, y, x, k); };
    return assemble_ensemble_fn(cfg.horizon, cfg.channels, fn, sched, samples, master_seed);
}

double mse(const Tensor<double>& point_forecast, const Tensor<double>& truth) {
    if (!point_forecast.same_shape(truth))
        throw ShapeError("mse: forecast " + shape_str(point_forecast.shape) + " vs truth " +
                         shape_str(truth.shape));
    double acc = 0;
    for (size_t i = 0; i < truth.size(); ++i) {
        const double d = point_forecast.values[i] - truth.values[i];
        acc += d * d;
    }
    return acc / static_cast<double>(truth.size());
}

double crps_sorted(std::span<const double> sorted_samples, double truth) {
    const size_t s = sorted_samples.size();
    if (s == 0) throw ContractError("crps needs at least one sample");
    double mae = 0, spread = 0;
    for (size_t i = 0; i < s; ++i) {
        mae += std::abs(sorted_samples[i] - truth);
        spread += (2.0 * static_cast<double>(i) + 1.0 - static_cast<double>(s)) * sorted_samples[i];
    }
    return mae / static_cast<double>(s) - spread / (static_cast<double>(s) * static_cast<double>(s));
}

double crps(const ForecastEnsemble& ens, const Tensor<double>& truth) {
    if (truth.rows() != ens.horizon || truth.cols() != ens.channels)
        throw ShapeError("crps: truth " + shape_str(truth.shape) + " vs ensemble [" +
                         std::to_string(ens.horizon) + "," + std::to_string(ens.channels) + "]");
    double acc = 0;
    for (int t = 0; t < ens.horizon; ++t)
        for (int d = 0; d < ens.channels; ++d) acc += crps_sorted(ens.sorted_at(t, d), truth.at(t, d));
    return acc / static_cast<double>(ens.horizon * ens.channels);
}

void MetricsAccumulator::add(const ForecastEnsemble& ens, const Tensor<double>& truth) {
    if (ens.horizon != h_ || ens.channels != d_) throw ShapeError("accumulator shape mismatch");
    WindowMetrics wm;
    wm.mse = mse(ens.point_forecast, truth);
    wm.crps = crps(ens, truth);
    windows_.push_back(wm);
    for (int t = 0; t < h_; ++t)
        for (int d = 0; d < d_; ++d) {
            const double diff = ens.point_forecast.at(t, d) - truth.at(t, d);
            mse_td_[static_cast<size_t>(t) * d_ + d] += diff * diff;
            crps_td_[static_cast<size_t>(t) * d_ + d] += crps_sorted(ens.sorted_at(t, d), truth.at(t, d));
        }
}

MetricsReport MetricsAccumulator::finish() const {
    if (windows_.empty()) throw ContractError("no windows evaluated");
    MetricsReport r;
    r.windows = static_cast<int>(windows_.size());
    r.per_window = windows_;
    for (const auto& w : windows_) {
        r.mse += w.mse;
        r.crps += w.crps;
    }
    r.mse /= r.windows;
    r.crps /= r.windows;
    r.per_channel_mse.assign(d_, 0.0);
    r.per_channel_crps.assign(d_, 0.0);
    r.per_horizon_mse.assign(h_, 0.0);
    r.per_horizon_crps.assign(h_, 0.0);
    for (int t = 0; t < h_; ++t)
        for (int d = 0; d < d_; ++d) {
            const double m = mse_td_[static_cast<size_t>(t) * d_ + d] / r.windows;
            const double c = crps_td_[static_cast<size_t>(t) * d_ + d] / r.windows;
            r.per_channel_mse[d] += m / h_;
            r.per_channel_crps[d] += c / h_;
            r.per_horizon_mse[t] += m / d_;
            r.per_horizon_crps[t] += c / d_;
        }
    return r;
}

MetricsReport evaluate_climatology(const SeriesFrame& train, const std::vector<TimeWindow>& tests) {
    if (tests.empty()) throw ContractError("no test windows for climatology");
    const int h = tests[0].y.rows(), d = tests[0].y.cols();
    // per-channel sorted train values shared across all horizon steps
    std::vector<std::vector<double>> sorted(d);
    std::vector<double> means(d, 0.0);
    for (int c = 0; c < d; ++c) {
        sorted[c].resize(train.length);
        for (int64_t t = 0; t < train.length; ++t) sorted[c][t] = train.at(t, c);
        std::sort(sorted[c].begin(), sorted[c].end());
        for (double v : sorted[c]) means[c] += v;
        means[c] /= static_cast<double>(train.length);
    }
    // The climatology ensemble is identical for every window and horizon
    // step, so the metrics are computed directly on the shared sorted arrays.
    MetricsReport r;
    r.windows = static_cast<int>(tests.size());
    r.per_channel_mse.assign(d, 0.0);
    r.per_channel_crps.assign(d, 0.0);
    r.per_horizon_mse.assign(h, 0.0);
    r.per_horizon_crps.assign(h, 0.0);
    for (const auto& w : tests) {
        WindowMetrics wm;
        for (int t = 0; t < h; ++t)
            for (int c = 0; c < d; ++c) {
                const double diff = means[c] - w.y.at(t, c);
                const double point_mse = diff * diff;
                const double point_crps = crps_sorted(sorted[c], w.y.at(t, c));
                wm.mse += point_mse / (h * d);
                wm.crps += point_crps / (h * d);
                r.per_channel_mse[c] += point_mse / (h * r.windows);
                r.per_channel_crps[c] += point_crps / (h * r.windows);
                r.per_horizon_mse[t] += point_mse / (d * r.windows);
                r.per_horizon_crps[t] += point_crps / (d * r.windows);
            }
        r.per_window.push_back(wm);
        r.mse += wm.mse / r.windows;
        r.crps += wm.crps / r.windows;
    }
    return r;
}

std::string metrics_report_json(const MetricsReport& r) {
    nlohmann::json j;
    j["tool"] = kToolVersion;
    j["mse"] = r.mse;
    j["crps"] = r.crps;
    j["samples"] = r.samples;
    j["windows"] = r.windows;
    j["config_fingerprint"] = r.config_fingerprint;
    j["per_channel"] = {{"mse", r.per_channel_mse}, {"crps", r.per_channel_crps}};
    j["per_horizon"] = {{"mse", r.per_horizon_mse}, {"crps", r.per_horizon_crps}};
    nlohmann::json windows = nlohmann::json::array();
    for (size_t i = 0; i < r.per_window.size(); ++i)
        windows.push_back({{"index", i}, {"mse", r.per_window[i].mse}, {"crps", r.per_window[i].crps}});
    j["per_window"] = windows;
    return j.dump(2) + "\n";
}

namespace {

std::string channel_file_name(const std::vector<std::string>& names, int d) {
    std::string base = d < static_cast<int>(names.size()) ? names[d] : "c" + std::to_string(d);
    for (char& c : base)
        if (!isalnum(static_cast<unsigned char>(c))) c = '_';
    return base;
}

} // namespace

void write_ensemble_csv(const ForecastEnsemble& ens, const std::string& dir,
                        const std::vector<std::string>& channel_names) {
    std::filesystem::create_directories(dir);
    char buf[64];
    for (int d = 0; d < ens.channels; ++d) {
        std::ofstream out(dir + "/samples_" + channel_file_name(channel_names, d) + ".csv");
        out << "t";
        for (size_t s = 0; s < ens.samples.size(); ++s) out << ",s" << s;
        out << "\n";
        for (int t = 0; t < ens.horizon; ++t) {
            out << t;
            for (const auto& sample : ens.samples) {
                std::snprintf(buf, sizeof(buf), "%.9g", sample.at(t, d));
                out << "," << buf;
            }
            out << "\n";
        }
    }
}

void write_quantile_csv(const ForecastEnsemble& ens, const Tensor<double>& truth,
                        const std::string& dir, const std::vector<std::string>& channel_names) {
    std::filesystem::create_directories(dir);
    static constexpr double kQuantiles[] = {0.05, 0.25, 0.5, 0.75, 0.95};
    char buf[64];
    for (int d = 0; d < ens.channels; ++d) {
        std::ofstream out(dir + "/quantiles_" + channel_file_name(channel_names, d) + ".csv");
        out << "t,q05,q25,q50,q75,q95,truth\n";
        for (int t = 0; t < ens.horizon; ++t) {
            out << t;
            for (double q : kQuantiles) {
                std::snprintf(buf, sizeof(buf), "%.9g", ens.quantile(t, d, q));
                out << "," << buf;
            }
            std::snprintf(buf, sizeof(buf), "%.9g", truth.at(t, d));
            out << "," << buf << "\n";
        }
    }
}

} // namespace ccdm
