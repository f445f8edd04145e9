#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ccdm/tensor.hpp"

namespace ccdm {

// Dense multivariate series, row-major [T, D]. Ingestion guarantees no gaps.
struct SeriesFrame {
    std::vector<std::string> channel_names;
    int channels = 0;
    int64_t length = 0;
    std::vector<double> values; // length * channels
    std::string metadata;
    int filled_rows = 0; // rows repaired by forward-fill during ingestion

    double at(int64_t t, int d) const { return values[static_cast<size_t>(t) * channels + d]; }
    double& at(int64_t t, int d) { return values[static_cast<size_t>(t) * channels + d]; }
};

struct CsvSchema {
    bool first_column_timestamp = true;
    int expect_channels = 0; // 0 = accept whatever the header declares
    enum class Missing { Reject, ForwardFill } missing = Missing::Reject;
};

SeriesFrame load_csv(const std::string& path, const CsvSchema& schema);
void save_csv(const SeriesFrame& frame, const std::string& path, bool timestamp_column = true);

// Contiguous, ordered, non-overlapping train/val/test segments.
std::array<SeriesFrame, 3> chronological_split(const SeriesFrame& frame,
                                               const std::array<int64_t, 3>& sizes);

struct WindowSpec {
    int lookback = 0; // L
    int horizon = 0;  // H
    int stride = 1;
};

// One paired (lookback, target) instance.
struct TimeWindow {
    Tensor<double> x; // [L, D]
    Tensor<double> y; // [H, D]
};

// Sliding windows; returns an empty sequence (with a stderr warning) when the
// frame is shorter than L + H.
std::vector<TimeWindow> make_windows(const SeriesFrame& frame, const WindowSpec& spec);

// Per-channel z-score fitted on the training split only.
struct Normalizer {
    std::vector<double> mean, std;

    static Normalizer fit(const SeriesFrame& train);
    SeriesFrame transform(const SeriesFrame& frame) const;
    SeriesFrame inverse(const SeriesFrame& frame) const;
    Tensor<double> inverse(const Tensor<double>& t) const;
};

struct SinusoidSpec {
    int channels = 0;
    int64_t length = 0;
    uint64_t seed = 0;
    std::vector<std::vector<double>> freqs, amps, phases; // per channel
    double noise_sd = 0.0;
    double noise_corr = 0.0; // weight of a shared noise component
};

struct VarSpec {
    int channels = 0;
    int64_t length = 0;
    uint64_t seed = 0;
    std::vector<std::vector<double>> coeff; // D x D lag-1 coefficients
    double noise_sd = 1.0;
    int64_t burn_in = 100;
};

SeriesFrame synth_sinusoid(const SinusoidSpec& spec);
SeriesFrame synth_var(const VarSpec& spec);

// Gelfand-style upper estimate of the spectral radius via ||A^64||_F^(1/64).
double spectral_radius_estimate(const std::vector<std::vector<double>>& coeff);

} // namespace ccdm
