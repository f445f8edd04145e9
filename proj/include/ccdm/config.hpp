#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "ccdm/contrastive.hpp"
#include "ccdm/data.hpp"
#include "ccdm/denoiser.hpp"
#include "ccdm/training.hpp"

namespace ccdm {

struct DatasetConfig {
    std::string kind; // "csv" | "synth"
    // csv
    std::string path;
    bool timestamp_column = true;
    int channels = 0; // 0 = accept header count
    std::string missing_policy = "reject";
    // synth
    std::string synth_kind; // "var_process" | "sinusoid_mixture"
    std::optional<VarSpec> var_spec;
    std::optional<SinusoidSpec> sinusoid_spec;

    std::array<int64_t, 3> split = {0, 0, 0};
    bool normalize = true;
};

struct WindowConfig {
    int lookback = 0;
    int horizon = 0;
    int train_stride = 1;
    int eval_stride = 0; // 0 = horizon (non-overlapping test windows)
};

struct ScheduleConfig {
    double beta_start = 1e-4;
    double beta_end = 0.5;
    int steps = 50;
};

struct EvalConfig {
    int samples = 100;
    bool denormalized_metrics = false;
};

struct RunConfig {
    DatasetConfig dataset;
    WindowConfig window;
    DenoiserConfig model; // lookback/horizon/channels filled from window + data
    ScheduleConfig schedule;
    ContrastiveConfig contrastive;
    TrainRun train;
    EvalConfig evaluation;
    std::string output_dir;
    uint64_t master_seed = 0;
};

// Strict parse: unknown keys are rejected with their path, missing required
// keys are named. Defaults follow the paper-parity tables.
RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config_json(const std::string& json_text, const std::string& origin);

// Canonical JSON of the resolved config (what gets echoed into run dirs).
std::string dump_run_config(const RunConfig& cfg);

// Hash over the model-relevant subset (dataset, window, model, schedule);
// checked between checkpoints and evaluation configs.
std::string config_fingerprint(const RunConfig& cfg);

struct PreparedData {
    SeriesFrame train, val, test; // normalized when cfg.dataset.normalize
    Normalizer normalizer;
    std::vector<TimeWindow> train_windows, val_windows, test_windows;
    std::vector<std::string> channel_names;
    int channels = 0;
};

// Loads or synthesizes the series, splits chronologically, fits the
// normalizer on the train split only, and windows each split.
PreparedData prepare_data(const RunConfig& cfg);

} // namespace ccdm
