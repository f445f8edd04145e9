#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ccdm/checkpoint.hpp"
#include "ccdm/contrastive.hpp"
#include "ccdm/data.hpp"

namespace ccdm {

enum class TrainMode { EndToEnd, TwoStage };

struct TrainRun {
    TrainMode mode = TrainMode::EndToEnd;
    int epochs = 200;          // end-to-end epochs, also the two-stage pretrain default
    int pretrain_epochs = 0;   // two-stage only; 0 means `epochs`
    int finetune_epochs = 30;  // two-stage only
    int batch_size = 32;
    double learning_rate = 1e-3;
    double grad_clip = 1.0; // 0 disables
    bool cosine_decay = false;
    int checkpoint_every = 0; // epochs; 0 keeps only best + last
    uint64_t master_seed = 0;

    void validate() const {
        if (epochs < 1 || batch_size < 1) throw ConfigError("train needs positive epochs/batch_size");
        if (learning_rate <= 0) throw ConfigError("learning_rate must be > 0");
        if (mode == TrainMode::TwoStage && finetune_epochs < 1)
            throw ConfigError("two_stage needs positive finetune_epochs");
    }
};

struct EpochRecord {
    std::string phase;
    int epoch = 0;
    int64_t step = 0; // global optimizer step count at epoch end
    double denoise_loss = 0;
    double contrast_loss = 0;
    double total = 0;
    double val_denoise = 0;
    double bound_proxy = 0;
    double wall_ms = 0;
};

// Fixed (k, eps) pair pre-drawn per held-out window so the bound proxy and
// validation loss are comparable across checkpoints.
struct ValPair {
    int k = 0;
    Tensor<float> eps;
};

struct BoundProxyReport {
    double total = 0;                 // mean over windows of A_k * ||eps_hat - eps||^2
    std::map<int, double> per_step;   // same sum grouped by k
};

std::vector<ValPair> make_val_pairs(const std::vector<TimeWindow>& windows,
                                    const NoiseSchedule& sched, RngStream& rng);

BoundProxyReport validate_bound_proxy(const DenoiserConfig& cfg, const ParamStore<float>& params,
                                      const std::vector<TimeWindow>& windows,
                                      const std::vector<ValPair>& pairs,
                                      const NoiseSchedule& sched);

// Mean denoise MSE over held-out windows at the fixed (k, eps) pairs.
double validate_denoise_loss(const DenoiserConfig& cfg, const ParamStore<float>& params,
                             const std::vector<TimeWindow>& windows,
                             const std::vector<ValPair>& pairs, const NoiseSchedule& sched);

// Algorithm-1 training loop. Deterministic given (configs, data, master_seed):
// per-purpose RNG substreams keep the eps/k/shuffle draws of a lambda = 0 run
// identical to a contrastive run until the first parameter update.
class Trainer {
public:
    Trainer(DenoiserConfig dcfg, ContrastiveConfig ccfg, NoiseSchedule sched, TrainRun run,
            std::vector<TimeWindow> train_windows, std::vector<TimeWindow> val_windows,
            std::string out_dir = "", std::string config_fingerprint = "");

    // Dispatches end-to-end or two-stage per run.mode.
    void run();

    // One phase with an explicit contrastive weight (two-stage pretraining
    // passes 0). Exposed for tests that inspect the phase boundary.
    void run_phase(const std::string& phase, double lambda, int epochs);

    const ParamStore<float>& params() const { return params_; }
    const std::vector<EpochRecord>& log() const { return log_; }
    const std::vector<ValPair>& val_pairs() const { return val_pairs_; }
    uint64_t k_draws() const { return rng_k_.draw_count(); }

    std::function<void(const EpochRecord&)> on_epoch; // optional observer

private:
    void save_epoch_checkpoints(int epoch, double val_denoise);
    void append_log(const EpochRecord& rec);

    DenoiserConfig dcfg_;
    ContrastiveConfig ccfg_;
    NoiseSchedule sched_;
    TrainRun run_;
    std::vector<std::pair<Tensor<float>, Tensor<float>>> train_; // (x, y0)
    std::vector<TimeWindow> val_windows_;
    std::vector<ValPair> val_pairs_;
    std::string out_dir_;
    std::string fingerprint_;

    ParamStore<float> params_;
    AdamState<float> adam_;
    RngStream rng_k_, rng_eps_, rng_contrast_, rng_shuffle_;
    int64_t global_step_ = 0;
    double best_val_ = 0;
    bool has_best_ = false;
    std::vector<EpochRecord> log_;
};

} // namespace ccdm
