#include "ccdm/training.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace ccdm {

std::vector<ValPair> make_val_pairs(const std::vector<TimeWindow>& windows,
                                    const NoiseSchedule& sched, RngStream& rng) {
    std::vector<ValPair> pairs;
    pairs.reserve(windows.size());
    for (const auto& w : windows) {
        ValPair p;
        p.k = rng.uniform_int(1, sched.steps);
        p.eps = Tensor<float>::normal({w.y.rows(), w.y.cols()}, rng);
        pairs.push_back(std::move(p));
    }
    return pairs;
}

namespace {

// Sum of squared noise-regression errors for one window at its fixed pair.
double pair_sse(const DenoiserConfig& cfg, const ParamStore<float>& params, const TimeWindow& w,
                const ValPair& p, const NoiseSchedule& sched) {
    const Tensor<float> x = w.x.cast<float>();
    const Tensor<float> y0 = w.y.cast<float>();
    auto nt = forward_noise_with(y0, p.k, sched, p.eps);
    Tensor<float> pred = denoise(cfg, params, nt.y_k, x, p.k);
    double sse = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const double d = static_cast<double>(pred.values[i]) - static_cast<double>(nt.eps.values[i]);
        sse += d * d;
    }
    return sse;
}

} // namespace

BoundProxyReport validate_bound_proxy(const DenoiserConfig& cfg, const ParamStore<float>& params,
                                      const std::vector<TimeWindow>& windows,
                                      const std::vector<ValPair>& pairs,
                                      const NoiseSchedule& sched) {
    if (windows.size() != pairs.size())
        throw ContractError("bound proxy needs one fixed pair per window");
    BoundProxyReport rep;
    for (size_t i = 0; i < windows.size(); ++i) {
        const double weighted = sched.a_weight_at(pairs[i].k) * pair_sse(cfg, params, windows[i], pairs[i], sched);
        rep.total += weighted;
        rep.per_step[pairs[i].k] += weighted;
    }
    if (!windows.empty()) rep.total /= static_cast<double>(windows.size());
    return rep;
}

double validate_denoise_loss(const DenoiserConfig& cfg, const ParamStore<float>& params,
                             const std::vector<TimeWindow>& windows,
                             const std::vector<ValPair>& pairs, const NoiseSchedule& sched) {
    if (windows.empty()) return 0;
    if (windows.size() != pairs.size())
        throw ContractError("validation needs one fixed pair per window");
    double acc = 0;
    for (size_t i = 0; i < windows.size(); ++i)
        acc += pair_sse(cfg, params, windows[i], pairs[i], sched) /
               static_cast<double>(windows[i].y.size());
    return acc / static_cast<double>(windows.size());
}

Trainer::Trainer(DenoiserConfig dcfg, ContrastiveConfig ccfg, NoiseSchedule sched, TrainRun run,
                 std::vector<TimeWindow> train_windows, std::vector<TimeWindow> val_windows,
                 std::string out_dir, std::string config_fingerprint)
    : dcfg_(std::move(dcfg)),
      ccfg_(ccfg),
      sched_(std::move(sched)),
      run_(run),
      val_windows_(std::move(val_windows)),
      out_dir_(std::move(out_dir)),
      fingerprint_(std::move(config_fingerprint)),
      rng_k_(make_stream(run.master_seed, "train.k")),
      rng_eps_(make_stream(run.master_seed, "train.eps")),
      rng_contrast_(make_stream(run.master_seed, "train.contrast")),
      rng_shuffle_(make_stream(run.master_seed, "train.shuffle")) {
    dcfg_.validate();
    run_.validate();
    if (ccfg_.lambda > 0) ccfg_.validate();
    if (train_windows.empty()) throw ConfigError("no training windows");
    train_.reserve(train_windows.size());
    for (const auto& w : train_windows) train_.push_back({w.x.cast<float>(), w.y.cast<float>()});
    RngStream init = make_stream(run_.master_seed, "init");
    params_ = init_denoiser_params<float>(dcfg_, init);
    adam_.lr = run_.learning_rate;
    RngStream vrng = make_stream(run_.master_seed, "val.noise");
    val_pairs_ = make_val_pairs(val_windows_, sched_, vrng);
    if (!out_dir_.empty()) {
        std::filesystem::create_directories(out_dir_ + "/checkpoints");
        std::filesystem::create_directories(out_dir_ + "/logs");
    }
}

void Trainer::append_log(const EpochRecord& rec) {
    log_.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (out_dir_.empty()) return;
    nlohmann::json j = {{"phase", rec.phase},
                        {"epoch", rec.epoch},
                        {"step", rec.step},
                        {"denoise_loss", rec.denoise_loss},
                        {"contrast_loss", rec.contrast_loss},
                        {"total", rec.total},
                        {"val_denoise", rec.val_denoise},
                        {"bound_proxy", rec.bound_proxy},
                        {"wall_ms", rec.wall_ms}};
    std::ofstream out(out_dir_ + "/logs/train.jsonl", std::ios::app);
    out << j.dump() << "\n";
}

void Trainer::save_epoch_checkpoints(int epoch, double val_denoise) {
    if (out_dir_.empty()) return;
    Checkpoint<float> ckpt;
    ckpt.config_fingerprint = fingerprint_;
    ckpt.params = params_;
    ckpt.adam = adam_;
    save_checkpoint(out_dir_ + "/checkpoints/last.ckpt", ckpt);
    if (!has_best_ || val_denoise < best_val_) {
        best_val_ = val_denoise;
        has_best_ = true;
        save_checkpoint(out_dir_ + "/checkpoints/best.ckpt", ckpt);
    }
    if (run_.checkpoint_every > 0 && epoch % run_.checkpoint_every == 0)
        save_checkpoint(out_dir_ + "/checkpoints/epoch_" + std::to_string(epoch) + ".ckpt", ckpt);
}

void Trainer::run_phase(const std::string& phase, double lambda, int epochs) {
    ContrastiveConfig phase_cfg = ccfg_;
    phase_cfg.lambda = lambda;
    std::vector<int> order(train_.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    const int64_t phase_steps =
        static_cast<int64_t>(epochs) *
        ((static_cast<int64_t>(train_.size()) + run_.batch_size - 1) / run_.batch_size);
    int64_t phase_step = 0;

    for (int epoch = 1; epoch <= epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
            std::swap(order[i], order[rng_shuffle_.uniform_int(0, i)]);
        double ep_denoise = 0, ep_contrast = 0, ep_total = 0;
        int64_t ep_samples = 0;
        for (size_t b0 = 0; b0 < order.size(); b0 += run_.batch_size) {
            if (run_.cosine_decay)
                adam_.lr = run_.learning_rate * 0.5 *
                           (1.0 + std::cos(M_PI * static_cast<double>(phase_step) /
                                           static_cast<double>(phase_steps)));
            GradMap<float> grads;
            const size_t b1 = std::min(b0 + run_.batch_size, order.size());
            for (size_t bi = b0; bi < b1; ++bi) {
                const auto& [x, y0] = train_[order[bi]];
                const int k = rng_k_.uniform_int(1, sched_.steps); // one k per sample
                StepLoss sl = ccdm_step_loss(dcfg_, params_, phase_cfg, sched_, y0, x, k, rng_eps_,
                                             rng_contrast_, &grads);
                ep_denoise += sl.denoise_part;
                ep_contrast += sl.contrast_part;
                ep_total += sl.total;
                ++ep_samples;
                if (!std::isfinite(sl.total) || sl.total > 1e6)
                    throw TrainingError("training diverged at step " + std::to_string(global_step_) +
                                        " (loss " + std::to_string(sl.total) +
                                        "); last-good checkpoint retained");
            }
            const float inv = 1.0f / static_cast<float>(b1 - b0);
            for (auto& [name, grad] : grads)
                for (auto& v : grad.values) v *= inv;
            if (run_.grad_clip > 0) clip_global_norm(grads, run_.grad_clip);
            adam_step(params_, grads, adam_);
            ++global_step_;
            ++phase_step;
        }
        EpochRecord rec;
        rec.phase = phase;
        rec.epoch = epoch;
        rec.step = global_step_;
        rec.denoise_loss = ep_denoise / static_cast<double>(ep_samples);
        rec.contrast_loss = ep_contrast / static_cast<double>(ep_samples);
        rec.total = ep_total / static_cast<double>(ep_samples);
        rec.val_denoise = validate_denoise_loss(dcfg_, params_, val_windows_, val_pairs_, sched_);
        rec.bound_proxy =
            val_windows_.empty()
                ? 0.0
                : validate_bound_proxy(dcfg_, params_, val_windows_, val_pairs_, sched_).total;
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                          .count();
        append_log(rec);
        save_epoch_checkpoints(epoch, rec.val_denoise);
    }
}

void Trainer::run() {
    if (run_.mode == TrainMode::EndToEnd) {
        run_phase("train", ccfg_.lambda, run_.epochs);
        return;
    }
    const int pre = run_.pretrain_epochs > 0 ? run_.pretrain_epochs : run_.epochs;
    run_phase("pretrain", 0.0, pre);
    if (!out_dir_.empty()) {
        Checkpoint<float> ckpt;
        ckpt.config_fingerprint = fingerprint_;
        ckpt.params = params_;
        ckpt.adam = adam_;
        save_checkpoint(out_dir_ + "/checkpoints/pretrain.ckpt", ckpt);
    }
    run_phase("finetune", ccfg_.lambda, run_.finetune_epochs);
}

} // namespace ccdm
