#include "ccdm/cli.hpp"

#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>

#include "json.hpp"

namespace ccdm::cli {

namespace {

namespace fs = std::filesystem;

void apply_overrides(RunConfig& cfg, const Overrides& ov) {
    if (ov.seed) {
        cfg.master_seed = *ov.seed;
        cfg.train.master_seed = *ov.seed;
    }
    if (ov.out_dir) cfg.output_dir = *ov.out_dir;
    if (ov.samples) cfg.evaluation.samples = *ov.samples;
}

// Every run directory gets the resolved config and the tool version.
void write_run_prelude(const RunConfig& cfg) {
    fs::create_directories(cfg.output_dir);
    std::ofstream(cfg.output_dir + "/resolved_config.json") << dump_run_config(cfg);
    std::ofstream(cfg.output_dir + "/VERSION") << kToolVersion << "\n";
}

NoiseSchedule build_schedule_for(const RunConfig& cfg) {
    NoiseSchedule sched =
        build_quadratic_schedule(cfg.schedule.beta_start, cfg.schedule.beta_end, cfg.schedule.steps);
    for (const auto& w : sched.warnings) std::cerr << "warning: " << w << "\n";
    return sched;
}

int guard(const char* what, const std::function<void()>& body) {
    try {
        body();
        return kOk;
    } catch (const ConfigError& e) {
        std::cerr << what << ": config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << what << ": error: " << e.what() << "\n";
        return kRuntimeError;
    }
}

struct LoadedRun {
    RunConfig cfg;
    PreparedData data;
    NoiseSchedule sched;
};

LoadedRun load_run(RunConfig cfg) {
    LoadedRun run{std::move(cfg), {}, {}};
    run.data = prepare_data(run.cfg);
    run.cfg.model.channels = run.data.channels;
    run.cfg.model.validate();
    run.sched = build_schedule_for(run.cfg);
    return run;
}

ForecastEnsemble window_ensemble(const LoadedRun& run, const ParamStore<float>& params,
                                 const TimeWindow& w, size_t window_index) {
    return assemble_ensemble(run.cfg.model, params, w.x.cast<float>(), run.sched,
                             run.cfg.evaluation.samples,
                             derive_seed(run.cfg.master_seed, "eval.window", window_index));
}

MetricsReport evaluate_loaded(const LoadedRun& run, const ParamStore<float>& params,
                              bool write_outputs) {
    const auto& tests = run.data.test_windows;
    if (tests.empty()) throw ConfigError("no test windows to evaluate");
    const bool denorm = run.cfg.evaluation.denormalized_metrics && run.cfg.dataset.normalize;
    MetricsAccumulator acc(run.cfg.model.horizon, run.data.channels);
    for (size_t i = 0; i < tests.size(); ++i) {
        ForecastEnsemble ens = window_ensemble(run, params, tests[i], i);
        Tensor<double> truth = tests[i].y;
        if (denorm) {
            truth = run.data.normalizer.inverse(truth);
            std::vector<Tensor<double>> samples = ens.samples;
            for (auto& s : samples) s = run.data.normalizer.inverse(s);
            ens = ForecastEnsemble::from_samples(std::move(samples));
        }
        acc.add(ens, truth);
        if (write_outputs) {
            const std::string dir = run.cfg.output_dir + "/ensembles/window_" + std::to_string(i);
            write_ensemble_csv(ens, dir, run.data.channel_names);
            write_quantile_csv(ens, truth, dir, run.data.channel_names);
        }
    }
    MetricsReport report = acc.finish();
    report.samples = run.cfg.evaluation.samples;
    report.config_fingerprint = config_fingerprint(run.cfg);
    return report;
}

ParamStore<float> load_params_checked(const LoadedRun& run, const std::string& checkpoint_path) {
    Checkpoint<float> ckpt = load_checkpoint_f32(checkpoint_path);
    const std::string fp = config_fingerprint(run.cfg);
    if (!ckpt.config_fingerprint.empty() && ckpt.config_fingerprint != fp)
        throw ConfigError("checkpoint fingerprint " + ckpt.config_fingerprint +
                          " does not match config fingerprint " + fp);
    return std::move(ckpt.params);
}

} // namespace

void train_with_config(RunConfig cfg) {
    LoadedRun run = load_run(std::move(cfg));
    write_run_prelude(run.cfg);
    Trainer trainer(run.cfg.model, run.cfg.contrastive, run.sched, run.cfg.train,
                    run.data.train_windows, run.data.val_windows, run.cfg.output_dir,
                    config_fingerprint(run.cfg));
    trainer.run();
}

MetricsReport evaluate_with_config(RunConfig cfg, const std::string& checkpoint_path) {
    LoadedRun run = load_run(std::move(cfg));
    ParamStore<float> params = load_params_checked(run, checkpoint_path);
    fs::create_directories(run.cfg.output_dir + "/reports");
    write_run_prelude(run.cfg);
    MetricsReport report = evaluate_loaded(run, params, /*write_outputs=*/true);
    std::ofstream(run.cfg.output_dir + "/reports/metrics.json") << metrics_report_json(report);
    return report;
}

int run_train(const std::string& config_path, const Overrides& ov) {
    return guard("train", [&] {
        RunConfig cfg = load_run_config(config_path);
        apply_overrides(cfg, ov);
        train_with_config(std::move(cfg));
    });
}

int run_evaluate(const std::string& config_path, const std::string& checkpoint_path,
                 const Overrides& ov) {
    return guard("evaluate", [&] {
        RunConfig cfg = load_run_config(config_path);
        apply_overrides(cfg, ov);
        MetricsReport r = evaluate_with_config(std::move(cfg), checkpoint_path);
        std::cout << "mse " << r.mse << " crps " << r.crps << " over " << r.windows << " windows\n";
    });
}

int run_sample(const std::string& config_path, const std::string& checkpoint_path, int window_index,
               const Overrides& ov) {
    return guard("sample", [&] {
        RunConfig cfg = load_run_config(config_path);
        apply_overrides(cfg, ov);
        LoadedRun run = load_run(std::move(cfg));
        ParamStore<float> params = load_params_checked(run, checkpoint_path);
        if (window_index < 0 || window_index >= static_cast<int>(run.data.test_windows.size()))
            throw ConfigError("window index " + std::to_string(window_index) + " outside 0.." +
                              std::to_string(run.data.test_windows.size()) + " test windows");
        write_run_prelude(run.cfg);
        const auto& w = run.data.test_windows[window_index];
        ForecastEnsemble ens = window_ensemble(run, params, w, static_cast<size_t>(window_index));
        const std::string dir =
            run.cfg.output_dir + "/ensembles/window_" + std::to_string(window_index);
        write_ensemble_csv(ens, dir, run.data.channel_names);
        write_quantile_csv(ens, w.y, dir, run.data.channel_names);
        std::cout << "wrote ensemble of " << ens.samples.size() << " trajectories to " << dir << "\n";
    });
}

namespace {

struct VariantResult {
    std::string name;
    MetricsReport report;
};

// Trains and evaluates one config under out_dir/<name>, sharing the parent
// master seed so data order and initialization match across variants.
VariantResult run_variant(RunConfig cfg, const std::string& parent_out, const std::string& name) {
    cfg.output_dir = parent_out + "/" + name;
    LoadedRun run = load_run(std::move(cfg));
    write_run_prelude(run.cfg);
    Trainer trainer(run.cfg.model, run.cfg.contrastive, run.sched, run.cfg.train,
                    run.data.train_windows, run.data.val_windows, run.cfg.output_dir,
                    config_fingerprint(run.cfg));
    trainer.run();
    MetricsReport report = evaluate_loaded(run, trainer.params(), /*write_outputs=*/false);
    report.samples = run.cfg.evaluation.samples;
    std::ofstream(run.cfg.output_dir + "/reports/metrics.json")
        << metrics_report_json(report);
    return {name, report};
}

} // namespace

int run_ablate(const std::string& config_path, const Overrides& ov) {
    return guard("ablate", [&] {
        RunConfig base = load_run_config(config_path);
        apply_overrides(base, ov);
        fs::create_directories(base.output_dir);
        fs::create_directories(base.output_dir + "/reports");
        std::ofstream(base.output_dir + "/resolved_config.json") << dump_run_config(base);
        std::ofstream(base.output_dir + "/VERSION") << kToolVersion << "\n";

        RunConfig no_contrast = base;
        no_contrast.contrastive.lambda = 0.0;
        RunConfig no_dit = base;
        no_dit.model.channel_mix_attention = false;

        std::vector<VariantResult> rows;
        rows.push_back(run_variant(base, base.output_dir, "ccdm_full"));
        rows.push_back(run_variant(no_contrast, base.output_dir, "no_contrastive"));
        rows.push_back(run_variant(no_dit, base.output_dir, "no_channel_dit"));

        const double base_mse = rows[0].report.mse, base_crps = rows[0].report.crps;
        nlohmann::json j = nlohmann::json::array();
        std::ofstream csv(base.output_dir + "/reports/ablation.csv");
        csv << "variant,mse,crps,mse_delta_pct,crps_delta_pct\n";
        for (const auto& row : rows) {
            const double dm = 100.0 * (row.report.mse - base_mse) / base_mse;
            const double dc = 100.0 * (row.report.crps - base_crps) / base_crps;
            j.push_back({{"variant", row.name},
                         {"mse", row.report.mse},
                         {"crps", row.report.crps},
                         {"mse_delta_pct", dm},
                         {"crps_delta_pct", dc}});
            csv << row.name << "," << row.report.mse << "," << row.report.crps << "," << dm << ","
                << dc << "\n";
            std::cout << row.name << ": mse " << row.report.mse << " crps " << row.report.crps
                      << "\n";
        }
        std::ofstream(base.output_dir + "/reports/ablation.json") << j.dump(2) << "\n";
    });
}

int run_sweep(const std::string& config_path, const std::string& axis,
              const std::vector<double>& values, bool parallel, const Overrides& ov) {
    return guard("sweep", [&] {
        if (values.empty()) throw ConfigError("sweep needs at least one value");
        if (axis != "lambda" && axis != "negatives" && axis != "tau")
            throw ConfigError("sweep axis must be lambda, negatives or tau");
        RunConfig base = load_run_config(config_path);
        apply_overrides(base, ov);
        fs::create_directories(base.output_dir + "/reports");
        std::ofstream(base.output_dir + "/resolved_config.json") << dump_run_config(base);
        std::ofstream(base.output_dir + "/VERSION") << kToolVersion << "\n";

        auto make_variant = [&](double v) {
            RunConfig cfg = base;
            if (axis == "lambda")
                cfg.contrastive.lambda = v;
            else if (axis == "negatives")
                cfg.contrastive.negatives_per_type = static_cast<int>(v);
            else
                cfg.contrastive.tau = v;
            return cfg;
        };
        auto value_name = [&](double v) {
            std::string s = axis + "_" + std::to_string(v);
            for (char& c : s)
                if (c == '.') c = 'p';
            return s;
        };

        std::vector<VariantResult> rows(values.size());
        if (parallel) {
            std::vector<std::future<VariantResult>> futs;
            for (double v : values)
                futs.push_back(std::async(std::launch::async, [&, v] {
                    return run_variant(make_variant(v), base.output_dir, value_name(v));
                }));
            for (size_t i = 0; i < futs.size(); ++i) rows[i] = futs[i].get();
        } else {
            for (size_t i = 0; i < values.size(); ++i)
                rows[i] = run_variant(make_variant(values[i]), base.output_dir, value_name(values[i]));
        }

        std::ofstream csv(base.output_dir + "/reports/sweep_" + axis + ".csv");
        csv << "value,mse,crps\n";
        for (size_t i = 0; i < values.size(); ++i) {
            csv << values[i] << "," << rows[i].report.mse << "," << rows[i].report.crps << "\n";
            std::cout << axis << "=" << values[i] << ": mse " << rows[i].report.mse << " crps "
                      << rows[i].report.crps << "\n";
        }
    });
}

} // namespace ccdm::cli
