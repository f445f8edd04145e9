#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ccdm/cli.hpp"
#include "ccdm/common.hpp"

int main(int argc, char** argv) {
    CLI::App app{"channel-aware contrastive conditional diffusion forecaster"};
    app.set_version_flag("--version", std::string(ccdm::kToolVersion));
    app.require_subcommand(1);

    std::string config_path, checkpoint_path, axis;
    std::vector<double> values;
    int window_index = 0;
    bool parallel = false;
    ccdm::cli::Overrides ov;
    uint64_t seed = 0;
    std::string out_dir;
    int samples = 0;

    auto add_common = [&](CLI::App* cmd, bool with_checkpoint) {
        cmd->add_option("--config", config_path, "run config file (json)")->required();
        cmd->add_option("--seed", seed, "override master seed");
        cmd->add_option("--out", out_dir, "override output directory");
        if (with_checkpoint)
            cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    };

    CLI::App* train = app.add_subcommand("train", "train a forecaster");
    add_common(train, false);

    CLI::App* evaluate = app.add_subcommand("evaluate", "sample ensembles over the test split and report MSE/CRPS");
    add_common(evaluate, true);
    evaluate->add_option("--samples", samples, "override ensemble size");

    CLI::App* sample = app.add_subcommand("sample", "write the forecast ensemble for one test window");
    add_common(sample, true);
    sample->add_option("--window", window_index, "test window index");
    sample->add_option("--samples", samples, "override ensemble size");

    CLI::App* ablate = app.add_subcommand("ablate", "train/evaluate full, no-contrastive and no-DiT variants");
    add_common(ablate, false);

    CLI::App* sweep = app.add_subcommand("sweep", "train/evaluate across one hyperparameter axis");
    add_common(sweep, false);
    sweep->add_option("--axis", axis, "lambda | negatives | tau")->required();
    sweep->add_option("--values", values, "axis values")->required()->delimiter(',');
    sweep->add_flag("--parallel", parallel, "run values concurrently");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : ccdm::cli::kConfigError;
    }

    for (CLI::App* cmd : {train, evaluate, sample, ablate, sweep}) {
        if (!cmd->parsed()) continue;
        if (auto* o = cmd->get_option_no_throw("--seed"); o && o->count()) ov.seed = seed;
        if (auto* o = cmd->get_option_no_throw("--out"); o && o->count()) ov.out_dir = out_dir;
        if (auto* o = cmd->get_option_no_throw("--samples"); o && o->count()) ov.samples = samples;
    }

    if (train->parsed()) return ccdm::cli::run_train(config_path, ov);
    if (evaluate->parsed()) return ccdm::cli::run_evaluate(config_path, checkpoint_path, ov);
    if (sample->parsed()) return ccdm::cli::run_sample(config_path, checkpoint_path, window_index, ov);
    if (ablate->parsed()) return ccdm::cli::run_ablate(config_path, ov);
    if (sweep->parsed()) return ccdm::cli::run_sweep(config_path, axis, values, parallel, ov);
    return ccdm::cli::kConfigError;
}
