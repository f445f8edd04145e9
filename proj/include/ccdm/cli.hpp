#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ccdm/config.hpp"
#include "ccdm/evaluation.hpp"

namespace ccdm::cli {

// Exit codes shared by every subcommand.
inline constexpr int kOk = 0;
inline constexpr int kConfigError = 2;
inline constexpr int kRuntimeError = 3;

struct Overrides {
    std::optional<uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> samples; // evaluate/sample only
};

int run_train(const std::string& config_path, const Overrides& ov = {});
int run_evaluate(const std::string& config_path, const std::string& checkpoint_path,
                 const Overrides& ov = {});
int run_sample(const std::string& config_path, const std::string& checkpoint_path, int window_index,
               const Overrides& ov = {});
int run_ablate(const std::string& config_path, const Overrides& ov = {});
int run_sweep(const std::string& config_path, const std::string& axis,
              const std::vector<double>& values, bool parallel, const Overrides& ov = {});

// Internal entry points that throw instead of returning exit codes; the run_*
// wrappers map exceptions to codes. Exposed for tests.
void train_with_config(RunConfig cfg);
MetricsReport evaluate_with_config(RunConfig cfg, const std::string& checkpoint_path);

} // namespace ccdm::cli
