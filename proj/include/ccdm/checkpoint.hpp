#pragma once

#include <optional>
#include <string>

#include "ccdm/adam.hpp"

namespace ccdm {

// Self-describing binary container: parameter names -> shape + raw values,
// optional optimizer state, schema version and a config fingerprint.
// Round-trips are lossless (raw IEEE bytes).
inline constexpr int kCheckpointSchemaVersion = 1;

template <typename S>
struct Checkpoint {
    int schema_version = kCheckpointSchemaVersion;
    std::string config_fingerprint;
    ParamStore<S> params;
    std::optional<AdamState<S>> adam;
};

void save_checkpoint(const std::string& path, const Checkpoint<float>& ckpt);
void save_checkpoint(const std::string& path, const Checkpoint<double>& ckpt);
Checkpoint<float> load_checkpoint_f32(const std::string& path);
Checkpoint<double> load_checkpoint_f64(const std::string& path);

// FNV-1a over the file bytes; used for determinism checks and logs.
uint64_t hash_file(const std::string& path);

} // namespace ccdm
