#include "ccdm/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace ccdm {

namespace {

using nlohmann::json;

[[noreturn]] void missing_key(const std::string& ctx, const std::string& key) {
    throw ConfigError("missing required key " + (ctx.empty() ? key : ctx + "." + key));
}

void check_keys(const json& j, const std::string& ctx, const std::set<std::string>& required,
                const std::set<std::string>& optional) {
    if (!j.is_object()) throw ConfigError((ctx.empty() ? "config" : ctx) + " must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!required.count(key) && !optional.count(key))
            throw ConfigError("unknown key " + (ctx.empty() ? key : ctx + "." + key));
    }
    for (const auto& key : required)
        if (!j.contains(key)) missing_key(ctx, key);
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

std::vector<std::vector<double>> get_matrix(const json& j, const std::string& ctx) {
    if (!j.is_array()) throw ConfigError(ctx + " must be a 2-D array");
    std::vector<std::vector<double>> m;
    for (const auto& row : j) m.push_back(row.get<std::vector<double>>());
    return m;
}

DatasetConfig parse_dataset(const json& j) {
    check_keys(j, "dataset", {"kind", "split"},
               {"path", "timestamp_column", "channels", "missing_policy", "synth", "normalize"});
    DatasetConfig d;
    d.kind = j.at("kind").get<std::string>();
    auto split = j.at("split").get<std::vector<int64_t>>();
    if (split.size() != 3) throw ConfigError("dataset.split must have 3 entries (train, val, test)");
    d.split = {split[0], split[1], split[2]};
    d.normalize = get_or(j, "normalize", true);
    if (d.kind == "csv") {
        if (!j.contains("path")) missing_key("dataset", "path");
        d.path = j.at("path").get<std::string>();
        d.timestamp_column = get_or(j, "timestamp_column", true);
        d.channels = get_or(j, "channels", 0);
        d.missing_policy = get_or<std::string>(j, "missing_policy", "reject");
        if (d.missing_policy != "reject" && d.missing_policy != "forward_fill")
            throw ConfigError("dataset.missing_policy must be 'reject' or 'forward_fill'");
    } else if (d.kind == "synth") {
        if (!j.contains("synth")) missing_key("dataset", "synth");
        const json& s = j.at("synth");
        check_keys(s, "dataset.synth", {"kind", "channels", "length", "seed"},
                   {"coeff", "noise_sd", "burn_in", "freqs", "amps", "phases", "noise_corr"});
        d.synth_kind = s.at("kind").get<std::string>();
        if (d.synth_kind == "var_process") {
            VarSpec v;
            v.channels = s.at("channels").get<int>();
            v.length = s.at("length").get<int64_t>();
            v.seed = s.at("seed").get<uint64_t>();
            if (!s.contains("coeff")) missing_key("dataset.synth", "coeff");
            v.coeff = get_matrix(s.at("coeff"), "dataset.synth.coeff");
            v.noise_sd = get_or(s, "noise_sd", 1.0);
            v.burn_in = get_or<int64_t>(s, "burn_in", 100);
            d.var_spec = std::move(v);
        } else if (d.synth_kind == "sinusoid_mixture") {
            SinusoidSpec v;
            v.channels = s.at("channels").get<int>();
            v.length = s.at("length").get<int64_t>();
            v.seed = s.at("seed").get<uint64_t>();
            if (!s.contains("freqs")) missing_key("dataset.synth", "freqs");
            if (!s.contains("amps")) missing_key("dataset.synth", "amps");
            v.freqs = get_matrix(s.at("freqs"), "dataset.synth.freqs");
            v.amps = get_matrix(s.at("amps"), "dataset.synth.amps");
            if (s.contains("phases")) v.phases = get_matrix(s.at("phases"), "dataset.synth.phases");
            v.noise_sd = get_or(s, "noise_sd", 0.0);
            v.noise_corr = get_or(s, "noise_corr", 0.0);
            d.sinusoid_spec = std::move(v);
        } else {
            throw ConfigError("dataset.synth.kind must be 'var_process' or 'sinusoid_mixture'");
        }
    } else {
        throw ConfigError("dataset.kind must be 'csv' or 'synth'");
    }
    return d;
}

json dataset_to_json(const DatasetConfig& d) {
    json j;
    j["kind"] = d.kind;
    j["split"] = {d.split[0], d.split[1], d.split[2]};
    j["normalize"] = d.normalize;
    if (d.kind == "csv") {
        j["path"] = d.path;
        j["timestamp_column"] = d.timestamp_column;
        j["channels"] = d.channels;
        j["missing_policy"] = d.missing_policy;
    } else {
        json s;
        s["kind"] = d.synth_kind;
        if (d.var_spec) {
            s["channels"] = d.var_spec->channels;
            s["length"] = d.var_spec->length;
            s["seed"] = d.var_spec->seed;
            s["coeff"] = d.var_spec->coeff;
            s["noise_sd"] = d.var_spec->noise_sd;
            s["burn_in"] = d.var_spec->burn_in;
        } else if (d.sinusoid_spec) {
            s["channels"] = d.sinusoid_spec->channels;
            s["length"] = d.sinusoid_spec->length;
            s["seed"] = d.sinusoid_spec->seed;
            s["freqs"] = d.sinusoid_spec->freqs;
            s["amps"] = d.sinusoid_spec->amps;
            s["phases"] = d.sinusoid_spec->phases;
            s["noise_sd"] = d.sinusoid_spec->noise_sd;
            s["noise_corr"] = d.sinusoid_spec->noise_corr;
        }
        j["synth"] = s;
    }
    return j;
}

} // namespace

RunConfig parse_run_config_json(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse " + origin + ": " + e.what());
    }
    check_keys(j, "", {"dataset", "window", "model", "schedule", "train", "output_dir", "master_seed"},
               {"contrastive", "evaluation"});
    RunConfig cfg;
    cfg.dataset = parse_dataset(j.at("dataset"));

    const json& w = j.at("window");
    check_keys(w, "window", {"lookback", "horizon"}, {"train_stride", "eval_stride"});
    cfg.window.lookback = w.at("lookback").get<int>();
    cfg.window.horizon = w.at("horizon").get<int>();
    cfg.window.train_stride = get_or(w, "train_stride", 1);
    cfg.window.eval_stride = get_or(w, "eval_stride", 0);
    if (cfg.window.lookback < 1 || cfg.window.horizon < 1 || cfg.window.train_stride < 1)
        throw ConfigError("window lookback/horizon/train_stride must be positive");

    const json& m = j.at("model");
    check_keys(m, "model", {"hidden_dim"},
               {"encoder_depth", "decoder_depth", "attention_depth", "heads", "step_embed_dim",
                "channel_mix", "check_finite"});
    cfg.model.hidden_dim = m.at("hidden_dim").get<int>();
    cfg.model.encoder_depth = get_or(m, "encoder_depth", 2);
    cfg.model.decoder_depth = get_or(m, "decoder_depth", 2);
    cfg.model.attention_depth = get_or(m, "attention_depth", 2);
    cfg.model.heads = get_or(m, "heads", 8);
    cfg.model.step_embed_dim = get_or(m, "step_embed_dim", 0);
    cfg.model.check_finite = get_or(m, "check_finite", false);
    const std::string mix = get_or<std::string>(m, "channel_mix", "dit");
    if (mix == "dit")
        cfg.model.channel_mix_attention = true;
    else if (mix == "independent")
        cfg.model.channel_mix_attention = false;
    else
        throw ConfigError("model.channel_mix must be 'dit' or 'independent'");

    const json& s = j.at("schedule");
    check_keys(s, "schedule", {"beta_start", "beta_end", "steps"}, {});
    cfg.schedule.beta_start = s.at("beta_start").get<double>();
    cfg.schedule.beta_end = s.at("beta_end").get<double>();
    cfg.schedule.steps = s.at("steps").get<int>();

    if (j.contains("contrastive")) {
        const json& c = j.at("contrastive");
        check_keys(c, "contrastive", {},
                   {"lambda", "negatives_per_type", "tau", "patch_count",
                    "shuffle_shared_across_channels"});
        cfg.contrastive.lambda = get_or(c, "lambda", 0.001);
        cfg.contrastive.negatives_per_type = get_or(c, "negatives_per_type", 64);
        cfg.contrastive.tau = get_or(c, "tau", 0.1);
        cfg.contrastive.patch_count = get_or(c, "patch_count", 4);
        cfg.contrastive.shuffle_shared_across_channels =
            get_or(c, "shuffle_shared_across_channels", true);
    }

    const json& t = j.at("train");
    check_keys(t, "train", {"epochs"},
               {"mode", "pretrain_epochs", "finetune_epochs", "batch_size", "learning_rate",
                "grad_clip", "cosine_decay", "checkpoint_every"});
    cfg.train.epochs = t.at("epochs").get<int>();
    const std::string mode = get_or<std::string>(t, "mode", "end_to_end");
    if (mode == "end_to_end")
        cfg.train.mode = TrainMode::EndToEnd;
    else if (mode == "two_stage")
        cfg.train.mode = TrainMode::TwoStage;
    else
        throw ConfigError("train.mode must be 'end_to_end' or 'two_stage'");
    cfg.train.pretrain_epochs = get_or(t, "pretrain_epochs", 0);
    cfg.train.finetune_epochs = get_or(t, "finetune_epochs", 30);
    cfg.train.batch_size = get_or(t, "batch_size", 32);
    cfg.train.learning_rate = get_or(t, "learning_rate", 1e-3);
    cfg.train.grad_clip = get_or(t, "grad_clip", 1.0);
    cfg.train.cosine_decay = get_or(t, "cosine_decay", false);
    cfg.train.checkpoint_every = get_or(t, "checkpoint_every", 0);

    if (j.contains("evaluation")) {
        const json& e = j.at("evaluation");
        check_keys(e, "evaluation", {}, {"samples", "denormalized_metrics"});
        cfg.evaluation.samples = get_or(e, "samples", 100);
        cfg.evaluation.denormalized_metrics = get_or(e, "denormalized_metrics", false);
    }
    if (cfg.evaluation.samples < 1) throw ConfigError("evaluation.samples must be >= 1");

    cfg.output_dir = j.at("output_dir").get<std::string>();
    cfg.master_seed = j.at("master_seed").get<uint64_t>();

    // window/channel geometry flows into the model config
    cfg.model.lookback = cfg.window.lookback;
    cfg.model.horizon = cfg.window.horizon;
    cfg.train.master_seed = cfg.master_seed;
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config_json(ss.str(), path);
}

namespace {

json run_config_to_json(const RunConfig& cfg) {
    json j;
    j["dataset"] = dataset_to_json(cfg.dataset);
    j["window"] = {{"lookback", cfg.window.lookback},
                   {"horizon", cfg.window.horizon},
                   {"train_stride", cfg.window.train_stride},
                   {"eval_stride", cfg.window.eval_stride}};
    j["model"] = {{"hidden_dim", cfg.model.hidden_dim},
                  {"encoder_depth", cfg.model.encoder_depth},
                  {"decoder_depth", cfg.model.decoder_depth},
                  {"attention_depth", cfg.model.attention_depth},
                  {"heads", cfg.model.heads},
                  {"step_embed_dim", cfg.model.step_embed_dim},
                  {"channel_mix", cfg.model.channel_mix_attention ? "dit" : "independent"},
                  {"check_finite", cfg.model.check_finite}};
    j["schedule"] = {{"beta_start", cfg.schedule.beta_start},
                     {"beta_end", cfg.schedule.beta_end},
                     {"steps", cfg.schedule.steps}};
    j["contrastive"] = {{"lambda", cfg.contrastive.lambda},
                        {"negatives_per_type", cfg.contrastive.negatives_per_type},
                        {"tau", cfg.contrastive.tau},
                        {"patch_count", cfg.contrastive.patch_count},
                        {"shuffle_shared_across_channels",
                         cfg.contrastive.shuffle_shared_across_channels}};
    j["train"] = {{"mode", cfg.train.mode == TrainMode::EndToEnd ? "end_to_end" : "two_stage"},
                  {"epochs", cfg.train.epochs},
                  {"pretrain_epochs", cfg.train.pretrain_epochs},
                  {"finetune_epochs", cfg.train.finetune_epochs},
                  {"batch_size", cfg.train.batch_size},
                  {"learning_rate", cfg.train.learning_rate},
                  {"grad_clip", cfg.train.grad_clip},
                  {"cosine_decay", cfg.train.cosine_decay},
                  {"checkpoint_every", cfg.train.checkpoint_every}};
    j["evaluation"] = {{"samples", cfg.evaluation.samples},
                       {"denormalized_metrics", cfg.evaluation.denormalized_metrics}};
    j["output_dir"] = cfg.output_dir;
    j["master_seed"] = cfg.master_seed;
    return j;
}

} // namespace

std::string dump_run_config(const RunConfig& cfg) { return run_config_to_json(cfg).dump(2) + "\n"; }

std::string config_fingerprint(const RunConfig& cfg) {
    json j = run_config_to_json(cfg);
    json sub = {{"dataset", j["dataset"]},
                {"window", j["window"]},
                {"model", j["model"]},
                {"schedule", j["schedule"]}};
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(sub.dump())));
    return buf;
}

PreparedData prepare_data(const RunConfig& cfg) {
    SeriesFrame frame;
    if (cfg.dataset.kind == "csv") {
        CsvSchema schema;
        schema.first_column_timestamp = cfg.dataset.timestamp_column;
        schema.expect_channels = cfg.dataset.channels;
        schema.missing = cfg.dataset.missing_policy == "forward_fill"
                             ? CsvSchema::Missing::ForwardFill
                             : CsvSchema::Missing::Reject;
        frame = load_csv(cfg.dataset.path, schema);
    } else if (cfg.dataset.var_spec) {
        frame = synth_var(*cfg.dataset.var_spec);
    } else if (cfg.dataset.sinusoid_spec) {
        frame = synth_sinusoid(*cfg.dataset.sinusoid_spec);
    } else {
        throw ConfigError("dataset config incomplete");
    }

    PreparedData out;
    out.channels = frame.channels;
    out.channel_names = frame.channel_names;
    auto splits = chronological_split(frame, cfg.dataset.split);
    out.normalizer = Normalizer::fit(splits[0]);
    if (cfg.dataset.normalize) {
        out.train = out.normalizer.transform(splits[0]);
        out.val = out.normalizer.transform(splits[1]);
        out.test = out.normalizer.transform(splits[2]);
    } else {
        out.train = std::move(splits[0]);
        out.val = std::move(splits[1]);
        out.test = std::move(splits[2]);
    }
    WindowSpec train_spec{cfg.window.lookback, cfg.window.horizon, cfg.window.train_stride};
    WindowSpec eval_spec{cfg.window.lookback, cfg.window.horizon,
                         cfg.window.eval_stride > 0 ? cfg.window.eval_stride : cfg.window.horizon};
    out.train_windows = make_windows(out.train, train_spec);
    out.val_windows = make_windows(out.val, eval_spec);
    out.test_windows = make_windows(out.test, eval_spec);
    return out;
}

} // namespace ccdm
