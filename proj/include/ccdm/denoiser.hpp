#pragma once

#include <map>
#include <string>

#include "ccdm/adam.hpp"
#include "ccdm/diffusion.hpp"
#include "ccdm/nn.hpp"

namespace ccdm {

// Channel-aware conditional denoiser: channel-independent dense encoders for
// the lookback and the noisy target, channel-wise transformer blocks over the
// 2D concatenated channel tokens, and a dense decoder with a final adaLN.
// `channel_mix_attention = false` swaps the transformer blocks for equal-depth
// channel-independent dense blocks (the "w/o channel-wise DiT" ablation).
struct DenoiserConfig {
    int lookback = 0;  // L
    int horizon = 0;   // H
    int channels = 0;  // D
    int hidden_dim = 128;
    int encoder_depth = 2;
    int decoder_depth = 2;
    int attention_depth = 2;
    int heads = 8;
    int step_embed_dim = 0; // 0 means hidden_dim
    bool channel_mix_attention = true;
    bool check_finite = false;

    int mlp_hidden() const { return 4 * hidden_dim; }
    int sed() const { return step_embed_dim > 0 ? step_embed_dim : hidden_dim; }

    void validate() const {
        if (lookback < 1 || horizon < 1 || channels < 1)
            throw ConfigError("denoiser needs positive lookback/horizon/channels");
        if (hidden_dim < 1 || encoder_depth < 1 || decoder_depth < 1 || attention_depth < 1)
            throw ConfigError("denoiser depths and hidden_dim must be positive");
        if (heads < 1 || hidden_dim % heads != 0)
            throw ConfigError("hidden_dim " + std::to_string(hidden_dim) +
                              " must be divisible by heads " + std::to_string(heads));
        if (sed() % 2 != 0) throw ConfigError("step_embed_dim must be even");
    }
};

namespace detail {

template <typename S>
Tensor<S> kaiming_uniform(std::vector<int> shape, int fan_in, RngStream& rng) {
    Tensor<S> t = Tensor<S>::zeros(std::move(shape));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : t.values) v = static_cast<S>(rng.uniform(-bound, bound));
    return t;
}

// A channel-independent dense block: LayerNorm -> dense(in->hid) -> SiLU ->
// dense(hid->out), plus a linear skip projection when widths differ.
template <typename S>
void init_cidm(ParamStore<S>& p, const std::string& prefix, int w_in, int w_hid, int w_out,
               RngStream& rng) {
    p.emplace(prefix + ".ln_g", Tensor<S>::full({w_in}, S(1)));
    p.emplace(prefix + ".ln_b", Tensor<S>::zeros({w_in}));
    p.emplace(prefix + ".w1", kaiming_uniform<S>({w_in, w_hid}, w_in, rng));
    p.emplace(prefix + ".b1", kaiming_uniform<S>({w_hid}, w_in, rng));
    p.emplace(prefix + ".w2", kaiming_uniform<S>({w_hid, w_out}, w_hid, rng));
    p.emplace(prefix + ".b2", kaiming_uniform<S>({w_out}, w_hid, rng));
    if (w_in != w_out) p.emplace(prefix + ".skip", kaiming_uniform<S>({w_in, w_out}, w_in, rng));
}

template <typename S>
Var<S> cidm_block(Graph<S>& g, Var<S> x, const std::map<std::string, Var<S>>& p,
                  const std::string& prefix) {
    Var<S> n = layer_norm(g, x, p.at(prefix + ".ln_g"), p.at(prefix + ".ln_b"));
    Var<S> h = dense(g, g.silu(dense(g, n, p.at(prefix + ".w1"), p.at(prefix + ".b1"))),
                     p.at(prefix + ".w2"), p.at(prefix + ".b2"));
    auto skip_it = p.find(prefix + ".skip");
    Var<S> skip = (skip_it == p.end()) ? x : g.matmul(x, skip_it->second);
    return g.add(h, skip);
}

} // namespace detail

// Learnable parameters, keyed by dotted names. Creation order is fixed so a
// seeded stream initializes identically across runs.
template <typename S>
ParamStore<S> init_denoiser_params(const DenoiserConfig& cfg, RngStream& rng) {
    cfg.validate();
    const int e = cfg.hidden_dim;
    ParamStore<S> p;
    // step-embedding MLP
    p.emplace("step_mlp.w1", detail::kaiming_uniform<S>({cfg.sed(), e}, cfg.sed(), rng));
    p.emplace("step_mlp.b1", detail::kaiming_uniform<S>({e}, cfg.sed(), rng));
    p.emplace("step_mlp.w2", detail::kaiming_uniform<S>({e, e}, e, rng));
    p.emplace("step_mlp.b2", detail::kaiming_uniform<S>({e}, e, rng));
    // condition / latent encoders (first block maps series length -> e)
    for (int i = 0; i < cfg.encoder_depth; ++i) {
        const int in_c = (i == 0) ? cfg.lookback : e;
        detail::init_cidm(p, "cond_enc." + std::to_string(i), in_c, e, e, rng);
    }
    for (int i = 0; i < cfg.encoder_depth; ++i) {
        const int in_l = (i == 0) ? cfg.horizon : e;
        detail::init_cidm(p, "lat_enc." + std::to_string(i), in_l, e, e, rng);
    }
    // channel mixing
    for (int i = 0; i < cfg.attention_depth; ++i) {
        const std::string b = (cfg.channel_mix_attention ? "dit." : "mix.") + std::to_string(i);
        if (cfg.channel_mix_attention) {
            p.emplace(b + ".mod_w", Tensor<S>::zeros({e, 6 * e}));
            p.emplace(b + ".mod_b", Tensor<S>::zeros({6 * e}));
            p.emplace(b + ".wq", detail::kaiming_uniform<S>({e, e}, e, rng));
            p.emplace(b + ".bq", detail::kaiming_uniform<S>({e}, e, rng));
            p.emplace(b + ".wk", detail::kaiming_uniform<S>({e, e}, e, rng));
            p.emplace(b + ".bk", detail::kaiming_uniform<S>({e}, e, rng));
            // Only the modulation map starts at zero (gates closed, block is
            // the identity). Zeroing the output projections as well would
            // leave both factors of the gated branches at zero and the
            // gradient of each stuck at zero through the other.
            p.emplace(b + ".wv", detail::kaiming_uniform<S>({e, e}, e, rng));
            p.emplace(b + ".bv", detail::kaiming_uniform<S>({e}, e, rng));
            p.emplace(b + ".wo", detail::kaiming_uniform<S>({e, e}, e, rng));
            p.emplace(b + ".bo", detail::kaiming_uniform<S>({e}, e, rng));
            p.emplace(b + ".mlp_w1", detail::kaiming_uniform<S>({e, cfg.mlp_hidden()}, e, rng));
            p.emplace(b + ".mlp_b1", detail::kaiming_uniform<S>({cfg.mlp_hidden()}, e, rng));
            p.emplace(b + ".mlp_w2", detail::kaiming_uniform<S>({cfg.mlp_hidden(), e}, cfg.mlp_hidden(), rng));
            p.emplace(b + ".mlp_b2", detail::kaiming_uniform<S>({e}, cfg.mlp_hidden(), rng));
        } else {
            detail::init_cidm(p, b, e, e, e, rng);
        }
    }
    // decoder
    for (int i = 0; i < cfg.decoder_depth; ++i)
        detail::init_cidm(p, "dec." + std::to_string(i), e, e, e, rng);
    p.emplace("final.mod_w", Tensor<S>::zeros({e, 2 * e}));
    p.emplace("final.mod_b", Tensor<S>::zeros({2 * e}));
    p.emplace("head.w", detail::kaiming_uniform<S>({e, cfg.horizon}, e, rng));
    p.emplace("head.b", detail::kaiming_uniform<S>({cfg.horizon}, e, rng));
    return p;
}

// Closed-form parameter count for a DenoiserConfig; tested against the actual
// construction. CiDM(in,out) = 2*in + in*hid + hid + hid*out + out (+ in*out skip).
inline size_t denoiser_param_count(const DenoiserConfig& cfg) {
    const size_t e = cfg.hidden_dim;
    auto cidm = [&](size_t in, size_t out) {
        size_t n = 2 * in + in * e + e + e * out + out;
        if (in != out) n += in * out;
        return n;
    };
    size_t n = 0;
    n += static_cast<size_t>(cfg.sed()) * e + e + e * e + e; // step MLP
    n += cidm(cfg.lookback, e) + (cfg.encoder_depth - 1) * cidm(e, e);
    n += cidm(cfg.horizon, e) + (cfg.encoder_depth - 1) * cidm(e, e);
    if (cfg.channel_mix_attention) {
        const size_t mh = cfg.mlp_hidden();
        n += static_cast<size_t>(cfg.attention_depth) *
             (e * 6 * e + 6 * e + 4 * (e * e + e) + e * mh + mh + mh * e + e);
    } else {
        n += static_cast<size_t>(cfg.attention_depth) * cidm(e, e);
    }
    n += static_cast<size_t>(cfg.decoder_depth) * cidm(e, e);
    n += e * 2 * e + 2 * e;            // final adaLN modulation
    n += e * cfg.horizon + cfg.horizon; // head
    return n;
}

template <typename S>
std::map<std::string, Var<S>> mount_params(Graph<S>& g, const ParamStore<S>& params) {
    std::map<std::string, Var<S>> out;
    for (const auto& [name, t] : params) out.emplace(name, g.leaf(t));
    return out;
}

namespace detail {

template <typename S>
Var<S> dit_block(Graph<S>& g, Var<S> tokens, Var<S> cond, const std::map<std::string, Var<S>>& p,
                 const std::string& b, int heads) {
    const int e = g.value(tokens).cols();
    Var<S> mod = dense(g, cond, p.at(b + ".mod_w"), p.at(b + ".mod_b")); // [1, 6e]
    Var<S> g1 = g.slice_cols(mod, 0, e);
    Var<S> d1 = g.slice_cols(mod, e, e);
    Var<S> a1 = g.slice_cols(mod, 2 * e, e);
    Var<S> g2 = g.slice_cols(mod, 3 * e, e);
    Var<S> d2 = g.slice_cols(mod, 4 * e, e);
    Var<S> a2 = g.slice_cols(mod, 5 * e, e);

    Var<S> n1 = g.add_rowvec(g.mul_rowvec(g.layer_norm_core(tokens), g.add_const(g1, S(1))), d1);
    AttentionVars<S> att{p.at(b + ".wq"), p.at(b + ".bq"), p.at(b + ".wk"), p.at(b + ".bk"),
                         p.at(b + ".wv"), p.at(b + ".bv"), p.at(b + ".wo"), p.at(b + ".bo")};
    Var<S> attn = multi_head_self_attention(g, n1, att, heads);
    tokens = g.add(tokens, g.mul_rowvec(attn, a1));

    Var<S> n2 = g.add_rowvec(g.mul_rowvec(g.layer_norm_core(tokens), g.add_const(g2, S(1))), d2);
    Var<S> m = dense(g, g.silu(dense(g, n2, p.at(b + ".mlp_w1"), p.at(b + ".mlp_b1"))),
                     p.at(b + ".mlp_w2"), p.at(b + ".mlp_b2"));
    return g.add(tokens, g.mul_rowvec(m, a2));
}

template <typename S>
Var<S> cidm_stack(Graph<S>& g, Var<S> x, const std::map<std::string, Var<S>>& p,
                  const std::string& prefix, int depth) {
    for (int i = 0; i < depth; ++i) x = cidm_block(g, x, p, prefix + "." + std::to_string(i));
    return x;
}

} // namespace detail

// eps_theta(y_k, x, k) as a tape expression. y_k is [H,D], x is [L,D], output
// is [H,D]. Channel tokens are rows: D condition tokens then D latent tokens.
template <typename S>
Var<S> denoise_expr(Graph<S>& g, const DenoiserConfig& cfg, const std::map<std::string, Var<S>>& p,
                    Var<S> y_k, Var<S> x, int k) {
    if (k < 1) throw ContractError("denoise: step index must be >= 1");
    const auto& ys = g.value(y_k);
    const auto& xs = g.value(x);
    if (ys.rows() != cfg.horizon || ys.cols() != cfg.channels)
        throw ShapeError("denoise: y_k " + shape_str(ys.shape) + " expected [" +
                         std::to_string(cfg.horizon) + "," + std::to_string(cfg.channels) + "]");
    if (xs.rows() != cfg.lookback || xs.cols() != cfg.channels)
        throw ShapeError("denoise: x " + shape_str(xs.shape) + " expected [" +
                         std::to_string(cfg.lookback) + "," + std::to_string(cfg.channels) + "]");

    auto checkpoint = [&](Var<S> v, const char* stage) {
        if (cfg.check_finite) g.value(v).require_finite(std::string("denoiser ") + stage);
        return v;
    };

    Var<S> c = g.leaf(sinusoidal_step_embedding<S>(k, cfg.sed()));
    c = dense(g, g.silu(dense(g, c, p.at("step_mlp.w1"), p.at("step_mlp.b1"))), p.at("step_mlp.w2"),
              p.at("step_mlp.b2"));

    Var<S> cond_tok =
        checkpoint(detail::cidm_stack(g, g.transpose(x), p, "cond_enc", cfg.encoder_depth),
                   "condition encoder");
    Var<S> lat_tok =
        checkpoint(detail::cidm_stack(g, g.transpose(y_k), p, "lat_enc", cfg.encoder_depth),
                   "latent encoder");
    Var<S> tokens = g.concat_rows(cond_tok, lat_tok); // [2D, e]

    for (int i = 0; i < cfg.attention_depth; ++i) {
        const std::string b = (cfg.channel_mix_attention ? "dit." : "mix.") + std::to_string(i);
        tokens = cfg.channel_mix_attention ? detail::dit_block(g, tokens, c, p, b, cfg.heads)
                                           : detail::cidm_block(g, tokens, p, b);
        checkpoint(tokens, cfg.channel_mix_attention ? "dit block" : "mix block");
    }

    Var<S> latent = g.slice_rows(tokens, cfg.channels, cfg.channels); // latent-side tokens only
    latent = detail::cidm_stack(g, latent, p, "dec", cfg.decoder_depth);
    latent = ada_layer_norm(g, latent, c, p.at("final.mod_w"), p.at("final.mod_b"));
    Var<S> pred = dense(g, latent, p.at("head.w"), p.at("head.b")); // [D, H]
    return checkpoint(g.transpose(pred), "output");
}

// Convenience non-tape evaluation.
template <typename S>
Tensor<S> denoise(const DenoiserConfig& cfg, const ParamStore<S>& params, const Tensor<S>& y_k,
                  const Tensor<S>& x, int k) {
    Graph<S> g;
    auto p = mount_params(g, params);
    Var<S> out = denoise_expr(g, cfg, p, g.leaf(y_k), g.leaf(x), k);
    return g.value(out);
}

// Trajectory sampler bound to a parameter snapshot and a lookback window.
template <typename S>
Tensor<S> sample_forecast(const DenoiserConfig& cfg, const ParamStore<S>& params, const Tensor<S>& x,
                          const NoiseSchedule& sched, RngStream& rng) {
    EpsFn<S> fn = [&](const Tensor<S>& y, int k) { return denoise(cfg, params, y, x, k); };
    return sample_trajectory(cfg.horizon, cfg.channels, fn, sched, rng);
}

} // namespace ccdm
