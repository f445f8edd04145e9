#pragma once

#include <cmath>

#include "ccdm/graph.hpp"

namespace ccdm {

// Affine map along the trailing axis: input [R,in] (or [in]) * weight [in,out] + bias [out].
template <typename S>
Var<S> dense(Graph<S>& g, Var<S> input, Var<S> weight, Var<S> bias) {
    const auto& in = g.value(input);
    const auto& w = g.value(weight);
    if (in.cols() != w.rows())
        throw ShapeError("dense: input " + shape_str(in.shape) + " incompatible with weight " +
                         shape_str(w.shape));
    if (g.value(bias).size() != static_cast<size_t>(w.cols()))
        throw ShapeError("dense: bias " + shape_str(g.value(bias).shape) + " incompatible with weight " +
                         shape_str(w.shape));
    return g.add_rowvec(g.matmul(input, weight), bias);
}

// Plain layer norm over the trailing axis with learnable gain/shift.
template <typename S>
Var<S> layer_norm(Graph<S>& g, Var<S> input, Var<S> gain, Var<S> shift) {
    return g.add_rowvec(g.mul_rowvec(g.layer_norm_core(input), gain), shift);
}

// Layer norm whose gain/shift come from a learned linear map of a conditioning
// embedding, in the "1 + scale" parameterization: zero-initialized modulation
// weights leave the plain layer norm untouched.
template <typename S>
Var<S> ada_layer_norm(Graph<S>& g, Var<S> input, Var<S> cond, Var<S> mod_w, Var<S> mod_b) {
    if (!cond.valid() || g.value(cond).size() == 0)
        throw ContractError("ada_layer_norm requires a conditioning embedding");
    const int e = g.value(input).cols();
    if (g.value(mod_w).cols() != 2 * e)
        throw ShapeError("ada_layer_norm modulation must produce 2*" + std::to_string(e) +
                         " values, weight is " + shape_str(g.value(mod_w).shape));
    Var<S> mod = dense(g, cond, mod_w, mod_b); // [1, 2e]
    Var<S> gamma = g.slice_cols(mod, 0, e);
    Var<S> delta = g.slice_cols(mod, e, e);
    Var<S> n = g.layer_norm_core(input);
    return g.add_rowvec(g.mul_rowvec(n, g.add_const(gamma, S(1))), delta);
}

template <typename S>
struct AttentionVars {
    Var<S> wq, bq, wk, bk, wv, bv, wo, bo;
};

// Scaled dot-product self-attention over the token axis with concatenated
// heads and an output projection.
template <typename S>
Var<S> multi_head_self_attention(Graph<S>& g, Var<S> tokens, const AttentionVars<S>& p, int heads) {
    const int e = g.value(tokens).cols();
    if (heads < 1 || e % heads != 0)
        throw ConfigError("attention: embed dim " + std::to_string(e) + " not divisible by " +
                          std::to_string(heads) + " heads");
    const int dh = e / heads;
    Var<S> q = dense(g, tokens, p.wq, p.bq);
    Var<S> k = dense(g, tokens, p.wk, p.bk);
    Var<S> v = dense(g, tokens, p.wv, p.bv);
    const S inv_sqrt = S(1) / std::sqrt(static_cast<S>(dh));
    Var<S> merged;
    for (int h = 0; h < heads; ++h) {
        Var<S> qh = g.slice_cols(q, h * dh, dh);
        Var<S> kh = g.slice_cols(k, h * dh, dh);
        Var<S> vh = g.slice_cols(v, h * dh, dh);
        Var<S> scores = g.scale(g.matmul(qh, g.transpose(kh)), inv_sqrt);
        Var<S> attn = g.softmax_rows(scores);
        Var<S> oh = g.matmul(attn, vh);
        merged = (h == 0) ? oh : g.concat_cols(merged, oh);
    }
    return dense(g, merged, p.wo, p.bo);
}

// Interleaved sin/cos features of the diffusion step index at geometrically
// spaced frequencies (base 10000).
template <typename S>
Tensor<S> sinusoidal_step_embedding(int k, int dim) {
    if (dim <= 0 || dim % 2 != 0)
        throw ConfigError("step embedding dim must be positive and even, got " + std::to_string(dim));
    if (k < 0) throw ContractError("step index must be non-negative");
    Tensor<S> out = Tensor<S>::zeros({dim});
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::pow(10000.0, -static_cast<double>(i) / half);
        out.values[2 * i] = static_cast<S>(std::sin(k * freq));
        out.values[2 * i + 1] = static_cast<S>(std::cos(k * freq));
    }
    return out;
}

// Mean squared error over all coordinates.
template <typename S>
Var<S> mse_loss(Graph<S>& g, Var<S> a, Var<S> b) {
    Var<S> d = g.sub(a, b);
    return g.mean_all(g.mul(d, d));
}

// Sum of squared differences over all coordinates.
template <typename S>
Var<S> sse_loss(Graph<S>& g, Var<S> a, Var<S> b) {
    Var<S> d = g.sub(a, b);
    return g.sum_all(g.mul(d, d));
}

} // namespace ccdm
