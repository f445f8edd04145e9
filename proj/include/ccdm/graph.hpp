#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ccdm/tensor.hpp"

namespace ccdm {

// Primitive tape operations. Composite layers (dense, attention, adaLN, ...)
// are built from these in nn.hpp so that reverse-mode gradients come for free.
enum class Op : uint8_t {
    Leaf,
    Add,
    Sub,
    Mul,
    AddRowVec,
    MulRowVec,
    MatMul,
    Transpose,
    Scale,
    AddConst,
    Silu,
    LayerNormCore,
    SoftmaxRows,
    SliceRows,
    SliceCols,
    ConcatRows,
    ConcatCols,
    SumAll,
    MeanAll,
    LogSumExp2,
};

template <typename S>
class Graph;

template <typename S>
struct Var {
    Graph<S>* g = nullptr;
    int id = -1;
    bool valid() const { return g != nullptr && id >= 0; }
};

// Computation tape. Appends one node per primitive op during the forward
// pass; backward() replays the tape in reverse, accumulating gradients.
// Leaves that do not participate in the result keep an exact zero gradient.
template <typename S>
class Graph {
public:
    struct Node {
        Op op = Op::Leaf;
        int a = -1, b = -1; // input node ids
        int i0 = 0, i1 = 0; // op-specific integers (slice offsets/lengths)
        S c = S(0);         // op-specific scalar
        Tensor<S> value;
        Tensor<S> grad;
        std::vector<S> cache; // per-row stats for layer norm
    };

    Var<S> leaf(Tensor<S> v) {
        nodes_.push_back(Node{});
        nodes_.back().value = std::move(v);
        return Var<S>{this, static_cast<int>(nodes_.size()) - 1};
    }

    const Tensor<S>& value(Var<S> v) const { return nodes_[v.id].value; }
    const Tensor<S>& grad(Var<S> v) const { return nodes_[v.id].grad; }
    size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    Var<S> add(Var<S> a, Var<S> b) { return binary_same(Op::Add, a, b); }
    Var<S> sub(Var<S> a, Var<S> b) { return binary_same(Op::Sub, a, b); }
    Var<S> mul(Var<S> a, Var<S> b) { return binary_same(Op::Mul, a, b); }

    Var<S> add_rowvec(Var<S> m, Var<S> v) { return rowvec(Op::AddRowVec, m, v); }
    Var<S> mul_rowvec(Var<S> m, Var<S> v) { return rowvec(Op::MulRowVec, m, v); }

    Var<S> matmul(Var<S> a, Var<S> b) {
        const auto& A = val(a);
        const auto& B = val(b);
        if (A.cols() != B.rows())
            throw ShapeError("matmul shape mismatch " + shape_str(A.shape) + " x " +
                             shape_str(B.shape));
        Tensor<S> out = Tensor<S>::zeros({A.rows(), B.cols()});
        matmul_nn(A.data(), B.data(), out.data(), A.rows(), A.cols(), B.cols());
        return push(Op::MatMul, a.id, b.id, std::move(out));
    }

    Var<S> transpose(Var<S> a) {
        return push(Op::Transpose, a.id, -1, val(a).transposed());
    }

    Var<S> scale(Var<S> a, S c) {
        Tensor<S> out = val(a);
        for (auto& v : out.values) v *= c;
        Var<S> r = push(Op::Scale, a.id, -1, std::move(out));
        nodes_[r.id].c = c;
        return r;
    }

    Var<S> add_const(Var<S> a, S c) {
        Tensor<S> out = val(a);
        for (auto& v : out.values) v += c;
        Var<S> r = push(Op::AddConst, a.id, -1, std::move(out));
        nodes_[r.id].c = c;
        return r;
    }

    Var<S> silu(Var<S> a) {
        Tensor<S> out = val(a);
        for (auto& v : out.values) {
            const S s = S(1) / (S(1) + std::exp(-v));
            v = v * s;
        }
        return push(Op::Silu, a.id, -1, std::move(out));
    }

    // Per-row normalization to zero mean / unit variance (population
    // convention, eps = 1e-5 inside the square root). Affine gain/shift are
    // separate ops so adaLN can reuse the core.
    Var<S> layer_norm_core(Var<S> a) {
        const auto& A = val(a);
        const int R = A.rows(), C = A.cols();
        if (C == 0) throw ShapeError("layer_norm over zero-length axis, shape " + shape_str(A.shape));
        Tensor<S> out = Tensor<S>::zeros(A.shape);
        std::vector<S> cache(static_cast<size_t>(R) * 2);
        for (int r = 0; r < R; ++r) {
            const S* x = A.data() + static_cast<size_t>(r) * C;
            S* y = out.data() + static_cast<size_t>(r) * C;
            S mean = 0;
            for (int j = 0; j < C; ++j) mean += x[j];
            mean /= static_cast<S>(C);
            S var = 0;
            for (int j = 0; j < C; ++j) var += (x[j] - mean) * (x[j] - mean);
            var /= static_cast<S>(C);
            const S inv = S(1) / std::sqrt(var + S(1e-5));
            for (int j = 0; j < C; ++j) y[j] = (x[j] - mean) * inv;
            cache[2 * r] = mean;
            cache[2 * r + 1] = inv;
        }
        Var<S> res = push(Op::LayerNormCore, a.id, -1, std::move(out));
        nodes_[res.id].cache = std::move(cache);
        return res;
    }

    Var<S> softmax_rows(Var<S> a) {
        const auto& A = val(a);
        const int R = A.rows(), C = A.cols();
        Tensor<S> out = Tensor<S>::zeros(A.shape);
        for (int r = 0; r < R; ++r) {
            const S* x = A.data() + static_cast<size_t>(r) * C;
            S* y = out.data() + static_cast<size_t>(r) * C;
            S mx = x[0];
            for (int j = 1; j < C; ++j) mx = std::max(mx, x[j]);
            S sum = 0;
            for (int j = 0; j < C; ++j) {
                y[j] = std::exp(x[j] - mx);
                sum += y[j];
            }
            for (int j = 0; j < C; ++j) y[j] /= sum;
        }
        return push(Op::SoftmaxRows, a.id, -1, std::move(out));
    }

    Var<S> slice_rows(Var<S> a, int start, int len) {
        const auto& A = val(a);
        const int C = A.cols();
        if (start < 0 || len < 0 || start + len > A.rows())
            throw ShapeError("slice_rows out of range on " + shape_str(A.shape));
        Tensor<S> out = Tensor<S>::zeros({len, C});
        std::copy(A.data() + static_cast<size_t>(start) * C,
                  A.data() + static_cast<size_t>(start + len) * C, out.data());
        Var<S> r = push(Op::SliceRows, a.id, -1, std::move(out));
        nodes_[r.id].i0 = start;
        nodes_[r.id].i1 = len;
        return r;
    }

    Var<S> slice_cols(Var<S> a, int start, int len) {
        const auto& A = val(a);
        const int R = A.rows(), C = A.cols();
        if (start < 0 || len < 0 || start + len > C)
            throw ShapeError("slice_cols out of range on " + shape_str(A.shape));
        Tensor<S> out = Tensor<S>::zeros({R, len});
        for (int r = 0; r < R; ++r)
            std::copy(A.data() + static_cast<size_t>(r) * C + start,
                      A.data() + static_cast<size_t>(r) * C + start + len,
                      out.data() + static_cast<size_t>(r) * len);
        Var<S> res = push(Op::SliceCols, a.id, -1, std::move(out));
        nodes_[res.id].i0 = start;
        nodes_[res.id].i1 = len;
        return res;
    }

    Var<S> concat_rows(Var<S> a, Var<S> b) {
        const auto& A = val(a);
        const auto& B = val(b);
        if (A.cols() != B.cols())
            throw ShapeError("concat_rows column mismatch " + shape_str(A.shape) + " vs " +
                             shape_str(B.shape));
        Tensor<S> out = Tensor<S>::zeros({A.rows() + B.rows(), A.cols()});
        std::copy(A.values.begin(), A.values.end(), out.values.begin());
        std::copy(B.values.begin(), B.values.end(), out.values.begin() + A.size());
        Var<S> r = push(Op::ConcatRows, a.id, b.id, std::move(out));
        nodes_[r.id].i0 = A.rows();
        return r;
    }

    Var<S> concat_cols(Var<S> a, Var<S> b) {
        const auto& A = val(a);
        const auto& B = val(b);
        if (A.rows() != B.rows())
            throw ShapeError("concat_cols row mismatch " + shape_str(A.shape) + " vs " +
                             shape_str(B.shape));
        const int R = A.rows(), Ca = A.cols(), Cb = B.cols();
        Tensor<S> out = Tensor<S>::zeros({R, Ca + Cb});
        for (int r = 0; r < R; ++r) {
            std::copy(A.data() + static_cast<size_t>(r) * Ca, A.data() + static_cast<size_t>(r + 1) * Ca,
                      out.data() + static_cast<size_t>(r) * (Ca + Cb));
            std::copy(B.data() + static_cast<size_t>(r) * Cb, B.data() + static_cast<size_t>(r + 1) * Cb,
                      out.data() + static_cast<size_t>(r) * (Ca + Cb) + Ca);
        }
        Var<S> res = push(Op::ConcatCols, a.id, b.id, std::move(out));
        nodes_[res.id].i0 = Ca;
        return res;
    }

    Var<S> sum_all(Var<S> a) {
        S s = 0;
        for (S v : val(a).values) s += v;
        return push(Op::SumAll, a.id, -1, Tensor<S>({1}, {s}));
    }

    Var<S> mean_all(Var<S> a) {
        S s = 0;
        const auto& A = val(a);
        for (S v : A.values) s += v;
        s /= static_cast<S>(A.size());
        return push(Op::MeanAll, a.id, -1, Tensor<S>({1}, {s}));
    }

    // log(exp(a) + exp(b)) on scalars, evaluated stably.
    Var<S> logsumexp2(Var<S> a, Var<S> b) {
        const S x = val(a).values[0];
        const S y = val(b).values[0];
        const S m = std::max(x, y);
        const S l = m + std::log(std::exp(x - m) + std::exp(y - m));
        return push(Op::LogSumExp2, a.id, b.id, Tensor<S>({1}, {l}));
    }

    // Reverse sweep from a scalar root. Gradients accumulate into every node
    // created up to the root; leaves keep zeros unless they participate.
    void backward(Var<S> root) {
        if (val(root).size() != 1) throw ContractError("backward root must be a scalar");
        for (int i = 0; i <= root.id; ++i) nodes_[i].grad = Tensor<S>::zeros(nodes_[i].value.shape);
        nodes_[root.id].grad.values[0] = S(1);
        for (int i = root.id; i >= 0; --i) backward_node(i);
    }

private:
    std::vector<Node> nodes_;

    const Tensor<S>& val(Var<S> v) const {
        if (!v.valid() || v.g != this) throw ContractError("Var does not belong to this graph");
        return nodes_[v.id].value;
    }

    Var<S> push(Op op, int a, int b, Tensor<S> value) {
        nodes_.push_back(Node{});
        Node& n = nodes_.back();
        n.op = op;
        n.a = a;
        n.b = b;
        n.value = std::move(value);
        return Var<S>{this, static_cast<int>(nodes_.size()) - 1};
    }

    Var<S> binary_same(Op op, Var<S> a, Var<S> b) {
        const auto& A = val(a);
        const auto& B = val(b);
        if (!A.same_shape(B))
            throw ShapeError("elementwise shape mismatch " + shape_str(A.shape) + " vs " +
                             shape_str(B.shape));
        Tensor<S> out = A;
        switch (op) {
            case Op::Add:
                for (size_t i = 0; i < out.size(); ++i) out.values[i] += B.values[i];
                break;
            case Op::Sub:
                for (size_t i = 0; i < out.size(); ++i) out.values[i] -= B.values[i];
                break;
            case Op::Mul:
                for (size_t i = 0; i < out.size(); ++i) out.values[i] *= B.values[i];
                break;
            default:
                throw ContractError("binary_same: bad op");
        }
        return push(op, a.id, b.id, std::move(out));
    }

    Var<S> rowvec(Op op, Var<S> m, Var<S> v) {
        const auto& M = val(m);
        const auto& V = val(v);
        if (V.size() != static_cast<size_t>(M.cols()))
            throw ShapeError("row-vector op needs " + std::to_string(M.cols()) + " values, got " +
                             shape_str(V.shape));
        const int R = M.rows(), C = M.cols();
        Tensor<S> out = M;
        for (int r = 0; r < R; ++r)
            for (int j = 0; j < C; ++j) {
                if (op == Op::AddRowVec)
                    out.at(r, j) += V.values[j];
                else
                    out.at(r, j) *= V.values[j];
            }
        return push(op, m.id, v.id, std::move(out));
    }

    // C[M,N] += A[M,K] * B[K,N]
    static void matmul_nn(const S* a, const S* b, S* c, int M, int K, int N) {
        for (int i = 0; i < M; ++i) {
            const S* arow = a + static_cast<size_t>(i) * K;
            S* crow = c + static_cast<size_t>(i) * N;
            for (int k = 0; k < K; ++k) {
                const S av = arow[k];
                const S* brow = b + static_cast<size_t>(k) * N;
                for (int j = 0; j < N; ++j) crow[j] += av * brow[j];
            }
        }
    }

    // C[M,N] += A[M,K] * B[N,K]^T
    static void matmul_nt(const S* a, const S* b, S* c, int M, int K, int N) {
        for (int i = 0; i < M; ++i) {
            const S* arow = a + static_cast<size_t>(i) * K;
            S* crow = c + static_cast<size_t>(i) * N;
            for (int j = 0; j < N; ++j) {
                const S* brow = b + static_cast<size_t>(j) * K;
                S acc = 0;
                for (int k = 0; k < K; ++k) acc += arow[k] * brow[k];
                crow[j] += acc;
            }
        }
    }

    // C[K,N] += A[M,K]^T * B[M,N]
    static void matmul_tn(const S* a, const S* b, S* c, int M, int K, int N) {
        for (int m = 0; m < M; ++m) {
            const S* arow = a + static_cast<size_t>(m) * K;
            const S* brow = b + static_cast<size_t>(m) * N;
            for (int k = 0; k < K; ++k) {
                const S av = arow[k];
                S* crow = c + static_cast<size_t>(k) * N;
                for (int j = 0; j < N; ++j) crow[j] += av * brow[j];
            }
        }
    }

    void backward_node(int id) {
        Node& n = nodes_[id];
        const Tensor<S>& g = n.grad;
        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::Add: {
                accum(n.a, g.values.data(), g.size());
                accum(n.b, g.values.data(), g.size());
                break;
            }
            case Op::Sub: {
                accum(n.a, g.values.data(), g.size());
                Tensor<S>& gb = nodes_[n.b].grad;
                for (size_t i = 0; i < g.size(); ++i) gb.values[i] -= g.values[i];
                break;
            }
            case Op::Mul: {
                Tensor<S>& ga = nodes_[n.a].grad;
                Tensor<S>& gb = nodes_[n.b].grad;
                const auto& A = nodes_[n.a].value;
                const auto& B = nodes_[n.b].value;
                for (size_t i = 0; i < g.size(); ++i) {
                    ga.values[i] += g.values[i] * B.values[i];
                    gb.values[i] += g.values[i] * A.values[i];
                }
                break;
            }
            case Op::AddRowVec: {
                accum(n.a, g.values.data(), g.size());
                Tensor<S>& gv = nodes_[n.b].grad;
                const int R = g.rows(), C = g.cols();
                for (int r = 0; r < R; ++r)
                    for (int j = 0; j < C; ++j) gv.values[j] += g.at(r, j);
                break;
            }
            case Op::MulRowVec: {
                Tensor<S>& gm = nodes_[n.a].grad;
                Tensor<S>& gv = nodes_[n.b].grad;
                const auto& M = nodes_[n.a].value;
                const auto& V = nodes_[n.b].value;
                const int R = g.rows(), C = g.cols();
                for (int r = 0; r < R; ++r)
                    for (int j = 0; j < C; ++j) {
                        gm.at(r, j) += g.at(r, j) * V.values[j];
                        gv.values[j] += g.at(r, j) * M.at(r, j);
                    }
                break;
            }
            case Op::MatMul: {
                const auto& A = nodes_[n.a].value;
                const auto& B = nodes_[n.b].value;
                // dA += dC * B^T ; dB += A^T * dC
                matmul_nt(g.data(), B.data(), nodes_[n.a].grad.data(), A.rows(), B.cols(), A.cols());
                matmul_tn(A.data(), g.data(), nodes_[n.b].grad.data(), A.rows(), A.cols(), B.cols());
                break;
            }
            case Op::Transpose: {
                Tensor<S>& ga = nodes_[n.a].grad;
                const int R = g.rows(), C = g.cols();
                for (int r = 0; r < R; ++r)
                    for (int j = 0; j < C; ++j) ga.at(j, r) += g.at(r, j);
                break;
            }
            case Op::Scale: {
                Tensor<S>& ga = nodes_[n.a].grad;
                for (size_t i = 0; i < g.size(); ++i) ga.values[i] += g.values[i] * n.c;
                break;
            }
            case Op::AddConst: {
                accum(n.a, g.values.data(), g.size());
                break;
            }
            case Op::Silu: {
                Tensor<S>& ga = nodes_[n.a].grad;
                const auto& X = nodes_[n.a].value;
                for (size_t i = 0; i < g.size(); ++i) {
                    const S x = X.values[i];
                    const S s = S(1) / (S(1) + std::exp(-x));
                    ga.values[i] += g.values[i] * s * (S(1) + x * (S(1) - s));
                }
                break;
            }
            case Op::LayerNormCore: {
                Tensor<S>& ga = nodes_[n.a].grad;
                const auto& Y = n.value;
                const int R = g.rows(), C = g.cols();
                for (int r = 0; r < R; ++r) {
                    const S inv = n.cache[2 * r + 1];
                    const S* gy = g.data() + static_cast<size_t>(r) * C;
                    const S* y = Y.data() + static_cast<size_t>(r) * C;
                    S mg = 0, mgy = 0;
                    for (int j = 0; j < C; ++j) {
                        mg += gy[j];
                        mgy += gy[j] * y[j];
                    }
                    mg /= static_cast<S>(C);
                    mgy /= static_cast<S>(C);
                    S* gx = ga.data() + static_cast<size_t>(r) * C;
                    for (int j = 0; j < C; ++j) gx[j] += inv * (gy[j] - mg - y[j] * mgy);
                }
                break;
            }
            case Op::SoftmaxRows: {
                Tensor<S>& ga = nodes_[n.a].grad;
                const auto& Y = n.value;
                const int R = g.rows(), C = g.cols();
                for (int r = 0; r < R; ++r) {
                    const S* gy = g.data() + static_cast<size_t>(r) * C;
                    const S* y = Y.data() + static_cast<size_t>(r) * C;
                    S dot = 0;
                    for (int j = 0; j < C; ++j) dot += gy[j] * y[j];
                    S* gx = ga.data() + static_cast<size_t>(r) * C;
                    for (int j = 0; j < C; ++j) gx[j] += y[j] * (gy[j] - dot);
                }
                break;
            }
            case Op::SliceRows: {
                Tensor<S>& ga = nodes_[n.a].grad;
                const int C = g.cols();
                for (int r = 0; r < n.i1; ++r)
                    for (int j = 0; j < C; ++j) ga.at(n.i0 + r, j) += g.at(r, j);
                break;
            }
            case Op::SliceCols: {
                Tensor<S>& ga = nodes_[n.a].grad;
                const int R = g.rows();
                for (int r = 0; r < R; ++r)
                    for (int j = 0; j < n.i1; ++j) ga.at(r, n.i0 + j) += g.at(r, j);
                break;
            }
            case Op::ConcatRows: {
                Tensor<S>& ga = nodes_[n.a].grad;
                Tensor<S>& gb = nodes_[n.b].grad;
                const size_t na = ga.size();
                for (size_t i = 0; i < na; ++i) ga.values[i] += g.values[i];
                for (size_t i = 0; i < gb.size(); ++i) gb.values[i] += g.values[na + i];
                break;
            }
            case Op::ConcatCols: {
                Tensor<S>& ga = nodes_[n.a].grad;
                Tensor<S>& gb = nodes_[n.b].grad;
                const int R = g.rows(), Ca = n.i0, Cb = g.cols() - n.i0;
                for (int r = 0; r < R; ++r) {
                    for (int j = 0; j < Ca; ++j) ga.at(r, j) += g.at(r, j);
                    for (int j = 0; j < Cb; ++j) gb.at(r, j) += g.at(r, Ca + j);
                }
                break;
            }
            case Op::SumAll: {
                Tensor<S>& ga = nodes_[n.a].grad;
                const S gv = g.values[0];
                for (auto& v : ga.values) v += gv;
                break;
            }
            case Op::MeanAll: {
                Tensor<S>& ga = nodes_[n.a].grad;
                const S gv = g.values[0] / static_cast<S>(ga.size());
                for (auto& v : ga.values) v += gv;
                break;
            }
            case Op::LogSumExp2: {
                const S l = n.value.values[0];
                const S gv = g.values[0];
                nodes_[n.a].grad.values[0] += gv * std::exp(nodes_[n.a].value.values[0] - l);
                nodes_[n.b].grad.values[0] += gv * std::exp(nodes_[n.b].value.values[0] - l);
                break;
            }
        }
    }

    void accum(int id, const S* src, size_t n) {
        Tensor<S>& t = nodes_[id].grad;
        for (size_t i = 0; i < n; ++i) t.values[i] += src[i];
    }
};

} // namespace ccdm
