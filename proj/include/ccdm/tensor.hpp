#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "ccdm/common.hpp"
#include "ccdm/rng.hpp"

namespace ccdm {

inline std::string shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

inline int64_t shape_numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

// Dense row-major tensor. Rank is 1 or 2 in practice; a rank-1 tensor of n
// values is treated as a 1-by-n row wherever a matrix view is needed.
template <typename S>
struct Tensor {
    std::vector<int> shape;
    std::vector<S> values;

    Tensor() = default;

    Tensor(std::vector<int> shp, std::vector<S> vals) : shape(std::move(shp)), values(std::move(vals)) {
        for (int d : shape)
            if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(shape));
        if (shape_numel(shape) != static_cast<int64_t>(values.size()))
            throw ShapeError("shape " + shape_str(shape) + " does not match " +
                             std::to_string(values.size()) + " values");
    }

    static Tensor zeros(std::vector<int> shp) {
        const auto n = shape_numel(shp);
        return Tensor(std::move(shp), std::vector<S>(static_cast<size_t>(n), S(0)));
    }

    static Tensor full(std::vector<int> shp, S v) {
        const auto n = shape_numel(shp);
        return Tensor(std::move(shp), std::vector<S>(static_cast<size_t>(n), v));
    }

    static Tensor normal(std::vector<int> shp, RngStream& rng) {
        Tensor t = zeros(std::move(shp));
        for (auto& v : t.values) v = static_cast<S>(rng.normal());
        return t;
    }

    size_t size() const { return values.size(); }

    // Matrix view: rank-1 tensors are a single row.
    int rows() const { return shape.size() >= 2 ? shape[0] : 1; }
    int cols() const {
        if (shape.empty()) return 0;
        return shape.size() >= 2 ? shape[1] : shape[0];
    }

    S& at(int r, int c) { return values[static_cast<size_t>(r) * cols() + c]; }
    const S& at(int r, int c) const { return values[static_cast<size_t>(r) * cols() + c]; }

    S* data() { return values.data(); }
    const S* data() const { return values.data(); }

    bool finite() const {
        for (S v : values)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    void require_finite(const std::string& name) const {
        if (!finite()) throw ModelError(name + " contains non-finite values");
    }

    template <typename T>
    Tensor<T> cast() const {
        Tensor<T> out;
        out.shape = shape;
        out.values.resize(values.size());
        for (size_t i = 0; i < values.size(); ++i) out.values[i] = static_cast<T>(values[i]);
        return out;
    }

    Tensor transposed() const {
        const int r = rows(), c = cols();
        Tensor out = zeros({c, r});
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) out.at(j, i) = at(i, j);
        return out;
    }

    bool same_shape(const Tensor& o) const { return rows() == o.rows() && cols() == o.cols(); }
};

template <typename S>
uint64_t hash_tensor(const Tensor<S>& t, uint64_t h = 1469598103934665603ULL) {
    h = fnv1a64_bytes(t.values.data(), t.values.size() * sizeof(S), h);
    return h;
}

} // namespace ccdm
