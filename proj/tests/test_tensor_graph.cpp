#include "doctest.h"

#include "ccdm/graph.hpp"
#include "support/test_support.hpp"

using namespace ccdm;
using ccdm::testing::max_grad_rel_err;

TEST_CASE("tensor shape/value agreement is enforced") {
    CHECK_NOTHROW(Tensor<double>({2, 3}, {1, 2, 3, 4, 5, 6}));
    CHECK_THROWS_AS(Tensor<double>({2, 3}, {1, 2, 3}), ShapeError);
    CHECK_THROWS_AS(Tensor<double>({-1, 3}, {}), ShapeError);
}

TEST_CASE("tensor finite checks") {
    Tensor<double> t({2}, {1.0, 2.0});
    CHECK(t.finite());
    t.values[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_FALSE(t.finite());
    CHECK_THROWS_AS(t.require_finite("probe"), ModelError);
}

TEST_CASE("backward gives exact zero for non-participating leaves") {
    Graph<double> g;
    auto a = g.leaf(Tensor<double>({2}, {1.0, 2.0}));
    auto unused = g.leaf(Tensor<double>({3}, {1.0, 1.0, 1.0}));
    auto loss = g.sum_all(g.mul(a, a));
    g.backward(loss);
    for (double v : g.grad(unused).values) CHECK(v == 0.0);
    CHECK(g.grad(a).values[0] == doctest::Approx(2.0));
    CHECK(g.grad(a).values[1] == doctest::Approx(4.0));
}

TEST_CASE("graph primitives match finite differences") {
    RngStream rng(7);
    auto rnd = [&](std::vector<int> shape) { return Tensor<double>::normal(shape, rng); };

    SUBCASE("elementwise add/sub/mul chain") {
        auto build = [](Graph<double>& g, const std::vector<Var<double>>& in) {
            auto a = in[0], b = in[1];
            return g.sum_all(g.mul(g.add(a, b), g.sub(a, b)));
        };
        CHECK(max_grad_rel_err(build, {rnd({3, 4}), rnd({3, 4})}) < 1e-5);
    }
    SUBCASE("matmul + transpose") {
        auto build = [](Graph<double>& g, const std::vector<Var<double>>& in) {
            auto a = in[0], b = in[1];
            return g.sum_all(g.mul(g.matmul(a, b), g.matmul(a, b)));
        };
        CHECK(max_grad_rel_err(build, {rnd({3, 5}), rnd({5, 2})}) < 1e-5);
        auto build_t = [](Graph<double>& g, const std::vector<Var<double>>& in) {
            auto a = in[0];
            return g.sum_all(g.matmul(g.transpose(a), a));
        };
        CHECK(max_grad_rel_err(build_t, {rnd({4, 3})}) < 1e-5);
    }
    SUBCASE("row-vector broadcast ops") {
        auto build = [](Graph<double>& g, const std::vector<Var<double>>& in) {
            auto m = in[0], v = in[1], w = in[2];
            return g.mean_all(g.mul_rowvec(g.add_rowvec(m, v), w));
        };
        CHECK(max_grad_rel_err(build, {rnd({4, 3}), rnd({3}), rnd({3})}) < 1e-5);
    }
    SUBCASE("silu / layer_norm_core / softmax") {
        auto build = [](Graph<double>& g, const std::vector<Var<double>>& in) {
            auto a = in[0];
            return g.sum_all(g.mul(g.softmax_rows(g.layer_norm_core(g.silu(a))), g.silu(a)));
        };
        CHECK(max_grad_rel_err(build, {rnd({3, 6})}) < 1e-5);
    }
    SUBCASE("slice / concat") {
        auto build = [](Graph<double>& g, const std::vector<Var<double>>& in) {
            auto a = in[0], b = in[1];
            auto cat = g.concat_rows(g.concat_cols(a, b), g.concat_cols(b, a));
            auto s = g.slice_cols(g.slice_rows(cat, 1, 2), 1, 3);
            return g.sum_all(g.mul(s, s));
        };
        CHECK(max_grad_rel_err(build, {rnd({2, 2}), rnd({2, 2})}) < 1e-5);
    }
    SUBCASE("logsumexp2 and scalar ops") {
        auto build = [](Graph<double>& g, const std::vector<Var<double>>& in) {
            auto a = g.sum_all(in[0]);
            auto b = g.mean_all(in[1]);
            return g.logsumexp2(g.scale(a, 0.7), g.add_const(b, 0.3));
        };
        CHECK(max_grad_rel_err(build, {rnd({2, 2}), rnd({3})}) < 1e-5);
    }
}

TEST_CASE("forward passes are deterministic given identical inputs") {
    RngStream rng(3);
    Tensor<double> a = Tensor<double>::normal({4, 4}, rng);
    auto run = [&] {
        Graph<double> g;
        auto v = g.leaf(a);
        return g.value(g.softmax_rows(g.silu(g.layer_norm_core(v)))).values;
    };
    CHECK(run() == run());
}

TEST_CASE("shape errors name both shapes") {
    Graph<double> g;
    auto a = g.leaf(Tensor<double>::zeros({2, 3}));
    auto b = g.leaf(Tensor<double>::zeros({4, 2}));
    CHECK_THROWS_WITH_AS(g.add(a, b), doctest::Contains("[2,3]"), ShapeError);
    CHECK_THROWS_WITH_AS(g.matmul(a, b), doctest::Contains("[4,2]"), ShapeError);
}

TEST_CASE("layer_norm_core rejects zero-length axis") {
    Graph<double> g;
    auto a = g.leaf(Tensor<double>::zeros({2, 0}));
    CHECK_THROWS_AS(g.layer_norm_core(a), ShapeError);
}
