#include "doctest.h"

#include <algorithm>
#include <fstream>

#include "ccdm/evaluation.hpp"
#include "support/test_support.hpp"

using namespace ccdm;
using ccdm::testing::TempDir;

namespace {

// Exact integral of (F(z) - 1{y <= z})^2 dz for the empirical step CDF:
// the integrand is piecewise constant between the breakpoints formed by the
// samples and the truth, so summing segments reproduces the definition.
double crps_by_integration(std::vector<double> samples, double truth) {
    std::vector<double> breaks = samples;
    breaks.push_back(truth);
    std::sort(breaks.begin(), breaks.end());
    std::sort(samples.begin(), samples.end());
    double acc = 0;
    for (size_t i = 0; i + 1 < breaks.size(); ++i) {
        const double lo = breaks[i], hi = breaks[i + 1];
        if (hi <= lo) continue;
        const double mid = 0.5 * (lo + hi);
        const double f = static_cast<double>(std::upper_bound(samples.begin(), samples.end(), mid) -
                                             samples.begin()) /
                         static_cast<double>(samples.size());
        const double ind = (truth <= mid) ? 1.0 : 0.0;
        acc += (f - ind) * (f - ind) * (hi - lo);
    }
    return acc;
}

ForecastEnsemble constant_ensemble(const std::vector<Tensor<double>>& samples) {
    return ForecastEnsemble::from_samples(samples);
}

} // namespace

TEST_CASE("ensemble construction and medians") {
    SUBCASE("single sample is its own point forecast") {
        Tensor<double> s({2, 1}, {3.0, -1.0});
        auto ens = constant_ensemble({s});
        CHECK(ens.point_forecast.values == s.values);
    }
    SUBCASE("even count takes the midpoint of the central order statistics") {
        Tensor<double> a({1, 1}, {1.0});
        Tensor<double> b({1, 1}, {4.0});
        auto ens = constant_ensemble({a, b});
        CHECK(ens.point_forecast.values[0] == doctest::Approx(2.5));
    }
    SUBCASE("quantiles are monotone in p") {
        RngStream rng(5);
        std::vector<Tensor<double>> samples;
        for (int i = 0; i < 9; ++i) samples.push_back(Tensor<double>::normal({3, 2}, rng));
        auto ens = constant_ensemble(samples);
        for (int t = 0; t < 3; ++t)
            for (int d = 0; d < 2; ++d) {
                double prev = -1e18;
                for (double p : {0.05, 0.25, 0.5, 0.75, 0.95}) {
                    const double q = ens.quantile(t, d, p);
                    CHECK(q >= prev);
                    prev = q;
                }
            }
    }
}

TEST_CASE("mse") {
    SUBCASE("exact forecast gives zero") {
        Tensor<double> t({2, 2}, {1, 2, 3, 4});
        CHECK(mse(t, t) == 0.0);
    }
    SUBCASE("hand case H=1 D=2") {
        Tensor<double> f({1, 2}, {1.0, 0.0});
        Tensor<double> t({1, 2}, {0.0, 1.0});
        CHECK(mse(f, t) == doctest::Approx(1.0));
    }
    SUBCASE("random pair vs naive loop oracle") {
        RngStream rng(7);
        Tensor<double> a = Tensor<double>::normal({5, 4}, rng);
        Tensor<double> b = Tensor<double>::normal({5, 4}, rng);
        double acc = 0;
        for (int t = 0; t < 5; ++t)
            for (int d = 0; d < 4; ++d) acc += (a.at(t, d) - b.at(t, d)) * (a.at(t, d) - b.at(t, d));
        CHECK(std::abs(mse(a, b) - acc / 20.0) < 1e-12);
    }
    SUBCASE("shape mismatch") {
        CHECK_THROWS_AS(mse(Tensor<double>::zeros({2, 2}), Tensor<double>::zeros({2, 3})), ShapeError);
    }
}

TEST_CASE("crps") {
    SUBCASE("all samples equal the truth give zero") {
        std::vector<double> s = {1.5, 1.5, 1.5};
        CHECK(crps_sorted(s, 1.5) == doctest::Approx(0.0));
    }
    SUBCASE("samples {0,1} against truth 0 give exactly 0.25") {
        std::vector<double> s = {0.0, 1.0};
        CHECK(std::abs(crps_sorted(s, 0.0) - 0.25) < 1e-9);
    }
    SUBCASE("sorted-sample identity equals direct integration on random instances") {
        RngStream rng(11);
        for (int trial = 0; trial < 1000; ++trial) {
            const int s = rng.uniform_int(1, 16);
            std::vector<double> samples(s);
            for (auto& v : samples) v = 2.0 * rng.normal();
            const double truth = 2.0 * rng.normal();
            std::vector<double> sorted = samples;
            std::sort(sorted.begin(), sorted.end());
            CHECK(std::abs(crps_sorted(sorted, truth) - crps_by_integration(samples, truth)) < 1e-6);
        }
    }
    SUBCASE("S=1 degenerates to absolute error") {
        std::vector<double> s = {2.0};
        CHECK(crps_sorted(s, -1.0) == doctest::Approx(3.0));
    }
    SUBCASE("translation invariance") {
        RngStream rng(13);
        std::vector<double> s(8);
        for (auto& v : s) v = rng.normal();
        std::sort(s.begin(), s.end());
        const double truth = 0.3;
        const double base = crps_sorted(s, truth);
        for (auto& v : s) v += 17.0;
        CHECK(crps_sorted(s, truth + 17.0) == doctest::Approx(base).epsilon(1e-12));
    }
    SUBCASE("channel permutation invariance of the aggregate metrics") {
        RngStream rng(17);
        std::vector<Tensor<double>> samples;
        for (int i = 0; i < 6; ++i) samples.push_back(Tensor<double>::normal({4, 3}, rng));
        Tensor<double> truth = Tensor<double>::normal({4, 3}, rng);
        auto ens = constant_ensemble(samples);
        const double base_crps = crps(ens, truth);
        const double base_mse = mse(ens.point_forecast, truth);
        std::vector<int> perm = {2, 0, 1};
        auto permute = [&](const Tensor<double>& t) {
            Tensor<double> out = Tensor<double>::zeros(t.shape);
            for (int r = 0; r < t.rows(); ++r)
                for (int c = 0; c < t.cols(); ++c) out.at(r, c) = t.at(r, perm[c]);
            return out;
        };
        std::vector<Tensor<double>> psamples;
        for (const auto& s : samples) psamples.push_back(permute(s));
        auto pens = constant_ensemble(psamples);
        CHECK(crps(pens, permute(truth)) == doctest::Approx(base_crps).epsilon(1e-12));
        CHECK(mse(pens.point_forecast, permute(truth)) == doctest::Approx(base_mse).epsilon(1e-12));
    }
}

TEST_CASE("ensemble assembly determinism and error naming") {
    auto sched = build_quadratic_schedule(0.001, 0.5, 10);
    EpsFn<float> damp = [](const Tensor<float>& y, int) {
        Tensor<float> out = y;
        for (auto& v : out.values) v *= 0.2f;
        return out;
    };
    auto e1 = assemble_ensemble_fn(4, 2, damp, sched, 5, 99);
    auto e2 = assemble_ensemble_fn(4, 2, damp, sched, 5, 99);
    for (size_t i = 0; i < e1.samples.size(); ++i) CHECK(e1.samples[i].values == e2.samples[i].values);

    EpsFn<float> poison = [](const Tensor<float>& y, int k) {
        Tensor<float> out = Tensor<float>::zeros(y.shape);
        if (k == 3) out.values[0] = std::numeric_limits<float>::quiet_NaN();
        return out;
    };
    CHECK_THROWS_WITH_AS(assemble_ensemble_fn(4, 2, poison, sched, 3, 99),
                         doctest::Contains("seed index"), SamplingError);
}

TEST_CASE("metrics accumulator aggregates window means") {
    RngStream rng(23);
    MetricsAccumulator acc(3, 2);
    std::vector<double> window_mse;
    for (int w = 0; w < 4; ++w) {
        std::vector<Tensor<double>> samples;
        for (int i = 0; i < 5; ++i) samples.push_back(Tensor<double>::normal({3, 2}, rng));
        auto ens = ForecastEnsemble::from_samples(samples);
        Tensor<double> truth = Tensor<double>::normal({3, 2}, rng);
        acc.add(ens, truth);
        window_mse.push_back(mse(ens.point_forecast, truth));
    }
    auto report = acc.finish();
    double mean = 0;
    for (double v : window_mse) mean += v / window_mse.size();
    CHECK(report.mse == doctest::Approx(mean).epsilon(1e-12));
    CHECK(report.windows == 4);
    CHECK(report.per_channel_mse.size() == 2);
    CHECK(report.per_horizon_crps.size() == 3);
}

TEST_CASE("climatology baseline") {
    SeriesFrame train;
    train.channels = 1;
    train.channel_names = {"a"};
    train.length = 4;
    train.values = {0.0, 1.0, 0.0, 1.0}; // mean 0.5
    std::vector<TimeWindow> tests(1);
    tests[0].x = Tensor<double>::zeros({1, 1});
    tests[0].y = Tensor<double>({2, 1}, {0.0, 1.0});
    auto report = evaluate_climatology(train, tests);
    CHECK(report.mse == doctest::Approx(0.25));
    // CRPS of samples {0,0,1,1} vs truth 0 and truth 1, averaged:
    // mae = 0.5, spread term = (1/16) * sum(2i+1-4)x_i = (1/16)*(1+3) = 0.25 -> 0.25 each
    CHECK(report.crps == doctest::Approx(0.25));
}

TEST_CASE("csv exports are monotone and well-shaped") {
    TempDir tmp("ens");
    RngStream rng(29);
    std::vector<Tensor<double>> samples;
    for (int i = 0; i < 7; ++i) samples.push_back(Tensor<double>::normal({3, 2}, rng));
    auto ens = ForecastEnsemble::from_samples(samples);
    Tensor<double> truth = Tensor<double>::normal({3, 2}, rng);
    write_ensemble_csv(ens, tmp.path(), {"a", "b"});
    write_quantile_csv(ens, truth, tmp.path(), {"a", "b"});

    std::ifstream in(tmp.file("quantiles_a.csv"));
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,q05,q25,q50,q75,q95,truth");
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        double t, q05, q25, q50, q75, q95, tr;
        char c;
        std::istringstream ss(line);
        ss >> t >> c >> q05 >> c >> q25 >> c >> q50 >> c >> q75 >> c >> q95 >> c >> tr;
        CHECK(q05 <= q25);
        CHECK(q25 <= q50);
        CHECK(q50 <= q75);
        CHECK(q75 <= q95);
    }
    CHECK(rows == 3);
    CHECK(std::ifstream(tmp.file("samples_b.csv")).good());
}
