#include "doctest.h"

#include <fstream>

#include "ccdm/data.hpp"
#include "support/test_support.hpp"

using namespace ccdm;
using ccdm::testing::TempDir;

TEST_CASE("csv load") {
    TempDir tmp("csv");

    SUBCASE("3-row 2-channel file round-trips value-exact") {
        SeriesFrame f;
        f.channels = 2;
        f.channel_names = {"a", "b"};
        f.length = 3;
        f.values = {0.1, -1.5e-7, 2.0 / 3.0, 123456.789, 1e-300, -0.0};
        save_csv(f, tmp.file("round.csv"));
        auto g = load_csv(tmp.file("round.csv"), CsvSchema{});
        CHECK(g.channels == 2);
        CHECK(g.length == 3);
        CHECK(g.values == f.values);
        CHECK(g.channel_names == f.channel_names);
    }
    SUBCASE("empty cell is rejected with its line number") {
        std::ofstream(tmp.file("gap.csv")) << "t,a,b\n0,1.0,2.0\n1,,3.0\n";
        CHECK_THROWS_WITH_AS(load_csv(tmp.file("gap.csv"), CsvSchema{}), doctest::Contains(":3"),
                             IngestError);
    }
    SUBCASE("forward fill repairs gaps and counts them") {
        std::ofstream(tmp.file("fill.csv")) << "t,a,b\n0,1.0,2.0\n1,,3.0\n2,5.0,\n";
        CsvSchema schema;
        schema.missing = CsvSchema::Missing::ForwardFill;
        auto f = load_csv(tmp.file("fill.csv"), schema);
        CHECK(f.filled_rows == 2);
        CHECK(f.at(1, 0) == 1.0);
        CHECK(f.at(2, 1) == 3.0);
    }
    SUBCASE("unparseable number names the location") {
        std::ofstream(tmp.file("bad.csv")) << "t,a\n0,1.0\n1,oops\n";
        CHECK_THROWS_WITH_AS(load_csv(tmp.file("bad.csv"), CsvSchema{}), doctest::Contains("oops"),
                             IngestError);
    }
    SUBCASE("ETTh1-shaped file loads with D=7") {
        std::ofstream out(tmp.file("etth.csv"));
        out << "date,HUFL,HULL,MUFL,MULL,LUFL,LULL,OT\n";
        for (int t = 0; t < 5; ++t) {
            out << t;
            for (int d = 0; d < 7; ++d) out << "," << 0.5 * t + d;
            out << "\n";
        }
        out.close();
        auto f = load_csv(tmp.file("etth.csv"), CsvSchema{});
        CHECK(f.channels == 7);
        CHECK(f.channel_names[6] == "OT");
    }
    SUBCASE("channel count mismatch vs schema is a configuration error") {
        std::ofstream(tmp.file("two.csv")) << "t,a,b\n0,1,2\n";
        CsvSchema schema;
        schema.expect_channels = 5;
        CHECK_THROWS_AS(load_csv(tmp.file("two.csv"), schema), ConfigError);
    }
}

namespace {

SeriesFrame ramp_frame(int64_t t_total, int d) {
    SeriesFrame f;
    f.channels = d;
    f.length = t_total;
    for (int c = 0; c < d; ++c) f.channel_names.push_back("c" + std::to_string(c));
    f.values.resize(t_total * d);
    for (int64_t t = 0; t < t_total; ++t)
        for (int c = 0; c < d; ++c) f.values[t * d + c] = static_cast<double>(t * d + c);
    return f;
}

} // namespace

TEST_CASE("chronological split") {
    SUBCASE("ETTh1-sized boundaries") {
        auto f = ramp_frame(14400, 2);
        auto s = chronological_split(f, {8640, 2880, 2880});
        CHECK(s[0].length == 8640);
        CHECK(s[1].length == 2880);
        CHECK(s[2].length == 2880);
        CHECK(s[1].at(0, 0) == f.at(8640, 0));
        CHECK(s[2].at(0, 0) == f.at(8640 + 2880, 0));
    }
    SUBCASE("single-row splits") {
        auto f = ramp_frame(3, 1);
        auto s = chronological_split(f, {1, 1, 1});
        CHECK(s[0].values == std::vector<double>{0});
        CHECK(s[1].values == std::vector<double>{1});
        CHECK(s[2].values == std::vector<double>{2});
    }
    SUBCASE("concatenated splits reconstruct the prefix") {
        auto f = ramp_frame(20, 3);
        auto s = chronological_split(f, {7, 5, 4});
        std::vector<double> cat;
        for (const auto& part : {s[0], s[1], s[2]})
            cat.insert(cat.end(), part.values.begin(), part.values.end());
        CHECK(std::equal(cat.begin(), cat.end(), f.values.begin()));
    }
    SUBCASE("insufficient rows is a configuration error") {
        auto f = ramp_frame(5, 1);
        CHECK_THROWS_AS(chronological_split(f, {3, 2, 1}), ConfigError);
    }
}

TEST_CASE("windowing") {
    SUBCASE("exact-fit frame yields one window") {
        auto f = ramp_frame(7, 2);
        auto w = make_windows(f, WindowSpec{4, 3, 1});
        REQUIRE(w.size() == 1);
        CHECK(w[0].x.at(0, 0) == f.at(0, 0));
        CHECK(w[0].y.at(2, 1) == f.at(6, 1));
    }
    SUBCASE("one extra row yields two windows offset by one") {
        auto f = ramp_frame(8, 1);
        auto w = make_windows(f, WindowSpec{4, 3, 1});
        REQUIRE(w.size() == 2);
        CHECK(w[1].x.at(0, 0) == f.at(1, 0));
    }
    SUBCASE("window count formula vs enumeration") {
        RngStream rng(71);
        for (int trial = 0; trial < 50; ++trial) {
            const int t_total = rng.uniform_int(10, 200);
            const int lookback = rng.uniform_int(1, 5);
            const int horizon = rng.uniform_int(1, 5);
            const int stride = rng.uniform_int(1, 4);
            auto f = ramp_frame(t_total, 1);
            auto w = make_windows(f, WindowSpec{lookback, horizon, stride});
            int count = 0;
            for (int start = 0; start + lookback + horizon <= t_total; start += stride) ++count;
            CHECK(static_cast<int>(w.size()) == count);
            if (t_total >= lookback + horizon)
                CHECK(count == (t_total - lookback - horizon) / stride + 1);
        }
    }
    SUBCASE("too-short frame gives an empty sequence, not an error") {
        auto f = ramp_frame(5, 1);
        CHECK(make_windows(f, WindowSpec{4, 3, 1}).empty());
    }
}

TEST_CASE("normalizer") {
    RngStream rng(73);
    SeriesFrame f;
    f.channels = 3;
    f.length = 500;
    f.channel_names = {"a", "b", "c"};
    f.values.resize(1500);
    for (auto& v : f.values) v = 5.0 + 2.0 * rng.normal();

    SUBCASE("inverse composed with transform is the identity") {
        auto n = Normalizer::fit(f);
        auto round = n.inverse(n.transform(f));
        for (size_t i = 0; i < f.values.size(); ++i)
            CHECK(std::abs(round.values[i] - f.values[i]) < 1e-6);
    }
    SUBCASE("fit depends on the train split only") {
        auto n1 = Normalizer::fit(f);
        SeriesFrame other = f;
        for (auto& v : other.values) v *= -3.0; // pretend this is val/test content
        auto n2 = Normalizer::fit(f);           // same train split
        CHECK(n1.mean == n2.mean);
        CHECK(n1.std == n2.std);
        // transforming different frames uses identical statistics
        auto t1 = n1.transform(other);
        auto t2 = n2.transform(other);
        CHECK(t1.values == t2.values);
    }
    SUBCASE("std floor guards constant channels") {
        SeriesFrame flat;
        flat.channels = 1;
        flat.length = 10;
        flat.channel_names = {"flat"};
        flat.values.assign(10, 4.2);
        auto n = Normalizer::fit(flat);
        CHECK(n.std[0] == 1e-8);
    }
}

TEST_CASE("synthetic generators") {
    SUBCASE("zero-noise sinusoid reproduces the waveform exactly") {
        SinusoidSpec spec;
        spec.channels = 1;
        spec.length = 100;
        spec.seed = 1;
        spec.freqs = {{0.02}};
        spec.amps = {{1.5}};
        spec.phases = {{0.3}};
        auto f = synth_sinusoid(spec);
        for (int64_t t = 0; t < 100; ++t)
            CHECK(f.at(t, 0) == doctest::Approx(1.5 * std::sin(2 * M_PI * 0.02 * t + 0.3)));
    }
    SUBCASE("same seed reproduces identical frames") {
        VarSpec spec;
        spec.channels = 2;
        spec.length = 50;
        spec.seed = 9;
        spec.coeff = {{0.5, 0.1}, {0.0, 0.4}};
        CHECK(synth_var(spec).values == synth_var(spec).values);
    }
    SUBCASE("zero coefficient matrix gives white noise (lag-1 autocorr about 0)") {
        VarSpec spec;
        spec.channels = 1;
        spec.length = 10000;
        spec.seed = 3;
        spec.coeff = {{0.0}};
        spec.noise_sd = 1.0;
        auto f = synth_var(spec);
        double c0 = 0, c1 = 0;
        for (int64_t t = 0; t + 1 < spec.length; ++t) {
            c0 += f.at(t, 0) * f.at(t, 0);
            c1 += f.at(t, 0) * f.at(t + 1, 0);
        }
        const double rho = c1 / c0;
        CHECK(std::abs(rho) < 4.0 / std::sqrt(static_cast<double>(spec.length)));
    }
    SUBCASE("lag-1 cross-covariance matches the closed-form stationary value") {
        VarSpec spec;
        spec.channels = 2;
        spec.length = 200000;
        spec.seed = 5;
        spec.coeff = {{0.6, 0.2}, {-0.1, 0.5}};
        spec.noise_sd = 1.0;
        spec.burn_in = 500;
        auto f = synth_var(spec);
        // Stationary covariance from the discrete Lyapunov fixed point
        // S = A S A^T + I, iterated to convergence; lag-1 covariance = A S.
        double s[2][2] = {{1, 0}, {0, 1}};
        const auto& a = spec.coeff;
        for (int it = 0; it < 200; ++it) {
            double as[2][2] = {};
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    for (int k = 0; k < 2; ++k) as[i][j] += a[i][k] * s[k][j];
            double next[2][2] = {};
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    for (int k = 0; k < 2; ++k) next[i][j] += as[i][k] * a[j][k];
                    next[i][j] += (i == j) ? 1.0 : 0.0;
                }
            std::copy(&next[0][0], &next[0][0] + 4, &s[0][0]);
        }
        double lag1[2][2] = {};
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k) lag1[i][j] += a[i][k] * s[k][j];
        // empirical lag-1 cross-covariance E[y_{t+1} y_t^T]
        double emp[2][2] = {};
        for (int64_t t = 0; t + 1 < spec.length; ++t)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) emp[i][j] += f.at(t + 1, i) * f.at(t, j);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                emp[i][j] /= static_cast<double>(spec.length - 1);
                // generous 4-sigma band: var of the product terms is O(s_ii s_jj)
                const double tol = 4.0 * std::sqrt(s[i][i] * s[j][j] / spec.length) * 2.0;
                CHECK(std::abs(emp[i][j] - lag1[i][j]) < tol);
            }
    }
    SUBCASE("unstable coefficient matrix is a configuration error") {
        VarSpec spec;
        spec.channels = 2;
        spec.length = 10;
        spec.seed = 1;
        spec.coeff = {{1.01, 0.0}, {0.0, 0.5}};
        CHECK_THROWS_AS(synth_var(spec), ConfigError);
    }
}
