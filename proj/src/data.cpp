#include "ccdm/data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ccdm/rng.hpp"

namespace ccdm {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

} // namespace

SeriesFrame load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open csv file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw IngestError("empty csv file: " + path);
    auto header = split_csv_line(line);
    const int first_data_col = schema.first_column_timestamp ? 1 : 0;
    const int d = static_cast<int>(header.size()) - first_data_col;
    if (d < 1) throw IngestError("csv header declares no data columns: " + path);
    if (schema.expect_channels > 0 && d != schema.expect_channels)
        throw ConfigError("csv has " + std::to_string(d) + " channels, config expects " +
                          std::to_string(schema.expect_channels));

    SeriesFrame frame;
    frame.channels = d;
    frame.channel_names.assign(header.begin() + first_data_col, header.end());

    int64_t line_no = 1;
    std::vector<double> prev_row;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (static_cast<int>(cells.size()) != d + first_data_col)
            throw IngestError(path + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(d + first_data_col) + " columns, got " +
                              std::to_string(cells.size()));
        std::vector<double> row(d);
        bool gap = false;
        for (int j = 0; j < d; ++j) {
            const std::string& cell = cells[first_data_col + j];
            if (cell.empty()) {
                gap = true;
                continue;
            }
            if (!parse_double(cell, row[j]))
                throw IngestError(path + ":" + std::to_string(line_no) + ": cannot parse '" + cell +
                                  "' in column " + frame.channel_names[j]);
        }
        if (gap) {
            if (schema.missing == CsvSchema::Missing::Reject || prev_row.empty())
                throw IngestError(path + ":" + std::to_string(line_no) + ": row has missing values");
            for (int j = 0; j < d; ++j)
                if (cells[first_data_col + j].empty()) row[j] = prev_row[j];
            ++frame.filled_rows;
        }
        frame.values.insert(frame.values.end(), row.begin(), row.end());
        prev_row = std::move(row);
        ++frame.length;
    }
    if (frame.length == 0) throw IngestError("csv has no data rows: " + path);
    return frame;
}

void save_csv(const SeriesFrame& frame, const std::string& path, bool timestamp_column) {
    std::ofstream out(path);
    if (!out) throw IngestError("cannot write csv file: " + path);
    if (timestamp_column) out << "t";
    for (int d = 0; d < frame.channels; ++d) {
        if (timestamp_column || d > 0) out << ",";
        out << (d < static_cast<int>(frame.channel_names.size()) ? frame.channel_names[d]
                                                                 : "c" + std::to_string(d));
    }
    out << "\n";
    char buf[64];
    for (int64_t t = 0; t < frame.length; ++t) {
        if (timestamp_column) out << t;
        for (int d = 0; d < frame.channels; ++d) {
            if (timestamp_column || d > 0) out << ",";
            std::snprintf(buf, sizeof(buf), "%.17g", frame.at(t, d));
            out << buf;
        }
        out << "\n";
    }
}

std::array<SeriesFrame, 3> chronological_split(const SeriesFrame& frame,
                                               const std::array<int64_t, 3>& sizes) {
    const int64_t total = sizes[0] + sizes[1] + sizes[2];
    if (total > frame.length)
        throw ConfigError("split sizes sum to " + std::to_string(total) + " but frame has " +
                          std::to_string(frame.length) + " rows");
    std::array<SeriesFrame, 3> out;
    int64_t offset = 0;
    for (int i = 0; i < 3; ++i) {
        SeriesFrame& f = out[i];
        f.channels = frame.channels;
        f.channel_names = frame.channel_names;
        f.length = sizes[i];
        f.values.assign(frame.values.begin() + offset * frame.channels,
                        frame.values.begin() + (offset + sizes[i]) * frame.channels);
        offset += sizes[i];
    }
    return out;
}

std::vector<TimeWindow> make_windows(const SeriesFrame& frame, const WindowSpec& spec) {
    if (spec.lookback < 1 || spec.horizon < 1 || spec.stride < 1)
        throw ConfigError("window spec needs positive lookback/horizon/stride");
    std::vector<TimeWindow> out;
    const int64_t span = spec.lookback + spec.horizon;
    if (frame.length < span) {
        std::cerr << "warning: frame of length " << frame.length << " too short for windows of "
                  << span << " steps; no windows produced\n";
        return out;
    }
    for (int64_t start = 0; start + span <= frame.length; start += spec.stride) {
        TimeWindow w;
        w.x = Tensor<double>::zeros({spec.lookback, frame.channels});
        w.y = Tensor<double>::zeros({spec.horizon, frame.channels});
        for (int t = 0; t < spec.lookback; ++t)
            for (int d = 0; d < frame.channels; ++d) w.x.at(t, d) = frame.at(start + t, d);
        for (int t = 0; t < spec.horizon; ++t)
            for (int d = 0; d < frame.channels; ++d)
                w.y.at(t, d) = frame.at(start + spec.lookback + t, d);
        out.push_back(std::move(w));
    }
    return out;
}

Normalizer Normalizer::fit(const SeriesFrame& train) {
    if (train.length == 0) throw ConfigError("cannot fit normalizer on empty split");
    Normalizer n;
    n.mean.assign(train.channels, 0.0);
    n.std.assign(train.channels, 0.0);
    for (int64_t t = 0; t < train.length; ++t)
        for (int d = 0; d < train.channels; ++d) n.mean[d] += train.at(t, d);
    for (int d = 0; d < train.channels; ++d) n.mean[d] /= static_cast<double>(train.length);
    for (int64_t t = 0; t < train.length; ++t)
        for (int d = 0; d < train.channels; ++d) {
            const double diff = train.at(t, d) - n.mean[d];
            n.std[d] += diff * diff;
        }
    for (int d = 0; d < train.channels; ++d)
        n.std[d] = std::max(std::sqrt(n.std[d] / static_cast<double>(train.length)), 1e-8);
    return n;
}

SeriesFrame Normalizer::transform(const SeriesFrame& frame) const {
    SeriesFrame out = frame;
    for (int64_t t = 0; t < out.length; ++t)
        for (int d = 0; d < out.channels; ++d) out.at(t, d) = (out.at(t, d) - mean[d]) / std[d];
    return out;
}

SeriesFrame Normalizer::inverse(const SeriesFrame& frame) const {
    SeriesFrame out = frame;
    for (int64_t t = 0; t < out.length; ++t)
        for (int d = 0; d < out.channels; ++d) out.at(t, d) = out.at(t, d) * std[d] + mean[d];
    return out;
}

Tensor<double> Normalizer::inverse(const Tensor<double>& t) const {
    Tensor<double> out = t;
    for (int r = 0; r < out.rows(); ++r)
        for (int d = 0; d < out.cols(); ++d) out.at(r, d) = out.at(r, d) * std[d] + mean[d];
    return out;
}

SeriesFrame synth_sinusoid(const SinusoidSpec& spec) {
    if (spec.channels < 1 || spec.length < 1)
        throw ConfigError("sinusoid generator needs positive channels/length");
    if (static_cast<int>(spec.freqs.size()) != spec.channels ||
        static_cast<int>(spec.amps.size()) != spec.channels)
        throw ConfigError("sinusoid generator needs freqs/amps per channel");
    SeriesFrame frame;
    frame.channels = spec.channels;
    frame.length = spec.length;
    frame.values.assign(static_cast<size_t>(spec.length) * spec.channels, 0.0);
    for (int d = 0; d < spec.channels; ++d)
        frame.channel_names.push_back("s" + std::to_string(d));
    RngStream rng = make_stream(spec.seed, "synth.sinusoid");
    for (int64_t t = 0; t < spec.length; ++t) {
        const double shared = spec.noise_sd > 0 ? rng.normal() : 0.0;
        for (int d = 0; d < spec.channels; ++d) {
            double v = 0;
            for (size_t i = 0; i < spec.freqs[d].size(); ++i) {
                const double phase = (d < static_cast<int>(spec.phases.size()) &&
                                      i < spec.phases[d].size())
                                         ? spec.phases[d][i]
                                         : 0.0;
                v += spec.amps[d][i] * std::sin(2.0 * M_PI * spec.freqs[d][i] * t + phase);
            }
            if (spec.noise_sd > 0) {
                const double own = rng.normal();
                const double rho = spec.noise_corr;
                v += spec.noise_sd * (rho * shared + std::sqrt(1.0 - rho * rho) * own);
            }
            frame.at(t, d) = v;
        }
    }
    frame.metadata = "sinusoid_mixture";
    return frame;
}

double spectral_radius_estimate(const std::vector<std::vector<double>>& coeff) {
    const int d = static_cast<int>(coeff.size());
    std::vector<double> m(static_cast<size_t>(d) * d);
    for (int i = 0; i < d; ++i) {
        if (static_cast<int>(coeff[i].size()) != d) throw ConfigError("VAR coefficient matrix not square");
        for (int j = 0; j < d; ++j) m[static_cast<size_t>(i) * d + j] = coeff[i][j];
    }
    // six squarings: ||A^64||_F^(1/64)
    std::vector<double> tmp(m.size());
    for (int it = 0; it < 6; ++it) {
        std::fill(tmp.begin(), tmp.end(), 0.0);
        for (int i = 0; i < d; ++i)
            for (int k = 0; k < d; ++k) {
                const double a = m[static_cast<size_t>(i) * d + k];
                for (int j = 0; j < d; ++j) tmp[static_cast<size_t>(i) * d + j] += a * m[static_cast<size_t>(k) * d + j];
            }
        m.swap(tmp);
    }
    double fro = 0;
    for (double v : m) fro += v * v;
    return std::pow(std::sqrt(fro), 1.0 / 64.0);
}

SeriesFrame synth_var(const VarSpec& spec) {
    if (spec.channels < 1 || spec.length < 1)
        throw ConfigError("VAR generator needs positive channels/length");
    if (static_cast<int>(spec.coeff.size()) != spec.channels)
        throw ConfigError("VAR coefficient matrix must be D x D");
    const double radius = spectral_radius_estimate(spec.coeff);
    if (radius >= 1.0)
        throw ConfigError("unstable VAR coefficient matrix (spectral radius ~ " +
                          std::to_string(radius) + " >= 1)");
    SeriesFrame frame;
    frame.channels = spec.channels;
    frame.length = spec.length;
    frame.values.assign(static_cast<size_t>(spec.length) * spec.channels, 0.0);
    for (int d = 0; d < spec.channels; ++d)
        frame.channel_names.push_back("v" + std::to_string(d));
    RngStream rng = make_stream(spec.seed, "synth.var");
    std::vector<double> state(spec.channels, 0.0), next(spec.channels, 0.0);
    for (int64_t t = -spec.burn_in; t < spec.length; ++t) {
        for (int i = 0; i < spec.channels; ++i) {
            double v = spec.noise_sd * rng.normal();
            for (int j = 0; j < spec.channels; ++j) v += spec.coeff[i][j] * state[j];
            next[i] = v;
        }
        state = next;
        if (t >= 0)
            for (int d = 0; d < spec.channels; ++d) frame.at(t, d) = state[d];
    }
    frame.metadata = "var_process";
    return frame;
}

} // namespace ccdm
