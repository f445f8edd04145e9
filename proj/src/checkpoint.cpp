#include "ccdm/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace ccdm {

namespace {

constexpr char kMagic[8] = {'C', 'C', 'D', 'M', 'C', 'K', 'P', '1'};

void write_u32(std::ostream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_i64(std::ostream& out, int64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void write_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), 8); }

void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t read_u32(std::istream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

int64_t read_i64(std::istream& in) {
    int64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

double read_f64(std::istream& in) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

std::string read_string(std::istream& in) {
    const uint32_t n = read_u32(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    return s;
}

template <typename S>
void write_tensor(std::ostream& out, const Tensor<S>& t) {
    write_u32(out, static_cast<uint32_t>(t.shape.size()));
    for (int d : t.shape) write_u32(out, static_cast<uint32_t>(d));
    out.write(reinterpret_cast<const char*>(t.values.data()),
              static_cast<std::streamsize>(t.values.size() * sizeof(S)));
}

template <typename S>
Tensor<S> read_tensor(std::istream& in) {
    const uint32_t ndim = read_u32(in);
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = static_cast<int>(read_u32(in));
    Tensor<S> t = Tensor<S>::zeros(shape);
    in.read(reinterpret_cast<char*>(t.values.data()),
            static_cast<std::streamsize>(t.values.size() * sizeof(S)));
    return t;
}

template <typename S>
void save_impl(const std::string& path, const Checkpoint<S>& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw TrainingError("cannot write checkpoint: " + path);
    out.write(kMagic, 8);
    write_u32(out, static_cast<uint32_t>(ckpt.schema_version));
    write_u32(out, sizeof(S));
    write_string(out, ckpt.config_fingerprint);
    write_u32(out, static_cast<uint32_t>(ckpt.params.size()));
    for (const auto& [name, t] : ckpt.params) {
        write_string(out, name);
        write_tensor(out, t);
    }
    write_u32(out, ckpt.adam.has_value() ? 1 : 0);
    if (ckpt.adam) {
        const auto& a = *ckpt.adam;
        write_f64(out, a.lr);
        write_f64(out, a.beta1);
        write_f64(out, a.beta2);
        write_f64(out, a.eps);
        write_i64(out, a.step);
        write_u32(out, static_cast<uint32_t>(a.m.size()));
        for (const auto& [name, t] : a.m) {
            write_string(out, name);
            write_tensor(out, t);
            write_tensor(out, a.v.at(name));
        }
    }
    if (!out) throw TrainingError("short write on checkpoint: " + path);
}

template <typename S>
Checkpoint<S> load_impl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TrainingError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw TrainingError("not a ccdm checkpoint: " + path);
    Checkpoint<S> ckpt;
    ckpt.schema_version = static_cast<int>(read_u32(in));
    if (ckpt.schema_version != kCheckpointSchemaVersion)
        throw TrainingError("unsupported checkpoint schema version " +
                            std::to_string(ckpt.schema_version));
    const uint32_t ssize = read_u32(in);
    if (ssize != sizeof(S))
        throw TrainingError("checkpoint precision is " + std::to_string(ssize * 8) +
                            "-bit, expected " + std::to_string(sizeof(S) * 8) + "-bit: " + path);
    ckpt.config_fingerprint = read_string(in);
    const uint32_t n = read_u32(in);
    for (uint32_t i = 0; i < n; ++i) {
        std::string name = read_string(in);
        ckpt.params.emplace(std::move(name), read_tensor<S>(in));
    }
    if (read_u32(in) == 1) {
        AdamState<S> a;
        a.lr = read_f64(in);
        a.beta1 = read_f64(in);
        a.beta2 = read_f64(in);
        a.eps = read_f64(in);
        a.step = read_i64(in);
        const uint32_t nm = read_u32(in);
        for (uint32_t i = 0; i < nm; ++i) {
            std::string name = read_string(in);
            a.m.emplace(name, read_tensor<S>(in));
            a.v.emplace(name, read_tensor<S>(in));
        }
        ckpt.adam = std::move(a);
    }
    if (!in) throw TrainingError("truncated checkpoint: " + path);
    return ckpt;
}

} // namespace

void save_checkpoint(const std::string& path, const Checkpoint<float>& ckpt) {
    save_impl(path, ckpt);
}
void save_checkpoint(const std::string& path, const Checkpoint<double>& ckpt) {
    save_impl(path, ckpt);
}
Checkpoint<float> load_checkpoint_f32(const std::string& path) { return load_impl<float>(path); }
Checkpoint<double> load_checkpoint_f64(const std::string& path) { return load_impl<double>(path); }

uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file for hashing: " + path);
    uint64_t h = 1469598103934665603ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        h = fnv1a64_bytes(buf, static_cast<size_t>(in.gcount()), h);
        if (!in) break;
    }
    return h;
}

} // namespace ccdm
