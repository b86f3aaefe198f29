#pragma once

// Binary checkpoint of an iPEPS run.
//
// Layout (host byte order, which is checked through the marker word):
//   char[8]   "DTCCKPT\0"
//   u32       version (1)
//   u32       byte-order marker 0x01020304
//   i32       d_a
//   u64       D_max
//   f64 x 5   J, h, T, epsilon, dt
//   u64       completed Floquet cycles
//   f64       elapsed Floquet time
//   tensor    A, then B: u32 rank, u64 extents[rank], f64 (re, im) per entry
//   4 x       u64 length, f64 weights[length]            (links L, U, R, Do)
//   u8        environment flag; when 1:
//             u64 chi, then for sublattice A and B the tensors C1..C4, T1..T4
//
// Files are written to a temporary sibling and renamed into place, so a crash
// never leaves a truncated checkpoint behind.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "dtc/environment.hpp"
#include "dtc/errors.hpp"
#include "dtc/model.hpp"
#include "dtc/state.hpp"
#include "dtc/tensor.hpp"

namespace dtc {

inline constexpr char kCheckpointMagic[8] = {'D', 'T', 'C', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint32_t kByteOrderMarker = 0x01020304u;

struct Checkpoint {
    ModelParams params;
    std::size_t cycle = 0;
    double time = 0.0;
    UnitCell cell;
    std::optional<Environment> environment;
};

namespace ckpt_detail {

class Writer {
public:
    explicit Writer(std::ostream& os) : os_(os) {}
    template <typename T>
    void pod(const T& v) { os_.write(reinterpret_cast<const char*>(&v), sizeof(T)); }
    void tensor(const DenseTensor& t) {
        pod(static_cast<std::uint32_t>(t.rank()));
        for (auto e : t.shape()) pod(static_cast<std::uint64_t>(e));
        for (const cplx& z : t.data()) {
            pod(z.real());
            pod(z.imag());
        }
    }

private:
    std::ostream& os_;
};

class Reader {
public:
    Reader(std::istream& is, std::string what) : is_(is), what_(std::move(what)) {}
    template <typename T>
    T pod() {
        T v{};
        is_.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (!is_) throw IoError(what_ + ": truncated checkpoint");
        return v;
    }
    DenseTensor tensor() {
        const auto rank = pod<std::uint32_t>();
        if (rank > 8) throw IoError(what_ + ": implausible tensor rank " + std::to_string(rank));
        Shape shape(rank);
        std::size_t volume = 1;
        for (auto& e : shape) {
            const auto x = pod<std::uint64_t>();
            if (x == 0 || x > (std::uint64_t{1} << 24)) throw IoError(what_ + ": implausible tensor extent");
            e = static_cast<std::size_t>(x);
            volume *= e;
            if (volume > (std::size_t{1} << 32)) throw IoError(what_ + ": implausible tensor size");
        }
        std::vector<cplx> data(volume);
        for (auto& z : data) {
            const double re = pod<double>();
            const double im = pod<double>();
            z = {re, im};
        }
        return DenseTensor(std::move(shape), std::move(data));
    }

private:
    std::istream& is_;
    std::string what_;
};

}  // namespace ckpt_detail

inline void write_checkpoint(std::ostream& os, const Checkpoint& c) {
    ckpt_detail::Writer w(os);
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    w.pod(kCheckpointVersion);
    w.pod(kByteOrderMarker);
    w.pod(static_cast<std::int32_t>(c.cell.d_a));
    w.pod(static_cast<std::uint64_t>(c.cell.D_max));
    for (double x : {c.params.J, c.params.h, c.params.T, c.params.epsilon, c.params.dt}) w.pod(x);
    w.pod(static_cast<std::uint64_t>(c.cycle));
    w.pod(c.time);
    w.tensor(c.cell.A);
    w.tensor(c.cell.B);
    for (const auto& lam : c.cell.weights.lambda) {
        w.pod(static_cast<std::uint64_t>(lam.size()));
        for (double x : lam) w.pod(x);
    }
    w.pod(static_cast<std::uint8_t>(c.environment ? 1 : 0));
    if (c.environment) {
        const Environment& env = *c.environment;
        w.pod(static_cast<std::uint64_t>(env.chi));
        for (const auto& set : env.sets)
            for (const DenseTensor* t : {&set.C1, &set.C2, &set.C3, &set.C4, &set.T1, &set.T2, &set.T3, &set.T4})
                w.tensor(*t);
    }
}

inline Checkpoint read_checkpoint(std::istream& is, const std::string& what = "checkpoint") {
    ckpt_detail::Reader r(is, what);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || !std::equal(magic, magic + 8, kCheckpointMagic)) throw IoError(what + ": not a checkpoint file");
    if (const auto v = r.pod<std::uint32_t>(); v != kCheckpointVersion)
        throw IoError(what + ": unsupported checkpoint version " + std::to_string(v));
    if (r.pod<std::uint32_t>() != kByteOrderMarker) throw IoError(what + ": written with a different byte order");
    Checkpoint c;
    c.cell.d_a = r.pod<std::int32_t>();
    c.cell.D_max = static_cast<std::size_t>(r.pod<std::uint64_t>());
    c.params.d_a = c.cell.d_a;
    c.params.J = r.pod<double>();
    c.params.h = r.pod<double>();
    c.params.T = r.pod<double>();
    c.params.epsilon = r.pod<double>();
    c.params.dt = r.pod<double>();
    c.cycle = static_cast<std::size_t>(r.pod<std::uint64_t>());
    c.time = r.pod<double>();
    c.cell.A = r.tensor();
    c.cell.B = r.tensor();
    for (auto& lam : c.cell.weights.lambda) {
        const auto n = r.pod<std::uint64_t>();
        if (n == 0 || n > (std::uint64_t{1} << 20)) throw IoError(what + ": implausible weight vector length");
        lam.resize(static_cast<std::size_t>(n));
        for (auto& x : lam) x = r.pod<double>();
    }
    try {
        c.cell.validate();
    } catch (const std::exception& e) {
        throw IoError(what + ": inconsistent unit cell (" + e.what() + ")");
    }
    if (r.pod<std::uint8_t>() != 0) {
        Environment env;
        env.chi = static_cast<std::size_t>(r.pod<std::uint64_t>());
        for (auto& set : env.sets)
            for (DenseTensor* t : {&set.C1, &set.C2, &set.C3, &set.C4, &set.T1, &set.T2, &set.T3, &set.T4})
                *t = r.tensor();
        c.environment = std::move(env);
    }
    return c;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
        write_checkpoint(f, c);
        f.flush();
        if (!f) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    return read_checkpoint(f, path.string());
}

}  // namespace dtc
