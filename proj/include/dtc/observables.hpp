#pragma once

// Time-crystal diagnostics and their CSV representation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "dtc/environment.hpp"
#include "dtc/errors.hpp"
#include "dtc/model.hpp"
#include "dtc/state.hpp"
#include "dtc/tensor.hpp"

namespace dtc {

struct MeasurementRecord {
    std::size_t cycle = 0;
    double time = 0.0;
    std::array<double, 2> czz{};         ///< per sublattice, s_i(0) <S^z_i(t)>
    std::array<double, 2> sz{};
    std::array<double, 2> renyi_half{};  ///< rescaled by log 2
    std::array<double, 2> renyi_one{};
    double trunc_weight_max = 0.0;
    std::size_t ctm_iters = 0;

    double czz_mean() const { return 0.5 * (czz[0] + czz[1]); }
};

using TimeSeries = std::vector<MeasurementRecord>;

inline constexpr const char* kCsvHeader =
    "cycle,time,czz_A,czz_B,czz_mean,sz_A,sz_B,renyi_half_A,renyi_half_B,renyi_one_A,renyi_one_B,"
    "trunc_weight_max,ctm_iters";

inline std::string format_double(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

inline std::string csv_row(const MeasurementRecord& r) {
    std::ostringstream os;
    os << r.cycle << ',' << format_double(r.time) << ',' << format_double(r.czz[0]) << ','
       << format_double(r.czz[1]) << ',' << format_double(r.czz_mean()) << ',' << format_double(r.sz[0]) << ','
       << format_double(r.sz[1]) << ',' << format_double(r.renyi_half[0]) << ',' << format_double(r.renyi_half[1])
       << ',' << format_double(r.renyi_one[0]) << ',' << format_double(r.renyi_one[1]) << ','
       << format_double(r.trunc_weight_max) << ',' << r.ctm_iters;
    return os.str();
}

inline void write_csv(std::ostream& os, const TimeSeries& series) {
    os << kCsvHeader << '\n';
    for (const auto& r : series) os << csv_row(r) << '\n';
}

inline void write_csv(const std::string& path, const TimeSeries& series) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    write_csv(f, series);
    if (!f) throw IoError("write failed for " + path);
}

inline TimeSeries read_csv(std::istream& is, const std::string& what = "csv") {
    std::string line;
    if (!std::getline(is, line) || line != kCsvHeader) throw IoError(what + ": missing or unexpected header");
    TimeSeries out;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 13) throw IoError(what + ":" + std::to_string(lineno) + ": expected 13 columns");
        try {
            MeasurementRecord r;
            r.cycle = std::stoull(f[0]);
            r.time = std::stod(f[1]);
            r.czz = {std::stod(f[2]), std::stod(f[3])};
            r.sz = {std::stod(f[5]), std::stod(f[6])};
            r.renyi_half = {std::stod(f[7]), std::stod(f[8])};
            r.renyi_one = {std::stod(f[9]), std::stod(f[10])};
            r.trunc_weight_max = std::stod(f[11]);
            r.ctm_iters = std::stoull(f[12]);
            out.push_back(r);
        } catch (const std::logic_error&) {
            throw IoError(what + ":" + std::to_string(lineno) + ": malformed number");
        }
    }
    return out;
}

inline TimeSeries read_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    return read_csv(f, path);
}

enum class RenyiOrder { Half, One };

/// Eigenvalues at or below this count as zero in the entropies.
inline constexpr double kRoundoffEigenvalue = 1e-15;

/// Rényi entropy of a density matrix divided by log(dim), so that the
/// maximally mixed state gives 1.
inline double renyi_entropy(const DenseTensor& rho, RenyiOrder alpha) {
    if (rho.rank() != 2 || rho.extent(0) != rho.extent(1) || rho.extent(0) < 2)
        throw ArgumentError("renyi_entropy: square matrix of dimension >= 2 required");
    const cplx tr = trace(rho);
    if (std::abs(tr - 1.0) > 1e-8) throw ArgumentError("renyi_entropy: trace is not 1");
    std::vector<double> ev;
    try {
        ev = hermitian_eigenvalues(rho, 1e-8);
    } catch (const ArgumentError&) {
        throw ArgumentError("renyi_entropy: density matrix is not Hermitian");
    }
    if (ev.front() < -1e-8) throw ArgumentError("renyi_entropy: density matrix is not positive semidefinite");
    double s = 0.0;
    if (alpha == RenyiOrder::One) {
        for (double l : ev)
            if (l > kRoundoffEigenvalue) s -= l * std::log(l);
    } else {
        double acc = 0.0;
        for (double l : ev)
            if (l > kRoundoffEigenvalue) acc += std::sqrt(l);
        s = 2.0 * std::log(acc);
    }
    return std::clamp(s / std::log(static_cast<double>(rho.extent(0))), 0.0, 1.0);  // rounding can leave +-1e-16
}

/// s_i(0) <S^z_i(t)> for a z-product initial state.
inline double correlator_zz(const DenseTensor& rho_physical, InitialState pattern, Sublattice s) {
    return initial_sz(pattern, s) * expectation(rho_physical, spin_half_operators().z);
}

/// Fills the per-sublattice columns of `rec` from a physical one-site state.
inline void record_site(MeasurementRecord& rec, Sublattice s, const DenseTensor& rho_physical,
                        InitialState pattern) {
    const std::size_t i = s == Sublattice::A ? 0 : 1;
    rec.sz[i] = expectation(rho_physical, spin_half_operators().z);
    rec.czz[i] = initial_sz(pattern, s) * rec.sz[i];
    rec.renyi_half[i] = renyi_entropy(rho_physical, RenyiOrder::Half);
    rec.renyi_one[i] = renyi_entropy(rho_physical, RenyiOrder::One);
}

/// Observables of the iPEPS at one point in time.
inline MeasurementRecord measure_ipeps(const UnitCell& cell, const Environment& env, InitialState pattern,
                                       std::size_t cycle, double time) {
    MeasurementRecord rec;
    rec.cycle = cycle;
    rec.time = time;
    rec.ctm_iters = env.iterations;
    for (auto s : {Sublattice::A, Sublattice::B}) record_site(rec, s, one_site_rdm(cell, env, s).physical, pattern);
    return rec;
}

inline constexpr double kDefaultDeltaThreshold = 0.01;
inline constexpr double kGridTolerance = 1e-9;

struct ConvergenceReport {
    std::vector<std::size_t> cycles;
    std::vector<double> times;
    std::vector<double> delta;     ///< max over sublattices of |C_low - C_high|
    double threshold = kDefaultDeltaThreshold;
    std::size_t cutoff_index = 0;  ///< first record above threshold, or delta.size()
    double cutoff_time = 0.0;      ///< time of that record, or of the last record
    bool exceeded = false;
};

inline void require_aligned(const TimeSeries& a, const TimeSeries& b, const char* what) {
    if (a.size() != b.size())
        throw ArgumentError(std::string(what) + ": series lengths differ (" + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()) + ")");
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].cycle != b[i].cycle || std::abs(a[i].time - b[i].time) > kGridTolerance)
            throw ArgumentError(std::string(what) + ": measurement grids differ at record " + std::to_string(i));
}

inline ConvergenceReport convergence_delta(const TimeSeries& low, const TimeSeries& high,
                                           double threshold = kDefaultDeltaThreshold) {
    require_aligned(low, high, "convergence_delta");
    if (!(threshold >= 0.0)) throw ArgumentError("convergence_delta: threshold must be nonnegative");
    ConvergenceReport rep;
    rep.threshold = threshold;
    rep.cutoff_index = low.size();
    for (std::size_t i = 0; i < low.size(); ++i) {
        const double d = std::max(std::abs(low[i].czz[0] - high[i].czz[0]), std::abs(low[i].czz[1] - high[i].czz[1]));
        rep.cycles.push_back(low[i].cycle);
        rep.times.push_back(low[i].time);
        rep.delta.push_back(d);
        if (!rep.exceeded && d > threshold) {
            rep.exceeded = true;
            rep.cutoff_index = i;
        }
    }
    if (!low.empty()) rep.cutoff_time = rep.exceeded ? rep.times[rep.cutoff_index] : rep.times.back();
    return rep;
}

inline void write_convergence_report(const std::string& path, const ConvergenceReport& rep) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << "# threshold=" << format_double(rep.threshold) << " cutoff_time=" << format_double(rep.cutoff_time)
      << " exceeded=" << (rep.exceeded ? 1 : 0) << '\n';
    f << "cycle,time,delta\n";
    for (std::size_t i = 0; i < rep.delta.size(); ++i)
        f << rep.cycles[i] << ',' << format_double(rep.times[i]) << ',' << format_double(rep.delta[i]) << '\n';
    if (!f) throw IoError("write failed for " + path);
}

}  // namespace dtc
