#pragma once

// Exact state-vector evolution on small finite lattices.
//
// Two routes to the disorder-averaged dynamics:
//   dilated    - one evolution of the fused (spin, ancilla) lattice, ancillas
//                starting in |+>; the ancilla trace performs the average.
//   enumerated - one evolution of the bare spins per disorder configuration,
//                averaged with equal weights.
// Both apply the same Floquet schedule as the iPEPS code, so any difference
// to the tensor network comes from truncation alone.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <array>
#include <span>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "dtc/errors.hpp"
#include "dtc/evolve.hpp"
#include "dtc/model.hpp"
#include "dtc/observables.hpp"
#include "dtc/state.hpp"
#include "dtc/tensor.hpp"

namespace dtc {

enum class LatticeBoundary { Open, Periodic };

struct LatticeSpec {
    std::size_t Lx = 1, Ly = 1;
    LatticeBoundary boundary = LatticeBoundary::Open;

    std::size_t sites() const { return Lx * Ly; }
    std::size_t index(std::size_t x, std::size_t y) const { return y * Lx + x; }  // row-major
    Sublattice sublattice(std::size_t i) const {
        return ((i % Lx) + (i / Lx)) % 2 == 0 ? Sublattice::A : Sublattice::B;
    }
};

/// A bond with its A site first, matching the gate convention of the iPEPS.
struct LatticeBond {
    std::size_t a_site, b_site;
    LinkClass link;
};

/// Bonds of the lattice grouped by link class. Periodic wrap-around bonds join
/// the class of the A-site axis they attach to; a periodic extent of 2 yields
/// two distinct bonds between the same pair.
inline std::vector<LatticeBond> lattice_bonds(const LatticeSpec& lat) {
    if (lat.Lx == 0 || lat.Ly == 0) throw ArgumentError("lattice: extents must be positive");
    const bool periodic = lat.boundary == LatticeBoundary::Periodic;
    if (periodic && ((lat.Lx > 1 && lat.Lx % 2) || (lat.Ly > 1 && lat.Ly % 2)))
        throw ArgumentError("lattice: periodic extents must be even to keep the checkerboard");
    std::vector<LatticeBond> bonds;
    for (std::size_t y = 0; y < lat.Ly; ++y)
        for (std::size_t x = 0; x < lat.Lx; ++x) {
            const std::size_t i = lat.index(x, y);
            const bool i_is_a = lat.sublattice(i) == Sublattice::A;
            if (x + 1 < lat.Lx || (periodic && lat.Lx > 1)) {
                const std::size_t j = lat.index((x + 1) % lat.Lx, y);
                bonds.push_back(i_is_a ? LatticeBond{i, j, LinkClass::R} : LatticeBond{j, i, LinkClass::L});
            }
            if (y + 1 < lat.Ly || (periodic && lat.Ly > 1)) {
                const std::size_t j = lat.index(x, (y + 1) % lat.Ly);
                bonds.push_back(i_is_a ? LatticeBond{i, j, LinkClass::Do} : LatticeBond{j, i, LinkClass::U});
            }
        }
    return bonds;
}

inline constexpr std::size_t kDefaultOracleBudget = std::size_t{1} << 23;  // complex entries

/// Dense state vector over N sites of local dimension d, site 0 most significant.
class StateVector {
public:
    StateVector(std::size_t sites, std::size_t local_dim, std::size_t budget = kDefaultOracleBudget)
        : n_(sites), d_(local_dim) {
        std::size_t dim = 1;
        for (std::size_t i = 0; i < sites; ++i) {
            if (dim > budget / local_dim)
                throw ResourceError("oracle: state of " + std::to_string(sites) + " sites with local dimension " +
                                    std::to_string(local_dim) + " exceeds the budget of " + std::to_string(budget) +
                                    " amplitudes");
            dim *= local_dim;
        }
        psi_.assign(dim, cplx{});
        stride_.resize(sites);
        std::size_t s = 1;
        for (std::size_t i = sites; i-- > 0;) {
            stride_[i] = s;
            s *= local_dim;
        }
    }

    /// Product state from one local vector per site.
    void set_product(const std::vector<std::vector<cplx>>& local) {
        for (std::size_t idx = 0; idx < psi_.size(); ++idx) {
            cplx amp = 1.0;
            for (std::size_t i = 0; i < n_ && amp != cplx{}; ++i) amp *= local[i][digit(idx, i)];
            psi_[idx] = amp;
        }
    }

    std::size_t digit(std::size_t idx, std::size_t site) const { return (idx / stride_[site]) % d_; }

    void apply_one_site(const DenseTensor& g, std::size_t site) {
        const std::size_t st = stride_[site];
        const std::size_t block = st * d_;
        std::vector<cplx> in(d_);
        for (std::size_t hi = 0; hi < psi_.size(); hi += block)
            for (std::size_t lo = 0; lo < st; ++lo) {
                const std::size_t base = hi + lo;
                for (std::size_t a = 0; a < d_; ++a) in[a] = psi_[base + a * st];
                for (std::size_t a = 0; a < d_; ++a) {
                    cplx s = 0.0;
                    for (std::size_t b = 0; b < d_; ++b) s += g.at(a, b) * in[b];
                    psi_[base + a * st] = s;
                }
            }
    }

    /// g acts on (first, second) with row index i_first * d + i_second.
    void apply_two_site(const DenseTensor& g, std::size_t first, std::size_t second) {
        if (first == second) throw ArgumentError("oracle: two-site gate on a single site");
        const std::size_t s1 = stride_[first], s2 = stride_[second];
        const std::size_t dd = d_ * d_;
        std::vector<cplx> in(dd);
        for (std::size_t idx = 0; idx < psi_.size(); ++idx) {
            if (digit(idx, first) != 0 || digit(idx, second) != 0) continue;
            for (std::size_t a = 0; a < d_; ++a)
                for (std::size_t b = 0; b < d_; ++b) in[a * d_ + b] = psi_[idx + a * s1 + b * s2];
            for (std::size_t a = 0; a < d_; ++a)
                for (std::size_t b = 0; b < d_; ++b) {
                    cplx s = 0.0;
                    const std::size_t row = a * d_ + b;
                    for (std::size_t c = 0; c < dd; ++c) s += g.at(row, c) * in[c];
                    psi_[idx + a * s1 + b * s2] = s;
                }
        }
    }

    /// Reduced density matrix of one site.
    DenseTensor site_rdm(std::size_t site) const {
        DenseTensor rho({d_, d_});
        const std::size_t st = stride_[site];
        const std::size_t block = st * d_;
        for (std::size_t hi = 0; hi < psi_.size(); hi += block)
            for (std::size_t lo = 0; lo < st; ++lo) {
                const std::size_t base = hi + lo;
                for (std::size_t a = 0; a < d_; ++a)
                    for (std::size_t b = 0; b < d_; ++b)
                        rho.at(a, b) += psi_[base + a * st] * std::conj(psi_[base + b * st]);
            }
        return rho;
    }

    double norm() const {
        double s = 0.0;
        for (const auto& x : psi_) s += std::norm(x);
        return std::sqrt(s);
    }

    std::size_t sites() const { return n_; }
    std::size_t local_dim() const { return d_; }
    const std::vector<cplx>& amplitudes() const { return psi_; }

private:
    std::size_t n_, d_;
    std::vector<cplx> psi_;
    std::vector<std::size_t> stride_;
};

/// Neumaier-compensated running sum of complex matrices.
class CompensatedSum {
public:
    explicit CompensatedSum(std::size_t n = 0) : sum_(2 * n), comp_(2 * n) {}
    void add(std::span<const cplx> x) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            step(sum_[2 * i], comp_[2 * i], x[i].real());
            step(sum_[2 * i + 1], comp_[2 * i + 1], x[i].imag());
        }
    }
    std::vector<cplx> value() const {
        std::vector<cplx> v(sum_.size() / 2);
        for (std::size_t i = 0; i < v.size(); ++i)
            v[i] = {sum_[2 * i] + comp_[2 * i], sum_[2 * i + 1] + comp_[2 * i + 1]};
        return v;
    }

private:
    static void step(double& s, double& c, double x) {
        const double t = s + x;
        c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
        s = t;
    }
    std::vector<double> sum_, comp_;
};

struct OracleOptions {
    Cadence cadence = Cadence::Stroboscopic;
    std::size_t flip_slices = 1;
    std::size_t budget = kDefaultOracleBudget;  ///< amplitudes per state vector
    std::size_t max_configs = 1u << 20;         ///< disorder configurations (enumerated route)
    std::vector<std::size_t> config_order;      ///< visiting order of configurations; empty = natural
};

namespace oracle_detail {

using Snapshot = std::function<void(const MeasurePoint&, const StateVector&)>;

/// Runs the schedule on a state vector. `site_disorder`, when non-empty,
/// replaces the schedule's disorder gate with one gate per site.
inline void run_schedule(StateVector& psi, const LatticeSpec& lat, const GateSchedule& sched, std::size_t n_cycles,
                         Cadence cadence, const std::vector<DenseTensor>& site_disorder, const Snapshot& snap) {
    const auto bonds = lattice_bonds(lat);
    const double T = sched.params.T;
    MeasurePoint mp;
    mp.kind = Boundary::PeriodEnd;
    snap(mp, psi);
    for (std::size_t n = 0; n < n_cycles; ++n) {
        for (const auto& g : sched.gates) {
            if (g.kind == GateKind::Link) {
                for (const auto& b : bonds)
                    if (b.link == g.link) psi.apply_two_site(g.unitary, b.a_site, b.b_site);
            } else if (g.role == GateRole::Disorder && !site_disorder.empty()) {
                for (std::size_t i = 0; i < psi.sites(); ++i) psi.apply_one_site(site_disorder[i], i);
            } else {
                for (std::size_t i = 0; i < psi.sites(); ++i) psi.apply_one_site(g.unitary, i);
            }
            const bool strobe = g.ends == Boundary::PeriodEnd;
            const bool sub = cadence == Cadence::PerTrotterStep &&
                             (g.ends == Boundary::TrotterStep || g.ends == Boundary::FlipSlice);
            if (strobe || sub) {
                mp.kind = g.ends;
                mp.cycle = strobe ? n + 1 : n;
                mp.time = strobe ? static_cast<double>(n + 1) * T
                                 : static_cast<double>(n) * T + sched.offset_of(g.ends, g.step);
                snap(mp, psi);
            }
        }
    }
}

/// Per-site physical one-site states at every measurement point.
struct PhysicalSnapshots {
    std::vector<MeasurePoint> points;
    std::vector<std::vector<DenseTensor>> rho;  ///< [point][site], 2 x 2
};

inline TimeSeries to_series(const LatticeSpec& lat, const PhysicalSnapshots& snaps, InitialState pattern) {
    TimeSeries out;
    for (std::size_t k = 0; k < snaps.points.size(); ++k) {
        MeasurementRecord rec;
        rec.cycle = snaps.points[k].cycle;
        rec.time = snaps.points[k].time;
        std::array<std::size_t, 2> count{};
        for (std::size_t i = 0; i < lat.sites(); ++i) {
            const Sublattice s = lat.sublattice(i);
            MeasurementRecord one;
            record_site(one, s, snaps.rho[k][i], pattern);
            const std::size_t j = s == Sublattice::A ? 0 : 1;
            rec.sz[j] += one.sz[j];
            rec.czz[j] += one.czz[j];
            rec.renyi_half[j] += one.renyi_half[j];
            rec.renyi_one[j] += one.renyi_one[j];
            ++count[j];
        }
        for (std::size_t j = 0; j < 2; ++j) {
            if (count[j] == 0) continue;
            const double inv = 1.0 / static_cast<double>(count[j]);
            rec.sz[j] *= inv;
            rec.czz[j] *= inv;
            rec.renyi_half[j] *= inv;
            rec.renyi_one[j] *= inv;
        }
        if (count[1] == 0) {  // single-site lattice: mirror A
            rec.sz[1] = rec.sz[0];
            rec.czz[1] = rec.czz[0];
            rec.renyi_half[1] = rec.renyi_half[0];
            rec.renyi_one[1] = rec.renyi_one[0];
        }
        out.push_back(rec);
    }
    return out;
}

inline std::vector<cplx> spin_vector(InitialState pattern, Sublattice s) {
    return initial_sz(pattern, s) > 0 ? std::vector<cplx>{1.0, 0.0} : std::vector<cplx>{0.0, 1.0};
}

}  // namespace oracle_detail

/// Dilated route. Also returns the final fused state when `final_state` is set.
inline TimeSeries exact_evolve_dilated(const LatticeSpec& lat, const ModelParams& params, InitialState pattern,
                                       std::size_t n_cycles, const OracleOptions& opt = {},
                                       std::vector<cplx>* final_state = nullptr) {
    const GateSchedule sched = build_floquet_schedule(params, opt.flip_slices);
    const auto da = static_cast<std::size_t>(params.d_a);
    StateVector psi(lat.sites(), 2 * da, opt.budget);
    std::vector<std::vector<cplx>> local(lat.sites());
    const double amp = 1.0 / std::sqrt(static_cast<double>(da));
    for (std::size_t i = 0; i < lat.sites(); ++i) {
        const auto spin = oracle_detail::spin_vector(pattern, lat.sublattice(i));
        local[i].assign(2 * da, cplx{});
        for (std::size_t p = 0; p < 2; ++p)
            for (std::size_t a = 0; a < da; ++a) local[i][p * da + a] = spin[p] * amp;
    }
    psi.set_product(local);

    oracle_detail::PhysicalSnapshots snaps;
    oracle_detail::run_schedule(psi, lat, sched, n_cycles, opt.cadence, {},
                                [&](const MeasurePoint& mp, const StateVector& v) {
                                    snaps.points.push_back(mp);
                                    std::vector<DenseTensor> rho;
                                    for (std::size_t i = 0; i < v.sites(); ++i)
                                        rho.push_back(physical_marginal(v.site_rdm(i), params.d_a));
                                    snaps.rho.push_back(std::move(rho));
                                });
    if (final_state) *final_state = psi.amplitudes();
    return oracle_detail::to_series(lat, snaps, pattern);
}

/// Enumerated route: averages one-site states over all d_a^N configurations.
inline TimeSeries exact_evolve_enumerated(const LatticeSpec& lat, const ModelParams& params, InitialState pattern,
                                          std::size_t n_cycles, const OracleOptions& opt = {}) {
    ModelParams bare = params;
    bare.d_a = 1;
    const GateSchedule sched = build_floquet_schedule(bare, opt.flip_slices);
    const std::size_t n = lat.sites();
    const auto da = static_cast<std::size_t>(params.d_a);
    std::size_t configs = 1;
    for (std::size_t i = 0; i < n; ++i) {
        if (configs > opt.max_configs / da)
            throw ResourceError("oracle: " + std::to_string(da) + "^" + std::to_string(n) +
                                " disorder configurations exceed the budget");
        configs *= da;
    }
    std::vector<DenseTensor> level_gates;
    for (std::size_t k = 0; k < da; ++k)
        level_gates.push_back(build_field_site_gate(params.dt, params.h * ancilla_level(static_cast<int>(k), params.d_a)));

    std::vector<std::vector<cplx>> local(n);
    for (std::size_t i = 0; i < n; ++i) local[i] = oracle_detail::spin_vector(pattern, lat.sublattice(i));

    if (!opt.config_order.empty()) {
        std::vector<bool> hit(configs, false);
        if (opt.config_order.size() != configs)
            throw ArgumentError("exact_evolve_enumerated: config_order must list every configuration once");
        for (std::size_t c : opt.config_order) {
            if (c >= configs || hit[c])
                throw ArgumentError("exact_evolve_enumerated: config_order must list every configuration once");
            hit[c] = true;
        }
    }

    std::vector<MeasurePoint> points;
    std::vector<CompensatedSum> acc;  // [point * n + site], 4 entries each
    std::vector<DenseTensor> site_gates(n);
    std::vector<std::size_t> level(n, 0);
    for (std::size_t visit = 0; visit < configs; ++visit) {
        const std::size_t c = opt.config_order.empty() ? visit : opt.config_order[visit];
        std::size_t rest = c;
        for (std::size_t i = n; i-- > 0;) {
            level[i] = rest % da;
            rest /= da;
        }
        for (std::size_t i = 0; i < n; ++i) site_gates[i] = level_gates[level[i]];
        StateVector psi(n, 2, opt.budget);
        psi.set_product(local);
        std::size_t k = 0;
        oracle_detail::run_schedule(psi, lat, sched, n_cycles, opt.cadence, site_gates,
                                    [&](const MeasurePoint& mp, const StateVector& v) {
                                        if (visit == 0) {
                                            points.push_back(mp);
                                            for (std::size_t i = 0; i < n; ++i) acc.emplace_back(4);
                                        }
                                        for (std::size_t i = 0; i < n; ++i)
                                            acc[k * n + i].add(v.site_rdm(i).data());
                                        ++k;
                                    });
    }
    oracle_detail::PhysicalSnapshots snaps;
    snaps.points = points;
    const double w = 1.0 / static_cast<double>(configs);
    for (std::size_t k = 0; k < points.size(); ++k) {
        std::vector<DenseTensor> rho;
        for (std::size_t i = 0; i < n; ++i) {
            DenseTensor r({2, 2}, acc[k * n + i].value());
            rho.push_back(r *= w);
        }
        snaps.rho.push_back(std::move(rho));
    }
    return oracle_detail::to_series(lat, snaps, pattern);
}

struct Deviation {
    double max_deviation = 0.0;
    std::size_t index = 0;
    double time = 0.0;
};

/// Max |czz_mean| difference over records with time <= horizon.
inline Deviation compare_short_time(const TimeSeries& a, const TimeSeries& b, double horizon) {
    Deviation dev;
    std::size_t i = 0;
    for (; i < a.size() && a[i].time <= horizon + kGridTolerance; ++i) {
        if (i >= b.size() || a[i].cycle != b[i].cycle || std::abs(a[i].time - b[i].time) > kGridTolerance)
            throw ArgumentError("compare_short_time: measurement grids differ at record " + std::to_string(i));
        const double d = std::abs(a[i].czz_mean() - b[i].czz_mean());
        if (i == 0 || d > dev.max_deviation) dev = {d, i, a[i].time};
    }
    if (i < b.size() && b[i].time <= horizon + kGridTolerance)
        throw ArgumentError("compare_short_time: measurement grids differ in length before the horizon");
    return dev;
}

inline void write_comparison_report(const std::string& path, const Deviation& dev, double horizon) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << "horizon " << format_double(horizon) << '\n'
      << "max_deviation " << format_double(dev.max_deviation) << '\n'
      << "record " << dev.index << '\n'
      << "time " << format_double(dev.time) << '\n';
}

}  // namespace dtc
