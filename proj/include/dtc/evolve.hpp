#pragma once

// Simple-update Trotter evolution of the checkerboard iPEPS.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "dtc/errors.hpp"
#include "dtc/model.hpp"
#include "dtc/state.hpp"
#include "dtc/tensor.hpp"

namespace dtc {

enum class GateTarget { A, B, Both };

/// Contracts a one-site gate into the physical axis of the targeted site(s).
inline void apply_one_site_gate(UnitCell& cell, const DenseTensor& gate, GateTarget target = GateTarget::Both) {
    const std::size_t d = 2 * static_cast<std::size_t>(cell.d_a);
    if (gate.rank() != 2 || gate.extent(0) != d || gate.extent(1) != d)
        throw DimensionError("apply_one_site_gate: gate shape " + shape_string(gate.shape()) +
                             " does not match fused dimension " + std::to_string(d));
    auto apply = [&](DenseTensor& t) { t = contract(gate, t, {{1, 0}}); };
    if (target != GateTarget::B) apply(cell.A);
    if (target != GateTarget::A) apply(cell.B);
}

struct LinkUpdate {
    double discarded_weight = 0.0;
    std::size_t kept = 0;
    bool degenerate_split = false;
};

namespace detail {

/// Thin QR of a row-major matrix: m = q * r.
inline void thin_qr(const RowMatrix& m, RowMatrix& q, RowMatrix& r) {
    const Eigen::Index k = std::min(m.rows(), m.cols());
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(m);
    q = qr.householderQ() * Eigen::MatrixXcd::Identity(m.rows(), k);
    r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
}

inline std::vector<std::size_t> inverse_permutation(const std::vector<std::size_t>& p) {
    std::vector<std::size_t> inv(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) inv[p[i]] = i;
    return inv;
}

}  // namespace detail

/// Simple-update step on one A-B link: weights of the three outer links of
/// each site act as the environment, the gate (first factor on A) is applied,
/// and the bond is split by a truncated SVD whose normalized singular values
/// become the new link weights. Site tensors are renormalized to unit norm.
inline LinkUpdate apply_link_gate(UnitCell& cell, const DenseTensor& gate, LinkClass link, std::size_t D_max,
                                  double cutoff = kDefaultSvdCutoff) {
    const std::size_t d = 2 * static_cast<std::size_t>(cell.d_a);
    if (gate.rank() != 2 || gate.extent(0) != d * d || gate.extent(1) != d * d)
        throw DimensionError("apply_link_gate: gate shape " + shape_string(gate.shape()) + " for fused dimension " +
                             std::to_string(d));
    if (D_max == 0) throw ArgumentError("apply_link_gate: D_max must be positive");

    struct Side {
        Sublattice s;
        std::size_t bond_axis;
        std::vector<std::size_t> perm;  // (outer axes..., phys, bond)
        Shape outer_shape;
        RowMatrix q, r;
    };
    std::array<Side, 2> sides{Side{Sublattice::A, axis_of(Sublattice::A, link), {}, {}, {}, {}},
                              Side{Sublattice::B, axis_of(Sublattice::B, link), {}, {}, {}, {}}};
    const std::vector<double>& lam = cell.weights[link];
    const std::size_t D = lam.size();

    for (auto& side : sides) {
        std::array<bool, 5> skip{};
        skip[side.bond_axis] = true;
        DenseTensor x = scale_virtual_axes(cell.site(side.s), side.s, cell.weights, 1.0, skip);
        for (std::size_t ax = 1; ax <= 4; ++ax)
            if (ax != side.bond_axis) {
                side.perm.push_back(ax);
                side.outer_shape.push_back(x.extent(ax));
            }
        side.perm.push_back(axis::phys);
        side.perm.push_back(side.bond_axis);
        const RowMatrix m = to_matrix(x, {side.perm[0], side.perm[1], side.perm[2]});  // columns (phys, bond)
        detail::thin_qr(m, side.q, side.r);
    }

    // theta(ka, pa, pb, kb) = sum_b Ra(ka, pa, b) lambda_b Rb(kb, pb, b)
    const std::size_t ka = static_cast<std::size_t>(sides[0].r.rows());
    const std::size_t kb = static_cast<std::size_t>(sides[1].r.rows());
    RowMatrix ra = sides[0].r;  // (ka, d*D) with column index p*D + b
    for (Eigen::Index row = 0; row < ra.rows(); ++row)
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t b = 0; b < D; ++b) ra(row, static_cast<Eigen::Index>(p * D + b)) *= lam[b];
    const DenseTensor ta = from_matrix(ra, {ka, d, D});
    const DenseTensor tb = from_matrix(sides[1].r, {kb, d, D});
    const DenseTensor theta = contract(ta, tb, {{2, 2}});  // (ka, pa, kb, pb)
    const DenseTensor g = gate.reshape({d, d, d, d});
    // (qa, qb, ka, kb)
    const DenseTensor gt = contract(g, theta, {{2, 1}, {3, 3}});
    const DenseTensor gt_perm = gt.permute({2, 0, 1, 3});  // (ka, qa, qb, kb)

    SVDResult svd = svd_split(gt_perm, {0, 1}, D_max, cutoff);
    const std::size_t k = svd.singular_values.size();
    double snorm = 0.0;
    for (double s : svd.singular_values) snorm += s * s;
    snorm = std::sqrt(snorm);
    if (!(snorm > 0.0) || !std::isfinite(snorm))
        throw NumericalError(std::string("apply_link_gate: vanishing singular values on link ") + link_name(link));
    std::vector<double> new_lam(k);
    for (std::size_t i = 0; i < k; ++i) new_lam[i] = std::max(svd.singular_values[i] / snorm, 0.0);
    for (auto& x : new_lam)
        if (!(x > 0.0)) x = kWeightFloor * new_lam[0];

    // Rebuild the sites in (outer..., phys, bond) order and restore axes.
    const DenseTensor ua = svd.left_isometry;                               // (ka, qa, k)
    const DenseTensor vb = svd.right_isometry.permute({2, 1, 0});           // (kb, qb, k)
    const std::array<const DenseTensor*, 2> factors{&ua, &vb};
    std::array<DenseTensor, 2> rebuilt;
    for (std::size_t i = 0; i < 2; ++i) {
        auto& side = sides[i];
        const RowMatrix f = to_matrix(*factors[i], {0});
        const RowMatrix m = side.q * f;
        Shape sh = side.outer_shape;
        sh.push_back(d);
        sh.push_back(k);
        rebuilt[i] = from_matrix(m, sh).permute(detail::inverse_permutation(side.perm));
    }
    cell.weights[link] = std::move(new_lam);
    for (std::size_t i = 0; i < 2; ++i) {
        std::array<bool, 5> skip{};
        skip[sides[i].bond_axis] = true;
        DenseTensor t = scale_virtual_axes(std::move(rebuilt[i]), sides[i].s, cell.weights, -1.0, skip);
        const double n = t.norm();
        if (!(n > 0.0) || !t.all_finite())
            throw NumericalError(std::string("apply_link_gate: degenerate site tensor after update of link ") +
                                 link_name(link));
        t *= 1.0 / n;
        cell.site(sides[i].s) = std::move(t);
    }
    return {svd.discarded_weight, k, svd.degenerate_split};
}

struct StepDiagnostics {
    std::array<double, 4> discarded_weight{};  ///< max per link class over the interval
    std::size_t max_bond_dim = 0;
    std::size_t gate_count = 0;
    std::size_t degenerate_splits = 0;
    double wall_seconds = 0.0;

    double max_discarded() const { return *std::max_element(discarded_weight.begin(), discarded_weight.end()); }

    void merge(const StepDiagnostics& o) {
        for (std::size_t i = 0; i < 4; ++i) discarded_weight[i] = std::max(discarded_weight[i], o.discarded_weight[i]);
        max_bond_dim = std::max(max_bond_dim, o.max_bond_dim);
        gate_count += o.gate_count;
        degenerate_splits += o.degenerate_splits;
        wall_seconds += o.wall_seconds;
    }
};

enum class Cadence { Stroboscopic, PerTrotterStep };

struct MeasurePoint {
    std::size_t cycle = 0;  ///< completed periods (stroboscopic) or current period index
    double time = 0.0;
    Boundary kind = Boundary::None;
    StepDiagnostics since_last;  ///< truncation since the previous measurement
};

using MeasureHook = std::function<void(const MeasurePoint&, const UnitCell&)>;

struct RunOptions {
    Cadence cadence = Cadence::Stroboscopic;
    std::size_t start_cycle = 0;   ///< periods already completed (resume)
    bool report_initial = true;    ///< invoke the hook once before the first gate
    double svd_cutoff = kDefaultSvdCutoff;
};

/// Applies `schedule` n_cycles times. Returns one StepDiagnostics per period.
inline std::vector<StepDiagnostics> run_floquet(UnitCell& cell, const GateSchedule& schedule, std::size_t n_cycles,
                                                const MeasureHook& hook, const RunOptions& opt = {}) {
    using clock = std::chrono::steady_clock;
    const double T = schedule.params.T;
    if (cell.d_a != schedule.params.d_a)
        throw ArgumentError("run_floquet: schedule d_a does not match the unit cell");
    cell.validate();
    if (hook && opt.report_initial) {
        MeasurePoint mp;
        mp.cycle = opt.start_cycle;
        mp.time = static_cast<double>(opt.start_cycle) * T;
        mp.kind = Boundary::PeriodEnd;
        mp.since_last.max_bond_dim = cell.max_bond_dim();
        hook(mp, cell);
    }
    std::vector<StepDiagnostics> per_period;
    per_period.reserve(n_cycles);
    StepDiagnostics since_last;
    for (std::size_t n = 0; n < n_cycles; ++n) {
        const std::size_t cycle = opt.start_cycle + n;
        StepDiagnostics period;
        const auto t0 = clock::now();
        for (const auto& g : schedule.gates) {
            StepDiagnostics one;
            if (g.kind == GateKind::OneSite) {
                apply_one_site_gate(cell, g.unitary, GateTarget::Both);
            } else {
                const LinkUpdate u = apply_link_gate(cell, g.unitary, g.link, cell.D_max, opt.svd_cutoff);
                one.discarded_weight[static_cast<std::size_t>(g.link)] = u.discarded_weight;
                one.degenerate_splits = u.degenerate_split ? 1 : 0;
            }
            one.gate_count = 1;
            one.max_bond_dim = cell.max_bond_dim();
            period.merge(one);
            since_last.merge(one);

            const bool strobe = g.ends == Boundary::PeriodEnd;
            const bool sub = opt.cadence == Cadence::PerTrotterStep &&
                             (g.ends == Boundary::TrotterStep || g.ends == Boundary::FlipSlice);
            if (hook && (strobe || sub)) {
                MeasurePoint mp;
                mp.kind = g.ends;
                mp.cycle = strobe ? cycle + 1 : cycle;
                mp.time = strobe ? static_cast<double>(cycle + 1) * T
                                 : static_cast<double>(cycle) * T + schedule.offset_of(g.ends, g.step);
                mp.since_last = since_last;
                hook(mp, cell);
                since_last = StepDiagnostics{};
            }
        }
        period.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
        per_period.push_back(period);
    }
    return per_period;
}

}  // namespace dtc
