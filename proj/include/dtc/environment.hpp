#pragma once

// Corner transfer matrix contraction of the infinite double-layer network.
//
// The environment of a site holds eight tensors. Each leg is named by the
// direction it points to; the leg order per tensor is fixed:
//
//   C1 (E,S)   T1 (W,S,E)   C2 (W,S)
//   T4 (N,E,S)    site      T2 (N,W,S)
//   C4 (N,E)   T3 (W,N,E)   C3 (N,W)
//
// Legs pointing at the site have the double-layer extent D^2; the others are
// environment legs of extent <= chi. Because the state is a checkerboard, the
// environment only depends on the sublattice of the centre site, so two sets
// are kept. A left move absorbs the column through a site of sublattice s and
// its lower neighbour, which renews the left half (C1, T4, C4) of the other
// sublattice; right, up and down moves are left moves on the network rotated
// by multiples of 90 degrees.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "dtc/errors.hpp"
#include "dtc/state.hpp"
#include "dtc/tensor.hpp"

namespace dtc {

/// Fuses ket and bra bond indices as ket * D + bra.
/// closed: (l, u, r, d). open: (p_ket * d + p_bra, l, u, r, d).
inline DenseTensor double_layer(const DenseTensor& x, bool open_physical = false) {
    if (x.rank() != 5) throw DimensionError("double_layer: rank-5 site tensor required");
    const std::size_t d = x.extent(0);
    const Shape& s = x.shape();
    const RowMatrix xm = to_matrix(x, {0});  // (d, Dl Du Dr Dd)
    DenseTensor layered;
    if (!open_physical) {
        const RowMatrix m = xm.transpose() * xm.conjugate();
        layered = from_matrix(m, {s[1], s[2], s[3], s[4], s[1], s[2], s[3], s[4]})
                      .permute({0, 4, 1, 5, 2, 6, 3, 7})
                      .reshape({s[1] * s[1], s[2] * s[2], s[3] * s[3], s[4] * s[4]});
    } else {
        // (p, K) x (p', B) -> (p, p', K, B)
        DenseTensor ket = from_matrix(xm, {d, s[1] * s[2] * s[3] * s[4]});
        DenseTensor bra = ket.conj();
        DenseTensor outer = contract(ket, bra, {});  // (p, K, p', B)
        layered = outer.reshape({d, s[1], s[2], s[3], s[4], d, s[1], s[2], s[3], s[4]})
                      .permute({0, 5, 1, 6, 2, 7, 3, 8, 4, 9})
                      .reshape({d * d, s[1] * s[1], s[2] * s[2], s[3] * s[3], s[4] * s[4]});
    }
    return layered;
}

/// Double-layer tensor of a site with its weights absorbed.
inline DenseTensor build_double_layer(const UnitCell& cell, Sublattice s, bool open_physical = false) {
    return double_layer(absorb_weights(cell, s), open_physical);
}

struct CornerSet {
    DenseTensor C1, C2, C3, C4;
    DenseTensor T1, T2, T3, T4;

    std::array<const DenseTensor*, 4> corners() const { return {&C1, &C2, &C3, &C4}; }
};

struct Environment {
    std::array<CornerSet, 2> sets;  ///< indexed by Sublattice
    std::size_t chi = 1;
    std::size_t iterations = 0;
    bool converged = false;
    double truncation_error = 0.0;   ///< largest relative weight dropped by a projector in the last sweep
    std::vector<double> history;     ///< convergence metric per sweep

    CornerSet& operator[](Sublattice s) { return sets[s == Sublattice::A ? 0 : 1]; }
    const CornerSet& operator[](Sublattice s) const { return sets[s == Sublattice::A ? 0 : 1]; }
};

struct CtmOptions {
    double tol = 1e-8;
    std::size_t max_iter = 200;
    double projector_cutoff = 1e-10;  ///< relative singular-value cutoff for projectors
};

namespace ctm {

inline DenseTensor normalized(DenseTensor t) {
    const double m = t.max_abs();
    if (!(m > 0.0) || !std::isfinite(m)) throw NumericalError("ctmrg: environment tensor vanished or diverged");
    return t *= 1.0 / m;
}

/// Contracts one fused double-layer leg with the ket = bra identity.
inline DenseTensor trace_leg(const DenseTensor& a, std::size_t leg) {
    const std::size_t D2 = a.extent(leg);
    const auto D = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(D2))));
    DenseTensor v({D2});
    for (std::size_t k = 0; k < D; ++k) v[k * D + k] = 1.0;
    return contract(a, v, {{leg, 0}});
}

/// Boundary tensors obtained by closing the outer legs of the double layers.
inline CornerSet initial_set(const DenseTensor& a_self, const DenseTensor& a_other) {
    CornerSet c;
    // a(l, u, r, d)
    c.C1 = normalized(trace_leg(trace_leg(a_self, 0), 0));                  // (r, d)
    c.C2 = normalized(trace_leg(trace_leg(a_self, 1), 1));                  // (l, d)
    c.C3 = normalized(trace_leg(trace_leg(a_self, 2), 2).permute({1, 0}));  // (l, u) -> (u, l)
    c.C4 = normalized(trace_leg(trace_leg(a_self, 3), 0));                  // (u, r)
    c.T1 = normalized(trace_leg(a_other, 1).permute({0, 2, 1}));            // (l, r, d) -> (l, d, r)
    c.T2 = normalized(trace_leg(a_other, 2).permute({1, 0, 2}));            // (l, u, d) -> (u, l, d)
    c.T3 = normalized(trace_leg(a_other, 3));                               // (l, u, r)
    c.T4 = normalized(trace_leg(a_other, 0));                               // (u, r, d)
    return c;
}

/// Rotates the picture by 90 degrees counter-clockwise.
inline CornerSet rotate_ccw(const CornerSet& o) {
    CornerSet n;
    n.C1 = o.C2.permute({1, 0});
    n.C2 = o.C3;
    n.C3 = o.C4.permute({1, 0});
    n.C4 = o.C1;
    n.T1 = o.T2;
    n.T2 = o.T3.permute({2, 1, 0});
    n.T3 = o.T4;
    n.T4 = o.T1.permute({2, 1, 0});
    return n;
}

inline DenseTensor rotate_site_ccw(const DenseTensor& a) { return a.permute({1, 2, 3, 0}); }

struct Network {
    std::array<CornerSet, 2> sets;
    std::array<DenseTensor, 2> sites;  // double layers (l, u, r, d)

    void rotate() {
        for (auto& s : sets) s = rotate_ccw(s);
        for (auto& a : sites) a = rotate_site_ccw(a);
    }
};

/// Relative gap below which neighbouring projector singular values count as one multiplet.
inline constexpr double kProjectorMultipletGap = 1e-6;

struct Projectors {
    DenseTensor upper;  ///< (chi_cut, D2_cut, k): attaches to legs leaving the upper row downwards
    DenseTensor lower;  ///< (k, chi_cut, D2_cut): attaches to legs leaving the lower row upwards
    double dropped = 0.0;
};

/// Projectors for the horizontal cut between a row of sublattice `up` and the
/// row below it, built from the two left quarters adjacent to the cut.
inline Projectors cut_projectors(const Network& net, std::size_t up, std::size_t chi, double cutoff) {
    const std::size_t lo = 1 - up;
    const CornerSet& eu = net.sets[up];
    const CornerSet& el = net.sets[lo];

    // upper-left quarter: (ET, SL, r, d)
    DenseTensor x = contract(eu.C1, eu.T1, {{0, 0}});                  // (S1, ST, ET)
    DenseTensor y = contract(x, eu.T4, {{0, 0}});                       // (ST, ET, EL, SL)
    DenseTensor q1 = contract(y, net.sites[up], {{2, 0}, {0, 1}});      // (ET, SL, r, d)
    Shape cut_shape;
    const RowMatrix r1 = to_matrix(q1, {0, 2});                         // (ET r) x (SL d)
    cut_shape = {q1.extent(1), q1.extent(3)};

    // lower-left quarter: (NL, ET, u, r)
    DenseTensor x4 = contract(el.C4, el.T3, {{1, 0}});                  // (NC, NT, ET)
    DenseTensor y4 = contract(el.T4, x4, {{2, 0}});                     // (NL, EL, NT, ET)
    DenseTensor q4 = contract(y4, net.sites[lo], {{1, 0}, {2, 3}});     // (NL, ET, u, r)
    const RowMatrix r2 = to_matrix(q4, {0, 2});                         // (NL u) x (ET r)
    if (q4.extent(0) != cut_shape[0] || q4.extent(2) != cut_shape[1])
        throw DimensionError("ctmrg: inconsistent cut between sublattice rows");

    const RowMatrix m = r1 * r2;
    const ThinSVD svd = thin_svd(m);
    const Eigen::VectorXd& s = svd.s;
    std::vector<double> sv(s.data(), s.data() + s.size());
    if (sv.empty() || !(sv[0] > 0.0)) throw NumericalError("ctmrg: vanishing half-system matrix");
    std::size_t k = truncation_rank(sv, chi, cutoff);
    // never split a multiplet
    while (k > 1 && k < sv.size() && sv[k] >= (1.0 - kProjectorMultipletGap) * sv[k - 1]) --k;
    double total = 0.0, dropped = 0.0;
    for (std::size_t i = 0; i < sv.size(); ++i) {
        total += sv[i];
        if (i >= k) dropped += sv[i];
    }
    const auto kk = static_cast<Eigen::Index>(k);
    Eigen::VectorXcd isq(kk);
    for (Eigen::Index i = 0; i < kk; ++i) isq[i] = 1.0 / std::sqrt(sv[static_cast<std::size_t>(i)]);

    const RowMatrix pu = r2 * svd.v.leftCols(kk) * isq.asDiagonal();             // (cut, k)
    const RowMatrix pl = isq.asDiagonal() * svd.u.leftCols(kk).adjoint() * r1;  // (k, cut)
    Projectors p;
    p.upper = from_matrix(pu, {cut_shape[0], cut_shape[1], k});
    p.lower = from_matrix(pl, {k, cut_shape[0], cut_shape[1]});
    p.dropped = dropped / total;
    return p;
}

/// Absorbs one column into the left environment of both sublattices.
/// Returns the largest relative weight dropped by the projectors.
inline double left_move(Network& net, std::size_t chi, double cutoff) {
    const std::array<Projectors, 2> proj{cut_projectors(net, 0, chi, cutoff), cut_projectors(net, 1, chi, cutoff)};
    std::array<CornerSet, 2> renewed = net.sets;
    for (std::size_t s = 0; s < 2; ++s) {
        const std::size_t o = 1 - s;
        const CornerSet& e = net.sets[s];
        const Projectors& above = proj[o];  // cut whose upper row is sublattice o
        const Projectors& below = proj[s];

        DenseTensor x1 = contract(e.C1, e.T1, {{0, 0}});                          // (S1, ST, ET)
        DenseTensor c1 = contract(x1, above.upper, {{0, 0}, {1, 1}});             // (ET, k)
        renewed[o].C1 = normalized(std::move(c1));

        DenseTensor z = contract(above.lower, e.T4, {{1, 0}});                    // (k1, u, E, S)
        DenseTensor w = contract(z, net.sites[s], {{1, 1}, {2, 0}});              // (k1, S, r, d)
        DenseTensor t4 = contract(w, below.upper, {{1, 0}, {3, 1}});              // (k1, r, k2)
        renewed[o].T4 = normalized(std::move(t4));

        DenseTensor x4 = contract(e.C4, e.T3, {{1, 0}});                          // (NC, NT, ET)
        DenseTensor c4 = contract(below.lower, x4, {{1, 0}, {2, 1}});             // (k, ET)
        renewed[o].C4 = normalized(std::move(c4));
    }
    net.sets = std::move(renewed);
    return std::max(proj[0].dropped, proj[1].dropped);
}

/// Sorted singular values of every corner, each spectrum normalized to unit sum.
inline std::vector<std::vector<double>> corner_spectra(const std::array<CornerSet, 2>& sets) {
    std::vector<std::vector<double>> out;
    for (const auto& set : sets)
        for (const DenseTensor* c : set.corners()) {
            Eigen::JacobiSVD<Eigen::MatrixXcd> svd(Eigen::MatrixXcd(c->matrix()));
            const Eigen::VectorXd& s = svd.singularValues();
            std::vector<double> v(s.data(), s.data() + s.size());
            double sum = 0.0;
            for (double x : v) sum += x;
            if (sum > 0.0)
                for (double& x : v) x /= sum;
            out.push_back(std::move(v));
        }
    return out;
}

inline double spectra_distance(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
        const std::size_t n = std::max(a[i].size(), b[i].size());
        for (std::size_t j = 0; j < n; ++j) {
            const double x = j < a[i].size() ? a[i][j] : 0.0;
            const double y = j < b[i].size() ? b[i][j] : 0.0;
            m = std::max(m, std::abs(x - y));
        }
    }
    return m;
}

}  // namespace ctm

/// Fresh boundary environment for the given double layers.
inline Environment initial_environment(const DenseTensor& a, const DenseTensor& b, std::size_t chi) {
    Environment env;
    env.chi = chi;
    env[Sublattice::A] = ctm::initial_set(a, b);
    env[Sublattice::B] = ctm::initial_set(b, a);
    return env;
}

/// One sweep of left, up, right and down moves; returns the projector truncation error.
inline double ctmrg_sweep(Environment& env, const DenseTensor& a, const DenseTensor& b,
                          double cutoff = CtmOptions{}.projector_cutoff) {
    ctm::Network net{env.sets, {a, b}};
    double dropped = 0.0;
    for (int dir = 0; dir < 4; ++dir) {
        dropped = std::max(dropped, ctm::left_move(net, env.chi, cutoff));
        net.rotate();
    }
    env.sets = std::move(net.sets);
    return dropped;
}

/// True when `env` was built for double layers with the same leg extents.
inline bool environment_matches(const Environment& env, const DenseTensor& a, const DenseTensor& b) {
    auto ok = [](const CornerSet& c, const DenseTensor& other) {
        return !c.T1.empty() && c.T1.extent(1) == other.extent(3) && c.T2.extent(1) == other.extent(0) &&
               c.T3.extent(1) == other.extent(1) && c.T4.extent(1) == other.extent(2);
    };
    return ok(env[Sublattice::A], b) && ok(env[Sublattice::B], a);
}

/// Iterates sweeps until corner spectra change by less than tol. A run that
/// hits max_iter is returned with converged = false.
inline Environment ctmrg_converge(const UnitCell& cell, std::size_t chi, const CtmOptions& opt = {},
                                  const Environment* warm_start = nullptr) {
    if (chi == 0) throw ArgumentError("ctmrg_converge: chi must be >= 1");
    cell.validate();
    const DenseTensor a = build_double_layer(cell, Sublattice::A);
    const DenseTensor b = build_double_layer(cell, Sublattice::B);
    Environment env;
    if (warm_start && warm_start->chi == chi && environment_matches(*warm_start, a, b)) {
        env.sets = warm_start->sets;
        env.chi = chi;
    } else {
        env = initial_environment(a, b, chi);
    }
    auto prev = ctm::corner_spectra(env.sets);
    for (std::size_t it = 1; it <= opt.max_iter; ++it) {
        env.truncation_error = ctmrg_sweep(env, a, b, opt.projector_cutoff);
        auto cur = ctm::corner_spectra(env.sets);
        const double delta = ctm::spectra_distance(prev, cur);
        env.history.push_back(delta);
        env.iterations = it;
        prev = std::move(cur);
        if (delta < opt.tol) {
            env.converged = true;
            break;
        }
    }
    return env;
}

/// Environment of a site contracted into a single tensor E(l, u, r, d) over
/// the fused double-layer legs.
inline DenseTensor site_environment(const Environment& env, Sublattice s) {
    const CornerSet& e = env[s];
    DenseTensor up = contract(contract(e.C1, e.T1, {{0, 0}}), e.C2, {{2, 0}});      // (S1, ST, S2)
    DenseTensor upper = contract(up, e.T4, {{0, 0}});                               // (ST, S2, EL, SL)
    DenseTensor down = contract(contract(e.C4, e.T3, {{1, 0}}), e.C3, {{2, 1}});    // (NC4, NT, NC3)
    DenseTensor lower = contract(down, e.T2, {{2, 2}});                             // (NC4, NT, N2, W2)
    DenseTensor full = contract(upper, lower, {{3, 0}, {1, 2}});                    // (ST, EL, NT, W2)
    return full.permute({1, 0, 3, 2});
}

struct SiteDensityMatrix {
    DenseTensor fused;     ///< (2 d_a) x (2 d_a)
    DenseTensor physical;  ///< 2 x 2 marginal over the ancilla
    double raw_trace = 0.0;
    double min_eigenvalue = 0.0;  ///< before clipping
};

inline constexpr double kNegativeEigenvalueTol = 1e-8;

/// Hermitian part, small negative eigenvalues clipped to zero, unit trace.
/// Eigenvalues below -kNegativeEigenvalueTol are a NumericalError.
inline DenseTensor regularize_density_matrix(const DenseTensor& rho, double* min_eig = nullptr) {
    const RowMatrix m = rho.matrix();
    const cplx tr = m.trace();
    if (!(tr.real() > 0.0) || !std::isfinite(tr.real()))
        throw NumericalError("density matrix has non-positive trace");
    const Eigen::MatrixXcd herm = (m + m.adjoint()) / (2.0 * tr.real());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm);
    if (es.info() != Eigen::Success) throw NumericalError("density matrix eigensolver failed");
    Eigen::VectorXd ev = es.eigenvalues();
    const double lo = ev.minCoeff();
    if (min_eig) *min_eig = lo;
    if (lo < -kNegativeEigenvalueTol)
        throw NumericalError("density matrix has eigenvalue " + std::to_string(lo) + " below tolerance");
    for (Eigen::Index i = 0; i < ev.size(); ++i) ev[i] = std::max(ev[i], 0.0);
    ev /= ev.sum();
    const Eigen::MatrixXcd& v = es.eigenvectors();
    return DenseTensor::from_matrix(RowMatrix(v * ev.cast<cplx>().asDiagonal() * v.adjoint()));
}

/// Traces out the ancilla of a fused (p * d_a + a) density matrix.
inline DenseTensor physical_marginal(const DenseTensor& fused, int d_a) {
    const auto da = static_cast<std::size_t>(d_a);
    DenseTensor rp({2, 2});
    for (std::size_t p = 0; p < 2; ++p)
        for (std::size_t q = 0; q < 2; ++q)
            for (std::size_t a = 0; a < da; ++a) rp.at(p, q) += fused.at(p * da + a, q * da + a);
    return rp;
}

inline SiteDensityMatrix one_site_rdm(const UnitCell& cell, const Environment& env, Sublattice s) {
    const DenseTensor x = absorb_weights(cell, s);
    const Shape& sh = x.shape();
    const DenseTensor e = site_environment(env, s);
    for (std::size_t ax = 0; ax < 4; ++ax)
        if (e.extent(ax) != sh[ax + 1] * sh[ax + 1])
            throw DimensionError("one_site_rdm: environment does not match the site bond dimensions");
    const DenseTensor ek =
        e.reshape({sh[1], sh[1], sh[2], sh[2], sh[3], sh[3], sh[4], sh[4]}).permute({0, 2, 4, 6, 1, 3, 5, 7});
    const std::size_t n = sh[1] * sh[2] * sh[3] * sh[4];
    Eigen::Map<const RowMatrix> em(ek.data().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    const RowMatrix xm = to_matrix(x, {0});
    const RowMatrix rho = xm * em * xm.adjoint();

    SiteDensityMatrix out;
    out.raw_trace = rho.trace().real();
    out.fused = regularize_density_matrix(DenseTensor::from_matrix(rho), &out.min_eigenvalue);
    out.physical = physical_marginal(out.fused, cell.d_a);
    return out;
}

/// tr(rho O) for a Hermitian observable.
inline double expectation(const DenseTensor& rho, const DenseTensor& op) {
    return trace(matmul(rho, op)).real();
}

}  // namespace dtc
