#pragma once

// Two-site checkerboard iPEPS of fused (spin, ancilla) sites.
//
// Site tensors are stored in Vidal form: the bond weights live on the links
// and are not contained in A or B. Axes: (phys, left, up, right, down).
// Every A neighbours only B; the four links of A are the four link classes:
//
//        B                A.left  <-> B.right  : L
//        |                A.up    <-> B.down   : U
//   B -- A -- B           A.right <-> B.left   : R
//        |                A.down  <-> B.up     : Do
//        B

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dtc/errors.hpp"
#include "dtc/model.hpp"
#include "dtc/tensor.hpp"

namespace dtc {

enum class Sublattice { A, B };

inline Sublattice other(Sublattice s) { return s == Sublattice::A ? Sublattice::B : Sublattice::A; }
inline const char* sublattice_name(Sublattice s) { return s == Sublattice::A ? "A" : "B"; }

namespace axis {
inline constexpr std::size_t phys = 0, left = 1, up = 2, right = 3, down = 4;
}

/// Link class attached to a virtual axis (1..4) of a site on sublattice `s`.
inline LinkClass link_of(Sublattice s, std::size_t ax) {
    static constexpr LinkClass a_links[] = {LinkClass::L, LinkClass::U, LinkClass::R, LinkClass::Do};
    static constexpr LinkClass b_links[] = {LinkClass::R, LinkClass::Do, LinkClass::L, LinkClass::U};
    if (ax < 1 || ax > 4) throw ArgumentError("link_of: virtual axis must be 1..4");
    return s == Sublattice::A ? a_links[ax - 1] : b_links[ax - 1];
}

/// Virtual axis of sublattice `s` that carries link class `l`.
inline std::size_t axis_of(Sublattice s, LinkClass l) {
    for (std::size_t ax = 1; ax <= 4; ++ax)
        if (link_of(s, ax) == l) return ax;
    return 0;
}

inline constexpr double kWeightFloor = 1e-12;

struct BondWeights {
    std::array<std::vector<double>, 4> lambda;  ///< indexed by LinkClass

    std::vector<double>& operator[](LinkClass l) { return lambda[static_cast<std::size_t>(l)]; }
    const std::vector<double>& operator[](LinkClass l) const { return lambda[static_cast<std::size_t>(l)]; }
};

enum class InitialState { Neel, Polarized };

inline InitialState parse_initial_state(const std::string& s) {
    if (s == "neel") return InitialState::Neel;
    if (s == "polarized") return InitialState::Polarized;
    throw ArgumentError("unknown initial state pattern '" + s + "' (expected neel or polarized)");
}

inline const char* initial_state_name(InitialState s) { return s == InitialState::Neel ? "neel" : "polarized"; }

/// S^z eigenvalue of a site at t = 0.
inline double initial_sz(InitialState pattern, Sublattice s) {
    return (pattern == InitialState::Polarized || s == Sublattice::A) ? 0.5 : -0.5;
}

struct UnitCell {
    DenseTensor A, B;
    BondWeights weights;
    int d_a = 1;
    std::size_t D_max = 1;

    DenseTensor& site(Sublattice s) { return s == Sublattice::A ? A : B; }
    const DenseTensor& site(Sublattice s) const { return s == Sublattice::A ? A : B; }

    std::size_t bond_dim(LinkClass l) const { return weights[l].size(); }
    std::size_t max_bond_dim() const {
        std::size_t m = 0;
        for (const auto& w : weights.lambda) m = std::max(m, w.size());
        return m;
    }

    /// Throws DimensionError if shapes or weights are inconsistent.
    void validate() const {
        const std::size_t d = 2 * static_cast<std::size_t>(d_a);
        for (auto s : {Sublattice::A, Sublattice::B}) {
            const auto& t = site(s);
            if (t.rank() != 5 || t.extent(axis::phys) != d)
                throw DimensionError(std::string("UnitCell: bad shape for site ") + sublattice_name(s) + " " +
                                     shape_string(t.shape()));
            for (std::size_t ax = 1; ax <= 4; ++ax)
                if (t.extent(ax) != weights[link_of(s, ax)].size())
                    throw DimensionError(std::string("UnitCell: site ") + sublattice_name(s) + " axis " +
                                         std::to_string(ax) + " does not match weights of link " +
                                         link_name(link_of(s, ax)));
        }
        for (const auto& w : weights.lambda)
            for (double x : w)
                if (!(x > 0.0) || !std::isfinite(x)) throw NumericalError("UnitCell: non-positive bond weight");
    }
};

/// Bond-dimension-one product state: spins per `pattern`, ancillas in |+>.
inline UnitCell init_product_state(InitialState pattern, int d_a, std::size_t D_max = 1) {
    if (d_a < 1) throw ArgumentError("init_product_state: d_a must be >= 1");
    const auto da = static_cast<std::size_t>(d_a);
    const double amp = 1.0 / std::sqrt(static_cast<double>(da));
    UnitCell cell;
    cell.d_a = d_a;
    cell.D_max = std::max<std::size_t>(1, D_max);
    for (auto s : {Sublattice::A, Sublattice::B}) {
        DenseTensor t({2 * da, 1, 1, 1, 1});
        const std::size_t p = initial_sz(pattern, s) > 0 ? 0 : 1;
        for (std::size_t a = 0; a < da; ++a) t[p * da + a] = amp;
        cell.site(s) = std::move(t);
    }
    for (auto& w : cell.weights.lambda) w = {1.0};
    return cell;
}

/// Multiplies lambda^power into each virtual axis of `t` (a site of sublattice
/// `s`). Negative powers use the regularized weights max(lambda, floor*lambda_max).
inline DenseTensor scale_virtual_axes(DenseTensor t, Sublattice s, const BondWeights& w, double power,
                                      std::array<bool, 5> skip = {}) {
    const auto& sh = t.shape();
    std::array<std::vector<double>, 5> f;
    for (std::size_t ax = 1; ax <= 4; ++ax) {
        const auto& lam = w[link_of(s, ax)];
        if (lam.size() != sh[ax]) throw DimensionError("scale_virtual_axes: weight/axis size mismatch");
        const double lmax = *std::max_element(lam.begin(), lam.end());
        f[ax].resize(lam.size());
        for (std::size_t i = 0; i < lam.size(); ++i) {
            const double x = power < 0.0 ? std::max(lam[i], kWeightFloor * lmax) : lam[i];
            f[ax][i] = skip[ax] ? 1.0 : std::pow(x, power);
        }
    }
    std::size_t off = 0;
    for (std::size_t p = 0; p < sh[0]; ++p)
        for (std::size_t l = 0; l < sh[1]; ++l)
            for (std::size_t u = 0; u < sh[2]; ++u)
                for (std::size_t r = 0; r < sh[3]; ++r) {
                    const double flur = f[1][l] * f[2][u] * f[3][r];
                    for (std::size_t d = 0; d < sh[4]; ++d) t[off++] *= flur * f[4][d];
                }
    return t;
}

/// Site tensor with the square root of each adjacent weight absorbed.
inline DenseTensor absorb_weights(const UnitCell& cell, Sublattice s) {
    return scale_virtual_axes(cell.site(s), s, cell.weights, 0.5);
}

/// Inverse of absorb_weights.
inline DenseTensor strip_weights(const DenseTensor& absorbed, const UnitCell& cell, Sublattice s) {
    return scale_virtual_axes(absorbed, s, cell.weights, -0.5);
}

/// The same state translated by one lattice site: A and B trade places and the
/// link classes are relabeled accordingly.
inline UnitCell swap_sublattices(const UnitCell& cell) {
    UnitCell out = cell;
    std::swap(out.A, out.B);
    out.weights[LinkClass::L] = cell.weights[LinkClass::R];
    out.weights[LinkClass::R] = cell.weights[LinkClass::L];
    out.weights[LinkClass::U] = cell.weights[LinkClass::Do];
    out.weights[LinkClass::Do] = cell.weights[LinkClass::U];
    return out;
}

}  // namespace dtc
