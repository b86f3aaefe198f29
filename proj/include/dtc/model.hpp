#pragma once

// Driven Heisenberg model with ancilla-encoded discrete disorder.
//
// A network site is the fused pair (physical spin-1/2, d_a-level ancilla) with
// basis index p * d_a + a, where p = 0 is spin up and a enumerates ancilla
// levels in increasing order of their field value. Two-site gates act on the
// ordered pair (first, second) with row index i_first * d + i_second.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "dtc/errors.hpp"
#include "dtc/tensor.hpp"

namespace dtc {

struct ModelParams {
    double J = 1.0;        ///< exchange coupling
    double h = 0.0;        ///< disorder strength; fields span [-h/2, h/2]
    int d_a = 1;           ///< number of disorder levels (1 = clean)
    double T = 0.1;        ///< Floquet period
    double epsilon = 0.0;  ///< flip imperfection
    double dt = 0.005;     ///< Trotter step

    std::size_t fused_dim() const { return 2 * static_cast<std::size_t>(d_a); }

    /// Trotter steps per MBL half-period. Throws ArgumentError on a bad combination.
    std::size_t trotter_steps() const {
        validate();
        return static_cast<std::size_t>(std::llround(T / 2.0 / dt));
    }

    void validate() const {
        if (!(T > 0.0) || !std::isfinite(T)) throw ArgumentError("ModelParams: T must be positive");
        if (!(dt > 0.0) || !std::isfinite(dt)) throw ArgumentError("ModelParams: dt must be positive");
        if (d_a < 1) throw ArgumentError("ModelParams: d_a must be >= 1");
        if (!std::isfinite(J) || !std::isfinite(h) || !std::isfinite(epsilon))
            throw ArgumentError("ModelParams: J, h and epsilon must be finite");
        const double steps = T / 2.0 / dt;
        const double n = std::round(steps);
        if (n < 1.0 || std::abs(steps - n) > 1e-9 * steps)
            throw ArgumentError("ModelParams: dt must divide T/2 (T/2/dt = " + std::to_string(steps) + ")");
    }
};

struct SpinOperators {
    DenseTensor x, y, z;
};

/// Spin-1/2 matrices in the (up, down) basis, hbar = 1.
inline SpinOperators spin_half_operators() {
    const cplx i{0.0, 1.0};
    return {DenseTensor({2, 2}, {0.0, 0.5, 0.5, 0.0}), DenseTensor({2, 2}, {0.0, -0.5 * i, 0.5 * i, 0.0}),
            DenseTensor({2, 2}, {0.5, 0.0, 0.0, -0.5})};
}

/// Field multiplier of ancilla level k (0-based): equally spaced on [-1/2, 1/2].
inline double ancilla_level(int k, int d_a) {
    if (d_a == 1) return 0.0;
    return -0.5 + static_cast<double>(k) / static_cast<double>(d_a - 1);
}

/// Diagonal ancilla operator whose eigenvalues are the field multipliers.
inline DenseTensor ancilla_level_operator(int d_a) {
    if (d_a < 1) throw ArgumentError("ancilla_level_operator: d_a must be >= 1");
    const auto n = static_cast<std::size_t>(d_a);
    DenseTensor a({n, n});
    for (std::size_t k = 0; k < n; ++k) a.at(k, k) = ancilla_level(static_cast<int>(k), d_a);
    return a;
}

/// Rotation angle of the spin-flip half period: (T/2)(2 pi/T - 2 eps) = pi - eps T.
inline double flip_angle(const ModelParams& p) { return std::numbers::pi - p.epsilon * p.T; }

/// exp(-i angle S^x) on the physical spin, identity on the ancilla.
inline DenseTensor x_rotation_gate(double angle, int d_a) {
    const auto s = spin_half_operators();
    const DenseTensor r = hermitian_exponential(s.x, cplx{0.0, -angle});
    return kron(r, DenseTensor::identity(static_cast<std::size_t>(d_a)));
}

inline DenseTensor build_flip_gate(const ModelParams& p) {
    p.validate();
    return x_rotation_gate(flip_angle(p), p.d_a);
}

/// J (S.S) on two spin-1/2 in the (first, second) product basis.
inline DenseTensor heisenberg_bond(double J) {
    const auto s = spin_half_operators();
    DenseTensor hb = kron(s.x, s.x) + kron(s.y, s.y) + kron(s.z, s.z);
    return hb *= J;
}

/// Lifts a gate on two physical spins to two fused sites, identity on both ancillas.
inline DenseTensor embed_physical_pair(const DenseTensor& g4, int d_a) {
    const auto da = static_cast<std::size_t>(d_a);
    const std::size_t d = 2 * da;
    DenseTensor out({d * d, d * d});
    for (std::size_t p1 = 0; p1 < 2; ++p1)
        for (std::size_t p2 = 0; p2 < 2; ++p2)
            for (std::size_t q1 = 0; q1 < 2; ++q1)
                for (std::size_t q2 = 0; q2 < 2; ++q2) {
                    const cplx v = g4.at(p1 * 2 + p2, q1 * 2 + q2);
                    if (v == cplx{}) continue;
                    for (std::size_t a1 = 0; a1 < da; ++a1)
                        for (std::size_t a2 = 0; a2 < da; ++a2)
                            out.at((p1 * da + a1) * d + (p2 * da + a2), (q1 * da + a1) * d + (q2 * da + a2)) = v;
                }
    return out;
}

inline DenseTensor build_heisenberg_link_gate(const ModelParams& p) {
    p.validate();
    return embed_physical_pair(hermitian_exponential(heisenberg_bond(p.J), cplx{0.0, -p.dt}), p.d_a);
}

/// exp(-i dt field S^z) on a bare spin-1/2.
inline DenseTensor build_field_site_gate(double dt, double field) {
    return hermitian_exponential(spin_half_operators().z, cplx{0.0, -dt * field});
}

/// exp(-i dt h S^z (x) A) on a fused site; diagonal in the product basis.
inline DenseTensor build_disorder_site_gate(const ModelParams& p) {
    p.validate();
    const auto da = static_cast<std::size_t>(p.d_a);
    const std::size_t d = 2 * da;
    DenseTensor g({d, d});
    for (std::size_t sp = 0; sp < 2; ++sp) {
        const double sz = sp == 0 ? 0.5 : -0.5;
        for (std::size_t a = 0; a < da; ++a) {
            const double phase = -p.dt * p.h * sz * ancilla_level(static_cast<int>(a), p.d_a);
            g.at(sp * da + a, sp * da + a) = std::polar(1.0, phase);
        }
    }
    return g;
}

enum class LinkClass { L, U, R, Do };
inline constexpr LinkClass kLinkOrder[] = {LinkClass::L, LinkClass::U, LinkClass::R, LinkClass::Do};

inline const char* link_name(LinkClass l) {
    switch (l) {
        case LinkClass::L: return "L";
        case LinkClass::U: return "U";
        case LinkClass::R: return "R";
        case LinkClass::Do: return "Do";
    }
    return "?";
}

enum class GateKind { OneSite, Link };

/// Which Hamiltonian term a gate integrates.
enum class GateRole { Disorder, Exchange, Flip };

/// Where a gate ends, for measurement hooks.
enum class Boundary { None, TrotterStep, FlipSlice, PeriodEnd };

struct GateApplication {
    GateKind kind = GateKind::OneSite;
    GateRole role = GateRole::Flip;
    LinkClass link = LinkClass::L;  ///< meaningful for GateKind::Link
    DenseTensor unitary;
    double duration = 0.0;          ///< time covered; a Trotter step's dt sits on its last gate
    Boundary ends = Boundary::None;
    std::size_t step = 0;           ///< 1-based Trotter step or flip slice this gate completes
};

struct GateSchedule {
    ModelParams params;
    std::size_t trotter_steps = 0;
    std::size_t flip_slices = 1;
    std::vector<GateApplication> gates;

    /// Time offset within the period at which a gate with the given marker ends.
    double offset_of(Boundary b, std::size_t step) const {
        switch (b) {
            case Boundary::TrotterStep: return static_cast<double>(step) * params.dt;
            case Boundary::FlipSlice:
                return params.T / 2.0 +
                       static_cast<double>(step) * params.T / (2.0 * static_cast<double>(flip_slices));
            case Boundary::PeriodEnd: return params.T;
            case Boundary::None: break;
        }
        return 0.0;
    }
};

/// One Floquet period: `trotter_steps` x [disorder site gate, L, U, R, Do link
/// gates] followed by the exact flip, optionally cut into equal x-rotations.
inline GateSchedule build_floquet_schedule(const ModelParams& p, std::size_t flip_slices = 1) {
    p.validate();
    if (flip_slices == 0) throw ArgumentError("build_floquet_schedule: flip_slices must be positive");
    GateSchedule s;
    s.params = p;
    s.trotter_steps = p.trotter_steps();
    s.flip_slices = flip_slices;

    const DenseTensor disorder = build_disorder_site_gate(p);
    const DenseTensor link = build_heisenberg_link_gate(p);
    for (std::size_t k = 1; k <= s.trotter_steps; ++k) {
        s.gates.push_back({GateKind::OneSite, GateRole::Disorder, LinkClass::L, disorder, 0.0, Boundary::None, k});
        for (auto lc : kLinkOrder) {
            const bool last = lc == LinkClass::Do;
            s.gates.push_back({GateKind::Link, GateRole::Exchange, lc, link, last ? p.dt : 0.0,
                               last ? Boundary::TrotterStep : Boundary::None, k});
        }
    }
    const DenseTensor slice = x_rotation_gate(flip_angle(p) / static_cast<double>(flip_slices), p.d_a);
    const double slice_time = p.T / 2.0 / static_cast<double>(flip_slices);
    for (std::size_t j = 1; j <= flip_slices; ++j)
        s.gates.push_back({GateKind::OneSite, GateRole::Flip, LinkClass::L, slice, slice_time,
                           j == flip_slices ? Boundary::PeriodEnd : Boundary::FlipSlice, j});
    return s;
}

}  // namespace dtc
