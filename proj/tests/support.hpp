#pragma once

// Reference implementations used only by the tests. They share no code with
// the library beyond the DenseTensor container, so agreement is meaningful.

#include <cmath>
#include <complex>
#include <cstddef>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dtc/tensor.hpp"

namespace dtc::testing {

using cplx = std::complex<double>;

inline DenseTensor random_tensor(Shape shape, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    return DenseTensor::generate(std::move(shape), [&]() { return cplx{g(rng), g(rng)}; });
}

inline DenseTensor random_hermitian(std::size_t n, std::mt19937_64& rng) {
    DenseTensor m = random_tensor({n, n}, rng);
    DenseTensor h = m;
    h += adjoint(m);
    return h *= 0.5;
}

/// Index-sum definition of a pairwise contraction, by brute force over all
/// index combinations of both operands.
inline DenseTensor naive_contract(const DenseTensor& a, const DenseTensor& b,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
    std::vector<int> a_pair(a.rank(), -1), b_pair(b.rank(), -1);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        a_pair[pairs[k].first] = static_cast<int>(k);
        b_pair[pairs[k].second] = static_cast<int>(k);
    }
    Shape out_shape;
    std::vector<std::size_t> a_free, b_free;
    for (std::size_t i = 0; i < a.rank(); ++i)
        if (a_pair[i] < 0) {
            a_free.push_back(i);
            out_shape.push_back(a.extent(i));
        }
    for (std::size_t i = 0; i < b.rank(); ++i)
        if (b_pair[i] < 0) {
            b_free.push_back(i);
            out_shape.push_back(b.extent(i));
        }
    DenseTensor out(out_shape);

    auto strides = [](const Shape& s) {
        std::vector<std::size_t> st(s.size(), 1);
        for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
        return st;
    };
    const auto sa = strides(a.shape()), sb = strides(b.shape()), so = strides(out_shape);
    std::vector<std::size_t> ia(a.rank());
    for (std::size_t fa = 0; fa < a.size(); ++fa) {
        std::size_t r = fa;
        for (std::size_t i = 0; i < a.rank(); ++i) {
            ia[i] = r / sa[i];
            r %= sa[i];
        }
        for (std::size_t fb = 0; fb < b.size(); ++fb) {
            std::size_t q = fb;
            bool match = true;
            std::vector<std::size_t> ib(b.rank());
            for (std::size_t i = 0; i < b.rank(); ++i) {
                ib[i] = q / sb[i];
                q %= sb[i];
                if (b_pair[i] >= 0 && ib[i] != ia[pairs[static_cast<std::size_t>(b_pair[i])].first]) match = false;
            }
            if (!match) continue;
            std::size_t o = 0, k = 0;
            for (auto i : a_free) o += ia[i] * so[k++];
            for (auto i : b_free) o += ib[i] * so[k++];
            out[o] += a[fa] * b[fb];
        }
    }
    return out;
}

/// exp(scale * m) by scaling and squaring of a truncated Taylor series.
inline Eigen::MatrixXcd taylor_expm(const Eigen::MatrixXcd& m, cplx scale) {
    Eigen::MatrixXcd x = m * scale;
    const double norm = x.cwiseAbs().rowwise().sum().maxCoeff();
    int squarings = 0;
    while (norm / std::pow(2.0, squarings) > 0.25) ++squarings;
    x /= std::pow(2.0, squarings);
    Eigen::MatrixXcd term = Eigen::MatrixXcd::Identity(m.rows(), m.cols());
    Eigen::MatrixXcd sum = term;
    for (int k = 1; k < 30; ++k) {
        term = term * x / static_cast<double>(k);
        sum += term;
    }
    for (int i = 0; i < squarings; ++i) sum = sum * sum;
    return sum;
}

/// Spin-1/2 operators written out independently of the library.
inline Eigen::Matrix2cd pauli_half(char which) {
    Eigen::Matrix2cd m;
    const cplx i{0.0, 1.0};
    switch (which) {
        case 'x': m << 0.0, 0.5, 0.5, 0.0; break;
        case 'y': m << 0.0, -0.5 * i, 0.5 * i, 0.0; break;
        default: m << 0.5, 0.0, 0.0, -0.5; break;
    }
    return m;
}

/// Operator `op` acting on `site` of an n-site spin-1/2 chain (site 0 most significant).
inline Eigen::MatrixXcd site_operator(const Eigen::Matrix2cd& op, std::size_t site, std::size_t n) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Identity(1, 1);
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::MatrixXcd f = i == site ? Eigen::MatrixXcd(op) : Eigen::MatrixXcd::Identity(2, 2);
        Eigen::MatrixXcd k(out.rows() * 2, out.cols() * 2);
        for (Eigen::Index r = 0; r < out.rows(); ++r)
            for (Eigen::Index c = 0; c < out.cols(); ++c) k.block(2 * r, 2 * c, 2, 2) = out(r, c) * f;
        out = k;
    }
    return out;
}

/// J sum S_i.S_j over `bonds` plus sum_i field_i S^z_i on n spins.
inline Eigen::MatrixXcd dense_hamiltonian(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& bonds,
                                          double J, const std::vector<double>& field) {
    const Eigen::Index dim = Eigen::Index{1} << n;
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
    for (auto [i, j] : bonds)
        for (char a : {'x', 'y', 'z'})
            h += J * site_operator(pauli_half(a), i, n) * site_operator(pauli_half(a), j, n);
    for (std::size_t i = 0; i < n && i < field.size(); ++i) h += field[i] * site_operator(pauli_half('z'), i, n);
    return h;
}

/// exp(-i t h) for Hermitian h through its eigen-decomposition.
inline Eigen::MatrixXcd spectral_propagator(const Eigen::MatrixXcd& h, double t) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
    const Eigen::VectorXcd ph = (es.eigenvalues().cast<cplx>() * cplx{0.0, -t}).array().exp();
    return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

/// Product of exp(-i angle S^x) over all n spins.
inline Eigen::MatrixXcd global_x_rotation(std::size_t n, double angle) {
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(Eigen::Index{1} << n, Eigen::Index{1} << n);
    Eigen::Matrix2cd r;
    r << std::cos(angle / 2), cplx{0.0, -std::sin(angle / 2)}, cplx{0.0, -std::sin(angle / 2)}, std::cos(angle / 2);
    for (std::size_t i = 0; i < n; ++i) u = site_operator(r, i, n) * u;
    return u;
}

/// Single-spin stroboscopic magnetization under imperfect flips.
inline double single_spin_sz(std::size_t n, double epsilon, double T) {
    return 0.5 * ((n % 2) ? -1.0 : 1.0) * std::cos(static_cast<double>(n) * epsilon * T);
}

}  // namespace dtc::testing
