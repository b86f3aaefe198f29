#pragma once

// Dense complex tensors and the handful of linear-algebra kernels the
// simulator needs: pairwise contraction, axis permutation, truncated SVD and
// the exponential of a Hermitian matrix.
//
// Storage is row-major: the last axis varies fastest. Every kernel that moves
// data (permute, contract, svd_split) produces its output in that order, so
// results are reproducible bit for bit for a fixed build and thread count.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dtc/errors.hpp"

namespace dtc {

using cplx = std::complex<double>;
using Shape = std::vector<std::size_t>;
using AxisPairs = std::vector<std::pair<std::size_t, std::size_t>>;
using RowMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::string shape_string(const Shape& s) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ')';
    return os.str();
}

inline std::size_t shape_volume(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

class DenseTensor {
public:
    DenseTensor() = default;

    explicit DenseTensor(Shape shape) : shape_(std::move(shape)) {
        check_extents();
        data_.assign(shape_volume(shape_), cplx{0.0, 0.0});
    }

    DenseTensor(Shape shape, std::vector<cplx> data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_extents();
        if (data_.size() != shape_volume(shape_))
            throw DimensionError("DenseTensor: " + std::to_string(data_.size()) + " entries for shape " +
                                 shape_string(shape_));
    }

    static DenseTensor identity(std::size_t n) {
        DenseTensor t({n, n});
        for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
        return t;
    }

    static DenseTensor from_matrix(const RowMatrix& m) {
        DenseTensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
        std::copy(m.data(), m.data() + m.size(), t.data_.begin());
        return t;
    }

    template <class Derived>
    static DenseTensor from_matrix(const Eigen::MatrixBase<Derived>& m) {
        return from_matrix(RowMatrix(m));
    }

    /// Tensor with entries drawn by `gen()`; `gen` must return cplx.
    template <class Gen>
    static DenseTensor generate(Shape shape, Gen&& gen) {
        DenseTensor t(std::move(shape));
        for (auto& x : t.data_) x = gen();
        return t;
    }

    bool empty() const noexcept { return data_.empty(); }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    const Shape& shape() const noexcept { return shape_; }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

    std::span<cplx> data() noexcept { return data_; }
    std::span<const cplx> data() const noexcept { return data_; }
    const std::vector<cplx>& values() const noexcept { return data_; }

    cplx& operator[](std::size_t i) { return data_[i]; }
    const cplx& operator[](std::size_t i) const { return data_[i]; }

    std::size_t offset(std::initializer_list<std::size_t> idx) const {
        if (idx.size() != shape_.size()) throw ArgumentError("DenseTensor::offset: wrong number of indices");
        std::size_t off = 0;
        std::size_t k = 0;
        for (auto i : idx) {
            if (i >= shape_[k]) throw ArgumentError("DenseTensor::offset: index out of range");
            off = off * shape_[k] + i;
            ++k;
        }
        return off;
    }
    cplx& operator()(std::initializer_list<std::size_t> idx) { return data_[offset(idx)]; }
    const cplx& operator()(std::initializer_list<std::size_t> idx) const { return data_[offset(idx)]; }
    template <class... I>
    cplx& at(I... i) { return data_[offset({static_cast<std::size_t>(i)...})]; }
    template <class... I>
    const cplx& at(I... i) const { return data_[offset({static_cast<std::size_t>(i)...})]; }

    DenseTensor reshape(Shape shape) const& {
        DenseTensor t = *this;
        return std::move(t).reshape(std::move(shape));
    }
    DenseTensor reshape(Shape shape) && {
        if (shape_volume(shape) != data_.size())
            throw DimensionError("reshape: " + shape_string(shape_) + " -> " + shape_string(shape));
        shape_ = std::move(shape);
        check_extents();
        return std::move(*this);
    }

    /// Output axis k is input axis perm[k].
    DenseTensor permute(const std::vector<std::size_t>& perm) const {
        const std::size_t r = rank();
        if (perm.size() != r) throw ArgumentError("permute: permutation has wrong length");
        std::vector<bool> seen(r, false);
        for (auto p : perm) {
            if (p >= r || seen[p]) throw ArgumentError("permute: not a permutation");
            seen[p] = true;
        }
        bool trivial = true;
        for (std::size_t k = 0; k < r; ++k) trivial = trivial && perm[k] == k;
        if (trivial) return *this;

        std::vector<std::size_t> in_stride(r, 1);
        for (std::size_t k = r; k-- > 1;) in_stride[k - 1] = in_stride[k] * shape_[k];
        Shape out_shape(r);
        std::vector<std::size_t> stride(r);
        for (std::size_t k = 0; k < r; ++k) {
            out_shape[k] = shape_[perm[k]];
            stride[k] = in_stride[perm[k]];
        }
        DenseTensor out(out_shape);
        if (out.data_.empty()) return out;

        // Innermost output axis is walked in a tight loop; outer ones by odometer.
        const std::size_t inner = out_shape[r - 1];
        const std::size_t inner_stride = stride[r - 1];
        std::vector<std::size_t> idx(r, 0);
        std::size_t src = 0;
        cplx* dst = out.data_.data();
        const cplx* in = data_.data();
        const std::size_t outer_count = out.data_.size() / inner;
        for (std::size_t o = 0; o < outer_count; ++o) {
            for (std::size_t i = 0; i < inner; ++i) *dst++ = in[src + i * inner_stride];
            for (std::size_t k = r - 1; k-- > 0;) {
                if (++idx[k] < out_shape[k]) {
                    src += stride[k];
                    break;
                }
                src -= stride[k] * (out_shape[k] - 1);
                idx[k] = 0;
            }
        }
        return out;
    }

    DenseTensor conj() const {
        DenseTensor t = *this;
        for (auto& x : t.data_) x = std::conj(x);
        return t;
    }

    DenseTensor& operator*=(cplx s) {
        for (auto& x : data_) x *= s;
        return *this;
    }
    friend DenseTensor operator*(cplx s, DenseTensor t) { return t *= s; }

    DenseTensor& operator+=(const DenseTensor& o) {
        if (o.shape_ != shape_) throw DimensionError("+=: " + shape_string(shape_) + " vs " + shape_string(o.shape_));
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    DenseTensor& operator-=(const DenseTensor& o) {
        if (o.shape_ != shape_) throw DimensionError("-=: " + shape_string(shape_) + " vs " + shape_string(o.shape_));
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    friend DenseTensor operator+(DenseTensor a, const DenseTensor& b) { return a += b; }
    friend DenseTensor operator-(DenseTensor a, const DenseTensor& b) { return a -= b; }

    double norm() const {
        double s = 0.0;
        for (const auto& x : data_) s += std::norm(x);
        return std::sqrt(s);
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& x : data_) m = std::max(m, std::abs(x));
        return m;
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(),
                           [](const cplx& x) { return std::isfinite(x.real()) && std::isfinite(x.imag()); });
    }

    /// Row-major matrix view of a rank-2 tensor.
    Eigen::Map<const RowMatrix> matrix() const {
        require_rank(2, "matrix");
        return {data_.data(), static_cast<Eigen::Index>(shape_[0]), static_cast<Eigen::Index>(shape_[1])};
    }
    Eigen::Map<RowMatrix> matrix() {
        require_rank(2, "matrix");
        return {data_.data(), static_cast<Eigen::Index>(shape_[0]), static_cast<Eigen::Index>(shape_[1])};
    }

    friend bool operator==(const DenseTensor& a, const DenseTensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    void check_extents() const {
        for (auto e : shape_)
            if (e == 0) throw DimensionError("DenseTensor: zero extent in shape " + shape_string(shape_));
    }
    void require_rank(std::size_t r, const char* what) const {
        if (rank() != r) throw DimensionError(std::string(what) + ": expected rank " + std::to_string(r) +
                                              ", got shape " + shape_string(shape_));
    }

    Shape shape_;
    std::vector<cplx> data_;
};

/// Max absolute entrywise difference; shapes must match.
inline double max_abs_diff(const DenseTensor& a, const DenseTensor& b) {
    if (a.shape() != b.shape())
        throw DimensionError("max_abs_diff: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// Permutes `row_axes` (in the given order) to the front and flattens into a
/// matrix; the remaining axes keep their relative order as columns.
inline RowMatrix to_matrix(const DenseTensor& t, const std::vector<std::size_t>& row_axes,
                           Shape* row_shape = nullptr, Shape* col_shape = nullptr) {
    const std::size_t r = t.rank();
    std::vector<bool> is_row(r, false);
    for (auto a : row_axes) {
        if (a >= r) throw ArgumentError("to_matrix: axis out of range");
        if (is_row[a]) throw ArgumentError("to_matrix: repeated axis");
        is_row[a] = true;
    }
    std::vector<std::size_t> perm(row_axes);
    Shape rs, cs;
    for (auto a : row_axes) rs.push_back(t.extent(a));
    for (std::size_t a = 0; a < r; ++a)
        if (!is_row[a]) {
            perm.push_back(a);
            cs.push_back(t.extent(a));
        }
    const std::size_t rows = shape_volume(rs);
    const std::size_t cols = shape_volume(cs);
    DenseTensor p = t.permute(perm);
    RowMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::copy(p.data().begin(), p.data().end(), m.data());
    if (row_shape) *row_shape = std::move(rs);
    if (col_shape) *col_shape = std::move(cs);
    return m;
}

inline DenseTensor from_matrix(const RowMatrix& m, Shape shape) {
    DenseTensor t(std::move(shape));
    if (static_cast<std::size_t>(m.size()) != t.size()) throw DimensionError("from_matrix: size mismatch");
    std::copy(m.data(), m.data() + m.size(), t.data().begin());
    return t;
}

/// Sums over the paired axes. Result axes: free axes of `a` in order, then
/// free axes of `b` in order.
inline DenseTensor contract(const DenseTensor& a, const DenseTensor& b, const AxisPairs& pairs) {
    if (a.empty() || b.empty()) throw ArgumentError("contract: empty operand");
    std::vector<bool> used_a(a.rank(), false), used_b(b.rank(), false);
    std::vector<std::size_t> ca, cb;
    for (auto [ia, ib] : pairs) {
        if (ia >= a.rank() || ib >= b.rank()) throw ArgumentError("contract: axis out of range");
        if (used_a[ia] || used_b[ib]) throw ArgumentError("contract: repeated axis");
        if (a.extent(ia) != b.extent(ib))
            throw DimensionError("contract: extent mismatch " + std::to_string(a.extent(ia)) + " vs " +
                                 std::to_string(b.extent(ib)) + " on pair (" + std::to_string(ia) + "," +
                                 std::to_string(ib) + ")");
        used_a[ia] = used_b[ib] = true;
        ca.push_back(ia);
        cb.push_back(ib);
    }
    std::vector<std::size_t> perm_a, perm_b = cb;
    Shape out_shape;
    std::size_t m = 1, n = 1, k = 1;
    for (std::size_t i = 0; i < a.rank(); ++i)
        if (!used_a[i]) {
            perm_a.push_back(i);
            out_shape.push_back(a.extent(i));
            m *= a.extent(i);
        }
    for (auto i : ca) {
        perm_a.push_back(i);
        k *= a.extent(i);
    }
    for (std::size_t i = 0; i < b.rank(); ++i)
        if (!used_b[i]) {
            perm_b.push_back(i);
            out_shape.push_back(b.extent(i));
            n *= b.extent(i);
        }
    const DenseTensor pa = a.permute(perm_a);
    const DenseTensor pb = b.permute(perm_b);
    using Idx = Eigen::Index;
    Eigen::Map<const RowMatrix> ma(pa.data().data(), static_cast<Idx>(m), static_cast<Idx>(k));
    Eigen::Map<const RowMatrix> mb(pb.data().data(), static_cast<Idx>(k), static_cast<Idx>(n));
    DenseTensor out(out_shape);  // rank 0 (one entry) when every axis is paired
    Eigen::Map<RowMatrix> mo(out.data().data(), static_cast<Idx>(m), static_cast<Idx>(n));
    mo.noalias() = ma * mb;
    return out;
}

/// Matrix product of two rank-2 tensors.
inline DenseTensor matmul(const DenseTensor& a, const DenseTensor& b) { return contract(a, b, {{1, 0}}); }

inline DenseTensor adjoint(const DenseTensor& m) {
    if (m.rank() != 2) throw DimensionError("adjoint: rank-2 tensor required");
    return m.permute({1, 0}).conj();
}

/// Kronecker product of two matrices; the first factor is the slow index.
inline DenseTensor kron(const DenseTensor& a, const DenseTensor& b) {
    if (a.rank() != 2 || b.rank() != 2) throw DimensionError("kron: rank-2 tensors required");
    const std::size_t ar = a.extent(0), ac = a.extent(1), br = b.extent(0), bc = b.extent(1);
    DenseTensor out({ar * br, ac * bc});
    for (std::size_t i = 0; i < ar; ++i)
        for (std::size_t j = 0; j < ac; ++j)
            for (std::size_t k = 0; k < br; ++k)
                for (std::size_t l = 0; l < bc; ++l) out.at(i * br + k, j * bc + l) = a.at(i, j) * b.at(k, l);
    return out;
}

inline cplx trace(const DenseTensor& m) {
    if (m.rank() != 2 || m.extent(0) != m.extent(1)) throw DimensionError("trace: square matrix required");
    cplx s = 0.0;
    for (std::size_t i = 0; i < m.extent(0); ++i) s += m.at(i, i);
    return s;
}

struct SVDResult {
    DenseTensor left_isometry;            ///< (row extents..., kept)
    std::vector<double> singular_values;  ///< kept values, descending
    DenseTensor right_isometry;           ///< (kept, column extents...)
    double discarded_weight = 0.0;        ///< sum of dropped sigma^2 over total
    bool degenerate_split = false;        ///< max_rank cut through a degenerate multiplet
};

inline constexpr double kDefaultSvdCutoff = 1e-14;
inline constexpr double kDegeneracyGap = 1e-12;

/// Number of singular values to keep. Values at or below cutoff*sigma_max are
/// dropped; a multiplet straddling the cutoff is kept whole if it fits in
/// max_rank. Sets `split` when max_rank itself cuts through a multiplet.
inline std::size_t truncation_rank(std::span<const double> sv, std::size_t max_rank, double cutoff,
                                   bool* split = nullptr) {
    if (sv.empty()) return 0;
    const double smax = sv[0];
    std::size_t above = 0;
    while (above < sv.size() && sv[above] > cutoff * smax) ++above;
    std::size_t keep = std::max<std::size_t>(1, std::min(max_rank, above));
    auto degenerate = [&](std::size_t i) {  // sv[i] vs sv[i-1]
        return smax > 0.0 && (sv[i - 1] - sv[i]) <= kDegeneracyGap * smax;
    };
    while (keep < sv.size() && keep < max_rank && degenerate(keep)) ++keep;
    if (split) *split = keep < sv.size() && keep == max_rank && sv[keep] > cutoff * smax && degenerate(keep);
    return keep;
}

struct ThinSVD {
    Eigen::MatrixXcd u, v;
    Eigen::VectorXd s;
};

/// Thin SVD m = u diag(s) v^dagger. Divide-and-conquer first; the one-sided
/// Jacobi solver takes over when that returns non-finite factors, which
/// happens for some nearly rank-deficient inputs.
inline ThinSVD thin_svd(const Eigen::MatrixXcd& m) {
    ThinSVD r;
    {
        Eigen::BDCSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        r.u = svd.matrixU();
        r.v = svd.matrixV();
        r.s = svd.singularValues();
    }
    if (r.s.allFinite() && r.u.allFinite() && r.v.allFinite()) return r;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    r.u = svd.matrixU();
    r.v = svd.matrixV();
    r.s = svd.singularValues();
    if (!r.s.allFinite() || !r.u.allFinite() || !r.v.allFinite())
        throw NumericalError("SVD failed for a " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                             " matrix");
    return r;
}

/// Truncated SVD of `t` viewed as a matrix with `row_axes` as rows.
inline SVDResult svd_split(const DenseTensor& t, const std::vector<std::size_t>& row_axes, std::size_t max_rank,
                           double cutoff = kDefaultSvdCutoff) {
    if (t.empty()) throw ArgumentError("svd_split: empty tensor");
    if (row_axes.empty() || row_axes.size() >= t.rank())
        throw ArgumentError("svd_split: row axes must be a proper nonempty subset");
    if (max_rank == 0) throw ArgumentError("svd_split: max_rank must be positive");
    Shape rs, cs;
    const RowMatrix m = to_matrix(t, row_axes, &rs, &cs);
    if (!m.allFinite()) throw NumericalError("svd_split: non-finite input");

    const ThinSVD f = thin_svd(m);
    const Eigen::MatrixXcd& u = f.u;
    const Eigen::MatrixXcd& v = f.v;
    const Eigen::VectorXd& s = f.s;

    SVDResult res;
    std::vector<double> sv(s.data(), s.data() + s.size());
    const std::size_t keep = truncation_rank(sv, max_rank, cutoff, &res.degenerate_split);
    double total = 0.0, dropped = 0.0;
    for (std::size_t i = 0; i < sv.size(); ++i) {
        total += sv[i] * sv[i];
        if (i >= keep) dropped += sv[i] * sv[i];
    }
    res.discarded_weight = total > 0.0 ? std::clamp(dropped / total, 0.0, 1.0) : 0.0;
    res.singular_values.assign(sv.begin(), sv.begin() + static_cast<std::ptrdiff_t>(keep));

    const auto k = static_cast<Eigen::Index>(keep);
    Shape ls = rs;
    ls.push_back(keep);
    res.left_isometry = from_matrix(RowMatrix(u.leftCols(k)), ls);
    Shape rsh{keep};
    rsh.insert(rsh.end(), cs.begin(), cs.end());
    res.right_isometry = from_matrix(RowMatrix(v.leftCols(k).adjoint()), rsh);
    return res;
}

inline constexpr double kHermitianTol = 1e-10;

inline void require_hermitian(const DenseTensor& h, const char* what, double tol = kHermitianTol) {
    if (h.rank() != 2 || h.extent(0) != h.extent(1))
        throw DimensionError(std::string(what) + ": square matrix required, got " + shape_string(h.shape()));
    const std::size_t n = h.extent(0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j)
            if (std::abs(h.at(i, j) - std::conj(h.at(j, i))) > tol)
                throw ArgumentError(std::string(what) + ": matrix is not Hermitian");
}

/// exp(scale * h) for Hermitian h, via the spectral decomposition of h.
inline DenseTensor hermitian_exponential(const DenseTensor& h, cplx scale) {
    require_hermitian(h, "hermitian_exponential");
    const Eigen::MatrixXcd hm = h.matrix();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hm);
    if (es.info() != Eigen::Success) throw NumericalError("hermitian_exponential: eigensolver failed");
    Eigen::VectorXcd phases(es.eigenvalues().size());
    for (Eigen::Index i = 0; i < phases.size(); ++i) phases[i] = std::exp(scale * es.eigenvalues()[i]);
    const Eigen::MatrixXcd& vecs = es.eigenvectors();
    return DenseTensor::from_matrix(RowMatrix(vecs * phases.asDiagonal() * vecs.adjoint()));
}

/// Eigenvalues (ascending) of a Hermitian matrix.
inline std::vector<double> hermitian_eigenvalues(const DenseTensor& h, double tol = kHermitianTol) {
    require_hermitian(h, "hermitian_eigenvalues", tol);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Eigen::MatrixXcd(h.matrix()), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("hermitian_eigenvalues: eigensolver failed");
    return {es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size()};
}

/// Max deviation of m m^dagger from the identity.
inline double unitarity_error(const DenseTensor& m) {
    const RowMatrix mm = m.matrix();
    const RowMatrix p = mm * mm.adjoint();
    return (p - RowMatrix::Identity(p.rows(), p.cols())).cwiseAbs().maxCoeff();
}

}  // namespace dtc
