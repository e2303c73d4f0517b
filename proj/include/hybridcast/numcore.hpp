#pragma once

// Dense numeric substrate: Eigen aliases, a row-major n-d tensor, SPD solves,
// symmetric eigenvalues and a reproducible random stream.

#include "hybridcast/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace hybridcast {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

// Row-major matrix view used when mapping flat tensor storage.
template <typename Scalar>
using RowMajorMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::string shape_string(Index rows, Index cols) {
    return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

// Dense n-dimensional array, row-major (last index fastest).
template <typename Scalar>
class BasicTensor {
public:
    BasicTensor() = default;

    explicit BasicTensor(std::vector<Index> shape, Scalar fill = Scalar(0))
        : shape_(std::move(shape)), data_(static_cast<std::size_t>(count(shape_)), fill) {}

    BasicTensor(std::vector<Index> shape, std::vector<Scalar> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (count(shape_) != static_cast<Index>(data_.size())) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str());
        }
    }

    const std::vector<Index>& shape() const noexcept { return shape_; }
    Index dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t rank() const noexcept { return shape_.size(); }
    Index size() const noexcept { return static_cast<Index>(data_.size()); }

    Scalar* data() noexcept { return data_.data(); }
    const Scalar* data() const noexcept { return data_.data(); }
    std::vector<Scalar>& values() noexcept { return data_; }
    const std::vector<Scalar>& values() const noexcept { return data_; }

    template <typename... I>
    Scalar& operator()(I... idx) {
        return data_[static_cast<std::size_t>(offset(idx...))];
    }
    template <typename... I>
    const Scalar& operator()(I... idx) const {
        return data_[static_cast<std::size_t>(offset(idx...))];
    }

    // Views the trailing two axes of sub-block `outer` as a row-major matrix.
    Eigen::Map<RowMajorMatrix<Scalar>> matrix(Index rows, Index cols, Index outer = 0) {
        return Eigen::Map<RowMajorMatrix<Scalar>>(data_.data() + outer * rows * cols, rows, cols);
    }
    Eigen::Map<const RowMajorMatrix<Scalar>> matrix(Index rows, Index cols, Index outer = 0) const {
        return Eigen::Map<const RowMajorMatrix<Scalar>>(data_.data() + outer * rows * cols, rows,
                                                        cols);
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](Scalar v) { return std::isfinite(v); });
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << '(';
        for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
        os << ')';
        return os.str();
    }

    static Index count(const std::vector<Index>& shape) {
        return std::accumulate(shape.begin(), shape.end(), Index(1), std::multiplies<>());
    }

    friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

private:
    template <typename... I>
    Index offset(I... idx) const {
        const Index ids[] = {static_cast<Index>(idx)...};
        Index off = 0;
        for (std::size_t k = 0; k < sizeof...(I); ++k) off = off * shape_[k] + ids[k];
        return off;
    }

    std::vector<Index> shape_;
    std::vector<Scalar> data_;
};

using Tensor = BasicTensor<double>;

template <typename DerivedA, typename DerivedB>
auto matmul(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
    using Scalar = typename DerivedA::Scalar;
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions disagree, " + shape_string(a.rows(), a.cols()) +
                         " x " + shape_string(b.rows(), b.cols()));
    }
    Matrix<Scalar> out = a * b;
    return out;
}

template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& a, double tol = 1e-10) {
    if (a.rows() != a.cols()) return false;
    const double scale = std::max(1.0, static_cast<double>(a.cwiseAbs().maxCoeff()));
    return static_cast<double>((a - a.transpose()).cwiseAbs().maxCoeff()) <= tol * scale;
}

// Solves a x = b for symmetric positive-definite a by Cholesky.
// Throws SingularMatrixError when a pivot collapses relative to the diagonal
// scale, which also catches numerically rank-deficient Gram matrices.
template <typename DerivedA, typename DerivedB>
Matrix<typename DerivedA::Scalar> solve_spd(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b) {
    using Scalar = typename DerivedA::Scalar;
    if (a.rows() != a.cols() || a.rows() != b.rows()) {
        throw ShapeError("solve_spd: incompatible shapes " + shape_string(a.rows(), a.cols()) +
                         " and " + shape_string(b.rows(), b.cols()));
    }
    if (!is_symmetric(a)) throw ShapeError("solve_spd: matrix is not symmetric");
    const Matrix<Scalar> am = a;
    Eigen::LLT<Matrix<Scalar>> llt(am);
    if (llt.info() != Eigen::Success) {
        throw SingularMatrixError("solve_spd: Cholesky failed, matrix is not positive-definite");
    }
    const Scalar diag_scale = am.diagonal().cwiseAbs().maxCoeff();
    const auto pivots = llt.matrixLLT().diagonal().array().square();
    if (am.rows() > 0 && pivots.minCoeff() <= Scalar(1e-12) * diag_scale) {
        throw SingularMatrixError("solve_spd: matrix is numerically singular");
    }
    return llt.solve(b.derived());
}

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
// descending. Sweeps stop once the off-diagonal Frobenius norm drops below
// `tol` (scaled by the Frobenius norm of the input).
template <typename Derived>
Vector<typename Derived::Scalar> sym_eigenvalues(const Eigen::MatrixBase<Derived>& input,
                                                 double tol = 1e-12, int max_sweeps = 100) {
    using Scalar = typename Derived::Scalar;
    if (input.rows() != input.cols()) {
        throw ShapeError("sym_eigenvalues: matrix is not square " +
                         shape_string(input.rows(), input.cols()));
    }
    if (!is_symmetric(input)) throw ShapeError("sym_eigenvalues: matrix is not symmetric");

    Matrix<Scalar> a = input;
    const Index n = a.rows();
    const Scalar norm = std::max<Scalar>(a.norm(), Scalar(1));
    auto off_norm = [&] {
        Scalar s = 0;
        for (Index p = 0; p < n; ++p)
            for (Index q = 0; q < n; ++q)
                if (p != q) s += a(p, q) * a(p, q);
        return std::sqrt(s);
    };

    for (int sweep = 0; sweep < max_sweeps && off_norm() > tol * norm; ++sweep) {
        for (Index p = 0; p < n - 1; ++p) {
            for (Index q = p + 1; q < n; ++q) {
                if (a(p, q) == Scalar(0)) continue;
                const Scalar theta = (a(q, q) - a(p, p)) / (Scalar(2) * a(p, q));
                const Scalar t = (theta >= 0 ? Scalar(1) : Scalar(-1)) /
                                 (std::abs(theta) + std::sqrt(theta * theta + Scalar(1)));
                const Scalar c = Scalar(1) / std::sqrt(t * t + Scalar(1));
                const Scalar s = t * c;
                for (Index k = 0; k < n; ++k) {
                    const Scalar akp = a(k, p);
                    const Scalar akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Index k = 0; k < n; ++k) {
                    const Scalar apk = a(p, k);
                    const Scalar aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }

    Vector<Scalar> eig = a.diagonal();
    std::sort(eig.data(), eig.data() + eig.size(), std::greater<Scalar>());
    return eig;
}

// Seeded stream: std::mt19937_64 for bits, 53-bit mantissa uniforms and a
// Box-Muller transform for normals, so streams are reproducible anywhere the
// standard engine is.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[static_cast<std::size_t>(below(i))]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

VectorXd rng_normal(Rng& rng, Index n, double mean, double sd);

}  // namespace hybridcast
