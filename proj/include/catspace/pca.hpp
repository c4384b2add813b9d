#pragma once

// Correlation-matrix principal component analysis.

#include "catspace/core.hpp"
#include "catspace/stats.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace catspace::pca {

template <typename T>
struct PcaResult {
    using VectorT = Eigen::VectorX<T>;
    using MatrixT = Eigen::MatrixX<T>;

    VectorT eigenvalues;      // descending
    VectorT explained_ratio;  // sums to 1
    MatrixT eigenvectors;     // variables x factors, unit columns
    MatrixT loadings;         // variables x factors, corr(variable, factor)
    MatrixT scores;           // observations x factors
    MatrixT correlation;
    stats::TestResult bartlett;
    // Absent when the correlation matrix is singular or diagonal.
    std::optional<double> kmo;

    Eigen::Index variables() const { return loadings.rows(); }
    Eigen::Index factors() const { return loadings.cols(); }
};

/// Column-wise standardization with the n-1 deviation.
template <typename Derived>
Eigen::MatrixX<typename Derived::Scalar> standardize(const Eigen::MatrixBase<Derived>& data)
{
    using T = typename Derived::Scalar;
    if (data.rows() < 2) throw std::invalid_argument("standardize: need at least two observations");
    Eigen::MatrixX<T> centered = data.rowwise() - data.colwise().mean();
    const T denom = static_cast<T>(data.rows() - 1);
    for (Eigen::Index j = 0; j < centered.cols(); ++j) {
        const T sd = std::sqrt(centered.col(j).squaredNorm() / denom);
        if (!(sd > T(0))) throw std::invalid_argument("standardize: variable " + std::to_string(j) + " is constant");
        centered.col(j) /= sd;
    }
    return centered;
}

/// Pearson correlation matrix of the columns of `data` (observations x variables).
template <typename Derived>
Eigen::MatrixX<typename Derived::Scalar> correlation_matrix(const Eigen::MatrixBase<Derived>& data)
{
    using T = typename Derived::Scalar;
    const Eigen::MatrixX<T> z = standardize(data);
    Eigen::MatrixX<T> r = (z.transpose() * z) / static_cast<T>(data.rows() - 1);
    // Symmetrize and pin the diagonal against rounding.
    r = (r + r.transpose()).eval() / T(2);
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        r(i, i) = T(1);
        for (Eigen::Index j = 0; j < r.cols(); ++j) r(i, j) = std::clamp(r(i, j), T(-1), T(1));
    }
    return r;
}

template <typename Derived>
PcaResult<typename Derived::Scalar> pca(const Eigen::MatrixBase<Derived>& data)
{
    using T = typename Derived::Scalar;
    if (data.rows() < 3) throw std::invalid_argument("pca: need at least three observations");
    if (data.cols() < 2) throw std::invalid_argument("pca: need at least two variables");

    PcaResult<T> out;
    const Eigen::MatrixX<T> z = standardize(data);
    out.correlation = correlation_matrix(data);

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixX<T>> eig(out.correlation);
    if (eig.info() != Eigen::Success) throw std::runtime_error("pca: eigendecomposition failed");

    const Eigen::Index p = out.correlation.rows();
    out.eigenvalues.resize(p);
    out.eigenvectors.resize(p, p);
    for (Eigen::Index f = 0; f < p; ++f) {
        // solver order is ascending
        out.eigenvalues(f) = std::max(eig.eigenvalues()(p - 1 - f), T(0));
        out.eigenvectors.col(f) = eig.eigenvectors().col(p - 1 - f);
    }
    // Sign convention: the largest-magnitude component of each factor is positive.
    for (Eigen::Index f = 0; f < p; ++f) {
        Eigen::Index arg = 0;
        out.eigenvectors.col(f).cwiseAbs().maxCoeff(&arg);
        if (out.eigenvectors(arg, f) < T(0)) out.eigenvectors.col(f) *= T(-1);
    }
    out.explained_ratio = out.eigenvalues / out.eigenvalues.sum();
    out.loadings = out.eigenvectors * out.eigenvalues.cwiseSqrt().asDiagonal();
    out.scores = z * out.eigenvectors;

    const Matrix r = out.correlation.template cast<double>();
    out.bartlett = stats::bartlett_sphericity(r, static_cast<std::size_t>(data.rows()));
    const bool diagonal = (r - Matrix::Identity(r.rows(), r.cols())).cwiseAbs().maxCoeff() == 0.0;
    if (!out.bartlett.degenerate && !diagonal) out.kmo = stats::kmo(r);
    return out;
}

struct CirclePoint {
    Eigen::Index variable = 0;
    double x = 0.0;
    double y = 0.0;
};

/// Loadings of every variable on two factors.
template <typename T>
std::vector<CirclePoint> correlation_circle(const PcaResult<T>& result, Eigen::Index f1, Eigen::Index f2)
{
    if (f1 == f2) throw std::invalid_argument("correlation_circle: factors must differ");
    if (f1 < 0 || f2 < 0 || f1 >= result.factors() || f2 >= result.factors())
        throw std::out_of_range("correlation_circle: factor index out of range");
    std::vector<CirclePoint> points;
    points.reserve(static_cast<std::size_t>(result.variables()));
    for (Eigen::Index v = 0; v < result.variables(); ++v) {
        points.push_back({v, static_cast<double>(result.loadings(v, f1)), static_cast<double>(result.loadings(v, f2))});
    }
    return points;
}

}  // namespace catspace::pca
