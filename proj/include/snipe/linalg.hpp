#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "snipe/core.hpp"

namespace snipe::linalg {

/**
 * @brief Orthonormal basis of an r-dimensional subspace of R^n.
 *
 * A point on the Grassmannian G(n, r), represented by an n x r matrix with
 * orthonormal columns. The particular basis is not canonical; all geometric
 * quantities defined below (principal angles, distance, coherence) are
 * invariant under right-multiplication by an r x r orthogonal matrix.
 */
struct SubspaceBasis {
    Matrix columns;

    Index n() const { return columns.rows(); }
    Index r() const { return columns.cols(); }
};

/// Largest entrywise deviation of B^T B from the identity.
inline double orthonormality_error(const SubspaceBasis& basis) {
    const Matrix gram = basis.columns.transpose() * basis.columns;
    return (gram - Matrix::Identity(basis.r(), basis.r())).cwiseAbs().maxCoeff();
}

/**
 * @brief Principal angles between two equi-dimensional subspaces.
 *
 * angles[0] >= ... >= angles[r-1], all in [0, pi/2].
 */
struct PrincipalAngles {
    std::vector<double> angles;
};

/// Full singular value profile of a matrix plus its condition number.
struct SpectralSummary {
    std::vector<double> singular_values; ///< non-increasing, >= 0
    double condition_number;             ///< sigma_max / sigma_min, +inf if rank-deficient
};

namespace detail {

/// Numerical-rank cutoff: sigma counts as zero at or below this.
inline double rank_tolerance(Index rows, Index cols, double sigma_max) {
    const double eps = std::numeric_limits<double>::epsilon();
    return static_cast<double>(std::max(rows, cols)) * eps * sigma_max;
}

/// Flip each column so its largest-magnitude entry is positive.
inline void canonicalize_signs(Matrix& basis) {
    for (Index j = 0; j < basis.cols(); ++j) {
        Index imax = 0;
        basis.col(j).cwiseAbs().maxCoeff(&imax);
        if (basis(imax, j) < 0.0) basis.col(j) = -basis.col(j);
    }
}

/// Extend `basis` (orthonormal, possibly fewer than r columns) to r columns
/// with a deterministic orthonormal complement: pivoted QR of the identity's
/// residual against span(basis).
inline void pad_with_identity_complement(Matrix& basis, Index r) {
    const Index n = basis.rows();
    const Index have = basis.cols();
    if (have >= r) {
        canonicalize_signs(basis);
        return;
    }
    const Matrix residual = Matrix::Identity(n, n) - basis * basis.transpose();
    Eigen::ColPivHouseholderQR<Matrix> qr(residual);
    Matrix extra = qr.householderQ() * Matrix::Identity(n, r - have);
    // absorb projector rounding: one pass against basis, then among themselves
    extra -= basis * (basis.transpose() * extra);
    for (Index j = 0; j < extra.cols(); ++j) {
        for (Index k = 0; k < j; ++k)
            extra.col(j) -= extra.col(k) * extra.col(k).dot(extra.col(j));
        extra.col(j).normalize();
    }
    basis.conservativeResize(Eigen::NoChange, r);
    basis.rightCols(r - have) = extra;
    canonicalize_signs(basis);
}

} // namespace detail

/**
 * @brief Orthonormal basis for the column span of a full-column-rank matrix.
 *
 * @throws RankDeficient if the smallest singular value is at or below the
 *         numerical-rank tolerance max(n, r) * eps * sigma_max.
 */
inline SubspaceBasis orthonormalize(const Matrix& m) {
    if (m.rows() < 1 || m.cols() < 1 || m.cols() > m.rows())
        throw DimensionMismatch("orthonormalize: need n x r input with 1 <= r <= n");
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU);
    const auto& sigma = svd.singularValues();
    const double tol = detail::rank_tolerance(m.rows(), m.cols(), sigma(0));
    if (sigma(m.cols() - 1) <= tol)
        throw RankDeficient("orthonormalize: input is numerically rank-deficient");
    Matrix basis = svd.matrixU();
    detail::canonicalize_signs(basis);
    return SubspaceBasis{std::move(basis)};
}

/**
 * @brief Span of the left singular vectors for the r largest singular values.
 *
 * Deterministic: ties follow the SVD routine's output order and every column's
 * sign is fixed so its largest-magnitude entry is positive. If fewer than r
 * singular values are numerically nonzero, the basis is padded with
 * orthonormal complements built from identity columns, so the result is
 * always a valid r-dimensional basis.
 *
 * @throws DimensionMismatch if r > min(n, b) or r < 1.
 */
inline SubspaceBasis truncated_svd_left(const Matrix& m, Index r) {
    const Index n = m.rows();
    const Index b = m.cols();
    if (r < 1 || r > std::min(n, b))
        throw DimensionMismatch("truncated_svd_left: need 1 <= r <= min(n, b)");

    Matrix basis;
    double sigma_max = 0.0;
    Vector sigma;
    if (b >= 2 * n) {
        // wide input: eigen-decompose the n x n Gram matrix instead of the
        // full SVD; only the left singular span is needed
        const Matrix gram = m * m.transpose();
        Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
        sigma = eig.eigenvalues().reverse().cwiseMax(0.0).cwiseSqrt();
        basis = Matrix(n, r);
        for (Index j = 0; j < r; ++j) basis.col(j) = eig.eigenvectors().col(n - 1 - j);
        sigma_max = sigma(0);
    } else {
        Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU);
        sigma = svd.singularValues();
        sigma_max = sigma(0);
        basis = svd.matrixU().leftCols(r);
    }

    const double tol = detail::rank_tolerance(n, b, sigma_max);
    Index numerical_rank = 0;
    while (numerical_rank < r && sigma(numerical_rank) > tol) ++numerical_rank;

    basis.conservativeResize(Eigen::NoChange, numerical_rank);
    detail::canonicalize_signs(basis);
    if (numerical_rank < r) detail::pad_with_identity_complement(basis, r);
    return SubspaceBasis{std::move(basis)};
}

/// Grow a basis to rank r with the deterministic identity-complement padding.
inline SubspaceBasis extend_to_rank(SubspaceBasis basis, Index r) {
    if (r < basis.r() || r > basis.n())
        throw DimensionMismatch("extend_to_rank: need current r <= target r <= n");
    detail::pad_with_identity_complement(basis.columns, r);
    return basis;
}

/**
 * @brief Minimum-norm least-squares coefficients of y against B restricted to omega.
 *
 * Returns (P_omega B)^+ y for an observation y supported on the index set
 * omega. When P_omega B has full column rank this is the unique least-squares
 * solution; otherwise (including |omega| < r) it is the minimum-norm one.
 */
inline Vector masked_pinv_apply(const SubspaceBasis& basis,
                                const std::vector<Index>& omega,
                                const Vector& y) {
    const Index r = basis.r();
    const Index m = static_cast<Index>(omega.size());
    if (y.size() != basis.n())
        throw DimensionMismatch("masked_pinv_apply: vector length does not match basis");
    if (m == 0) return Vector::Zero(r);

    Matrix rows(m, r);
    Vector rhs(m);
    for (Index i = 0; i < m; ++i) {
        rows.row(i) = basis.columns.row(omega[static_cast<std::size_t>(i)]);
        rhs(i) = y(omega[static_cast<std::size_t>(i)]);
    }
    Eigen::JacobiSVD<Matrix> svd(rows, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double sigma_max = svd.singularValues()(0);
    if (sigma_max == 0.0) return Vector::Zero(r);
    svd.setThreshold(detail::rank_tolerance(m, r, 1.0)); // relative to sigma_max
    return svd.solve(rhs); // SVD solve yields the min-norm least-squares solution
}

/**
 * @brief Principal angles via the numerically stable two-branch scheme.
 *
 * Cosines come from the SVD of A^T B, sines from the SVD of B - A (A^T B);
 * each angle uses whichever branch is better conditioned (crossover at 45
 * degrees, where both are fine). This keeps full precision for tiny angles,
 * which is exactly the convergence regime of interest.
 */
inline PrincipalAngles principal_angles(const SubspaceBasis& a, const SubspaceBasis& b) {
    if (a.n() != b.n() || a.r() != b.r())
        throw DimensionMismatch("principal_angles: bases must share n and r");
    const Index r = a.r();

    const Matrix cross = a.columns.transpose() * b.columns; // r x r
    Eigen::JacobiSVD<Matrix> cos_svd(cross);
    const Vector cosines = cos_svd.singularValues(); // non-increasing

    const Matrix residual = b.columns - a.columns * cross; // P_{A_perp} B
    Eigen::JacobiSVD<Matrix> sin_svd(residual);
    const Vector sines = sin_svd.singularValues(); // non-increasing

    // cosines descending <=> angles ascending; sines descending <=> angles
    // descending. Pair angle i (non-increasing) with cos[r-1-i] and sin[i].
    PrincipalAngles out;
    out.angles.resize(static_cast<std::size_t>(r));
    for (Index i = 0; i < r; ++i) {
        const double c = std::clamp(cosines(r - 1 - i), 0.0, 1.0);
        const double s = std::clamp(sines(i), 0.0, 1.0);
        out.angles[static_cast<std::size_t>(i)] =
            (c * c <= 0.5) ? std::acos(c) : std::asin(s);
    }
    std::sort(out.angles.begin(), out.angles.end(), std::greater<double>());
    return out;
}

/**
 * @brief Root-mean-square of the principal-angle sines; in [0, 1].
 *
 * Equals ||P_{A_perp} P_B||_F / sqrt(r): 0 for identical spans, 1 for fully
 * orthogonal ones. Symmetric in its arguments.
 */
inline double grassmann_distance(const SubspaceBasis& a, const SubspaceBasis& b) {
    if (a.n() != b.n() || a.r() != b.r())
        throw DimensionMismatch("grassmann_distance: bases must share n and r");
    // ||P_{A_perp} P_B||_F = ||B - A (A^T B)||_F for orthonormal A, B
    const Matrix residual = b.columns - a.columns * (a.columns.transpose() * b.columns);
    const double d = residual.norm() / std::sqrt(static_cast<double>(a.r()));
    return std::clamp(d, 0.0, 1.0);
}

/**
 * @brief Coherence (n/r) * max_i ||B[i,:]||_2^2 of the spanned subspace.
 *
 * Lies in [1, n/r]; 1 means maximally diffuse rows, n/r means some coordinate
 * direction is contained in the subspace. Basis-independent.
 */
inline double coherence(const SubspaceBasis& basis) {
    const double max_row = basis.columns.rowwise().squaredNorm().maxCoeff();
    return static_cast<double>(basis.n()) / static_cast<double>(basis.r()) * max_row;
}

/// Singular values (non-increasing) and condition number of any matrix.
inline SpectralSummary spectral_summary(const Matrix& m) {
    if (m.rows() < 1 || m.cols() < 1)
        throw DimensionMismatch("spectral_summary: empty matrix");
    Eigen::BDCSVD<Matrix> svd(m);
    const Vector& sigma = svd.singularValues();
    SpectralSummary out;
    out.singular_values.assign(sigma.data(), sigma.data() + sigma.size());
    const double tol = detail::rank_tolerance(m.rows(), m.cols(), sigma(0));
    const double sigma_min = sigma(sigma.size() - 1);
    out.condition_number = (sigma_min <= tol)
                               ? std::numeric_limits<double>::infinity()
                               : sigma(0) / sigma_min;
    return out;
}

} // namespace snipe::linalg
