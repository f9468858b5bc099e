#pragma once

#include <cmath>
#include <vector>

#include "snipe/core.hpp"
#include "snipe/linalg.hpp"
#include "snipe/model.hpp"

namespace snipe::baselines {

using linalg::SubspaceBasis;
using model::MeasurementBlock;
using model::ObservedVector;

/**
 * @brief Reference solver for the least-change completion problem.
 *
 * Solves  min ||P_{B_perp} x||_2  subject to  P_omega x = y  by eliminating
 * the constraint: x = y + Z z with Z the identity columns of the unobserved
 * coordinates, then a dense minimum-norm least-squares solve for z. This is
 * deliberately a different route from the closed form used by the estimator,
 * so the two can certify each other.
 */
inline Vector oracle_least_change(const SubspaceBasis& basis, const ObservedVector& y) {
    const Index n = basis.n();
    if (n != y.n)
        throw DimensionMismatch("oracle_least_change: basis and observation disagree on n");

    std::vector<Index> complement;
    complement.reserve(static_cast<std::size_t>(n));
    {
        std::size_t cursor = 0;
        for (Index i = 0; i < n; ++i) {
            if (cursor < y.omega.size() && y.omega[cursor] == i) {
                ++cursor;
            } else {
                complement.push_back(i);
            }
        }
    }
    if (complement.empty()) return y.values; // feasible set is a single point

    const Matrix projector =
        Matrix::Identity(n, n) - basis.columns * basis.columns.transpose();
    Matrix system(n, static_cast<Index>(complement.size()));
    for (std::size_t j = 0; j < complement.size(); ++j)
        system.col(static_cast<Index>(j)) = projector.col(complement[j]);
    const Vector rhs = -(projector * y.values);

    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(system);
    cod.setThreshold(static_cast<double>(n) * std::numeric_limits<double>::epsilon());
    const Vector z = cod.solve(rhs);

    Vector x = y.values;
    for (std::size_t j = 0; j < complement.size(); ++j)
        x(complement[j]) += z(static_cast<Index>(j));
    return x;
}

/**
 * @brief Per-vector Grassmannian gradient tracker (GROUSE-style).
 *
 * Each measurement rotates the current subspace within the plane spanned by
 * the in-subspace prediction and the observed residual, by an angle set by
 * the diminishing step step_scale / t.
 */
struct GrouseState {
    SubspaceBasis estimate;
    Index t = 0;            ///< vectors consumed
    double step_scale = 100.0;
};

inline GrouseState make_grouse(SubspaceBasis initial, double step_scale = 100.0) {
    return GrouseState{std::move(initial), 0, step_scale};
}

inline GrouseState grouse_step(const GrouseState& state, const ObservedVector& y) {
    const SubspaceBasis& basis = state.estimate;
    if (basis.n() != y.n)
        throw DimensionMismatch("grouse_step: basis and observation disagree on n");

    GrouseState next = state;
    next.t = state.t + 1;

    const Vector weights = linalg::masked_pinv_apply(basis, y.omega, y.values);
    const Vector prediction = basis.columns * weights;
    Vector residual = Vector::Zero(y.n);
    for (Index i : y.omega) residual(i) = y.values(i) - prediction(i);

    const double residual_norm = residual.norm();
    const double prediction_norm = prediction.norm();
    const double weight_norm = weights.norm();
    const double step = next.step_scale / static_cast<double>(next.t);
    // no-op when the observation is already explained or the step vanishes
    if (step == 0.0 || residual_norm <= 1e-12 * (y.values.norm() + prediction_norm) ||
        prediction_norm == 0.0 || weight_norm == 0.0)
        return next;

    const double angle = step * residual_norm * prediction_norm;
    const Vector rotation = ((std::cos(angle) - 1.0) / prediction_norm) * prediction +
                            (std::sin(angle) / residual_norm) * residual;
    next.estimate.columns = basis.columns + rotation * (weights.transpose() / weight_norm);

    if (linalg::orthonormality_error(next.estimate) > 1e-11)
        next.estimate = linalg::orthonormalize(next.estimate.columns);
    return next;
}

/// Naive control: truncated SVD of all zero-filled data at once.
inline SubspaceBasis zero_fill_svd(const std::vector<MeasurementBlock>& blocks, Index r) {
    Index total = 0;
    Index n = 0;
    for (const auto& block : blocks) {
        total += block.b();
        n = block.n;
    }
    if (total < r) throw BlockTooSmall("zero_fill_svd: fewer columns than the target rank");
    Matrix all(n, total);
    Index col = 0;
    for (const auto& block : blocks)
        for (const auto& column : block.columns) all.col(col++) = column.values;
    return linalg::truncated_svd_left(all, r);
}

} // namespace snipe::baselines
