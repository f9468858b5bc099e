#pragma once

#include <utility>
#include <vector>

#include "snipe/core.hpp"
#include "snipe/linalg.hpp"
#include "snipe/model.hpp"

namespace snipe {

using linalg::SubspaceBasis;
using model::MeasurementBlock;
using model::ObservedVector;

struct SnipeConfig {
    Index r = 1;
    /// Reject blocks with b < r instead of falling back to rank padding.
    bool min_block_guard = true;
};

/**
 * @brief Everything SNIPE retains between blocks: the current n x r estimate
 * and a block counter. Nothing observed is kept.
 */
struct SnipeState {
    SubspaceBasis estimate;
    Index blocks_processed = 0;
    SnipeConfig config;

    Index n() const { return estimate.n(); }
};

namespace detail {

inline void check_block(const MeasurementBlock& block, const SnipeConfig& cfg) {
    if (block.b() < 1) throw BlockTooSmall("snipe: empty block");
    if (cfg.min_block_guard && block.b() < cfg.r)
        throw BlockTooSmall("snipe: block has fewer columns than the target rank");
}

/// Top-r left singular span; short blocks (possible only with the guard off)
/// fall back to rank padding so an r-dimensional estimate always exists.
inline SubspaceBasis truncate_or_pad(const Matrix& dense, Index r) {
    const Index usable = std::min(r, dense.cols());
    SubspaceBasis basis = linalg::truncated_svd_left(dense, usable);
    if (usable < r) basis = linalg::extend_to_rank(std::move(basis), r);
    return basis;
}

} // namespace detail

/**
 * @brief Initial estimate: span of the top r left singular vectors of the
 * first block, zero-filled.
 */
inline SnipeState snipe_init(const MeasurementBlock& block, const SnipeConfig& cfg) {
    if (cfg.r < 1) throw ConfigInvalid("snipe: rank must be >= 1");
    detail::check_block(block, cfg);
    SnipeState state;
    state.config = cfg;
    state.estimate = detail::truncate_or_pad(model::to_dense(block), cfg.r);
    state.blocks_processed = 1;
    return state;
}

/**
 * @brief Least-change completion of one observed column against a basis.
 *
 * Returns y + P_{omega^C} B (P_omega B)^+ y: the unobserved entries are filled
 * from the best approximation of y within span(B), the observed entries are
 * kept verbatim. Among all vectors agreeing with the observations this is the
 * one with the least energy outside span(B).
 */
inline Vector interpolate_column(const SubspaceBasis& basis, const ObservedVector& y) {
    if (basis.n() != y.n)
        throw DimensionMismatch("interpolate_column: basis and observation disagree on n");
    const Vector coeff = linalg::masked_pinv_apply(basis, y.omega, y.values);
    const Vector in_span = basis.columns * coeff;
    Vector out = in_span;
    for (Index i : y.omega) out(i) = y.values(i);
    return out;
}

/// snipe_step variant that also returns the interpolated block R_k.
inline std::pair<SnipeState, Matrix> snipe_step_with_interpolant(const SnipeState& state,
                                                                 const MeasurementBlock& block) {
    if (state.blocks_processed < 1)
        throw EmptyStream("snipe_step: state not initialized");
    if (block.n != state.n())
        throw DimensionMismatch("snipe_step: block dimension does not match state");
    detail::check_block(block, state.config);

    // every column interpolates against the previous block's estimate
    Matrix interpolant(block.n, block.b());
    for (Index j = 0; j < block.b(); ++j)
        interpolant.col(j) = interpolate_column(state.estimate, block.columns[static_cast<std::size_t>(j)]);

    SnipeState next;
    next.config = state.config;
    next.estimate = detail::truncate_or_pad(interpolant, state.config.r);
    next.blocks_processed = state.blocks_processed + 1;
    return {std::move(next), std::move(interpolant)};
}

/// One SNIPE update: interpolate the block with the previous estimate, then
/// re-truncate to rank r.
inline SnipeState snipe_step(const SnipeState& state, const MeasurementBlock& block) {
    return snipe_step_with_interpolant(state, block).first;
}

struct SnipeRunResult {
    SnipeState state;
    /// d_G against the supplied truth after every block (empty without truth).
    std::vector<double> errors;
};

/// Fold snipe_init then snipe_step over a whole stream of blocks.
inline SnipeRunResult snipe_run(const std::vector<MeasurementBlock>& blocks,
                                const SnipeConfig& cfg,
                                const SubspaceBasis* truth = nullptr) {
    if (blocks.empty()) throw EmptyStream("snipe_run: no blocks");
    SnipeRunResult result;
    result.state = snipe_init(blocks.front(), cfg);
    if (truth) result.errors.push_back(linalg::grassmann_distance(*truth, result.state.estimate));
    for (std::size_t k = 1; k < blocks.size(); ++k) {
        result.state = snipe_step(result.state, blocks[k]);
        if (truth) result.errors.push_back(linalg::grassmann_distance(*truth, result.state.estimate));
    }
    return result;
}

} // namespace snipe
