#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "snipe/core.hpp"
#include "snipe/linalg.hpp"

namespace snipe::model {

using linalg::SubspaceBasis;

/**
 * @brief One incomplete measurement: a length-n vector supported on omega.
 *
 * Entries off the support are structural zeros, never NaN; omega is kept
 * sorted strictly increasing (0-based indices).
 */
struct ObservedVector {
    Index n = 0;
    std::vector<Index> omega;
    Vector values;
};

/// b observed vectors sharing the same ambient dimension, column order = arrival order.
struct MeasurementBlock {
    Index n = 0;
    std::vector<ObservedVector> columns;

    Index b() const { return static_cast<Index>(columns.size()); }
};

/// Evaluation-only view of what generated a block: the true basis and the
/// b x r coefficient matrix Q_k (row t = q_t^T).
struct GroundTruthBlock {
    Matrix coefficients;
};

enum class SubspaceKind { generic, coherent };
enum class CoefficientKind { standard_gaussian };

/**
 * @brief Full description of a synthetic observation stream.
 *
 * Sub-streams for the subspace, the coefficients and the masks are derived
 * independently from `seed`, so changing p re-rolls only the masks.
 */
struct StreamConfig {
    Index n = 0;
    Index r = 0;
    double p = 1.0;
    std::vector<Index> block_sizes;
    std::uint64_t seed = 0;
    SubspaceKind subspace_kind = SubspaceKind::generic;
    CoefficientKind coefficient_kind = CoefficientKind::standard_gaussian;

    Index total_vectors() const {
        return std::accumulate(block_sizes.begin(), block_sizes.end(), Index{0});
    }

    void validate() const {
        if (n < 1 || r < 1 || r > n)
            throw ConfigInvalid("stream config: need 1 <= r <= n");
        if (!(p > 0.0) || p > 1.0)
            throw ConfigInvalid("stream config: need 0 < p <= 1");
        if (block_sizes.empty())
            throw ConfigInvalid("stream config: need at least one block");
        for (Index b : block_sizes)
            if (b < r) throw ConfigInvalid("stream config: every block size must be >= r");
    }
};

/// Uniform-block shorthand: K = T / b blocks of size b.
inline std::vector<Index> uniform_blocks(Index total, Index block) {
    if (block < 1 || total < 1 || total % block != 0)
        throw ConfigInvalid("uniform blocks: T must be a positive multiple of b");
    return std::vector<Index>(static_cast<std::size_t>(total / block), block);
}

/// Span of an n x r matrix with i.i.d. standard normal entries.
inline SubspaceBasis generate_generic_subspace(Index n, Index r, Rng& rng) {
    if (r < 1 || r > n)
        throw DimensionMismatch("generate_generic_subspace: need 1 <= r <= n");
    return linalg::orthonormalize(rng.gaussian_matrix(n, r));
}

/**
 * @brief Spiky subspace: rows of a generic basis rescaled by 1/i.
 *
 * Row i of the generic orthonormal basis is scaled by 1/i (1-based), which
 * concentrates energy in the leading coordinates; the result is
 * re-orthonormalized (coherence only depends on the span, so this is safe).
 */
inline SubspaceBasis generate_coherent_subspace(Index n, Index r, Rng& rng) {
    if (r < 1 || r > n)
        throw DimensionMismatch("generate_coherent_subspace: need 1 <= r <= n");
    Matrix scaled = generate_generic_subspace(n, r, rng).columns;
    for (Index i = 0; i < n; ++i) scaled.row(i) /= static_cast<double>(i + 1);
    return linalg::orthonormalize(scaled);
}

/// Reveal each entry of s independently with probability p.
inline ObservedVector sample_observed_vector(const Vector& s, double p, Rng& rng) {
    if (!(p > 0.0) || p > 1.0)
        throw ConfigInvalid("sample_observed_vector: need 0 < p <= 1");
    ObservedVector out;
    out.n = s.size();
    out.values = Vector::Zero(s.size());
    for (Index i = 0; i < s.size(); ++i) {
        if (rng.bernoulli(p)) {
            out.omega.push_back(i);
            out.values(i) = s(i);
        }
    }
    return out;
}

/**
 * @brief Sequential source of measurement blocks plus their ground truth.
 *
 * Estimators must only ever see the MeasurementBlock half of each emission;
 * the basis and coefficient blocks exist for evaluation.
 */
class StreamSource {
public:
    struct Emission {
        MeasurementBlock block;
        GroundTruthBlock truth;
    };

    explicit StreamSource(StreamConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        Rng root(cfg_.seed);
        Rng subspace_rng = root.split(0);
        coefficient_rng_ = root.split(1);
        mask_rng_ = root.split(2);
        basis_ = (cfg_.subspace_kind == SubspaceKind::generic)
                     ? generate_generic_subspace(cfg_.n, cfg_.r, subspace_rng)
                     : generate_coherent_subspace(cfg_.n, cfg_.r, subspace_rng);
    }

    const StreamConfig& config() const { return cfg_; }
    const SubspaceBasis& true_basis() const { return basis_; }
    bool exhausted() const { return next_block_ >= block_count(); }
    Index block_count() const { return static_cast<Index>(cfg_.block_sizes.size()); }

    Emission next() {
        if (exhausted()) throw EmptyStream("stream source: no blocks left");
        const Index b = cfg_.block_sizes[static_cast<std::size_t>(next_block_)];
        Emission out;
        out.block.n = cfg_.n;
        out.block.columns.reserve(static_cast<std::size_t>(b));
        out.truth.coefficients.resize(b, cfg_.r);
        for (Index t = 0; t < b; ++t) {
            Vector q(cfg_.r);
            for (Index i = 0; i < cfg_.r; ++i) q(i) = coefficient_rng_.normal();
            out.truth.coefficients.row(t) = q.transpose();
            const Vector s = basis_.columns * q;
            out.block.columns.push_back(sample_observed_vector(s, cfg_.p, mask_rng_));
        }
        ++next_block_;
        return out;
    }

private:
    Rng coefficient_rng_{0};
    Rng mask_rng_{0};
    StreamConfig cfg_;
    SubspaceBasis basis_;
    Index next_block_ = 0;
};

/// Materialize the whole stream at once (desk-scale convenience).
inline std::pair<std::vector<MeasurementBlock>, std::vector<GroundTruthBlock>>
materialize_stream(const StreamConfig& cfg) {
    StreamSource source(cfg);
    std::vector<MeasurementBlock> blocks;
    std::vector<GroundTruthBlock> truths;
    while (!source.exhausted()) {
        auto emission = source.next();
        blocks.push_back(std::move(emission.block));
        truths.push_back(std::move(emission.truth));
    }
    return {std::move(blocks), std::move(truths)};
}

/// Dense zero-filled n x b matrix of a block.
inline Matrix to_dense(const MeasurementBlock& block) {
    Matrix out(block.n, block.b());
    for (Index j = 0; j < block.b(); ++j) out.col(j) = block.columns[static_cast<std::size_t>(j)].values;
    return out;
}

// ---------------------------------------------------------------------------
// Stream file format
//
//   #snipe-stream v1 n=<n>
//   <index>:<value>,<index>:<value>,...      one line per vector, 1-based
//                                            ascending indices; an empty line
//                                            is a fully unobserved vector
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

} // namespace detail

inline void write_stream(const std::vector<ObservedVector>& vectors, Index n, std::ostream& out) {
    out << "#snipe-stream v1 n=" << n << "\n";
    for (const auto& vec : vectors) {
        bool first = true;
        for (std::size_t j = 0; j < vec.omega.size(); ++j) {
            if (!first) out << ",";
            out << (vec.omega[j] + 1) << ":" << detail::format_double(vec.values(vec.omega[j]));
            first = false;
        }
        out << "\n";
    }
}

inline void write_stream(const std::vector<ObservedVector>& vectors, Index n, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_stream: cannot open " + path);
    write_stream(vectors, n, out);
    if (!out) throw IoError("write_stream: write failed for " + path);
}

inline std::pair<std::vector<ObservedVector>, Index> read_stream(std::istream& in) {
    std::string line;
    long line_number = 1;
    if (!std::getline(in, line)) throw ParseError(1, "missing header");
    long raw_n = 0;
    if (std::sscanf(line.c_str(), "#snipe-stream v1 n=%ld", &raw_n) != 1 || raw_n < 1)
        throw ParseError(1, "bad header, expected '#snipe-stream v1 n=<n>'");
    const Index n = static_cast<Index>(raw_n);

    std::vector<ObservedVector> vectors;
    while (std::getline(in, line)) {
        ++line_number;
        ObservedVector vec;
        vec.n = n;
        vec.values = Vector::Zero(n);
        const char* cursor = line.c_str();
        Index previous_index = 0;
        while (*cursor != '\0') {
            char* after = nullptr;
            const long raw_index = std::strtol(cursor, &after, 10);
            if (after == cursor || *after != ':')
                throw ParseError(line_number, "expected '<index>:<value>'");
            if (raw_index < 1 || raw_index > n)
                throw ParseError(line_number, "index out of range [1, n]");
            if (raw_index <= previous_index)
                throw ParseError(line_number, "indices must be strictly increasing");
            cursor = after + 1;
            const double value = std::strtod(cursor, &after);
            if (after == cursor)
                throw ParseError(line_number, "missing value after ':'");
            cursor = after;
            if (*cursor == ',') {
                ++cursor;
                if (*cursor == '\0') throw ParseError(line_number, "trailing comma");
            } else if (*cursor != '\0') {
                throw ParseError(line_number, "unexpected character in entry list");
            }
            vec.omega.push_back(raw_index - 1);
            vec.values(raw_index - 1) = value;
            previous_index = raw_index;
        }
        vectors.push_back(std::move(vec));
    }
    return {std::move(vectors), n};
}

inline std::pair<std::vector<ObservedVector>, Index> read_stream(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("read_stream: cannot open " + path);
    return read_stream(in);
}

} // namespace snipe::model
