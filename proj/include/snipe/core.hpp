#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace snipe {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// ---------------------------------------------------------------------------
// Error taxonomy
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};

struct RankDeficient : Error {
    using Error::Error;
};

struct ConfigInvalid : Error {
    using Error::Error;
};

struct BlockTooSmall : Error {
    using Error::Error;
};

struct EmptyStream : Error {
    using Error::Error;
};

struct EmptyReport : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

/// Parse failure in a text input; the message carries the 1-based line number.
struct ParseError : Error {
    ParseError(long line, const std::string& reason)
        : Error("line " + std::to_string(line) + ": " + reason), line_number(line) {}
    long line_number;
};

// ---------------------------------------------------------------------------
// Deterministic random number generation
// ---------------------------------------------------------------------------

namespace detail {

/// SplitMix64 mixing step; used to derive well-separated seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

} // namespace detail

/**
 * @brief Seedable, splittable 64-bit generator with platform-independent output.
 *
 * The engine is std::mt19937_64 (bit-exact by the standard); uniform and normal
 * variates are produced from raw engine output rather than the standard
 * distributions, so identical seeds give identical streams on every platform.
 * split(tag) derives an independent sub-stream via SplitMix64, letting callers
 * keep e.g. subspace, coefficient and mask randomness decoupled.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed)
        : root_(seed), engine_(detail::splitmix64(seed)) {}

    /// Independent sub-stream identified by a small integer tag.
    Rng split(std::uint64_t stream_tag) const {
        return Rng(detail::splitmix64(root_ ^ (0x9E3779B97F4A7C15ULL * (stream_tag + 1))));
    }

    std::uint64_t seed() const { return root_; }

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Standard normal variate (Box-Muller, spare cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double u2 = uniform();
        constexpr double two_pi = 6.28318530717958647692528676655900577;
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = two_pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Matrix with i.i.d. standard normal entries, filled column-major.
    Matrix gaussian_matrix(Index rows, Index cols) {
        Matrix out(rows, cols);
        for (Index j = 0; j < cols; ++j)
            for (Index i = 0; i < rows; ++i) out(i, j) = normal();
        return out;
    }

private:
    std::uint64_t root_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace snipe
