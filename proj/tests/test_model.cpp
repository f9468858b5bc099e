#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "snipe/model.hpp"

using namespace snipe;
using namespace snipe::model;

// ---------------------------------------------------------------------------
// subspace generators
// ---------------------------------------------------------------------------

TEST_CASE("generic subspace with r=n spans everything", "[model]") {
    Rng rng(1);
    const auto basis = generate_generic_subspace(4, 4, rng);
    REQUIRE(linalg::orthonormality_error(basis) < 1e-12);
    REQUIRE(linalg::coherence(basis) == Catch::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("generic subspaces are incoherent at n=1000, r=3", "[model]") {
    int incoherent = 0;
    for (int trial = 0; trial < 100; ++trial) {
        Rng rng(100 + static_cast<std::uint64_t>(trial));
        if (linalg::coherence(generate_generic_subspace(1000, 3, rng)) < 10.0) ++incoherent;
    }
    REQUIRE(incoherent >= 99);
}

TEST_CASE("subspace generation is deterministic in the seed", "[model]") {
    Rng a(77), b(77);
    const auto first = generate_generic_subspace(50, 4, a);
    const auto second = generate_generic_subspace(50, 4, b);
    REQUIRE((first.columns - second.columns).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("generator dimension checks", "[model]") {
    Rng rng(2);
    REQUIRE_THROWS_AS(generate_generic_subspace(3, 4, rng), DimensionMismatch);
    REQUIRE_THROWS_AS(generate_coherent_subspace(3, 0, rng), DimensionMismatch);
}

TEST_CASE("coherent subspaces concentrate energy in the leading rows", "[model]") {
    // With row scaling 1/i the span ends up very close to the leading
    // coordinate directions: measured mean coherence at n=300, r=10 is ~29.4,
    // just below the hard cap n/r = 30.
    double total = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        Rng rng(300 + static_cast<std::uint64_t>(trial));
        const auto basis = generate_coherent_subspace(300, 10, rng);
        const double eta = linalg::coherence(basis);
        REQUIRE(eta <= 30.0 + 1e-9);
        total += eta;
    }
    const double mean = total / 50.0;
    REQUIRE(mean > 25.0);
    REQUIRE(mean <= 30.0);
}

TEST_CASE("coherent subspace rows decay from first to last", "[model]") {
    for (int trial = 0; trial < 25; ++trial) {
        Rng rng(500 + static_cast<std::uint64_t>(trial));
        const auto basis = generate_coherent_subspace(200, 5, rng);
        const double first = basis.columns.row(0).norm();
        const double last = basis.columns.row(199).norm();
        REQUIRE(first > last);
    }
}

TEST_CASE("coherent subspace with r=n stays within the coherence cap", "[model]") {
    Rng rng(4);
    const auto basis = generate_coherent_subspace(6, 6, rng);
    REQUIRE(linalg::coherence(basis) <= 1.0 + 1e-10);
}

// ---------------------------------------------------------------------------
// entrywise sampling
// ---------------------------------------------------------------------------

TEST_CASE("sampling with p=1 observes everything", "[model]") {
    Rng rng(5);
    const Vector s = rng.gaussian_matrix(20, 1);
    const auto observed = sample_observed_vector(s, 1.0, rng);
    REQUIRE(observed.omega.size() == 20);
    REQUIRE((observed.values - s).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sampling with vanishing p misses everything", "[model]") {
    Rng rng(6);
    const Vector s = rng.gaussian_matrix(50, 1);
    const auto observed = sample_observed_vector(s, 1e-300, rng);
    REQUIRE(observed.omega.empty());
    REQUIRE(observed.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("observed index counts concentrate around n*p", "[model]") {
    const Index n = 10000;
    const double p = 0.1;
    const double bound = 3.0 * std::sqrt(n * p * (1.0 - p));
    int inside = 0;
    for (int trial = 0; trial < 100; ++trial) {
        Rng rng(700 + static_cast<std::uint64_t>(trial));
        const auto observed = sample_observed_vector(Vector::Ones(n), p, rng);
        const double count = static_cast<double>(observed.omega.size());
        if (std::abs(count - n * p) <= bound) ++inside;
    }
    REQUIRE(inside >= 99);
}

TEST_CASE("observed vectors are zero off their support", "[model]") {
    Rng rng(8);
    const Vector s = rng.gaussian_matrix(200, 1);
    const auto observed = sample_observed_vector(s, 0.3, rng);
    std::size_t cursor = 0;
    for (Index i = 0; i < 200; ++i) {
        if (cursor < observed.omega.size() && observed.omega[cursor] == i) {
            REQUIRE(observed.values(i) == s(i));
            ++cursor;
        } else {
            REQUIRE(observed.values(i) == 0.0);
        }
    }
}

// ---------------------------------------------------------------------------
// stream source
// ---------------------------------------------------------------------------

namespace {

StreamConfig small_config() {
    StreamConfig cfg;
    cfg.n = 12;
    cfg.r = 2;
    cfg.p = 0.5;
    cfg.block_sizes = {3, 4, 5};
    cfg.seed = 99;
    return cfg;
}

} // namespace

TEST_CASE("a full-observation single-block stream reproduces S Q^T exactly", "[model]") {
    StreamConfig cfg;
    cfg.n = 8;
    cfg.r = 3;
    cfg.p = 1.0;
    cfg.block_sizes = {5};
    cfg.seed = 11;
    StreamSource source(cfg);
    const auto emission = source.next();
    const Matrix dense = to_dense(emission.block);
    const Matrix expected = source.true_basis().columns * emission.truth.coefficients.transpose();
    REQUIRE((dense - expected).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(source.exhausted());
}

TEST_CASE("emitted block sizes partition the scope", "[model]") {
    StreamSource source(small_config());
    Index total = 0;
    while (!source.exhausted()) total += source.next().block.b();
    REQUIRE(total == small_config().total_vectors());
}

TEST_CASE("observations reconstruct from the stored ground truth", "[model]") {
    StreamSource source(small_config());
    while (!source.exhausted()) {
        const auto emission = source.next();
        for (Index j = 0; j < emission.block.b(); ++j) {
            const auto& column = emission.block.columns[static_cast<std::size_t>(j)];
            const Vector full =
                source.true_basis().columns * emission.truth.coefficients.row(j).transpose();
            for (Index i : column.omega)
                REQUIRE(std::abs(column.values(i) - full(i)) < 1e-14);
            std::size_t cursor = 0;
            for (Index i = 0; i < column.n; ++i) {
                if (cursor < column.omega.size() && column.omega[cursor] == i)
                    ++cursor;
                else
                    REQUIRE(column.values(i) == 0.0);
            }
        }
    }
}

TEST_CASE("identical configs give byte-identical streams", "[model]") {
    StreamSource a(small_config());
    StreamSource b(small_config());
    while (!a.exhausted()) {
        const auto left = a.next();
        const auto right = b.next();
        REQUIRE((to_dense(left.block) - to_dense(right.block)).cwiseAbs().maxCoeff() == 0.0);
        REQUIRE((left.truth.coefficients - right.truth.coefficients).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("changing p re-rolls only the masks", "[model]") {
    StreamConfig low = small_config();
    StreamConfig high = small_config();
    high.p = 0.9;
    StreamSource a(low), b(high);
    REQUIRE((a.true_basis().columns - b.true_basis().columns).cwiseAbs().maxCoeff() == 0.0);
    while (!a.exhausted()) {
        const auto left = a.next();
        const auto right = b.next();
        REQUIRE((left.truth.coefficients - right.truth.coefficients).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("whole-stream sampling rate stays within binomial bounds", "[model]") {
    StreamConfig cfg;
    cfg.n = 400;
    cfg.r = 3;
    cfg.p = 0.2;
    cfg.block_sizes = std::vector<Index>(20, 5);
    cfg.seed = 21;
    StreamSource source(cfg);
    Index observed = 0;
    while (!source.exhausted())
        for (const auto& column : source.next().block.columns)
            observed += static_cast<Index>(column.omega.size());
    const double draws = static_cast<double>(cfg.n) * static_cast<double>(cfg.total_vectors());
    const double expected = draws * cfg.p;
    const double bound = 3.0 * std::sqrt(draws * cfg.p * (1.0 - cfg.p));
    REQUIRE(std::abs(static_cast<double>(observed) - expected) <= bound);
}

TEST_CASE("stream config validation", "[model]") {
    StreamConfig cfg = small_config();
    cfg.p = 0.0;
    REQUIRE_THROWS_AS(StreamSource(cfg), ConfigInvalid);
    cfg = small_config();
    cfg.block_sizes = {3, 1}; // 1 < r
    REQUIRE_THROWS_AS(StreamSource(cfg), ConfigInvalid);
    cfg = small_config();
    cfg.block_sizes.clear();
    REQUIRE_THROWS_AS(StreamSource(cfg), ConfigInvalid);
    REQUIRE_THROWS_AS(uniform_blocks(10, 3), ConfigInvalid);
    REQUIRE(uniform_blocks(10, 5) == std::vector<Index>{5, 5});
}

// ---------------------------------------------------------------------------
// stream serialization
// ---------------------------------------------------------------------------

TEST_CASE("empty stream writes a header-only file", "[model]") {
    std::ostringstream out;
    write_stream({}, 7, out);
    REQUIRE(out.str() == "#snipe-stream v1 n=7\n");
    std::istringstream in(out.str());
    const auto [vectors, n] = read_stream(in);
    REQUIRE(vectors.empty());
    REQUIRE(n == 7);
}

TEST_CASE("single-vector serialization matches the documented format", "[model]") {
    ObservedVector vec;
    vec.n = 3;
    vec.omega = {0, 2};
    vec.values = Vector::Zero(3);
    vec.values(0) = 1.5;
    vec.values(2) = -2.0;
    std::ostringstream out;
    write_stream({vec}, 3, out);
    REQUIRE(out.str() == "#snipe-stream v1 n=3\n1:1.5,3:-2\n");

    std::istringstream in(out.str());
    const auto [vectors, n] = read_stream(in);
    REQUIRE(n == 3);
    REQUIRE(vectors.size() == 1);
    REQUIRE(vectors[0].omega == std::vector<Index>{0, 2});
    REQUIRE(vectors[0].values(0) == 1.5);
    REQUIRE(vectors[0].values(1) == 0.0);
    REQUIRE(vectors[0].values(2) == -2.0);
}

TEST_CASE("fully unobserved vectors round-trip as empty lines", "[model]") {
    ObservedVector vec;
    vec.n = 4;
    vec.values = Vector::Zero(4);
    std::ostringstream out;
    write_stream({vec, vec}, 4, out);
    std::istringstream in(out.str());
    const auto [vectors, n] = read_stream(in);
    REQUIRE(vectors.size() == 2);
    REQUIRE(vectors[0].omega.empty());
}

TEST_CASE("random streams round-trip bit-exactly", "[model]") {
    Rng rng(31);
    std::vector<ObservedVector> vectors;
    const Index n = 25;
    for (int t = 0; t < 1000; ++t) {
        const Vector s = rng.gaussian_matrix(n, 1);
        vectors.push_back(sample_observed_vector(s, 0.35, rng));
    }
    std::ostringstream out;
    write_stream(vectors, n, out);
    std::istringstream in(out.str());
    const auto [parsed, parsed_n] = read_stream(in);
    REQUIRE(parsed_n == n);
    REQUIRE(parsed.size() == vectors.size());
    for (std::size_t t = 0; t < vectors.size(); ++t) {
        REQUIRE(parsed[t].omega == vectors[t].omega);
        REQUIRE((parsed[t].values - vectors[t].values).cwiseAbs().maxCoeff() == 0.0);
    }
    // and writing the parsed stream again reproduces the bytes
    std::ostringstream again;
    write_stream(parsed, n, again);
    REQUIRE(again.str() == out.str());
}

TEST_CASE("stream parser reports the offending line", "[model]") {
    const auto parse = [](const std::string& text) {
        std::istringstream in(text);
        return read_stream(in);
    };
    REQUIRE_THROWS_AS(parse(""), ParseError);
    REQUIRE_THROWS_AS(parse("#wrong header\n"), ParseError);
    REQUIRE_THROWS_AS(parse("#snipe-stream v1 n=3\n1:0.5\nnonsense\n"), ParseError);
    REQUIRE_THROWS_AS(parse("#snipe-stream v1 n=3\n4:1.0\n"), ParseError);
    REQUIRE_THROWS_AS(parse("#snipe-stream v1 n=3\n2:1.0,1:2.0\n"), ParseError);
    REQUIRE_THROWS_AS(parse("#snipe-stream v1 n=3\n1:1.0,\n"), ParseError);

    try {
        parse("#snipe-stream v1 n=3\n1:0.5\n1:\n");
        FAIL("expected ParseError");
    } catch (const ParseError& err) {
        REQUIRE(err.line_number == 3);
        REQUIRE(std::string(err.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("file-based stream io reports unusable paths", "[model]") {
    REQUIRE_THROWS_AS(read_stream(std::string("/nonexistent/path/stream.txt")), IoError);
    REQUIRE_THROWS_AS(write_stream({}, 3, std::string("/nonexistent/path/stream.txt")), IoError);
}
