#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "snipe/baselines.hpp"
#include "snipe/core.hpp"
#include "snipe/estimator.hpp"
#include "snipe/linalg.hpp"
#include "snipe/model.hpp"

namespace snipe::harness {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Experiment specification
// ---------------------------------------------------------------------------

/// One point of a sweep: the axis value (as label) plus the fully resolved
/// stream configuration at that point.
struct SweepPoint {
    std::string axis_value;
    model::StreamConfig stream;
};

struct ExperimentSpec {
    std::string name;
    std::string axis_name = "none"; ///< swept StreamConfig field, or "none"
    std::vector<SweepPoint> points; ///< at least one
    std::vector<std::string> estimators{"snipe"};
    Index trials = 50;
    std::string outputs = ".";
    double grouse_step_scale = 100.0;
};

namespace detail {

using model::StreamConfig;

inline std::string format_double(double x) { return model::detail::format_double(x); }

inline void reject_unknown_keys(const json& object, std::initializer_list<const char*> allowed,
                                const std::string& where) {
    for (const auto& item : object.items()) {
        bool known = false;
        for (const char* key : allowed)
            if (item.key() == key) known = true;
        if (!known)
            throw ConfigInvalid("unknown key \"" + item.key() + "\" in " + where);
    }
}

/// StreamConfig fields before block resolution; sweep points override these.
struct StreamDraft {
    Index n = 0, r = 0;
    double p = 1.0;
    std::optional<Index> b;
    std::optional<Index> total;
    std::optional<std::vector<Index>> block_sizes;
    std::uint64_t seed = 0;
    model::SubspaceKind subspace_kind = model::SubspaceKind::generic;
    model::CoefficientKind coefficient_kind = model::CoefficientKind::standard_gaussian;

    StreamConfig resolve() const {
        StreamConfig cfg;
        cfg.n = n;
        cfg.r = r;
        cfg.p = p;
        cfg.seed = seed;
        cfg.subspace_kind = subspace_kind;
        cfg.coefficient_kind = coefficient_kind;
        if (block_sizes) {
            cfg.block_sizes = *block_sizes;
        } else if (b && total) {
            cfg.block_sizes = model::uniform_blocks(*total, *b);
        } else {
            throw ConfigInvalid("stream: give either block_sizes or both b and T");
        }
        cfg.validate();
        return cfg;
    }
};

inline model::SubspaceKind parse_subspace_kind(const std::string& text) {
    if (text == "generic") return model::SubspaceKind::generic;
    if (text == "coherent") return model::SubspaceKind::coherent;
    throw ConfigInvalid("subspace_kind must be \"generic\" or \"coherent\"");
}

inline void apply_stream_keys(StreamDraft& draft, const json& object, const std::string& where) {
    reject_unknown_keys(object,
                        {"n", "r", "p", "b", "T", "block_sizes", "seed", "subspace_kind",
                         "coefficient_kind"},
                        where);
    if (object.contains("n")) draft.n = object.at("n").get<Index>();
    if (object.contains("r")) draft.r = object.at("r").get<Index>();
    if (object.contains("p")) draft.p = object.at("p").get<double>();
    if (object.contains("b")) draft.b = object.at("b").get<Index>();
    if (object.contains("T")) draft.total = object.at("T").get<Index>();
    if (object.contains("block_sizes"))
        draft.block_sizes = object.at("block_sizes").get<std::vector<Index>>();
    if (object.contains("seed")) draft.seed = object.at("seed").get<std::uint64_t>();
    if (object.contains("subspace_kind"))
        draft.subspace_kind = parse_subspace_kind(object.at("subspace_kind").get<std::string>());
    if (object.contains("coefficient_kind")) {
        if (object.at("coefficient_kind").get<std::string>() != "standard_gaussian")
            throw ConfigInvalid("coefficient_kind must be \"standard_gaussian\"");
    }
}

inline std::string axis_value_label(const json& value) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_number_integer()) return std::to_string(value.get<long long>());
    if (value.is_number_float()) return format_double(value.get<double>());
    throw ConfigInvalid("sweep values must be numbers or strings");
}

} // namespace detail

/// Parse and fully validate an experiment document; unknown keys are an error.
inline ExperimentSpec parse_experiment_spec(const json& doc) {
    detail::reject_unknown_keys(
        doc, {"name", "stream", "sweep", "estimators", "trials", "outputs", "grouse_step_scale"},
        "experiment");
    ExperimentSpec spec;
    if (!doc.contains("name") || !doc.at("name").is_string())
        throw ConfigInvalid("experiment: missing string field \"name\"");
    spec.name = doc.at("name").get<std::string>();
    if (!doc.contains("stream") || !doc.at("stream").is_object())
        throw ConfigInvalid("experiment: missing object field \"stream\"");

    detail::StreamDraft base;
    detail::apply_stream_keys(base, doc.at("stream"), "stream");

    if (doc.contains("estimators")) {
        spec.estimators = doc.at("estimators").get<std::vector<std::string>>();
        if (spec.estimators.empty()) throw ConfigInvalid("experiment: estimators may not be empty");
        for (const auto& estimator : spec.estimators)
            if (estimator != "snipe" && estimator != "grouse" && estimator != "zero_fill")
                throw ConfigInvalid("unknown estimator \"" + estimator + "\"");
    }
    if (doc.contains("trials")) spec.trials = doc.at("trials").get<Index>();
    if (spec.trials < 1) throw ConfigInvalid("experiment: trials must be >= 1");
    if (doc.contains("outputs")) spec.outputs = doc.at("outputs").get<std::string>();
    if (doc.contains("grouse_step_scale"))
        spec.grouse_step_scale = doc.at("grouse_step_scale").get<double>();

    if (doc.contains("sweep")) {
        const json& sweep = doc.at("sweep");
        detail::reject_unknown_keys(sweep, {"axis", "values", "points"}, "sweep");
        if (!sweep.contains("axis") || !sweep.at("axis").is_string())
            throw ConfigInvalid("sweep: missing string field \"axis\"");
        spec.axis_name = sweep.at("axis").get<std::string>();
        const bool axis_known = spec.axis_name == "p" || spec.axis_name == "r" ||
                                spec.axis_name == "n" || spec.axis_name == "b" ||
                                spec.axis_name == "T" || spec.axis_name == "subspace_kind";
        if (!axis_known) throw ConfigInvalid("sweep: unsupported axis \"" + spec.axis_name + "\"");
        if (sweep.contains("values") == sweep.contains("points"))
            throw ConfigInvalid("sweep: give exactly one of \"values\" or \"points\"");

        std::vector<json> point_objects;
        if (sweep.contains("values")) {
            for (const json& value : sweep.at("values"))
                point_objects.push_back(json{{spec.axis_name, value}});
        } else {
            for (const json& point : sweep.at("points")) {
                if (!point.is_object() || !point.contains(spec.axis_name))
                    throw ConfigInvalid("sweep: every point must set the axis field");
                point_objects.push_back(point);
            }
        }
        for (const json& object : point_objects) {
            detail::StreamDraft draft = base;
            detail::apply_stream_keys(draft, object, "sweep point");
            spec.points.push_back(
                SweepPoint{detail::axis_value_label(object.at(spec.axis_name)), draft.resolve()});
        }
    } else {
        spec.points.push_back(SweepPoint{"0", base.resolve()});
    }
    if (spec.points.empty()) throw ConfigInvalid("sweep: needs at least one point");
    return spec;
}

inline ExperimentSpec load_experiment_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& err) {
        throw ConfigInvalid(std::string("config is not valid JSON: ") + err.what());
    }
    return parse_experiment_spec(doc);
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct ReportRow {
    std::string estimator;
    std::string axis_name;
    std::string axis_value;
    Index trial;
    Index block_k;
    Index t;
    double error;
};

/// Aggregate over trials at one (estimator, axis value, block); the
/// statistic name lands in the CSV's trial column.
struct SummaryRow {
    std::string estimator;
    std::string axis_name;
    std::string axis_value;
    std::string statistic;
    Index block_k;
    Index t;
    double value;
};

struct ExperimentReport {
    std::vector<ReportRow> rows;
    std::vector<SummaryRow> summaries;

    /// Mean of the requested statistic at the last block of one series.
    double final_summary(const std::string& estimator, const std::string& axis_value,
                         const std::string& statistic) const {
        const SummaryRow* best = nullptr;
        for (const auto& row : summaries)
            if (row.estimator == estimator && row.axis_value == axis_value &&
                row.statistic == statistic && (!best || row.block_k > best->block_k))
                best = &row;
        if (!best) throw EmptyReport("no summary for estimator " + estimator);
        return best->value;
    }
};

namespace detail {

struct TraceEntry {
    Index block_k;
    Index t;
    double error;
};

inline std::vector<TraceEntry> run_snipe_trace(const std::vector<model::MeasurementBlock>& blocks,
                                               const linalg::SubspaceBasis& truth, Index r) {
    std::vector<TraceEntry> trace;
    trace.reserve(blocks.size());
    SnipeConfig cfg;
    cfg.r = r;
    SnipeState state = snipe_init(blocks.front(), cfg);
    Index t = blocks.front().b();
    trace.push_back({1, t, linalg::grassmann_distance(truth, state.estimate)});
    for (std::size_t k = 1; k < blocks.size(); ++k) {
        state = snipe_step(state, blocks[k]);
        t += blocks[k].b();
        trace.push_back({static_cast<Index>(k) + 1, t,
                         linalg::grassmann_distance(truth, state.estimate)});
    }
    return trace;
}

inline std::vector<TraceEntry> run_grouse_trace(const std::vector<model::MeasurementBlock>& blocks,
                                                const linalg::SubspaceBasis& truth, Index r,
                                                std::uint64_t seed, double step_scale) {
    Rng init_rng = Rng(seed).split(3);
    baselines::GrouseState state =
        baselines::make_grouse(model::generate_generic_subspace(blocks.front().n, r, init_rng),
                               step_scale);
    std::vector<TraceEntry> trace;
    trace.reserve(blocks.size());
    Index t = 0;
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        for (const auto& column : blocks[k].columns) state = baselines::grouse_step(state, column);
        t += blocks[k].b();
        trace.push_back({static_cast<Index>(k) + 1, t,
                         linalg::grassmann_distance(truth, state.estimate)});
    }
    return trace;
}

/// Zero-fill trace: spectral estimate of all data seen so far, via the
/// accumulated n x n Gram matrix.
inline std::vector<TraceEntry> run_zero_fill_trace(
    const std::vector<model::MeasurementBlock>& blocks, const linalg::SubspaceBasis& truth,
    Index r) {
    const Index n = blocks.front().n;
    Matrix gram = Matrix::Zero(n, n);
    std::vector<TraceEntry> trace;
    trace.reserve(blocks.size());
    Index t = 0;
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        const Matrix dense = model::to_dense(blocks[k]);
        gram.noalias() += dense * dense.transpose();
        t += blocks[k].b();
        Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
        Matrix basis(n, r);
        for (Index j = 0; j < r; ++j) basis.col(j) = eig.eigenvectors().col(n - 1 - j);
        trace.push_back({static_cast<Index>(k) + 1, t,
                         linalg::grassmann_distance(truth, linalg::SubspaceBasis{basis})});
    }
    return trace;
}

inline Index resolve_worker_count(Index task_count) {
    long workers = 0;
    if (const char* env = std::getenv("SNIPE_WORKERS")) workers = std::strtol(env, nullptr, 10);
    if (workers < 1) workers = static_cast<long>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    return std::min<Index>(static_cast<Index>(workers), std::max<Index>(task_count, 1));
}

inline double mean_of(const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
}

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return (v.size() % 2 == 1) ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

inline double sample_std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mean = mean_of(v);
    double sum = 0.0;
    for (double x : v) sum += (x - mean) * (x - mean);
    return std::sqrt(sum / static_cast<double>(v.size() - 1));
}

} // namespace detail

/**
 * @brief Run every (estimator, sweep point, trial) combination of a spec.
 *
 * Trial i streams with seed base_seed + i; all estimators of a trial consume
 * the same materialized blocks. Trials run in parallel (SNIPE_WORKERS
 * overrides the worker count) and the report ordering is independent of
 * scheduling.
 */
inline ExperimentReport run_experiment(const ExperimentSpec& spec) {
    const Index point_count = static_cast<Index>(spec.points.size());
    const Index task_count = point_count * spec.trials;

    // one slot per (point, trial); inner vectors parallel to spec.estimators
    std::vector<std::vector<std::vector<detail::TraceEntry>>> slots(
        static_cast<std::size_t>(task_count));

    std::atomic<Index> next_task{0};
    auto worker = [&]() {
        for (;;) {
            const Index task = next_task.fetch_add(1);
            if (task >= task_count) return;
            const Index point_index = task / spec.trials;
            const Index trial = task % spec.trials;
            const SweepPoint& point = spec.points[static_cast<std::size_t>(point_index)];

            model::StreamConfig cfg = point.stream;
            cfg.seed = point.stream.seed + static_cast<std::uint64_t>(trial);
            model::StreamSource source(cfg);
            const linalg::SubspaceBasis truth = source.true_basis();
            std::vector<model::MeasurementBlock> blocks;
            blocks.reserve(static_cast<std::size_t>(source.block_count()));
            while (!source.exhausted()) blocks.push_back(source.next().block);

            std::vector<std::vector<detail::TraceEntry>> traces;
            traces.reserve(spec.estimators.size());
            for (const auto& estimator : spec.estimators) {
                if (estimator == "snipe") {
                    traces.push_back(detail::run_snipe_trace(blocks, truth, cfg.r));
                } else if (estimator == "grouse") {
                    traces.push_back(detail::run_grouse_trace(blocks, truth, cfg.r, cfg.seed,
                                                              spec.grouse_step_scale));
                } else {
                    traces.push_back(detail::run_zero_fill_trace(blocks, truth, cfg.r));
                }
            }
            slots[static_cast<std::size_t>(task)] = std::move(traces);
        }
    };

    const Index workers = detail::resolve_worker_count(task_count);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers - 1));
    for (Index w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& thread : pool) thread.join();

    // assemble rows in (estimator, axis, trial, k) order; estimators sort
    // lexicographically, sweep points keep their configured order
    std::vector<std::size_t> estimator_order(spec.estimators.size());
    for (std::size_t i = 0; i < estimator_order.size(); ++i) estimator_order[i] = i;
    std::sort(estimator_order.begin(), estimator_order.end(), [&](std::size_t a, std::size_t b) {
        return spec.estimators[a] < spec.estimators[b];
    });

    ExperimentReport report;
    for (const std::size_t e : estimator_order) {
        for (Index point_index = 0; point_index < point_count; ++point_index) {
            const SweepPoint& point = spec.points[static_cast<std::size_t>(point_index)];
            for (Index trial = 0; trial < spec.trials; ++trial) {
                const auto& trace =
                    slots[static_cast<std::size_t>(point_index * spec.trials + trial)][e];
                for (const auto& entry : trace)
                    report.rows.push_back(ReportRow{spec.estimators[e], spec.axis_name,
                                                    point.axis_value, trial, entry.block_k,
                                                    entry.t, entry.error});
            }
            // summaries over trials, per block
            const auto& first_trace = slots[static_cast<std::size_t>(point_index * spec.trials)][e];
            for (std::size_t i = 0; i < first_trace.size(); ++i) {
                std::vector<double> errors;
                errors.reserve(static_cast<std::size_t>(spec.trials));
                for (Index trial = 0; trial < spec.trials; ++trial)
                    errors.push_back(
                        slots[static_cast<std::size_t>(point_index * spec.trials + trial)][e][i]
                            .error);
                const Index block_k = first_trace[i].block_k;
                const Index t = first_trace[i].t;
                report.summaries.push_back(SummaryRow{spec.estimators[e], spec.axis_name,
                                                      point.axis_value, "mean", block_k, t,
                                                      detail::mean_of(errors)});
                report.summaries.push_back(SummaryRow{spec.estimators[e], spec.axis_name,
                                                      point.axis_value, "median", block_k, t,
                                                      detail::median_of(errors)});
                report.summaries.push_back(SummaryRow{spec.estimators[e], spec.axis_name,
                                                      point.axis_value, "std", block_k, t,
                                                      detail::sample_std_of(errors)});
            }
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline void emit_csv(const ExperimentReport& report, std::ostream& out) {
    out << "estimator,axis_name,axis_value,trial,block_k,t,error\n";
    for (const auto& row : report.rows)
        out << row.estimator << "," << row.axis_name << "," << row.axis_value << "," << row.trial
            << "," << row.block_k << "," << row.t << "," << detail::format_double(row.error)
            << "\n";
    for (const auto& row : report.summaries)
        out << row.estimator << "," << row.axis_name << "," << row.axis_value << ","
            << row.statistic << "," << row.block_k << "," << row.t << ","
            << detail::format_double(row.value) << "\n";
}

inline void emit_csv(const ExperimentReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary); // binary: keep LF endings everywhere
    if (!out) throw IoError("emit_csv: cannot open " + path);
    emit_csv(report, out);
    if (!out) throw IoError("emit_csv: write failed for " + path);
}

// ---------------------------------------------------------------------------
// SVG plot
// ---------------------------------------------------------------------------

namespace detail {

constexpr double plot_floor = 1e-16; ///< log-axis clamp for exact zeros

inline const char* series_color(std::size_t index) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    return palette[index % (sizeof(palette) / sizeof(palette[0]))];
}

} // namespace detail

/**
 * @brief Self-contained SVG line chart of the mean error traces.
 *
 * One polyline per (estimator, axis value) series; y is log-scale error
 * clamped at 1e-16, x is the vector count t.
 */
inline void emit_plot(const ExperimentReport& report, std::ostream& out) {
    // series keyed by (estimator, axis_value), built from the mean summaries
    std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> series;
    for (const auto& row : report.summaries) {
        if (row.statistic != "mean") continue;
        const std::string key = row.estimator + (row.axis_value == "0" && row.axis_name == "none"
                                                     ? ""
                                                     : " " + row.axis_name + "=" + row.axis_value);
        auto it = std::find_if(series.begin(), series.end(),
                               [&](const auto& s) { return s.first == key; });
        if (it == series.end()) {
            series.push_back({key, {}});
            it = series.end() - 1;
        }
        it->second.push_back({static_cast<double>(row.t),
                              std::max(row.value, detail::plot_floor)});
    }
    if (series.empty()) throw EmptyReport("emit_plot: report has no data");

    double x_min = series[0].second[0].first, x_max = x_min;
    double y_min = series[0].second[0].second, y_max = y_min;
    for (const auto& s : series)
        for (const auto& [x, y] : s.second) {
            x_min = std::min(x_min, x);
            x_max = std::max(x_max, x);
            y_min = std::min(y_min, y);
            y_max = std::max(y_max, y);
        }
    if (x_max <= x_min) x_max = x_min + 1.0;
    double log_lo = std::floor(std::log10(y_min));
    double log_hi = std::ceil(std::log10(y_max));
    if (log_hi <= log_lo) log_hi = log_lo + 1.0;

    const double width = 800.0, height = 500.0;
    const double left = 70.0, right = 170.0, top = 30.0, bottom = 50.0;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    auto map_x = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
    auto map_y = [&](double y) {
        return top + (log_hi - std::log10(y)) / (log_hi - log_lo) * plot_h;
    };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "  <rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    out << "  <rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\""
        << plot_h << "\" fill=\"none\" stroke=\"#333\"/>\n";

    for (int exponent = static_cast<int>(log_lo); exponent <= static_cast<int>(log_hi);
         ++exponent) {
        const double y = map_y(std::pow(10.0, exponent));
        out << "  <line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << (left + plot_w)
            << "\" y2=\"" << y << "\" stroke=\"#ddd\"/>\n";
        out << "  <text x=\"" << (left - 8) << "\" y=\"" << (y + 4)
            << "\" text-anchor=\"end\" font-size=\"11\">1e" << exponent << "</text>\n";
    }
    for (int tick = 0; tick <= 4; ++tick) {
        const double x_value = x_min + (x_max - x_min) * tick / 4.0;
        const double x = map_x(x_value);
        out << "  <text x=\"" << x << "\" y=\"" << (top + plot_h + 18)
            << "\" text-anchor=\"middle\" font-size=\"11\">" << static_cast<long>(x_value)
            << "</text>\n";
    }
    out << "  <text x=\"" << (left + plot_w / 2) << "\" y=\"" << (height - 10)
        << "\" text-anchor=\"middle\" font-size=\"12\">t (vectors)</text>\n";
    out << "  <text x=\"18\" y=\"" << (top + plot_h / 2)
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 18 "
        << (top + plot_h / 2) << ")\">mean error</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        out << "  <polyline fill=\"none\" stroke=\"" << detail::series_color(s)
            << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : series[s].second) out << map_x(x) << "," << map_y(y) << " ";
        out << "\"/>\n";
        const double legend_y = top + 16.0 * static_cast<double>(s + 1);
        out << "  <line x1=\"" << (left + plot_w + 10) << "\" y1=\"" << legend_y << "\" x2=\""
            << (left + plot_w + 30) << "\" y2=\"" << legend_y << "\" stroke=\""
            << detail::series_color(s) << "\" stroke-width=\"1.5\"/>\n";
        out << "  <text x=\"" << (left + plot_w + 35) << "\" y=\"" << (legend_y + 4)
            << "\" font-size=\"11\">" << series[s].first << "</text>\n";
    }
    out << "</svg>\n";
}

inline void emit_plot(const ExperimentReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("emit_plot: cannot open " + path);
    emit_plot(report, out);
    if (!out) throw IoError("emit_plot: write failed for " + path);
}

} // namespace snipe::harness
