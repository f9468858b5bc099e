// Command-line front end: simulate | sweep | compare | oracle-check.
// Exit codes: 0 success, 1 configuration error, 2 runtime error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "snipe/snipe.hpp"

namespace {

using namespace snipe;

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<Index> trials;
};

harness::ExperimentSpec load_spec(const CommonOptions& options) {
    harness::ExperimentSpec spec = harness::load_experiment_spec(options.config_path);
    if (options.seed) {
        for (auto& point : spec.points) point.stream.seed = *options.seed;
    }
    if (options.trials) {
        if (*options.trials < 1) throw ConfigInvalid("--trials must be >= 1");
        spec.trials = *options.trials;
    }
    if (options.out_dir) spec.outputs = *options.out_dir;
    return spec;
}

void write_outputs(const harness::ExperimentSpec& spec, const harness::ExperimentReport& report) {
    std::filesystem::create_directories(spec.outputs);
    const std::string base = spec.outputs + "/" + spec.name;
    harness::emit_csv(report, base + ".csv");
    harness::emit_plot(report, base + ".svg");
    std::cout << "wrote " << base << ".csv and " << base << ".svg\n";
}

int run_simulate(harness::ExperimentSpec spec) {
    spec.estimators = {"snipe"};
    const auto report = harness::run_experiment(spec);
    const double final_error = report.final_summary("snipe", spec.points[0].axis_value, "mean");
    std::printf("final_dG=%.17g\n", final_error);
    write_outputs(spec, report);
    return 0;
}

int run_sweep(const harness::ExperimentSpec& spec) {
    const auto report = harness::run_experiment(spec);
    for (const auto& point : spec.points)
        for (const auto& estimator : spec.estimators)
            std::printf("%s %s=%s final_mean_dG=%.17g\n", estimator.c_str(),
                        spec.axis_name.c_str(), point.axis_value.c_str(),
                        report.final_summary(estimator, point.axis_value, "mean"));
    write_outputs(spec, report);
    return 0;
}

int run_compare(harness::ExperimentSpec spec) {
    if (spec.estimators.size() < 2) spec.estimators = {"snipe", "grouse", "zero_fill"};
    const auto report = harness::run_experiment(spec);
    for (const auto& estimator : spec.estimators)
        for (const auto& point : spec.points)
            std::printf("%s %s=%s final_mean_dG=%.17g\n", estimator.c_str(),
                        spec.axis_name.c_str(), point.axis_value.c_str(),
                        report.final_summary(estimator, point.axis_value, "mean"));
    write_outputs(spec, report);
    return 0;
}

int run_oracle_check(Index trials, std::uint64_t seed) {
    Rng rng(seed);
    double max_relative = 0.0;
    double max_feasibility = 0.0;
    Index tested = 0;
    while (tested < trials) {
        const Index n = 6 + static_cast<Index>(rng.uniform() * 15);
        const Index r = 1 + static_cast<Index>(rng.uniform() * 5);
        if (r > n) continue;
        const auto basis = model::generate_generic_subspace(n, r, rng);
        const auto y = model::sample_observed_vector(rng.gaussian_matrix(n, 1),
                                                     0.3 + 0.6 * rng.uniform(), rng);
        if (static_cast<Index>(y.omega.size()) < r) continue;
        const Vector closed_form = interpolate_column(basis, y);
        const Vector reference = baselines::oracle_least_change(basis, y);
        max_relative = std::max(
            max_relative, (closed_form - reference).norm() / std::max(reference.norm(), 1e-12));
        for (Index i : y.omega) {
            max_feasibility = std::max(max_feasibility, std::abs(closed_form(i) - y.values(i)));
            max_feasibility = std::max(max_feasibility, std::abs(reference(i) - y.values(i)));
        }
        ++tested;
    }
    std::printf("instances=%td\n", static_cast<std::ptrdiff_t>(trials));
    std::printf("max_rel_err=%.17g\n", max_relative);
    std::printf("max_feasibility_residual=%.17g\n", max_feasibility);
    if (max_relative >= 1e-8 || max_feasibility >= 1e-14) {
        std::fprintf(stderr, "oracle check failed tolerance\n");
        return 2;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SNIPE: streaming subspace estimation from incomplete data"};
    app.require_subcommand(1);

    CommonOptions options;
    Index oracle_trials = 500;
    std::uint64_t oracle_seed = 1;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", options.config_path, "experiment JSON file")->required();
        cmd->add_option("--seed", options.seed, "override the stream base seed");
        cmd->add_option("--out", options.out_dir, "output directory");
        cmd->add_option("--trials", options.trials, "override the trial count");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "run SNIPE on one configuration");
    add_common(simulate);
    CLI::App* sweep = app.add_subcommand("sweep", "run a one-axis sweep experiment");
    add_common(sweep);
    CLI::App* compare = app.add_subcommand("compare", "run snipe, grouse and zero_fill together");
    add_common(compare);
    CLI::App* oracle = app.add_subcommand("oracle-check",
                                          "verify the interpolation against the reference solver");
    oracle->add_option("--trials", oracle_trials, "number of random instances");
    oracle->add_option("--seed", oracle_seed, "base seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err) == 0 ? 0 : 1;
    }

    if (oracle->parsed()) {
        try {
            if (oracle_trials < 1) throw ConfigInvalid("--trials must be >= 1");
            return run_oracle_check(oracle_trials, oracle_seed);
        } catch (const ConfigInvalid& err) {
            std::fprintf(stderr, "configuration error: %s\n", err.what());
            return 1;
        } catch (const std::exception& err) {
            std::fprintf(stderr, "error: %s\n", err.what());
            return 2;
        }
    }

    harness::ExperimentSpec spec;
    try {
        spec = load_spec(options);
        if (simulate->parsed() && spec.points.size() != 1)
            throw ConfigInvalid("simulate expects a config without a sweep; use the sweep command");
    } catch (const std::exception& err) {
        // anything wrong while loading or validating the config is a config error
        std::fprintf(stderr, "configuration error: %s\n", err.what());
        return 1;
    }

    try {
        if (simulate->parsed()) return run_simulate(spec);
        if (sweep->parsed()) return run_sweep(spec);
        if (compare->parsed()) return run_compare(spec);
    } catch (const std::exception& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 2;
    }
    return 1;
}
