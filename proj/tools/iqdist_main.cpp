#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "iqdist/runner.hpp"

namespace {

// exit codes: 0 success, 1 runtime numerical failure, 2 input validation
constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

struct CommonArgs {
    std::string scenario_path;
    std::string out_dir;
    int jobs = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool scenario_required = true) {
    cmd->add_option("--scenario", args.scenario_path, "scenario JSON file")
        ->required(scenario_required);
    cmd->add_option("--out", args.out_dir, "output directory (default from scenario)");
    cmd->add_option("--jobs", args.jobs, "worker threads for sweeps and batches")
        ->check(CLI::PositiveNumber);
}

iqdist::RunOptions make_options(const iqdist::Scenario& sc, const CommonArgs& args,
                                const std::string& command) {
    iqdist::RunOptions opt;
    opt.out_dir = args.out_dir.empty() ? sc.out_dir : args.out_dir;
    opt.jobs = args.jobs;
    opt.command = command;
    return opt;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"incremental-quantity distance protection laboratory"};
    app.require_subcommand(1);

    CommonArgs analyze_args, simulate_args, sweep_args, replay_args, matrix_args;
    std::string replay_waveform;
    double traj_ms = 1.0;
    std::uint64_t seed_override = 0;
    bool seed_given = false;

    CLI::App* analyze =
        app.add_subcommand("analyze", "closed-form case evaluation with oracle check");
    add_common(analyze, analyze_args);

    CLI::App* simulate =
        app.add_subcommand("simulate", "time-domain run plus both relay elements");
    add_common(simulate, simulate_args);
    simulate->add_option("--traj-ms", traj_ms,
                         "impedance trajectory output decimation, ms");

    CLI::App* sweep = app.add_subcommand("sweep", "region-map parameter sweep");
    add_common(sweep, sweep_args);

    CLI::App* replay =
        app.add_subcommand("replay", "run both relays over a waveform CSV");
    add_common(replay, replay_args);
    replay->add_option("--waveform", replay_waveform, "waveform CSV to replay")
        ->required();

    CLI::App* matrix = app.add_subcommand("matrix", "batch fault-matrix runs");
    add_common(matrix, matrix_args);

    app.add_option("--seed", seed_override, "override the scenario seed")
        ->each([&](const std::string&) { seed_given = true; });

    CLI11_PARSE(app, argc, argv);

    try {
        auto load = [&](const CommonArgs& args) {
            iqdist::Scenario sc = iqdist::load_scenario(args.scenario_path);
            if (seed_given) sc.seed = seed_override;
            return sc;
        };

        if (analyze->parsed()) {
            const iqdist::Scenario sc = load(analyze_args);
            iqdist::run_analyze(sc, make_options(sc, analyze_args, "analyze"));
        } else if (simulate->parsed()) {
            const iqdist::Scenario sc = load(simulate_args);
            iqdist::RunOptions opt = make_options(sc, simulate_args, "simulate");
            opt.traj_decimate_ms = traj_ms;
            iqdist::run_simulate(sc, opt);
        } else if (sweep->parsed()) {
            const iqdist::Scenario sc = load(sweep_args);
            iqdist::run_sweep_cmd(sc, make_options(sc, sweep_args, "sweep"));
        } else if (replay->parsed()) {
            const iqdist::Scenario sc = load(replay_args);
            iqdist::run_replay(sc, replay_waveform,
                               make_options(sc, replay_args, "replay"));
        } else if (matrix->parsed()) {
            const iqdist::Scenario sc = load(matrix_args);
            iqdist::run_matrix(sc, make_options(sc, matrix_args, "matrix"));
        }
    } catch (const iqdist::ScenarioError& e) {
        std::fprintf(stderr, "scenario error: %s\n", e.what());
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "invalid input: %s\n", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        const std::string what = e.what();
        if (what.find("malformed waveform CSV") != std::string::npos) {
            std::fprintf(stderr, "%s\n", what.c_str());
            return kExitValidation;
        }
        std::fprintf(stderr, "error: %s\n", what.c_str());
        return kExitRuntime;
    }
    return 0;
}
