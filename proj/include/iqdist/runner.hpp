#ifndef IQDIST_RUNNER_HPP
#define IQDIST_RUNNER_HPP

#include <string>

#include "iqdist/scenario.hpp"

namespace iqdist {

/// Pipelines behind the CLI subcommands. All of them write their artifacts
/// under out_dir and throw on failure (ScenarioError for input problems).

struct RunOptions {
    std::string out_dir = "out";
    int jobs = 1;
    double traj_decimate_ms = 1.0;  // impedance-trajectory output decimation
    std::string command;            // recorded in the run manifest
};

/// Closed-form evaluation of the scenario's fault case with the nodal-oracle
/// cross-check; writes analysis.json.
void run_analyze(const Scenario& sc, const RunOptions& opt);

/// Time-domain simulation plus both relay elements; writes the waveform CSV,
/// per-loop trace CSVs, the impedance trajectory and both decision JSONs.
void run_simulate(const Scenario& sc, const RunOptions& opt);

/// Replays both relays over an imported waveform CSV; writes the same relay
/// artifacts as run_simulate.
void run_replay(const Scenario& sc, const std::string& waveform_path,
                const RunOptions& opt);

/// Region-map parameter sweep; writes region_*.csv / boundary_*.csv per cell.
void run_sweep_cmd(const Scenario& sc, const RunOptions& opt);

/// Batch fault matrix; writes decisions.csv.
void run_matrix(const Scenario& sc, const RunOptions& opt);

}  // namespace iqdist

#endif  // IQDIST_RUNNER_HPP
