#ifndef IQDIST_SCENARIO_HPP
#define IQDIST_SCENARIO_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "iqdist/sweep.hpp"

namespace iqdist {

/// Scenario-file violation; carries the JSON path of the offending field.
/// Maps to exit code 2 in the CLI.
class ScenarioError : public std::runtime_error {
public:
    ScenarioError(const std::string& path, const std::string& what)
        : std::runtime_error(path + ": " + what), path_(path) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

/// A fully validated run description: system, dynamics, fault, both relays,
/// simulation setup and the optional sweep/matrix blocks. All physical fields
/// carry explicit unit suffixes in the file; unknown keys are rejected.
struct Scenario {
    SystemConfig system;
    SourceDynamics dynamics;
    FaultEvent fault;
    RelaySettings relay;
    QuadSettings quad;
    SimOptions sim;
    double duration = 0.5;  // s

    bool has_sweep = false;
    GridAxis dr, dx;
    std::vector<SweepCell> cells;
    Classifier classifier = Classifier::IqDependability;
    double sweep_i_limit = 1.2;

    bool has_matrix = false;
    std::vector<std::string> matrix_sources;
    std::vector<double> matrix_m_f;
    std::vector<double> matrix_r_f_ohm;
    double matrix_duration = 0.5;

    std::uint64_t seed = 0;
    std::string out_dir = "out";
    std::string hash;  // FNV-1a over the canonical JSON text

    SweepSpec sweep_spec(int jobs) const;
    FaultMatrixSpec matrix_spec(int jobs) const;
    SourceDynamics dynamics_by_name(const std::string& name) const;
};

Scenario parse_scenario(const nlohmann::json& j);
Scenario load_scenario(const std::string& path);

std::uint64_t fnv1a(const std::string& text);

}  // namespace iqdist

#endif  // IQDIST_SCENARIO_HPP
