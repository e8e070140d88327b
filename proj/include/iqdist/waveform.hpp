#ifndef IQDIST_WAVEFORM_HPP
#define IQDIST_WAVEFORM_HPP

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace iqdist {

/// Sampled three-phase relay-point voltages and currents, uniformly sampled,
/// instantaneous values in per-unit.
struct WaveformRecord {
    double fs = 5000.0;
    double t0 = 0.0;
    double f_nom = 50.0;
    std::vector<double> v_sa, v_sb, v_sc;
    std::vector<double> i_sa, i_sb, i_sc;

    // run metadata, carried into the .meta sidecar
    double v_base_kv = 220.0;
    double s_base_mva = 300.0;
    double t_fault = -1.0;           // actual switch-on instant, < 0 if none
    double kcl_residual_max = 0.0;   // worst nodal current residual of the run
    double final_dr = 0.0;           // behavioral limiter operating point
    double final_dx = 0.0;
    std::string scenario_hash;

    std::size_t size() const { return v_sa.size(); }
    double time_at(std::size_t n) const { return t0 + static_cast<double>(n) / fs; }
    const std::vector<double>& voltage(int phase) const;
    const std::vector<double>& current(int phase) const;

    /// Throws std::invalid_argument if channels disagree in length or the
    /// sampling setup is unusable.
    void validate() const;
};

/// Writes `t,v_sa,v_sb,v_sc,i_sa,i_sb,i_sc` CSV (17 significant digits, so
/// re-import reproduces the doubles bit-exactly) plus a JSON .meta sidecar.
void export_waveform(const WaveformRecord& rec, const std::string& path);

/// Reads a waveform CSV; the .meta sidecar is honored when present, otherwise
/// the sample rate is inferred from the timestamps.
WaveformRecord import_waveform(const std::string& path);

}  // namespace iqdist

#endif  // IQDIST_WAVEFORM_HPP
