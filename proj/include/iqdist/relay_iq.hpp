#ifndef IQDIST_RELAY_IQ_HPP
#define IQDIST_RELAY_IQ_HPP

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "iqdist/config.hpp"
#include "iqdist/waveform.hpp"

namespace iqdist {

enum class Loop { AG, BG, CG, AB, BC, CA };
inline constexpr std::array<Loop, 6> kLoops = {Loop::AG, Loop::BG, Loop::CG,
                                               Loop::AB, Loop::BC, Loop::CA};
const char* loop_name(Loop l);

enum class TripMode { Threshold, ConsecutiveTime };

struct RelaySettings {
    double m = 0.8;       // reach fraction
    int p = 2;            // memory depth in cycles
    double k_rst = 1.0;   // restraint bias, >= 1
    double lp_cutoff = 450.0;  // low-pass on the measured channels, Hz
    TripMode trip_mode = TripMode::ConsecutiveTime;
    double threshold_level = 2e-3;  // pu*s, threshold mode
    double hold_time = 0.012;       // s, consecutive-time mode
    LineParams line;
    double f_nom = 50.0;
    // disturbance detector arming the running sums
    double detect_di = 0.05;   // pu
    double detect_dv = 0.02;   // pu
    double detect_hold = 1e-3; // s

    void validate() const;
};

/// Filtered measurement channels plus the memory bookkeeping shared by the
/// operating and restraining chains. Once the disturbance detector fires, the
/// p-cycle reference freezes onto the last pre-disturbance cycle so the memory
/// stays inside the pre-disturbance network for the whole decision window.
struct RelayFrontEnd {
    double fs = 0.0;
    double t0 = 0.0;
    std::size_t n_cycle = 0;
    std::size_t memory = 0;  // p * n_cycle samples
    std::array<std::vector<double>, 3> v, i;      // filtered phase channels
    std::vector<double> i0;                       // zero-sequence current
    std::array<std::vector<double>, 3> didt;      // d/dt of filtered currents
    std::vector<double> di0dt;
    std::vector<std::size_t> ref;                 // memory reference index
    std::ptrdiff_t detect_index = -1;             // start of the qualifying run
    std::ptrdiff_t arm_index = -1;                // detector confirmed

    double time_at(std::size_t n) const { return t0 + static_cast<double>(n) / fs; }
    std::size_t size() const { return ref.size(); }
};

RelayFrontEnd relay_front_end(const WaveformRecord& rec, const RelaySettings& s);

/// Voltage/current incremental quantities of the six fault loops plus the
/// zero-sequence incremental current, sample-aligned with the record.
struct IqChannels {
    std::array<std::vector<double>, 6> dv, di, ddidt;
    std::vector<double> di0, ddi0dt;
    std::size_t first_valid = 0;
};

IqChannels incremental(const RelayFrontEnd& fe, const RelaySettings& s);

std::array<std::vector<double>, 6> operating_quantities(const IqChannels& iq,
                                                        const RelaySettings& s);

std::array<std::vector<double>, 6> restraining_quantities(const RelayFrontEnd& fe,
                                                          const RelaySettings& s);

struct LoopState {
    Loop loop = Loop::AG;
    double e_sum = 0.0;          // pu*s
    bool active = false;         // e_sum currently above zero
    double above_zero_since = -1.0;  // s, start of the current positive run
};

struct RunningSums {
    std::array<std::vector<double>, 6> e_sum;
    std::array<LoopState, 6> final_state;
    std::size_t start_index = 0;  // first accumulating sample
};

RunningSums running_sum(const std::array<std::vector<double>, 6>& psi_op,
                        const std::array<std::vector<double>, 6>& psi_rst,
                        const RelaySettings& s, double fs, double t0,
                        std::ptrdiff_t arm_index);

struct LoopTraces {
    std::array<std::vector<double>, 6> psi_op, psi_rst, e_sum;
};

struct RelayDecision {
    bool tripped = false;
    double trip_time = -1.0;  // s
    Loop loop = Loop::AG;
    double detect_time = -1.0;
    double arm_time = -1.0;
    LoopTraces traces;
};

RelayDecision trip_logic(const RunningSums& sums, const RelaySettings& s, double fs,
                         double t0);

/// Full chain: front end, IQs, operating/restraining quantities, running sums
/// and the trip decision, with per-loop traces.
RelayDecision evaluate_iq_relay(const WaveformRecord& rec, const RelaySettings& s);

}  // namespace iqdist

#endif  // IQDIST_RELAY_IQ_HPP
