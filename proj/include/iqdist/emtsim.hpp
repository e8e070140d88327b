#ifndef IQDIST_EMTSIM_HPP
#define IQDIST_EMTSIM_HPP

#include <vector>

#include "iqdist/config.hpp"
#include "iqdist/netmodel.hpp"
#include "iqdist/waveform.hpp"

namespace iqdist {

enum class SourceMode { Linear, Scheduled, GfmSaturation, GfmVirtualImpedance };

/// One piecewise segment of the scheduled source dynamics. Times are relative
/// to the fault inception; values ramp linearly over `ramp` seconds (0 = step).
struct ScheduleStep {
    double t = 0.0;
    double dr_s = 0.0;     // pu
    double dx_s = 0.0;     // pu reactance at nominal frequency
    double de_mag = 0.0;   // pu IVS reduction magnitude
    double de_angle = 0.0; // rad, relative to the pre-fault IVS angle
    double ramp = 0.0;
};

struct SourceDynamics {
    SourceMode mode = SourceMode::Linear;
    std::vector<ScheduleStep> schedule;
    double i_limit = 1.2;                  // pu
    double vi_angle = deg2rad(84.0);       // virtual-impedance angle
    double limiter_time_constant = 5e-3;   // s

    static SourceDynamics linear() { return {}; }
    static SourceDynamics scheduled(std::vector<ScheduleStep> steps) {
        SourceDynamics d;
        d.mode = SourceMode::Scheduled;
        d.schedule = std::move(steps);
        return d;
    }
    static SourceDynamics gfm_saturation(double i_limit = 1.2, double tau = 0.5e-3) {
        SourceDynamics d;
        d.mode = SourceMode::GfmSaturation;
        d.i_limit = i_limit;
        d.limiter_time_constant = tau;
        return d;
    }
    static SourceDynamics gfm_virtual_impedance(double i_limit = 1.2,
                                                double angle = deg2rad(84.0),
                                                double tau = 30e-3) {
        SourceDynamics d;
        d.mode = SourceMode::GfmVirtualImpedance;
        d.i_limit = i_limit;
        d.vi_angle = angle;
        d.limiter_time_constant = tau;
        return d;
    }
};

/// Piecewise-constant fault resistance, times relative to inception.
struct FaultStep {
    double t = 0.0;
    double r_f = 0.0;  // pu
};

struct FaultEvent {
    bool enabled = true;
    double t_on = 0.1;  // requested inception time, s
    double m_f = 0.5;
    std::vector<FaultStep> r_f_steps = {{0.0, 0.0}};
    // Inception is moved to the next phase-A voltage zero at the fault point.
    bool align_to_voltage_zero = true;

    static FaultEvent none() {
        FaultEvent f;
        f.enabled = false;
        return f;
    }
};

struct SimOptions {
    double dt = 0.0;         // internal step, s; 0 selects 1/(10 fs_out)
    double fs_out = 5000.0;  // output sample rate, Hz
};

/// Adaptive series-impedance state of the behavioral GFM current limiters.
struct GfmLimiterState {
    double dz_mag = 0.0;  // pu
};

/// Integrating adaptation of |dZ_s| driving the measured current magnitude
/// toward the limit; anti-windup clamp at zero.
void gfm_limiter_step(GfmLimiterState& state, double i_mag_pu, const SourceDynamics& dyn,
                      double dt);

/// Time-domain three-phase simulation of the disturbance network: sending
/// source with dynamic (dR_s, dL_s, de_s), line split at the fault position,
/// fault branch, grid source. Trapezoidal-rule integration; the pre-fault
/// steady state is initialized from the netmodel load flow.
WaveformRecord simulate(const SystemConfig& cfg, const SourceDynamics& dyn,
                        const FaultEvent& fault, double duration,
                        const SimOptions& opts = {});

}  // namespace iqdist

#endif  // IQDIST_EMTSIM_HPP
