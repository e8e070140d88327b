#ifndef IQDIST_CONFIG_HPP
#define IQDIST_CONFIG_HPP

#include "iqdist/phasor.hpp"

namespace iqdist {

/// Line constants for the FULL line length; relay and network math scale them
/// by the reach fraction m or the fault position m_f.
struct LineParams {
    double r1 = 0.03135853898029604;  // pu (0.30 pu at 84 deg)
    double x1 = 0.298356568610482;    // pu at nominal frequency
    double r0 = 0.23293714059226867;  // pu (0.90 pu at 75 deg)
    double x0 = 0.8693332436601615;   // pu
    double length_km = 100.0;

    Impedance z1() const { return {r1, x1}; }
    Impedance z0() const { return {r0, x0}; }
};

/// Two-source single-line network on a common MVA/kV base.
struct SystemConfig {
    double f_hz = 50.0;
    double v_base_kv = 220.0;
    double s_base_mva = 300.0;

    LineParams line;
    Impedance z_src = Impedance::from_polar(0.09, deg2rad(84.0));   // SIR 0.3
    Impedance z_grid = Impedance::from_polar(0.09, deg2rad(84.0));  // SIR 0.3

    double e_src_mag = 1.0;
    double e_grid_mag = 1.0;

    // When solve_prefault_power is set, the sending IVS angle is solved so the
    // relay bus delivers p_pre; otherwise e_src_angle_rad is used directly.
    bool solve_prefault_power = true;
    double p_pre = 1.0;
    double e_src_angle_rad = 0.0;

    double omega() const { return 2.0 * kPi * f_hz; }
    double z_base_ohm() const { return v_base_kv * v_base_kv / s_base_mva; }
    double ohm_to_pu(double ohm) const { return ohm / z_base_ohm(); }
    double pu_to_ohm(double pu) const { return pu * z_base_ohm(); }
};

}  // namespace iqdist

#endif  // IQDIST_CONFIG_HPP
