#ifndef IQDIST_RELAY_QUAD_HPP
#define IQDIST_RELAY_QUAD_HPP

#include <array>
#include <vector>

#include "iqdist/config.hpp"
#include "iqdist/phasor.hpp"
#include "iqdist/relay_iq.hpp"  // Loop
#include "iqdist/waveform.hpp"

namespace iqdist {

struct QuadSettings {
    double m = 0.8;             // reach fraction
    LineParams line;
    double r_reach = 20.0 / (220.0 * 220.0 / 300.0);  // pu (20 ohm on the base)
    double dir_angle = deg2rad(15.0);  // directional lines at line angle +/- this
    double tilt = 0.0;                 // top-line tilt
    double settle_time = 0.020;        // s, dwell required for a steady pickup
    double min_pickup = 0.05;          // pu minimum loop current
    bool mimic = true;                 // decaying-DC compensation on currents
    double mimic_tau = 0.030;          // s
    double f_nom = 50.0;

    void validate() const;
};

/// Convex quadrilateral zone characteristic in the (R, X) plane.
struct ZonePolygon {
    std::vector<std::array<double, 2>> vertices;  // counter-clockwise
    int zone_id = 1;

    bool contains(double r, double x) const;  // boundary counts as inside
};

/// Zone-1 polygon: origin, resistive blinder, tilted top line at the reactive
/// reach, directional lines at the line angle +/- dir_angle.
ZonePolygon make_zone1(const QuadSettings& s);

/// Sliding full-cycle DFT phasors of all six channels (optionally with mimic
/// compensation on the currents). Valid from one full cycle into the record.
struct PhasorStream {
    std::array<std::vector<Phasor>, 3> v, i;
    std::size_t first_valid = 0;
    double fs = 0.0;
    double t0 = 0.0;
};

PhasorStream phasor_estimate(const WaveformRecord& rec, const QuadSettings& s);

struct ImpedanceSample {
    double r = 0.0, x = 0.0;
    bool valid = false;  // above the minimum pickup current
};

struct ImpedanceTrajectory {
    std::array<std::vector<ImpedanceSample>, 6> loops;
    std::size_t first_valid = 0;
    double fs = 0.0;
    double t0 = 0.0;
};

/// Apparent loop impedances: LG loops V_x / (I_x + k0 I0) with the usual
/// residual compensation factor, LL loops V_xy / I_xy.
ImpedanceTrajectory loop_impedance(const PhasorStream& ph, const QuadSettings& s);

struct QuadDecision {
    bool picked_up = false;       // settled inside zone 1
    double pickup_time = -1.0;    // start of the terminal dwell + settle_time
    Loop loop = Loop::AG;
    bool transient_overreach = false;  // entered the zone without settling
    ImpedanceTrajectory trajectory;
    std::array<std::vector<bool>, 6> inside;
};

/// Settle-based zone test: pickup requires the trajectory to stay inside the
/// polygon through the end of the record for at least the settle window.
QuadDecision zone_test(const ImpedanceTrajectory& traj, const ZonePolygon& zone,
                       const QuadSettings& s);

QuadDecision evaluate_quad_relay(const WaveformRecord& rec, const QuadSettings& s);

}  // namespace iqdist

#endif  // IQDIST_RELAY_QUAD_HPP
