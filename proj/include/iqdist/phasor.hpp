#ifndef IQDIST_PHASOR_HPP
#define IQDIST_PHASOR_HPP

#include <cmath>
#include <complex>

namespace iqdist {

/// Complex steady-state quantity in per-unit; magnitude convention matches the
/// instantaneous waveform amplitude, so |phasor| is directly comparable with
/// waveform envelopes.
using Phasor = std::complex<double>;

constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

inline Phasor polar_pu(double mag, double angle_rad) {
    return std::polar(mag, angle_rad);
}

/// Series impedance r + jx (per-unit, reactance at nominal frequency).
struct Impedance {
    double r = 0.0;
    double x = 0.0;

    Phasor to_complex() const { return {r, x}; }
    double mag() const { return std::hypot(r, x); }
    double angle() const { return std::atan2(x, r); }

    static Impedance from_complex(Phasor z) { return {z.real(), z.imag()}; }
    static Impedance from_polar(double mag, double angle_rad) {
        return {mag * std::cos(angle_rad), mag * std::sin(angle_rad)};
    }

    Impedance operator+(const Impedance& o) const { return {r + o.r, x + o.x}; }
    Impedance operator*(double k) const { return {k * r, k * x}; }
};

/// Product of two impedances. Has the unit pu^2, so it is deliberately a
/// different type from Impedance.
struct ComplexProduct {
    double re = 0.0;
    double im = 0.0;

    Phasor to_complex() const { return {re, im}; }
    static ComplexProduct from_complex(Phasor v) { return {v.real(), v.imag()}; }
};

/// Fault resistance. An open (infinite-resistance) fault branch is an explicit
/// flag rather than a large float.
struct FaultResistance {
    double r = 0.0;  // per-unit; ignored when open
    bool open = false;

    static FaultResistance solid() { return {0.0, false}; }
    static FaultResistance ohmic(double r_pu) { return {r_pu, false}; }
    static FaultResistance open_circuit() { return {0.0, true}; }
};

}  // namespace iqdist

#endif  // IQDIST_PHASOR_HPP
