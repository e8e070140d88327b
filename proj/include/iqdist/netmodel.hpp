#ifndef IQDIST_NETMODEL_HPP
#define IQDIST_NETMODEL_HPP

#include <stdexcept>

#include "iqdist/config.hpp"
#include "iqdist/phasor.hpp"

namespace iqdist {

/// Thrown when the incremental-quantity network cannot be solved, e.g. a
/// solid fault shunted by a zero-impedance grid branch.
class DegenerateNetworkError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One steady-state case of the per-phase incremental-quantity network:
/// sending source with an impedance/IVS change, line split at the fault
/// position, fault branch, and remote grid source.
struct IqNetworkCase {
    Impedance z_s;    // sending source impedance
    Impedance dz_s;   // sending source impedance change
    Impedance z_g;    // remote grid source impedance
    Impedance z_l;    // full-length positive-sequence line impedance
    double m_f = 0.5; // fault position as fraction of line length
    double m = 0.8;   // relay reach fraction
    FaultResistance r_f = FaultResistance::solid();
    Phasor v_f_pre;   // pre-fault voltage at the fault point
    Phasor i_s_pre;   // pre-fault sending-end current
    Phasor de_s;      // IVS change (reduction) during the disturbance
    double k_rst = 1.0;
    bool allow_negative_dx = false;

    /// Throws std::invalid_argument on violated invariants.
    void validate() const;
};

struct AuxQuantities {
    ComplexProduct z_x;  // (Z_s + dZ_s + m_f Z_l)(Z_g + (1 - m_f) Z_l)
    Impedance z_sgl;     // Z_s + dZ_s + Z_g + Z_l
    Impedance z_y;       // R_f || (Z_g + (1 - m_f) Z_l)
};

struct IqSolution {
    Phasor di_s;       // sending-end incremental current
    Phasor dv_s;       // sending-end incremental voltage
    double psi_op = 0.0;
    double psi_rst = 0.0;
    Phasor i_s_total;  // post-disturbance sending current = i_s_pre + di_s
};

AuxQuantities aux_quantities(const IqNetworkCase& c);

Phasor incremental_current(const IqNetworkCase& c);
Phasor incremental_voltage(const IqNetworkCase& c);

/// Complex inner value of the operating quantity, before taking |.|.
Phasor operating_phasor(const IqNetworkCase& c);

double operating_quantity(const IqNetworkCase& c);

/// Operating quantity of the ideal case: linear sending source and a solid
/// fault (dz_s, de_s and r_f of the case are ignored).
double ideal_operating_quantity(const IqNetworkCase& c);

double restraining_quantity(const IqNetworkCase& c);

IqSolution solve_case(const IqNetworkCase& c);

/// Pre-disturbance load flow of the unfaulted two-source line.
struct PreFault {
    Phasor v_f_pre;   // voltage at the prospective fault point
    Phasor i_s_pre;   // sending-end current
    Phasor e_s;       // sending IVS including the solved angle
    Phasor e_g;       // remote grid IVS (reference)
    Phasor v_relay;   // sending-end bus voltage
    double p_relay = 0.0;  // active power delivered at the relay bus
};

/// Solves the pre-fault network. When cfg.solve_prefault_power is set the
/// sending IVS angle is found by 1-D root finding so the relay bus delivers
/// cfg.p_pre within 1e-9 pu.
PreFault pre_fault_solve(const SystemConfig& cfg, double m_f);

/// Independent verification path for the closed forms: direct complex nodal
/// analysis of the IQ network (unknowns: relay-node and fault-node voltage),
/// summing the contributions of the three superposition sources. Shares no
/// algebra with incremental_current / incremental_voltage.
struct OracleResult {
    Phasor di_s;
    Phasor dv_s;
};
OracleResult nodal_oracle(const IqNetworkCase& c);

/// Post-disturbance (total network) steady state: sending source with the
/// changed impedance/IVS feeding the faulted line against the grid source.
/// Used by the quadrilateral baseline and for the 1.2 pu current boundary.
struct DisturbanceSolution {
    Phasor i_s;      // sending-end current
    Phasor i_g;      // grid-side current into the fault node
    Phasor v_relay;  // relay bus voltage
    Phasor v_fault;  // fault-point voltage
};
DisturbanceSolution disturbance_network(const IqNetworkCase& c);

/// Builds a case from the system configuration; de_mag/de_angle_rel define
/// the IVS change relative to the solved pre-fault IVS angle.
IqNetworkCase make_case(const SystemConfig& cfg, double m_f, FaultResistance r_f,
                        Impedance dz_s, double de_mag, double de_angle_rel,
                        double m, double k_rst);

}  // namespace iqdist

#endif  // IQDIST_NETMODEL_HPP
