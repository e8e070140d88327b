#include "iqdist/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace iqdist {

namespace {

constexpr double kZeroTol = 1e-14;

bool near_zero(Phasor z) { return std::abs(z) < kZeroTol; }

void require_nonzero(Phasor z, const char* what) {
    if (near_zero(z)) {
        throw DegenerateNetworkError(std::string("degenerate IQ network: ") + what +
                                     " is (numerically) zero");
    }
}

}  // namespace

void IqNetworkCase::validate() const {
    auto finite = [](Phasor p) { return std::isfinite(p.real()) && std::isfinite(p.imag()); };
    if (!finite(v_f_pre) || !finite(i_s_pre) || !finite(de_s))
        throw std::invalid_argument("IqNetworkCase: non-finite phasor");
    if (!(m > 0.0 && m < 1.0))
        throw std::invalid_argument("IqNetworkCase: reach m must be in (0,1)");
    if (m_f < 0.0)
        throw std::invalid_argument("IqNetworkCase: m_f must be >= 0");
    if (!r_f.open && r_f.r < 0.0)
        throw std::invalid_argument("IqNetworkCase: fault resistance must be >= 0");
    if (k_rst < 1.0)
        throw std::invalid_argument("IqNetworkCase: k_rst must be >= 1");
    if (z_s.r < 0.0 || z_g.r < 0.0 || z_l.r < 0.0 || dz_s.r < 0.0)
        throw std::invalid_argument("IqNetworkCase: negative resistance");
    if (!allow_negative_dx && dz_s.x < 0.0)
        throw std::invalid_argument("IqNetworkCase: negative dz_s reactance not enabled");
}

AuxQuantities aux_quantities(const IqNetworkCase& c) {
    const Phasor za = c.z_s.to_complex() + c.dz_s.to_complex() + c.m_f * c.z_l.to_complex();
    const Phasor zb = c.z_g.to_complex() + (1.0 - c.m_f) * c.z_l.to_complex();

    AuxQuantities aux;
    aux.z_x = ComplexProduct::from_complex(za * zb);
    aux.z_sgl = Impedance::from_complex(c.z_s.to_complex() + c.dz_s.to_complex() +
                                        c.z_g.to_complex() + c.z_l.to_complex());
    if (c.r_f.open) {
        aux.z_y = Impedance::from_complex(zb);
    } else if (c.r_f.r == 0.0) {
        if (near_zero(zb)) {
            // both parallel branches of the fault node are zero impedance
            throw DegenerateNetworkError(
                "degenerate IQ network: solid fault in parallel with a zero-impedance "
                "grid branch");
        }
        aux.z_y = Impedance{0.0, 0.0};
    } else {
        require_nonzero(Phasor(c.r_f.r, 0.0) + zb, "R_f + grid branch");
        aux.z_y = Impedance::from_complex(c.r_f.r * zb / (c.r_f.r + zb));
    }
    return aux;
}

namespace {

struct ClosedFormTerms {
    Phasor za;      // Z_s + dZ_s + m_f Z_l
    Phasor zsd;     // Z_s + dZ_s
    Phasor den1;    // za * (Zx + R_f Zsgl); unused for open faults
    Phasor zy_ml;   // Z_y + m_f Z_l
    Phasor den2;    // Z_y + m_f Z_l + Z_s + dZ_s
    Phasor e2;      // dE_s + I_s_pre dZ_s
    bool fault_open = false;
};

ClosedFormTerms closed_form_terms(const IqNetworkCase& c) {
    const AuxQuantities aux = aux_quantities(c);
    ClosedFormTerms t;
    t.zsd = c.z_s.to_complex() + c.dz_s.to_complex();
    t.za = t.zsd + c.m_f * c.z_l.to_complex();
    t.fault_open = c.r_f.open;
    if (!t.fault_open) {
        const Phasor inner = aux.z_x.to_complex() + c.r_f.r * aux.z_sgl.to_complex();
        t.den1 = t.za * inner;
        require_nonzero(t.den1, "term-1 denominator");
    }
    t.zy_ml = aux.z_y.to_complex() + c.m_f * c.z_l.to_complex();
    t.den2 = t.zy_ml + t.zsd;
    require_nonzero(t.den2, "term-2 denominator");
    t.e2 = c.de_s + c.i_s_pre * c.dz_s.to_complex();
    return t;
}

}  // namespace

Phasor incremental_current(const IqNetworkCase& c) {
    const ClosedFormTerms t = closed_form_terms(c);
    Phasor di = -t.e2 / t.den2;
    if (!t.fault_open) {
        const AuxQuantities aux = aux_quantities(c);
        di += c.v_f_pre * aux.z_x.to_complex() / t.den1;
    }
    return di;
}

Phasor incremental_voltage(const IqNetworkCase& c) {
    const ClosedFormTerms t = closed_form_terms(c);
    Phasor dv = -t.zy_ml / t.den2 * t.e2;
    if (!t.fault_open) {
        const AuxQuantities aux = aux_quantities(c);
        dv += -c.v_f_pre * t.zsd * aux.z_x.to_complex() / t.den1;
    }
    return dv;
}

Phasor operating_phasor(const IqNetworkCase& c) {
    const ClosedFormTerms t = closed_form_terms(c);
    const Phasor m_zl = c.m * c.z_l.to_complex();
    Phasor op = -t.e2 * (t.zy_ml - m_zl) / t.den2;
    if (!t.fault_open) {
        const AuxQuantities aux = aux_quantities(c);
        op += -c.v_f_pre * (t.zsd + m_zl) * aux.z_x.to_complex() / t.den1;
    }
    return op;
}

double operating_quantity(const IqNetworkCase& c) { return std::abs(operating_phasor(c)); }

double ideal_operating_quantity(const IqNetworkCase& c) {
    const Phasor zs = c.z_s.to_complex();
    const Phasor zl = c.z_l.to_complex();
    const Phasor den = zs + c.m_f * zl;
    require_nonzero(den, "Z_s + m_f Z_l");
    return std::abs(-c.v_f_pre * (zs + c.m * zl) / den);
}

double restraining_quantity(const IqNetworkCase& c) { return c.k_rst * std::abs(c.v_f_pre); }

IqSolution solve_case(const IqNetworkCase& c) {
    IqSolution s;
    s.di_s = incremental_current(c);
    s.dv_s = incremental_voltage(c);
    s.psi_op = operating_quantity(c);
    s.psi_rst = restraining_quantity(c);
    s.i_s_total = c.i_s_pre + s.di_s;
    return s;
}

namespace {

struct LoadFlow {
    Phasor i_s, v_relay;
    double p_relay;
};

LoadFlow load_flow(const SystemConfig& cfg, double angle_rad) {
    const Phasor e_s = polar_pu(cfg.e_src_mag, angle_rad);
    const Phasor e_g = Phasor(cfg.e_grid_mag, 0.0);
    const Phasor z_tot =
        cfg.z_src.to_complex() + cfg.line.z1().to_complex() + cfg.z_grid.to_complex();
    const Phasor i = (e_s - e_g) / z_tot;
    const Phasor v_r = e_s - cfg.z_src.to_complex() * i;
    return {i, v_r, (v_r * std::conj(i)).real()};
}

}  // namespace

PreFault pre_fault_solve(const SystemConfig& cfg, double m_f) {
    const Phasor z_tot =
        cfg.z_src.to_complex() + cfg.line.z1().to_complex() + cfg.z_grid.to_complex();
    if (near_zero(z_tot))
        throw DegenerateNetworkError("pre-fault network: total impedance is zero");

    double angle = cfg.e_src_angle_rad;
    if (cfg.solve_prefault_power) {
        const double target = cfg.p_pre;
        // P(angle) rises from 0 towards the static transfer limit; scan for the
        // peak to establish a bracket, then bisect to 1e-9 pu.
        const int kScan = 512;
        const double span = kPi / 2.0;
        double best_angle = 0.0, best_p = load_flow(cfg, 0.0).p_relay;
        for (int k = 1; k <= kScan; ++k) {
            const double a = (target >= 0.0 ? 1.0 : -1.0) * span * k / kScan;
            const double p = load_flow(cfg, a).p_relay;
            if ((target >= 0.0 && p > best_p) || (target < 0.0 && p < best_p)) {
                best_p = p;
                best_angle = a;
            }
        }
        const double p0 = load_flow(cfg, 0.0).p_relay;
        if ((target >= 0.0 && best_p < target) || (target < 0.0 && best_p > target)) {
            std::ostringstream msg;
            msg << "pre-fault load " << target << " pu exceeds the static transfer limit "
                << best_p << " pu (bracket [0," << best_angle << "] rad)";
            throw std::runtime_error(msg.str());
        }
        double lo = 0.0, hi = best_angle, p_lo = p0;
        bool converged = false;
        for (int iter = 0; iter < 200; ++iter) {
            const double mid = 0.5 * (lo + hi);
            const double p_mid = load_flow(cfg, mid).p_relay;
            if ((p_mid < target) == (p_lo < target)) {
                lo = mid;
                p_lo = p_mid;
            } else {
                hi = mid;
            }
            if (std::abs(p_mid - target) < 1e-12 || std::abs(hi - lo) < 1e-15) {
                converged = true;
                angle = mid;
                break;
            }
        }
        if (!converged) {
            angle = 0.5 * (lo + hi);
            if (std::abs(load_flow(cfg, angle).p_relay - target) > 1e-9) {
                std::ostringstream msg;
                msg << "pre-fault angle search did not converge to 1e-9 pu "
                    << "(bracket [" << lo << "," << hi << "] rad)";
                throw std::runtime_error(msg.str());
            }
        }
    }

    const LoadFlow lf = load_flow(cfg, angle);
    PreFault pf;
    pf.e_s = polar_pu(cfg.e_src_mag, angle);
    pf.e_g = Phasor(cfg.e_grid_mag, 0.0);
    pf.i_s_pre = lf.i_s;
    pf.v_relay = lf.v_relay;
    pf.p_relay = lf.p_relay;
    pf.v_f_pre = pf.e_s - (cfg.z_src.to_complex() + m_f * cfg.line.z1().to_complex()) * lf.i_s;
    return pf;
}

namespace {

// Nodal solve of the IQ network for one active source. The sending branch is
// ground -> (EMF e_send behind z_send) -> node R; the line section z_line_rf
// connects R to F; the grid branch z_grid_branch shunts F to ground; the fault
// branch (EMF e_fault behind r_f) shunts F to ground unless open.
struct NodalBranches {
    Phasor z_send, z_line_rf, z_grid_branch;
    double r_f = 0.0;
    bool fault_open = false;
};

struct NodalSolution {
    Phasor v_r, v_f, di_s;
};

NodalSolution nodal_solve(const NodalBranches& nb, Phasor e_send, Phasor e_fault) {
    const bool merged = near_zero(nb.z_line_rf);      // fault at the relay bus
    const bool stiff_send = near_zero(nb.z_send);     // zero sending impedance
    const bool grid_short = near_zero(nb.z_grid_branch);
    const bool fault_short = !nb.fault_open && nb.r_f < kZeroTol;

    if (stiff_send && merged)
        throw DegenerateNetworkError("IQ network: relay node short-circuited to the source");
    if (grid_short && fault_short && !near_zero(e_fault))
        throw DegenerateNetworkError(
            "IQ network: fault node pinned by two conflicting zero-impedance branches");

    // Dirichlet value for V_F when a zero-impedance shunt pins the fault node.
    bool vf_pinned = false;
    Phasor vf_pin;
    if (grid_short) {
        vf_pinned = true;
        vf_pin = Phasor(0.0, 0.0);
    } else if (fault_short) {
        vf_pinned = true;
        vf_pin = e_fault;
    }

    const Phasor y_send = stiff_send ? Phasor() : 1.0 / nb.z_send;
    const Phasor y_line = merged ? Phasor() : 1.0 / nb.z_line_rf;
    const Phasor y_grid = grid_short ? Phasor() : 1.0 / nb.z_grid_branch;
    Phasor y_fault(0.0, 0.0);
    Phasor j_fault(0.0, 0.0);
    if (!nb.fault_open && !fault_short) {
        y_fault = 1.0 / Phasor(nb.r_f, 0.0);
        j_fault = e_fault * y_fault;
    }

    NodalSolution out;
    if (merged) {
        // single node V (= V_R = V_F)
        Phasor v;
        if (vf_pinned) {
            v = vf_pin;
        } else {
            const Phasor y = y_send + y_grid + y_fault;
            if (near_zero(y))
                throw DegenerateNetworkError("IQ network: floating fault node");
            v = (e_send * y_send + j_fault) / y;
        }
        out.v_r = out.v_f = v;
        out.di_s = (e_send - v) * y_send;
        return out;
    }

    if (stiff_send) {
        // V_R known; solve V_F only.
        out.v_r = e_send;
        if (vf_pinned) {
            out.v_f = vf_pin;
        } else {
            const Phasor y = y_line + y_grid + y_fault;
            if (near_zero(y))
                throw DegenerateNetworkError("IQ network: floating fault node");
            out.v_f = (out.v_r * y_line + j_fault) / y;
        }
        out.di_s = (out.v_r - out.v_f) * y_line;
        return out;
    }

    if (vf_pinned) {
        out.v_f = vf_pin;
        const Phasor y_rr = y_send + y_line;
        if (near_zero(y_rr))
            throw DegenerateNetworkError("IQ network: floating relay node");
        out.v_r = (e_send * y_send + out.v_f * y_line) / y_rr;
        out.di_s = (e_send - out.v_r) * y_send;
        return out;
    }

    // Full 2x2 nodal system in (V_R, V_F).
    const Phasor y_rr = y_send + y_line;
    const Phasor y_ff = y_line + y_grid + y_fault;
    const Phasor y_rf = -y_line;
    const Phasor det = y_rr * y_ff - y_rf * y_rf;
    if (near_zero(det))
        throw DegenerateNetworkError("IQ network: singular admittance matrix");
    const Phasor j_r = e_send * y_send;
    const Phasor j_f = j_fault;
    out.v_r = (j_r * y_ff - y_rf * j_f) / det;
    out.v_f = (y_rr * j_f - y_rf * j_r) / det;
    out.di_s = (e_send - out.v_r) * y_send;
    return out;
}

}  // namespace

OracleResult nodal_oracle(const IqNetworkCase& c) {
    NodalBranches nb;
    nb.z_send = c.z_s.to_complex() + c.dz_s.to_complex();
    nb.z_line_rf = c.m_f * c.z_l.to_complex();
    nb.z_grid_branch = c.z_g.to_complex() + (1.0 - c.m_f) * c.z_l.to_complex();
    nb.r_f = c.r_f.r;
    nb.fault_open = c.r_f.open;

    // Superposition over the three sources energizing the IQ network.
    const Phasor zero(0.0, 0.0);
    const NodalSolution by_fault = nodal_solve(nb, zero, -c.v_f_pre);
    const NodalSolution by_ivs = nodal_solve(nb, -c.de_s, zero);
    const NodalSolution by_ipre = nodal_solve(nb, -c.i_s_pre * c.dz_s.to_complex(), zero);

    OracleResult r;
    r.di_s = by_fault.di_s + by_ivs.di_s + by_ipre.di_s;
    r.dv_s = by_fault.v_r + by_ivs.v_r + by_ipre.v_r;
    return r;
}

DisturbanceSolution disturbance_network(const IqNetworkCase& c) {
    // Reconstruct the source EMFs behind the case phasors. The pre-fault
    // two-source chain gives E_s = V_f_pre + (Z_s + m_f Z_l) I_pre and
    // E_g = V_f_pre - (Z_g + (1 - m_f) Z_l) I_pre.
    const Phasor zs = c.z_s.to_complex();
    const Phasor zl = c.z_l.to_complex();
    const Phasor zg = c.z_g.to_complex();
    const Phasor e_s_pre = c.v_f_pre + (zs + c.m_f * zl) * c.i_s_pre;
    const Phasor e_g = c.v_f_pre - (zg + (1.0 - c.m_f) * zl) * c.i_s_pre;

    const Phasor e_s = e_s_pre - c.de_s;
    const Phasor z_a = zs + c.dz_s.to_complex() + c.m_f * zl;
    const Phasor z_b = zg + (1.0 - c.m_f) * zl;

    DisturbanceSolution d;
    if (c.r_f.open) {
        const Phasor z_loop = z_a + z_b;
        require_nonzero(z_loop, "disturbance loop impedance");
        d.i_s = (e_s - e_g) / z_loop;
        d.i_g = -d.i_s;
        d.v_fault = e_g + z_b * d.i_g;
    } else {
        // Mesh equations with the fault branch shared by both loops.
        const Phasor rf(c.r_f.r, 0.0);
        const Phasor a11 = z_a + rf, a12 = rf, a21 = rf, a22 = z_b + rf;
        const Phasor det = a11 * a22 - a12 * a21;
        require_nonzero(det, "disturbance network determinant");
        d.i_s = (e_s * a22 - a12 * e_g) / det;
        d.i_g = (a11 * e_g - a21 * e_s) / det;
        d.v_fault = rf * (d.i_s + d.i_g);
    }
    d.v_relay = e_s - (zs + c.dz_s.to_complex()) * d.i_s;
    return d;
}

IqNetworkCase make_case(const SystemConfig& cfg, double m_f, FaultResistance r_f,
                        Impedance dz_s, double de_mag, double de_angle_rel,
                        double m, double k_rst) {
    const PreFault pf = pre_fault_solve(cfg, m_f);
    IqNetworkCase c;
    c.z_s = cfg.z_src;
    c.dz_s = dz_s;
    c.z_g = cfg.z_grid;
    c.z_l = cfg.line.z1();
    c.m_f = m_f;
    c.m = m;
    c.r_f = r_f;
    c.v_f_pre = pf.v_f_pre;
    c.i_s_pre = pf.i_s_pre;
    c.de_s = polar_pu(de_mag, std::arg(pf.e_s) + de_angle_rel);
    c.k_rst = k_rst;
    return c;
}

}  // namespace iqdist
