#include "iqdist/emtsim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace iqdist {

namespace {

struct DynValues {
    double dr = 0.0;
    double dx = 0.0;
    double de_mag = 0.0;
    double de_angle = 0.0;
};

DynValues schedule_at(const std::vector<ScheduleStep>& sched, double t_rel) {
    DynValues v;
    if (t_rel < 0.0 || sched.empty()) return v;
    DynValues from = v;  // zero baseline before the first segment
    for (const ScheduleStep& s : sched) {
        if (t_rel < s.t) break;
        const DynValues target{s.dr_s, s.dx_s, s.de_mag, s.de_angle};
        const double frac = (s.ramp > 0.0) ? std::min(1.0, (t_rel - s.t) / s.ramp) : 1.0;
        v.dr = from.dr + frac * (target.dr - from.dr);
        v.dx = from.dx + frac * (target.dx - from.dx);
        v.de_mag = from.de_mag + frac * (target.de_mag - from.de_mag);
        v.de_angle = from.de_angle + frac * (target.de_angle - from.de_angle);
        from = target;
    }
    return v;
}

double fault_resistance_at(const FaultEvent& fault, double t_rel) {
    double r = fault.r_f_steps.empty() ? 0.0 : fault.r_f_steps.front().r_f;
    for (const FaultStep& s : fault.r_f_steps) {
        if (t_rel >= s.t) r = s.r_f;
    }
    return r;
}

// Companion model of a series R-L branch between an EMF and the fault node:
// i[n] = g * (e[n] - v_f[n]) + h.
struct Companion {
    double g = 0.0;
    double h = 0.0;
};

Companion trapezoidal(double r, double l, double dt, double i_prev, double vl_prev) {
    const double alpha = dt / (2.0 * l);
    const double den = 1.0 + alpha * r;
    return {alpha / den, (i_prev + alpha * vl_prev) / den};
}

Companion backward_euler(double r, double l, double dt, double i_prev) {
    const double den = l + r * dt;
    return {dt / den, i_prev * l / den};
}

}  // namespace

void gfm_limiter_step(GfmLimiterState& state, double i_mag_pu, const SourceDynamics& dyn,
                      double dt) {
    // Integrating servo on |dZ_s| with a symmetric slew bound so the initial
    // fault-current spike cannot wind the virtual impedance far past its
    // steady operating point.
    const double err = std::clamp(i_mag_pu - dyn.i_limit, -0.5 * dyn.i_limit,
                                  0.5 * dyn.i_limit);
    const double rate = err / (dyn.limiter_time_constant * dyn.i_limit);
    state.dz_mag = std::max(0.0, state.dz_mag + dt * rate);
}

WaveformRecord simulate(const SystemConfig& cfg, const SourceDynamics& dyn,
                        const FaultEvent& fault, double duration, const SimOptions& opts) {
    if (!(duration > 0.0)) throw std::invalid_argument("simulate: duration must be > 0");
    if (!(opts.fs_out > 0.0)) throw std::invalid_argument("simulate: fs_out must be > 0");
    double dt = opts.dt > 0.0 ? opts.dt : 1.0 / (10.0 * opts.fs_out);
    if (dt > 1.0 / (10.0 * opts.fs_out) + 1e-15)
        throw std::invalid_argument("simulate: dt must be <= 1/(10 fs_out)");
    const double ratio_f = 1.0 / (dt * opts.fs_out);
    const long ratio = std::lround(ratio_f);
    if (ratio < 1 || std::abs(ratio_f - static_cast<double>(ratio)) > 1e-9)
        throw std::invalid_argument("simulate: 1/dt must be an integer multiple of fs_out");
    if (fault.enabled && fault.t_on < 2.0 / cfg.f_hz)
        throw std::invalid_argument("simulate: fault inception needs two pre-fault cycles");
    for (const FaultStep& s : fault.r_f_steps)
        if (s.r_f < 0.0) throw std::invalid_argument("simulate: negative fault resistance");

    const double omega = cfg.omega();
    const double omega_d = (2.0 / dt) * std::tan(omega * dt / 2.0);  // trapezoidal map
    const double m_f = fault.m_f;

    // Static branch constants (per-unit resistances, inductances in pu*s).
    const double r_line_a = m_f * cfg.line.r1;
    const double l_line_a = m_f * cfg.line.x1 / omega;
    const double r_b = (1.0 - m_f) * cfg.line.r1 + cfg.z_grid.r;
    const double l_b = ((1.0 - m_f) * cfg.line.x1 + cfg.z_grid.x) / omega;
    const double l_src0 = cfg.z_src.x / omega;
    if (l_src0 + l_line_a < 1e-12 || l_b < 1e-12)
        throw std::invalid_argument("simulate: zero branch inductance is unsupported");

    // Pre-fault phasors; the sending IVS angle comes from the load flow.
    const PreFault pf = pre_fault_solve(cfg, m_f);

    // Exact discrete steady state of the trapezoidal system: inductors behave
    // as j*omega_d*L, so initializing with prewarped phasors starts the run
    // settled to machine precision.
    const double prewarp = omega_d / omega;
    const Phasor z_loop_d =
        Phasor(cfg.z_src.r + cfg.line.r1 + cfg.z_grid.r,
               (cfg.z_src.x + cfg.line.x1 + cfg.z_grid.x) * prewarp);
    const Phasor i_pre_d = (pf.e_s - pf.e_g) / z_loop_d;

    // Fault inception, optionally aligned to the phase-A voltage zero at the
    // fault point (inception angle 0).
    double t_fault = -1.0;
    if (fault.enabled) {
        t_fault = fault.t_on;
        if (fault.align_to_voltage_zero) {
            const Phasor v_f_d =
                pf.e_s - Phasor(cfg.z_src.r + r_line_a,
                                (cfg.z_src.x + m_f * cfg.line.x1) * prewarp) *
                             i_pre_d;
            const double phi = std::arg(v_f_d);
            double k = std::ceil((fault.t_on * omega + phi - kPi / 2.0) / kPi);
            double t_star = (kPi / 2.0 - phi + k * kPi) / omega;
            while (t_star < fault.t_on - 1e-12) {
                k += 1.0;
                t_star = (kPi / 2.0 - phi + k * kPi) / omega;
            }
            t_fault = std::ceil(t_star / dt - 1e-9) * dt;
        }
    }

    const long n_steps = std::lround(duration / dt);
    const std::size_t n_out = static_cast<std::size_t>(n_steps / ratio) + 1;

    WaveformRecord rec;
    rec.fs = opts.fs_out;
    rec.t0 = 0.0;
    rec.f_nom = cfg.f_hz;
    rec.v_base_kv = cfg.v_base_kv;
    rec.s_base_mva = cfg.s_base_mva;
    rec.t_fault = t_fault;
    rec.v_sa.reserve(n_out);
    rec.v_sb.reserve(n_out);
    rec.v_sc.reserve(n_out);
    rec.i_sa.reserve(n_out);
    rec.i_sb.reserve(n_out);
    rec.i_sc.reserve(n_out);

    // Per-phase integration state.
    const double phase_shift[3] = {0.0, -2.0 * kPi / 3.0, 2.0 * kPi / 3.0};
    double i_s[3], i_g[3], vl_a[3], vl_b[3];
    for (int ph = 0; ph < 3; ++ph) {
        const Phasor rot = polar_pu(1.0, phase_shift[ph]);
        const Phasor i_ph = i_pre_d * rot;
        const Phasor rotm1 = polar_pu(1.0, -omega * dt);
        i_s[ph] = (i_ph * rotm1).real();
        i_g[ph] = -i_s[ph];
        const double l_a0 = l_src0 + l_line_a;
        vl_a[ph] = (Phasor(0.0, omega_d * l_a0) * i_ph * rotm1).real();
        vl_b[ph] = (Phasor(0.0, -omega_d * l_b) * i_ph * rotm1).real();
    }

    double prev_ra = cfg.z_src.r + r_line_a, prev_la = l_src0 + l_line_a;
    bool prev_fault_on = false;
    double prev_rf = 0.0;
    GfmLimiterState limiter;
    double kcl_max = 0.0;
    DynValues dv_final;

    // One-cycle moving average of the squared current norm; the
    // virtual-impedance adaptation measures this instead of the raw norm so
    // that decaying-DC ripple does not modulate the virtual impedance.
    const long n_cycle = std::lround(1.0 / (cfg.f_hz * dt));
    std::vector<double> norm2_buf(static_cast<std::size_t>(n_cycle),
                                  1.5 * std::norm(i_pre_d));
    double norm2_sum = 1.5 * std::norm(i_pre_d) * static_cast<double>(n_cycle);
    std::size_t norm2_pos = 0;

    for (long n = 0; n <= n_steps; ++n) {
        const double t = static_cast<double>(n) * dt;
        const double t_rel = (t_fault >= 0.0) ? t - t_fault : -1.0;

        // Source dynamics for this step.
        DynValues dvs;
        switch (dyn.mode) {
            case SourceMode::Linear:
                break;
            case SourceMode::Scheduled:
                dvs = schedule_at(dyn.schedule, t_rel);
                break;
            case SourceMode::GfmSaturation:
            case SourceMode::GfmVirtualImpedance: {
                const double sum2 =
                    i_s[0] * i_s[0] + i_s[1] * i_s[1] + i_s[2] * i_s[2];
                norm2_sum += sum2 - norm2_buf[norm2_pos];
                norm2_buf[norm2_pos] = sum2;
                norm2_pos = (norm2_pos + 1) % norm2_buf.size();
                double i_mag;
                if (dyn.mode == SourceMode::GfmSaturation) {
                    // saturation acts on the instantaneous current
                    i_mag = std::sqrt(2.0 / 3.0 * sum2);
                } else {
                    i_mag = std::sqrt(2.0 / 3.0 * norm2_sum /
                                      static_cast<double>(norm2_buf.size()));
                }
                gfm_limiter_step(limiter, i_mag, dyn, dt);
                const double ang =
                    dyn.mode == SourceMode::GfmSaturation ? 0.0 : dyn.vi_angle;
                dvs.dr = limiter.dz_mag * std::cos(ang);
                dvs.dx = limiter.dz_mag * std::sin(ang);
                break;
            }
        }
        dv_final = dvs;

        const double r_src = cfg.z_src.r + dvs.dr;
        const double l_src = l_src0 + dvs.dx / omega;
        const double r_a = r_src + r_line_a;
        const double l_a = l_src + l_line_a;

        const bool fault_on = fault.enabled && t_fault >= 0.0 && t >= t_fault - 1e-12;
        const double r_f = fault_on ? fault_resistance_at(fault, t_rel) : 0.0;

        const bool discontinuity = std::abs(l_a - prev_la) > 1e-6 * prev_la ||
                                   std::abs(r_a - prev_ra) > 1e-6 * (prev_ra + 1e-9) ||
                                   fault_on != prev_fault_on ||
                                   (fault_on && r_f != prev_rf);

        const Phasor de =
            polar_pu(dvs.de_mag, std::arg(pf.e_s) + dvs.de_angle);

        const Phasor e_src_ph = pf.e_s - de;
        double res_step = 0.0;
        for (int ph = 0; ph < 3; ++ph) {
            const double th = omega * t + phase_shift[ph];
            const double es = std::abs(e_src_ph) * std::cos(th + std::arg(e_src_ph));
            const double eg = std::abs(pf.e_g) * std::cos(th + std::arg(pf.e_g));

            const Companion ca = discontinuity
                                     ? backward_euler(r_a, l_a, dt, i_s[ph])
                                     : trapezoidal(r_a, l_a, dt, i_s[ph], vl_a[ph]);
            const Companion cb = discontinuity
                                     ? backward_euler(r_b, l_b, dt, i_g[ph])
                                     : trapezoidal(r_b, l_b, dt, i_g[ph], vl_b[ph]);

            const double s_sum = ca.g * es + ca.h + cb.g * eg + cb.h;
            double v_f;
            if (!fault_on) {
                v_f = s_sum / (ca.g + cb.g);
            } else if (r_f == 0.0) {
                v_f = 0.0;
            } else {
                v_f = r_f * s_sum / (1.0 + r_f * (ca.g + cb.g));
            }

            i_s[ph] = ca.g * (es - v_f) + ca.h;
            i_g[ph] = cb.g * (eg - v_f) + cb.h;
            vl_a[ph] = es - r_a * i_s[ph] - v_f;
            vl_b[ph] = eg - r_b * i_g[ph] - v_f;

            double residual;
            if (!fault_on) {
                residual = std::abs(i_s[ph] + i_g[ph]);
            } else if (r_f == 0.0) {
                residual = 0.0;  // fault node pinned to ground
            } else {
                residual = std::abs(i_s[ph] + i_g[ph] - v_f / r_f);
            }
            res_step = std::max(res_step, residual);

            if (n % ratio == 0) {
                const double v_relay =
                    es - r_src * i_s[ph] - (l_src / l_a) * vl_a[ph];
                switch (ph) {
                    case 0:
                        rec.v_sa.push_back(v_relay);
                        rec.i_sa.push_back(i_s[ph]);
                        break;
                    case 1:
                        rec.v_sb.push_back(v_relay);
                        rec.i_sb.push_back(i_s[ph]);
                        break;
                    default:
                        rec.v_sc.push_back(v_relay);
                        rec.i_sc.push_back(i_s[ph]);
                        break;
                }
            }
        }
        kcl_max = std::max(kcl_max, res_step);

        prev_ra = r_a;
        prev_la = l_a;
        prev_fault_on = fault_on;
        prev_rf = r_f;
    }

    rec.kcl_residual_max = kcl_max;
    rec.final_dr = dv_final.dr;
    rec.final_dx = dv_final.dx;
    rec.validate();
    return rec;
}

}  // namespace iqdist
