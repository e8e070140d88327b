#include "iqdist/relay_quad.hpp"

#include <cmath>
#include <stdexcept>

#include "iqdist/filters.hpp"

namespace iqdist {

namespace {
constexpr int kLoopPhase[6][2] = {{0, -1}, {1, -1}, {2, -1}, {0, 1}, {1, 2}, {2, 0}};
}

void QuadSettings::validate() const {
    if (!(m > 0.0 && m < 1.0))
        throw std::invalid_argument("quad settings: reach m must be in (0,1)");
    if (!(r_reach > 0.0)) throw std::invalid_argument("quad settings: bad resistive reach");
    if (!(dir_angle > 0.0 && dir_angle < kPi / 2))
        throw std::invalid_argument("quad settings: bad directional angle");
    if (!(settle_time >= 0.0)) throw std::invalid_argument("quad settings: bad settle time");
    if (!(min_pickup > 0.0)) throw std::invalid_argument("quad settings: bad pickup level");
}

bool ZonePolygon::contains(double r, double x) const {
    int sign = 0;
    const std::size_t n = vertices.size();
    for (std::size_t k = 0; k < n; ++k) {
        const auto& a = vertices[k];
        const auto& b = vertices[(k + 1) % n];
        const double cross = (b[0] - a[0]) * (x - a[1]) - (b[1] - a[1]) * (r - a[0]);
        if (cross > 1e-15) {
            if (sign < 0) return false;
            sign = 1;
        } else if (cross < -1e-15) {
            if (sign > 0) return false;
            sign = -1;
        }
    }
    return true;
}

ZonePolygon make_zone1(const QuadSettings& s) {
    s.validate();
    const double x_reach = s.m * s.line.x1;
    const double line_angle = s.line.z1().angle();
    const double beta = line_angle + s.dir_angle;  // left directional line

    ZonePolygon z;
    z.zone_id = 1;
    const double tilt_slope = std::tan(s.tilt);
    // top line through (0, x_reach) with the tilt slope; left directional line
    // through the origin at angle beta
    const double denom = std::sin(beta) - std::cos(beta) * tilt_slope;
    if (std::abs(denom) < 1e-12)
        throw std::invalid_argument("zone polygon: degenerate top/directional geometry");
    const double t_left = x_reach / denom;
    z.vertices = {{0.0, 0.0},
                  {s.r_reach, -s.r_reach * std::tan(s.dir_angle)},
                  {s.r_reach, x_reach + s.r_reach * tilt_slope},
                  {t_left * std::cos(beta), t_left * std::sin(beta)}};

    // the characteristic must cover the protected line section
    const double mx = s.m * s.line.r1, my = s.m * s.line.x1;
    if (!z.contains(mx, my) || !z.contains(0.0, 0.0))
        throw std::invalid_argument("zone polygon does not contain the protected segment");
    return z;
}

PhasorStream phasor_estimate(const WaveformRecord& rec, const QuadSettings& s) {
    rec.validate();
    s.validate();
    const double cycles = rec.fs / s.f_nom;
    const std::size_t n_cycle = static_cast<std::size_t>(std::lround(cycles));
    if (n_cycle < 8 || std::abs(cycles - static_cast<double>(n_cycle)) > 1e-6)
        throw std::invalid_argument(
            "phasor estimate: sample rate must be an integer multiple of f_nom");
    const std::size_t n = rec.size();
    if (n < n_cycle + 1)
        throw std::invalid_argument("phasor estimate: record shorter than one cycle");

    PhasorStream out;
    out.fs = rec.fs;
    out.t0 = rec.t0;
    out.first_valid = n_cycle - 1;
    const double w = 2.0 * kPi * s.f_nom;

    Phasor i_correction(1.0, 0.0);
    for (int ph = 0; ph < 3; ++ph) {
        const std::vector<double>& v_raw = rec.voltage(ph);
        std::vector<double> i_raw = rec.current(ph);
        if (s.mimic) {
            MimicFilter mimic(s.mimic_tau, rec.fs, s.f_nom);
            i_raw = mimic.apply(i_raw);
            i_correction = std::exp(Phasor(0.0, -mimic.phase_at_system_frequency()));
        }
        out.v[ph].assign(n, Phasor(0.0, 0.0));
        out.i[ph].assign(n, Phasor(0.0, 0.0));
        // rotating reference e^{-jwt} so a steady cosine maps to a constant
        std::vector<Phasor> rot(n);
        for (std::size_t k = 0; k < n; ++k)
            rot[k] = std::exp(Phasor(0.0, -w * rec.time_at(k)));
        for (std::size_t k = n_cycle - 1; k < n; ++k) {
            Phasor av(0.0, 0.0), ai(0.0, 0.0);
            for (std::size_t j = k + 1 - n_cycle; j <= k; ++j) {
                av += v_raw[j] * rot[j];
                ai += i_raw[j] * rot[j];
            }
            const double scale = 2.0 / static_cast<double>(n_cycle);
            out.v[ph][k] = scale * av;
            out.i[ph][k] = scale * ai * i_correction;
        }
    }
    return out;
}

ImpedanceTrajectory loop_impedance(const PhasorStream& ph, const QuadSettings& s) {
    const std::size_t n = ph.v[0].size();
    const Phasor z1(s.line.r1, s.line.x1);
    const Phasor z0(s.line.r0, s.line.x0);
    const Phasor k0 = (z0 - z1) / (3.0 * z1);

    ImpedanceTrajectory out;
    out.first_valid = ph.first_valid;
    out.fs = ph.fs;
    out.t0 = ph.t0;
    for (auto& l : out.loops) l.assign(n, ImpedanceSample{});

    for (std::size_t k = ph.first_valid; k < n; ++k) {
        const Phasor i0 = (ph.i[0][k] + ph.i[1][k] + ph.i[2][k]) / 3.0;
        for (int l = 0; l < 6; ++l) {
            const int x = kLoopPhase[l][0], y = kLoopPhase[l][1];
            Phasor v_loop, i_loop;
            if (y < 0) {
                v_loop = ph.v[x][k];
                i_loop = ph.i[x][k] + k0 * 3.0 * i0;
            } else {
                v_loop = ph.v[x][k] - ph.v[y][k];
                i_loop = ph.i[x][k] - ph.i[y][k];
            }
            if (std::abs(i_loop) < s.min_pickup) continue;  // below pickup: no sample
            const Phasor z = v_loop / i_loop;
            out.loops[l][k] = {z.real(), z.imag(), true};
        }
    }
    return out;
}

QuadDecision zone_test(const ImpedanceTrajectory& traj, const ZonePolygon& zone,
                       const QuadSettings& s) {
    QuadDecision dec;
    dec.trajectory = traj;
    const std::size_t n = traj.loops[0].size();
    const std::size_t settle =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(s.settle_time * traj.fs)));

    double best = -1.0;
    for (int l = 0; l < 6; ++l) {
        dec.inside[l].assign(n, false);
        std::size_t run = 0;
        std::size_t run_start = 0;
        std::size_t max_run = 0;
        bool ends_inside = false;
        std::size_t terminal_start = 0;
        for (std::size_t k = traj.first_valid; k < n; ++k) {
            const ImpedanceSample& zs = traj.loops[l][k];
            const bool in = zs.valid && zone.contains(zs.r, zs.x);
            dec.inside[l][k] = in;
            if (in) {
                if (run == 0) run_start = k;
                ++run;
                max_run = std::max(max_run, run);
                ends_inside = true;
                terminal_start = run_start;
            } else {
                run = 0;
                ends_inside = false;
            }
        }
        const bool steady = ends_inside && run >= settle;
        if (steady) {
            const double t_pick =
                traj.t0 + static_cast<double>(terminal_start) / traj.fs + s.settle_time;
            if (best < 0.0 || t_pick < best) {
                best = t_pick;
                dec.loop = kLoops[static_cast<std::size_t>(l)];
            }
        }
        if (!steady && max_run >= 2) dec.transient_overreach = true;
    }
    if (best >= 0.0) {
        dec.picked_up = true;
        dec.pickup_time = best;
    }
    return dec;
}

QuadDecision evaluate_quad_relay(const WaveformRecord& rec, const QuadSettings& s) {
    const PhasorStream ph = phasor_estimate(rec, s);
    const ImpedanceTrajectory traj = loop_impedance(ph, s);
    return zone_test(traj, make_zone1(s), s);
}

}  // namespace iqdist
