#include "iqdist/relay_iq.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "iqdist/filters.hpp"
#include "iqdist/phasor.hpp"

namespace iqdist {

namespace {

// Snap threshold: running sums this close to zero count as zero, so float
// residue from cancelling ripple cannot masquerade as sustained positivity.
constexpr double kSumZeroTol = 1e-15;

std::vector<double> central_difference(const std::vector<double>& x, double fs) {
    const std::size_t n = x.size();
    std::vector<double> d(n, 0.0);
    if (n < 2) return d;
    d[0] = (x[1] - x[0]) * fs;
    for (std::size_t k = 1; k + 1 < n; ++k) d[k] = (x[k + 1] - x[k - 1]) * fs * 0.5;
    d[n - 1] = (x[n - 1] - x[n - 2]) * fs;
    return d;
}

// loop index -> phase pair; LG loops use (phase, -1)
constexpr int kLoopPhase[6][2] = {{0, -1}, {1, -1}, {2, -1}, {0, 1}, {1, 2}, {2, 0}};

}  // namespace

const char* loop_name(Loop l) {
    switch (l) {
        case Loop::AG: return "AG";
        case Loop::BG: return "BG";
        case Loop::CG: return "CG";
        case Loop::AB: return "AB";
        case Loop::BC: return "BC";
        case Loop::CA: return "CA";
    }
    return "?";
}

void RelaySettings::validate() const {
    if (!(m > 0.0 && m < 1.0))
        throw std::invalid_argument("relay settings: reach m must be in (0,1)");
    if (p < 1) throw std::invalid_argument("relay settings: memory depth p must be >= 1");
    if (k_rst < 1.0) throw std::invalid_argument("relay settings: k_rst must be >= 1");
    if (hold_time < 0.010)
        throw std::invalid_argument("relay settings: hold time must be >= 10 ms");
    if (!(f_nom > 0.0)) throw std::invalid_argument("relay settings: bad f_nom");
}

RelayFrontEnd relay_front_end(const WaveformRecord& rec, const RelaySettings& s) {
    rec.validate();
    s.validate();
    const double cycles = rec.fs / s.f_nom;
    const std::size_t n_cycle = static_cast<std::size_t>(std::lround(cycles));
    if (n_cycle < 8 || std::abs(cycles - static_cast<double>(n_cycle)) > 1e-6)
        throw std::invalid_argument(
            "relay front end: sample rate must be an integer multiple of f_nom");

    RelayFrontEnd fe;
    fe.fs = rec.fs;
    fe.t0 = rec.t0;
    fe.n_cycle = n_cycle;
    fe.memory = static_cast<std::size_t>(s.p) * n_cycle;
    const std::size_t n = rec.size();
    if (n <= fe.memory + 2)
        throw std::invalid_argument("relay front end: insufficient history for the memory");

    for (int ph = 0; ph < 3; ++ph) {
        ButterworthLowPass lp(3, s.lp_cutoff, rec.fs);
        fe.v[ph] = lp.apply(rec.voltage(ph));
        ButterworthLowPass lp2(3, s.lp_cutoff, rec.fs);
        fe.i[ph] = lp2.apply(rec.current(ph));
    }
    fe.i0.resize(n);
    for (std::size_t k = 0; k < n; ++k)
        fe.i0[k] = (fe.i[0][k] + fe.i[1][k] + fe.i[2][k]) / 3.0;
    for (int ph = 0; ph < 3; ++ph) fe.didt[ph] = central_difference(fe.i[ph], rec.fs);
    fe.di0dt = central_difference(fe.i0, rec.fs);

    // Disturbance detector on the naturally delayed IQs.
    const std::size_t hold =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(s.detect_hold * rec.fs)));
    std::size_t run = 0;
    for (std::size_t k = fe.memory; k < n && fe.arm_index < 0; ++k) {
        bool hit = false;
        for (int ph = 0; ph < 3 && !hit; ++ph) {
            const double div = fe.v[ph][k] - fe.v[ph][k - fe.memory];
            const double dii = fe.i[ph][k] - fe.i[ph][k - fe.memory];
            hit = std::abs(dii) > s.detect_di || std::abs(div) > s.detect_dv;
        }
        run = hit ? run + 1 : 0;
        if (run == 1) fe.detect_index = static_cast<std::ptrdiff_t>(k);
        if (run >= hold) fe.arm_index = static_cast<std::ptrdiff_t>(k);
    }
    if (fe.arm_index < 0) fe.detect_index = -1;

    // Memory reference: natural p-cycle delay while it stays pre-disturbance,
    // afterwards frozen onto the last clean pre-disturbance cycle. The guard
    // band keeps disturbance energy that the causal low-pass smeared ahead of
    // the detection instant out of the frozen window.
    fe.ref.resize(n, 0);
    const std::size_t guard =
        std::max<std::size_t>(3, static_cast<std::size_t>(std::lround(1e-3 * rec.fs)));
    std::size_t nd = n + fe.memory;  // effectively never freezes
    if (fe.detect_index >= 0) {
        nd = static_cast<std::size_t>(fe.detect_index);
        nd = (nd > n_cycle + guard) ? nd - guard : n_cycle;
    }
    for (std::size_t k = fe.memory; k < n; ++k) {
        std::size_t r = k - fe.memory;
        if (r >= nd) r = nd - n_cycle + (k - nd) % n_cycle;
        fe.ref[k] = r;
    }
    return fe;
}

IqChannels incremental(const RelayFrontEnd& fe, const RelaySettings&) {
    const std::size_t n = fe.size();
    IqChannels iq;
    iq.first_valid = fe.memory;
    for (auto* arr : {&iq.dv, &iq.di, &iq.ddidt})
        for (auto& ch : *arr) ch.assign(n, 0.0);
    iq.di0.assign(n, 0.0);
    iq.ddi0dt.assign(n, 0.0);

    for (std::size_t k = fe.memory; k < n; ++k) {
        const std::size_t r = fe.ref[k];
        double dvp[3], dip[3], ddp[3];
        for (int ph = 0; ph < 3; ++ph) {
            dvp[ph] = fe.v[ph][k] - fe.v[ph][r];
            dip[ph] = fe.i[ph][k] - fe.i[ph][r];
            ddp[ph] = fe.didt[ph][k] - fe.didt[ph][r];
        }
        iq.di0[k] = fe.i0[k] - fe.i0[r];
        iq.ddi0dt[k] = fe.di0dt[k] - fe.di0dt[r];
        for (int l = 0; l < 6; ++l) {
            const int x = kLoopPhase[l][0], y = kLoopPhase[l][1];
            if (y < 0) {
                iq.dv[l][k] = dvp[x];
                iq.di[l][k] = dip[x];
                iq.ddidt[l][k] = ddp[x];
            } else {
                iq.dv[l][k] = dvp[x] - dvp[y];
                iq.di[l][k] = dip[x] - dip[y];
                iq.ddidt[l][k] = ddp[x] - ddp[y];
            }
        }
    }
    return iq;
}

std::array<std::vector<double>, 6> operating_quantities(const IqChannels& iq,
                                                        const RelaySettings& s) {
    const std::size_t n = iq.di0.size();
    const double omega = 2.0 * kPi * s.f_nom;
    const double l1 = s.line.x1 / omega;
    const double l0 = s.line.x0 / omega;

    std::array<std::vector<double>, 6> psi;
    for (auto& ch : psi) ch.assign(n, 0.0);
    for (std::size_t k = iq.first_valid; k < n; ++k) {
        for (int l = 0; l < 6; ++l) {
            double dv_m = s.m * (s.line.r1 * iq.di[l][k] + l1 * iq.ddidt[l][k]);
            if (kLoopPhase[l][1] < 0) {
                dv_m += s.m * ((s.line.r0 - s.line.r1) * iq.di0[k] +
                               (l0 - l1) * iq.ddi0dt[k]);
            }
            psi[l][k] = std::abs(iq.dv[l][k] - dv_m);
        }
    }
    return psi;
}

std::array<std::vector<double>, 6> restraining_quantities(const RelayFrontEnd& fe,
                                                          const RelaySettings& s) {
    const std::size_t n = fe.size();
    const double omega = 2.0 * kPi * s.f_nom;
    const double l1 = s.line.x1 / omega;
    const double l0 = s.line.x0 / omega;

    std::array<std::vector<double>, 6> psi;
    for (auto& ch : psi) ch.assign(n, 0.0);
    for (std::size_t k = fe.memory; k < n; ++k) {
        const std::size_t r = fe.ref[k];
        for (int l = 0; l < 6; ++l) {
            const int x = kLoopPhase[l][0], y = kLoopPhase[l][1];
            double v_s, v_m;
            if (y < 0) {
                v_s = fe.v[x][r];
                v_m = s.m * (s.line.r1 * fe.i[x][r] +
                             (s.line.r0 - s.line.r1) * fe.i0[r] + l1 * fe.didt[x][r] +
                             (l0 - l1) * fe.di0dt[r]);
            } else {
                v_s = fe.v[x][r] - fe.v[y][r];
                v_m = s.m * (s.line.r1 * (fe.i[x][r] - fe.i[y][r]) +
                             l1 * (fe.didt[x][r] - fe.didt[y][r]));
            }
            psi[l][k] = s.k_rst * std::abs(v_s - v_m);
        }
    }
    return psi;
}

RunningSums running_sum(const std::array<std::vector<double>, 6>& psi_op,
                        const std::array<std::vector<double>, 6>& psi_rst,
                        const RelaySettings&, double fs, double t0,
                        std::ptrdiff_t arm_index) {
    const std::size_t n = psi_op[0].size();
    RunningSums out;
    out.start_index = arm_index >= 0 ? static_cast<std::size_t>(arm_index) : n;
    const double ts = 1.0 / fs;

    for (int l = 0; l < 6; ++l) {
        out.e_sum[l].assign(n, 0.0);
        LoopState st;
        st.loop = kLoops[static_cast<std::size_t>(l)];
        double e = 0.0;
        for (std::size_t k = out.start_index + 1; k < n; ++k) {
            const double d1 = psi_op[l][k] - psi_rst[l][k];
            const double d0 = psi_op[l][k - 1] - psi_rst[l][k - 1];
            e += 0.5 * ts * (d1 + d0);
            if (e < kSumZeroTol) e = 0.0;  // not allowed to go below zero
            out.e_sum[l][k] = e;
            if (e > 0.0) {
                if (!st.active) st.above_zero_since = t0 + static_cast<double>(k) / fs;
                st.active = true;
            } else {
                st.active = false;
                st.above_zero_since = -1.0;
            }
        }
        st.e_sum = e;
        out.final_state[l] = st;
    }
    return out;
}

RelayDecision trip_logic(const RunningSums& sums, const RelaySettings& s, double fs,
                         double t0) {
    RelayDecision dec;
    double best = -1.0;
    for (int l = 0; l < 6; ++l) {
        const auto& e = sums.e_sum[l];
        std::ptrdiff_t run_start = -1;
        for (std::size_t k = sums.start_index; k < e.size(); ++k) {
            if (e[k] > 0.0) {
                if (run_start < 0) run_start = static_cast<std::ptrdiff_t>(k);
                double trip_at = -1.0;
                if (s.trip_mode == TripMode::ConsecutiveTime) {
                    const double held =
                        static_cast<double>(k - static_cast<std::size_t>(run_start)) / fs;
                    if (held >= s.hold_time)
                        trip_at = t0 + static_cast<double>(run_start) / fs + s.hold_time;
                } else if (e[k] >= s.threshold_level) {
                    trip_at = t0 + static_cast<double>(k) / fs;
                }
                if (trip_at >= 0.0 && (best < 0.0 || trip_at < best)) {
                    best = trip_at;
                    dec.loop = kLoops[static_cast<std::size_t>(l)];
                    break;  // decision latches per loop
                }
            } else {
                run_start = -1;
            }
        }
    }
    if (best >= 0.0) {
        dec.tripped = true;
        dec.trip_time = best;
    }
    return dec;
}

RelayDecision evaluate_iq_relay(const WaveformRecord& rec, const RelaySettings& s) {
    const RelayFrontEnd fe = relay_front_end(rec, s);
    const IqChannels iq = incremental(fe, s);
    const auto psi_op = operating_quantities(iq, s);
    const auto psi_rst = restraining_quantities(fe, s);
    const RunningSums sums = running_sum(psi_op, psi_rst, s, fe.fs, fe.t0, fe.arm_index);

    RelayDecision dec = trip_logic(sums, s, fe.fs, fe.t0);
    dec.detect_time =
        fe.detect_index >= 0 ? fe.time_at(static_cast<std::size_t>(fe.detect_index)) : -1.0;
    dec.arm_time =
        fe.arm_index >= 0 ? fe.time_at(static_cast<std::size_t>(fe.arm_index)) : -1.0;
    dec.traces.psi_op = psi_op;
    dec.traces.psi_rst = psi_rst;
    dec.traces.e_sum = sums.e_sum;
    return dec;
}

}  // namespace iqdist
