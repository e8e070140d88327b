#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "iqdist/netmodel.hpp"

using namespace iqdist;

namespace {

IqNetworkCase base_case() {
    SystemConfig cfg;
    return make_case(cfg, 0.5, FaultResistance::ohmic(cfg.ohm_to_pu(5.0)),
                     Impedance{0.0, 0.0}, 0.0, 0.0, 0.8, 1.0);
}

double rel_err(Phasor a, Phasor b) {
    return std::abs(a - b) / std::max(std::abs(b), 1e-12);
}

}  // namespace

TEST_CASE("aux quantities: trivial fault-resistance limits") {
    IqNetworkCase c = base_case();

    c.r_f = FaultResistance::solid();
    AuxQuantities aux = aux_quantities(c);
    CHECK(aux.z_y.mag() == doctest::Approx(0.0));

    c.r_f = FaultResistance::open_circuit();
    aux = aux_quantities(c);
    const Phasor zb = c.z_g.to_complex() + (1.0 - c.m_f) * c.z_l.to_complex();
    CHECK(std::abs(aux.z_y.to_complex() - zb) < 1e-15);
}

TEST_CASE("aux quantities: frozen hand-evaluated values") {
    // All impedances 0.1 + j1.0, m_f = 0.5, r_f = 1.0. Expected values were
    // computed independently by explicit complex arithmetic.
    IqNetworkCase c;
    c.z_s = c.dz_s = c.z_g = c.z_l = Impedance{0.1, 1.0};
    c.m_f = 0.5;
    c.m = 0.8;
    c.r_f = FaultResistance::ohmic(1.0);
    c.v_f_pre = Phasor(1.0, 0.0);
    c.i_s_pre = Phasor(0.0, 0.0);

    const AuxQuantities aux = aux_quantities(c);
    CHECK(aux.z_x.re == doctest::Approx(-3.7125).epsilon(1e-12));
    CHECK(aux.z_x.im == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(aux.z_sgl.r == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(aux.z_sgl.x == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(aux.z_y.r == doctest::Approx(0.6780965710286915).epsilon(1e-12));
    CHECK(aux.z_y.x == doctest::Approx(0.4198740377886634).epsilon(1e-12));
}

TEST_CASE("aux quantities: degenerate parallel combination") {
    IqNetworkCase c = base_case();
    c.m_f = 1.0;
    c.z_g = Impedance{0.0, 0.0};
    c.r_f = FaultResistance::solid();
    CHECK_THROWS_AS(aux_quantities(c), DegenerateNetworkError);
}

TEST_CASE("no IQs without a driving change: open fault, no source change") {
    IqNetworkCase c = base_case();
    c.r_f = FaultResistance::open_circuit();
    c.dz_s = Impedance{0.0, 0.0};
    c.de_s = Phasor(0.0, 0.0);
    CHECK(std::abs(incremental_current(c)) < 1e-15);
    CHECK(std::abs(incremental_voltage(c)) < 1e-15);
}

TEST_CASE("infinite source impedance change forces di_s -> -i_s_pre") {
    IqNetworkCase c = base_case();
    c.dz_s = Impedance::from_polar(1e9, deg2rad(80.0));
    const Phasor di = incremental_current(c);
    CHECK(std::abs(di + c.i_s_pre) < 1e-6);
}

TEST_CASE("stiff source with no source change keeps dv_s at zero") {
    IqNetworkCase c = base_case();
    c.z_s = Impedance{0.0, 0.0};
    c.dz_s = Impedance{0.0, 0.0};
    c.de_s = Phasor(0.0, 0.0);
    CHECK(std::abs(incremental_voltage(c)) < 1e-12);
    const OracleResult o = nodal_oracle(c);
    CHECK(std::abs(o.dv_s) < 1e-12);
}

TEST_CASE("operating quantity equals the ideal form for a linear solid fault at reach") {
    IqNetworkCase c = base_case();
    c.r_f = FaultResistance::solid();
    c.dz_s = Impedance{0.0, 0.0};
    c.de_s = Phasor(0.0, 0.0);
    c.m_f = c.m;
    CHECK(operating_quantity(c) == doctest::Approx(std::abs(c.v_f_pre)).epsilon(1e-9));
}

TEST_CASE("ideal operating quantity: substitution limits") {
    IqNetworkCase c = base_case();
    c.m_f = c.m;
    CHECK(ideal_operating_quantity(c) == doctest::Approx(std::abs(c.v_f_pre)).epsilon(1e-12));

    c.m_f = 0.0;
    const double expect = std::abs(c.v_f_pre) *
                          std::abs(c.z_s.to_complex() + c.m * c.z_l.to_complex()) /
                          std::abs(c.z_s.to_complex());
    CHECK(ideal_operating_quantity(c) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("homogeneous ideal case reduces to the scalar SIR ratio 11/7") {
    IqNetworkCase c;
    c.z_l = Impedance::from_polar(1.0, deg2rad(80.0));
    c.z_s = Impedance::from_polar(0.3, deg2rad(80.0));
    c.z_g = Impedance::from_polar(0.3, deg2rad(80.0));
    c.m = 0.8;
    c.m_f = 0.4;
    c.v_f_pre = Phasor(1.0, 0.0);
    CHECK(ideal_operating_quantity(c) == doctest::Approx(11.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("restraining quantity") {
    IqNetworkCase c = base_case();
    c.k_rst = 1.0;
    c.v_f_pre = Phasor(1.0, 0.0);
    CHECK(restraining_quantity(c) == doctest::Approx(1.0));
    c.k_rst = 1.1;
    c.v_f_pre = Phasor(0.95, 0.0);
    CHECK(restraining_quantity(c) == doctest::Approx(1.045));
}

TEST_CASE("restraining quantity from the pre-fault load flow") {
    SystemConfig cfg;
    const PreFault pf = pre_fault_solve(cfg, 0.5);
    IqNetworkCase c = make_case(cfg, 0.5, FaultResistance::solid(), Impedance{}, 0.0, 0.0,
                                0.8, 1.0);
    CHECK(restraining_quantity(c) == doctest::Approx(std::abs(pf.v_f_pre)).epsilon(1e-12));
}

TEST_CASE("pre-fault solve: zero load") {
    SystemConfig cfg;
    cfg.solve_prefault_power = false;
    cfg.e_src_angle_rad = 0.0;
    const PreFault pf = pre_fault_solve(cfg, 0.3);
    CHECK(std::abs(pf.i_s_pre) < 1e-15);
    CHECK(std::abs(pf.v_f_pre - Phasor(1.0, 0.0)) < 1e-15);
}

TEST_CASE("pre-fault solve: lossless homogeneous power-angle closed form") {
    SystemConfig cfg;
    cfg.line.r1 = 0.0;
    cfg.line.x1 = 0.25;
    cfg.z_src = Impedance{0.0, 0.075};
    cfg.z_grid = Impedance{0.0, 0.075};
    cfg.p_pre = 1.0;
    const PreFault pf = pre_fault_solve(cfg, 0.5);
    const double x_tot = 0.25 + 0.075 + 0.075;
    CHECK(std::arg(pf.e_s) == doctest::Approx(std::asin(cfg.p_pre * x_tot)).epsilon(1e-8));
    CHECK(pf.p_relay == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("pre-fault solve: KVL residual of the returned solution") {
    SystemConfig cfg;
    const PreFault pf = pre_fault_solve(cfg, 0.7);
    const Phasor z_tot =
        cfg.z_src.to_complex() + cfg.line.z1().to_complex() + cfg.z_grid.to_complex();
    const Phasor residual = pf.e_s - z_tot * pf.i_s_pre - pf.e_g;
    CHECK(std::abs(residual) < 1e-10);
    // fault-point voltage consistent from both ends
    const Phasor v_f_from_grid =
        pf.e_g + (cfg.z_grid.to_complex() + (1.0 - 0.7) * cfg.line.z1().to_complex()) *
                     pf.i_s_pre;
    CHECK(std::abs(pf.v_f_pre - v_f_from_grid) < 1e-10);
}

TEST_CASE("pre-fault solve: load beyond the transfer limit is reported") {
    SystemConfig cfg;
    cfg.p_pre = 50.0;
    CHECK_THROWS_WITH_AS(pre_fault_solve(cfg, 0.5),
                         doctest::Contains("transfer limit"), std::runtime_error);
}

TEST_CASE("nodal oracle agrees with the closed forms on a plain case") {
    IqNetworkCase c = base_case();
    const OracleResult o = nodal_oracle(c);
    CHECK(rel_err(incremental_current(c), o.di_s) < 1e-9);
    CHECK(rel_err(incremental_voltage(c), o.dv_s) < 1e-9);
}

TEST_CASE("nodal oracle: classical pure-fault reduction for a linear source") {
    IqNetworkCase c = base_case();
    c.dz_s = Impedance{0.0, 0.0};
    c.de_s = Phasor(0.0, 0.0);
    c.r_f = FaultResistance::solid();
    const OracleResult o = nodal_oracle(c);
    // classical result: di_s = v_f_pre / (Z_s + m_f Z_l) for a solid fault fed
    // from the sending side plus the grid-side divider; with R_f = 0 the grid
    // branch is decoupled, so the sending loop alone carries the fault current.
    const Phasor za = c.z_s.to_complex() + c.m_f * c.z_l.to_complex();
    CHECK(rel_err(o.di_s, c.v_f_pre / za) < 1e-12);
    CHECK(rel_err(o.dv_s, -c.z_s.to_complex() * c.v_f_pre / za) < 1e-12);
}

TEST_CASE("closed form vs oracle: randomized sweep") {
    std::mt19937_64 rng(20260809);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_real_distribution<double> ang(deg2rad(55.0), deg2rad(89.0));
    std::uniform_real_distribution<double> phase(-kPi, kPi);
    std::uniform_real_distribution<double> mf(0.05, 1.2);
    std::uniform_real_distribution<double> rf_ohm(0.0, 50.0);

    auto log_mag = [&](double lo, double hi) {
        return std::pow(10.0, lo + (hi - lo) * u01(rng));
    };

    const double z_base = 220.0 * 220.0 / 300.0;
    double worst_i = 0.0, worst_v = 0.0;
    const int kCases = 10000;
    for (int k = 0; k < kCases; ++k) {
        IqNetworkCase c;
        c.z_s = Impedance::from_polar(log_mag(-2.0, 0.3), ang(rng));
        c.z_g = Impedance::from_polar(log_mag(-2.0, 0.3), ang(rng));
        c.z_l = Impedance::from_polar(log_mag(-1.5, 0.3), ang(rng));
        c.dz_s = (u01(rng) < 0.2) ? Impedance{0.0, 0.0}
                                  : Impedance::from_polar(log_mag(-2.0, 0.5), ang(rng));
        c.m_f = mf(rng);
        c.m = 0.8;
        if (u01(rng) < 0.15)
            c.r_f = FaultResistance::solid();
        else
            c.r_f = FaultResistance::ohmic(rf_ohm(rng) / z_base);
        c.v_f_pre = polar_pu(0.3 + 0.9 * u01(rng), phase(rng));
        c.i_s_pre = polar_pu(1.2 * u01(rng), phase(rng));
        c.de_s = (u01(rng) < 0.3) ? polar_pu(0.8 * u01(rng), phase(rng)) : Phasor();

        const OracleResult o = nodal_oracle(c);
        worst_i = std::max(worst_i, rel_err(incremental_current(c), o.di_s));
        worst_v = std::max(worst_v, rel_err(incremental_voltage(c), o.dv_s));
    }
    MESSAGE("max relative error, current: ", worst_i, ", voltage: ", worst_v);
    CHECK(worst_i <= 1e-9);
    CHECK(worst_v <= 1e-9);
}

TEST_CASE("consistency identity: psi_op == |dv_s - m Z_l di_s|") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        IqNetworkCase c;
        c.z_s = Impedance::from_polar(0.02 + u01(rng), deg2rad(60 + 29 * u01(rng)));
        c.z_g = Impedance::from_polar(0.02 + u01(rng), deg2rad(60 + 29 * u01(rng)));
        c.z_l = Impedance::from_polar(0.1 + u01(rng), deg2rad(60 + 29 * u01(rng)));
        c.dz_s = Impedance::from_polar(2.0 * u01(rng), deg2rad(89 * u01(rng)));
        c.m_f = 0.05 + 1.1 * u01(rng);
        c.m = 0.8;
        c.r_f = FaultResistance::ohmic(0.3 * u01(rng));
        c.v_f_pre = polar_pu(0.5 + 0.5 * u01(rng), u01(rng));
        c.i_s_pre = polar_pu(u01(rng), u01(rng) - 0.5);
        c.de_s = polar_pu(0.5 * u01(rng), u01(rng));

        const Phasor via_iqs = incremental_voltage(c) -
                               c.m * c.z_l.to_complex() * incremental_current(c);
        const double direct = operating_quantity(c);
        CHECK(std::abs(std::abs(via_iqs) - direct) / std::max(direct, 1e-12) < 1e-9);
    }
}

TEST_CASE("boundary theorem: sign(psi_op - psi_rst) == sign(m - m_f)") {
    SystemConfig cfg;
    int combos = 0;
    for (double sir : {0.1, 0.3, 1.0, 3.0}) {
        for (double ang_deg : {60.0, 70.0, 80.0, 85.0, 89.0}) {
            SystemConfig c2 = cfg;
            c2.z_src = Impedance::from_polar(sir * 0.3, deg2rad(ang_deg));
            c2.p_pre = 0.3;  // feasible across the whole SIR range
            for (double m_f = 0.05; m_f <= 1.101; m_f += 0.05) {
                if (std::abs(m_f - 0.8) <= 0.02) continue;
                IqNetworkCase c = make_case(c2, m_f, FaultResistance::solid(),
                                            Impedance{}, 0.0, 0.0, 0.8, 1.0);
                const double op = operating_quantity(c);
                const double rst = restraining_quantity(c);
                CHECK((op > rst) == (m_f < 0.8));
                ++combos;
            }
        }
    }
    CHECK(combos >= 400);
}

TEST_CASE("homogeneous linear phase alignment of psi_op and psi_rst") {
    for (double ang_deg : {60.0, 75.0, 84.0}) {
        SystemConfig cfg;
        cfg.z_src = Impedance::from_polar(0.09, deg2rad(ang_deg));
        cfg.z_grid = Impedance::from_polar(0.09, deg2rad(ang_deg));
        cfg.line.r1 = Impedance::from_polar(0.3, deg2rad(ang_deg)).r;
        cfg.line.x1 = Impedance::from_polar(0.3, deg2rad(ang_deg)).x;
        for (double m_f : {0.2, 0.6, 0.95}) {
            IqNetworkCase c = make_case(cfg, m_f, FaultResistance::solid(), Impedance{},
                                        0.0, 0.0, 0.8, 1.0);
            const Phasor op = operating_phasor(c);
            const Phasor rst = c.v_f_pre;
            double d = std::arg(op) - std::arg(rst);
            while (d > kPi) d -= 2.0 * kPi;
            while (d < -kPi) d += 2.0 * kPi;
            const double off = std::min(std::abs(d), std::abs(kPi - std::abs(d)));
            CHECK(off < 1e-9);
        }
    }
}

TEST_CASE("limit monotonicity: |i_s_total| decreases beyond the knee") {
    SystemConfig cfg;
    IqNetworkCase c = make_case(cfg, 0.4, FaultResistance::ohmic(cfg.ohm_to_pu(5.0)),
                                Impedance{}, 0.0, 0.0, 0.8, 1.0);
    std::vector<double> mags;
    for (double lg = -2.0; lg <= 9.0; lg += 0.05) {
        c.dz_s = Impedance::from_polar(std::pow(10.0, lg), deg2rad(84.0));
        mags.push_back(std::abs(solve_case(c).i_s_total));
    }
    const auto knee = std::max_element(mags.begin(), mags.end());
    for (auto it = knee; it + 1 != mags.end(); ++it) {
        CHECK(*(it + 1) <= *it * (1.0 + 1e-12));
    }
    CHECK(mags.back() < 1e-6);  // i_s_total -> 0
    c.dz_s = Impedance::from_polar(1e9, deg2rad(84.0));
    CHECK(std::abs(incremental_current(c) + c.i_s_pre) < 1e-6);
}

TEST_CASE("superposition consistency: i_s_total equals the disturbance-network current") {
    SystemConfig cfg;
    IqNetworkCase c = make_case(cfg, 0.6, FaultResistance::ohmic(cfg.ohm_to_pu(8.0)),
                                Impedance{0.5, 0.3}, 0.1, 0.2, 0.8, 1.0);
    const IqSolution s = solve_case(c);
    const DisturbanceSolution d = disturbance_network(c);
    CHECK(rel_err(s.i_s_total, d.i_s) < 1e-9);
}

TEST_CASE("case validation rejects bad inputs") {
    IqNetworkCase c = base_case();
    c.m = 1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = base_case();
    c.k_rst = 0.5;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = base_case();
    c.dz_s = Impedance{0.1, -0.2};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.allow_negative_dx = true;
    CHECK_NOTHROW(c.validate());
}
