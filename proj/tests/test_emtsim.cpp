#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "iqdist/emtsim.hpp"
#include "iqdist/filters.hpp"
#include "iqdist/netmodel.hpp"
#include "iqdist/waveform.hpp"

using namespace iqdist;

namespace {

/// Full-cycle fundamental phasor of a sampled channel, window ending at `end`.
Phasor cycle_phasor(const std::vector<double>& x, const WaveformRecord& rec,
                    std::size_t end) {
    const std::size_t n_cycle = static_cast<std::size_t>(rec.fs / rec.f_nom);
    REQUIRE(end + 1 >= n_cycle);
    Phasor acc(0.0, 0.0);
    const double w = 2.0 * kPi * rec.f_nom;
    for (std::size_t k = end + 1 - n_cycle; k <= end; ++k) {
        acc += x[k] * std::exp(Phasor(0.0, -w * rec.time_at(k)));
    }
    return 2.0 / static_cast<double>(n_cycle) * acc;
}

/// IQ of a channel with the plain p-cycle delay (test-side definition).
std::vector<double> plain_iq(const std::vector<double>& x, double fs, double f, int p) {
    const std::size_t d = static_cast<std::size_t>(p * fs / f);
    std::vector<double> out(x.size(), 0.0);
    for (std::size_t n = d; n < x.size(); ++n) out[n] = x[n] - x[n - d];
    return out;
}

/// IQ whose memory reference stays inside the pre-disturbance window: once the
/// natural p-cycle delay would cross the event, the reference wraps around the
/// last pre-event cycle.
std::vector<double> frozen_iq(const std::vector<double>& x, double fs, double f, int p,
                              double t_event) {
    const std::size_t n_cycle = static_cast<std::size_t>(std::lround(fs / f));
    const std::size_t d = static_cast<std::size_t>(p) * n_cycle;
    const std::size_t nf = static_cast<std::size_t>(std::ceil(t_event * fs - 1e-9));
    std::vector<double> out(x.size(), 0.0);
    for (std::size_t n = d; n < x.size(); ++n) {
        std::size_t ref = n - d;
        if (ref >= nf) ref = nf - n_cycle + (n - nf) % n_cycle;
        out[n] = x[n] - x[ref];
    }
    return out;
}

double max_abs_tail(const std::vector<double>& x, std::size_t from) {
    double m = 0.0;
    for (std::size_t n = from; n < x.size(); ++n) m = std::max(m, std::abs(x[n]));
    return m;
}

}  // namespace

TEST_CASE("no-fault linear run stays in periodic steady state") {
    SystemConfig cfg;
    WaveformRecord rec = simulate(cfg, SourceDynamics::linear(), FaultEvent::none(), 0.3);
    REQUIRE(rec.size() > 1000);

    for (const auto* ch : {&rec.v_sa, &rec.v_sb, &rec.v_sc, &rec.i_sa, &rec.i_sb,
                           &rec.i_sc}) {
        const auto iq = plain_iq(*ch, rec.fs, rec.f_nom, 2);
        CHECK(max_abs_tail(iq, 200) < 1e-6);
    }
    CHECK(rec.kcl_residual_max <= 1e-8);
}

TEST_CASE("pre-fault load flow is reproduced by the waveform") {
    SystemConfig cfg;
    WaveformRecord rec = simulate(cfg, SourceDynamics::linear(), FaultEvent::none(), 0.2);
    const PreFault pf = pre_fault_solve(cfg, 0.5);
    const std::size_t end = rec.size() - 1;
    const Phasor v = cycle_phasor(rec.v_sa, rec, end);
    const Phasor i = cycle_phasor(rec.i_sa, rec, end);
    CHECK(std::abs(v - pf.v_relay) < 2e-4);
    CHECK(std::abs(i - pf.i_s_pre) < 2e-4);
}

TEST_CASE("quasi-static validation: stepped source change with a resistive fault") {
    // Source impedance x5, IVS magnitude to 0.33 pu, 10 ohm fault at m_f = 0.2.
    SystemConfig cfg;
    const double rf_pu = cfg.ohm_to_pu(10.0);
    SourceDynamics dyn = SourceDynamics::scheduled(
        {{0.0, 4.0 * cfg.z_src.r, 4.0 * cfg.z_src.x, 1.0 - 0.33, 0.0, 0.0}});
    FaultEvent fault;
    fault.t_on = 0.1;
    fault.m_f = 0.2;
    fault.r_f_steps = {{0.0, rf_pu}};

    WaveformRecord rec = simulate(cfg, dyn, fault, 0.4);
    CHECK(rec.kcl_residual_max <= 1e-8);
    REQUIRE(rec.t_fault > 0.0);

    IqNetworkCase c = make_case(cfg, 0.2, FaultResistance::ohmic(rf_pu),
                                Impedance{4.0 * cfg.z_src.r, 4.0 * cfg.z_src.x},
                                1.0 - 0.33, 0.0, 0.8, 1.0);
    const IqSolution sol = solve_case(c);

    // Fundamental phasors of the simulated IQs, measured in the settled tail.
    const auto div = frozen_iq(rec.v_sa, rec.fs, rec.f_nom, 2, rec.t_fault);
    const auto dii = frozen_iq(rec.i_sa, rec.fs, rec.f_nom, 2, rec.t_fault);
    const std::size_t end = rec.size() - 1;
    const Phasor dv_sim = cycle_phasor(div, rec, end);
    const Phasor di_sim = cycle_phasor(dii, rec, end);

    CHECK(std::abs(std::abs(dv_sim) - std::abs(sol.dv_s)) / std::abs(sol.dv_s) < 0.02);
    CHECK(std::abs(std::abs(di_sim) - std::abs(sol.di_s)) / std::abs(sol.di_s) < 0.02);
    // angles within 2 degrees
    auto wrap = [](double a) {
        while (a > kPi) a -= 2.0 * kPi;
        while (a < -kPi) a += 2.0 * kPi;
        return a;
    };
    CHECK(std::abs(wrap(std::arg(dv_sim) - std::arg(sol.dv_s))) < deg2rad(2.0));
    CHECK(std::abs(wrap(std::arg(di_sim) - std::arg(sol.di_s))) < deg2rad(2.0));
}

TEST_CASE("memory residency: sequential steps keep matching the closed forms") {
    SystemConfig cfg;
    const double rf1 = cfg.ohm_to_pu(10.0), rf2 = cfg.ohm_to_pu(5.0);
    SourceDynamics dyn = SourceDynamics::scheduled(
        {{0.0, 2.0 * cfg.z_src.r, 2.0 * cfg.z_src.x, 0.0, 0.0, 0.0},
         {0.2, 3.0 * cfg.z_src.r, 3.0 * cfg.z_src.x, 0.3, 0.0, 0.0}});
    FaultEvent fault;
    fault.t_on = 0.1;
    fault.m_f = 0.4;
    fault.r_f_steps = {{0.0, rf1}, {0.1, rf2}};

    WaveformRecord rec = simulate(cfg, dyn, fault, 0.5);

    const auto dii = frozen_iq(rec.i_sa, rec.fs, rec.f_nom, 2, rec.t_fault);
    const auto div = frozen_iq(rec.v_sa, rec.fs, rec.f_nom, 2, rec.t_fault);

    // interval 1: [t_fault, t_fault + 0.1), settled tail
    const std::size_t n1 =
        static_cast<std::size_t>((rec.t_fault + 0.1) * rec.fs) - 2;
    IqNetworkCase c1 = make_case(cfg, 0.4, FaultResistance::ohmic(rf1),
                                 Impedance{2.0 * cfg.z_src.r, 2.0 * cfg.z_src.x}, 0.0,
                                 0.0, 0.8, 1.0);
    const IqSolution s1 = solve_case(c1);
    CHECK(std::abs(std::abs(cycle_phasor(div, rec, n1)) - std::abs(s1.dv_s)) /
              std::abs(s1.dv_s) <
          0.02);
    CHECK(std::abs(std::abs(cycle_phasor(dii, rec, n1)) - std::abs(s1.di_s)) /
              std::abs(s1.di_s) <
          0.02);

    // interval 2: settled tail of the record
    IqNetworkCase c2 = make_case(cfg, 0.4, FaultResistance::ohmic(rf2),
                                 Impedance{3.0 * cfg.z_src.r, 3.0 * cfg.z_src.x}, 0.3,
                                 0.0, 0.8, 1.0);
    const IqSolution s2 = solve_case(c2);
    const std::size_t n2 = rec.size() - 1;
    CHECK(std::abs(std::abs(cycle_phasor(div, rec, n2)) - std::abs(s2.dv_s)) /
              std::abs(s2.dv_s) <
          0.02);
    CHECK(std::abs(std::abs(cycle_phasor(dii, rec, n2)) - std::abs(s2.di_s)) /
              std::abs(s2.di_s) <
          0.02);
}

TEST_CASE("behavioral limiter drives the current magnitude to the limit") {
    SystemConfig cfg;
    FaultEvent fault;
    fault.t_on = 0.1;
    fault.m_f = 0.2;
    fault.r_f_steps = {{0.0, 0.0}};  // bolted close-in fault

    for (SourceDynamics dyn :
         {SourceDynamics::gfm_saturation(), SourceDynamics::gfm_virtual_impedance()}) {
        WaveformRecord rec = simulate(cfg, dyn, fault, 0.6);
        const std::size_t end = rec.size() - 1;
        const Phasor i = cycle_phasor(rec.i_sa, rec, end);
        CHECK(std::abs(i) == doctest::Approx(1.2).epsilon(0.01));
        CHECK(rec.final_dr + rec.final_dx > 0.0);
    }
}

TEST_CASE("limiter stays idle below the current limit") {
    SourceDynamics dyn = SourceDynamics::gfm_saturation();
    GfmLimiterState st;
    for (int k = 0; k < 1000; ++k) gfm_limiter_step(st, 1.0, dyn, 50e-6);
    CHECK(st.dz_mag == 0.0);
}

TEST_CASE("steady limiter operating point maps onto the closed forms") {
    SystemConfig cfg;
    FaultEvent fault;
    fault.t_on = 0.1;
    fault.m_f = 0.5;
    fault.r_f_steps = {{0.0, cfg.ohm_to_pu(10.0)}};

    WaveformRecord rec = simulate(cfg, SourceDynamics::gfm_saturation(), fault, 0.5);
    IqNetworkCase c = make_case(cfg, 0.5, FaultResistance::ohmic(cfg.ohm_to_pu(10.0)),
                                Impedance{rec.final_dr, rec.final_dx}, 0.0, 0.0, 0.8,
                                1.0);
    const IqSolution sol = solve_case(c);

    const auto div = frozen_iq(rec.v_sa, rec.fs, rec.f_nom, 2, rec.t_fault);
    const auto dii = frozen_iq(rec.i_sa, rec.fs, rec.f_nom, 2, rec.t_fault);
    const std::size_t end = rec.size() - 1;
    CHECK(std::abs(std::abs(cycle_phasor(div, rec, end)) - std::abs(sol.dv_s)) /
              std::abs(sol.dv_s) <
          0.02);
    CHECK(std::abs(std::abs(cycle_phasor(dii, rec, end)) - std::abs(sol.di_s)) /
              std::abs(sol.di_s) <
          0.02);
}

TEST_CASE("fault inception aligns to the phase-A voltage zero") {
    SystemConfig cfg;
    FaultEvent fault;
    fault.t_on = 0.1;
    fault.m_f = 0.3;
    fault.r_f_steps = {{0.0, 0.0}};
    WaveformRecord rec = simulate(cfg, SourceDynamics::linear(), fault, 0.2);
    CHECK(rec.t_fault >= fault.t_on - 1e-12);
    CHECK(rec.t_fault < fault.t_on + 0.011);  // within half a cycle + snap

    const PreFault pf = pre_fault_solve(cfg, 0.3);
    const double w = cfg.omega();
    const double v_f_at_inception =
        std::abs(pf.v_f_pre) * std::cos(w * rec.t_fault + std::arg(pf.v_f_pre));
    CHECK(std::abs(v_f_at_inception) < 0.02 * std::abs(pf.v_f_pre));
}

TEST_CASE("input validation") {
    SystemConfig cfg;
    FaultEvent fault;
    fault.t_on = 0.01;  // less than two pre-fault cycles
    CHECK_THROWS_AS(simulate(cfg, SourceDynamics::linear(), fault, 0.2),
                    std::invalid_argument);

    FaultEvent bad;
    bad.t_on = 0.1;
    bad.r_f_steps = {{0.0, -1.0}};
    CHECK_THROWS_AS(simulate(cfg, SourceDynamics::linear(), bad, 0.2),
                    std::invalid_argument);

    SimOptions opts;
    opts.dt = 1e-3;  // violates dt <= 1/(10 fs_out)
    CHECK_THROWS_AS(simulate(cfg, SourceDynamics::linear(), FaultEvent::none(), 0.2, opts),
                    std::invalid_argument);
}

TEST_CASE("waveform CSV round-trips losslessly") {
    SystemConfig cfg;
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "iqdist_wave_test";
    fs::create_directories(dir);

    FaultEvent faulted;
    faulted.t_on = 0.1;
    faulted.m_f = 0.6;
    faulted.r_f_steps = {{0.0, cfg.ohm_to_pu(5.0)}};

    FaultEvent stepped = faulted;
    stepped.r_f_steps = {{0.0, cfg.ohm_to_pu(10.0)}, {0.05, cfg.ohm_to_pu(5.0)}};

    int idx = 0;
    for (const auto& [dyn, fault] :
         {std::pair{SourceDynamics::linear(), FaultEvent::none()},
          std::pair{SourceDynamics::linear(), faulted},
          std::pair{SourceDynamics::scheduled({{0.0, 0.1, 0.3, 0.0, 0.0, 0.0}}),
                    stepped}}) {
        WaveformRecord rec = simulate(cfg, dyn, fault, 0.25);
        const std::string path = (dir / ("wave" + std::to_string(idx++) + ".csv")).string();
        export_waveform(rec, path);
        const WaveformRecord back = import_waveform(path);
        REQUIRE(back.size() == rec.size());
        CHECK(back.fs == rec.fs);
        for (std::size_t n = 0; n < rec.size(); ++n) {
            CHECK(back.v_sa[n] == rec.v_sa[n]);
            CHECK(back.v_sb[n] == rec.v_sb[n]);
            CHECK(back.v_sc[n] == rec.v_sc[n]);
            CHECK(back.i_sa[n] == rec.i_sa[n]);
            CHECK(back.i_sb[n] == rec.i_sb[n]);
            CHECK(back.i_sc[n] == rec.i_sc[n]);
        }
        // exporting the re-import reproduces the file byte for byte
        const std::string path2 = path + ".again";
        export_waveform(back, path2);
        std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
        std::string s1((std::istreambuf_iterator<char>(f1)),
                       std::istreambuf_iterator<char>());
        std::string s2((std::istreambuf_iterator<char>(f2)),
                       std::istreambuf_iterator<char>());
        CHECK(s1 == s2);
    }
}

TEST_CASE("truncated waveform CSV is rejected with a line number") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "iqdist_wave_test";
    fs::create_directories(dir);
    const std::string path = (dir / "trunc.csv").string();
    {
        std::ofstream f(path);
        f << "t,v_sa,v_sb,v_sc,i_sa,i_sb,i_sc\n";
        f << "0,1,2,3,4,5,6\n";
        f << "0.0002,1,2,3\n";
    }
    CHECK_THROWS_WITH_AS(import_waveform(path), doctest::Contains(":3:"),
                         std::runtime_error);
}
