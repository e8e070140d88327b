#include "iqdist/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace iqdist {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory: " + dir);
}

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << text;
}

void write_manifest(const Scenario& sc, const RunOptions& opt) {
    json m;
    m["tool"] = "iqdist";
    m["version"] = "0.1.0";
    m["command"] = opt.command;
    m["scenario_hash"] = sc.hash;
    m["seed"] = sc.seed;
    m["jobs"] = opt.jobs;
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::ostringstream ts;
    ts << std::put_time(std::gmtime(&tt), "%FT%TZ");
    m["timestamp_utc"] = ts.str();
    write_text(join(opt.out_dir, "run_manifest.json"), m.dump(2) + "\n");
}

json phasor_json(Phasor p) {
    return json{{"re", p.real()},
                {"im", p.imag()},
                {"mag", std::abs(p)},
                {"angle_deg", rad2deg(std::arg(p))}};
}

IqNetworkCase analysis_case(const Scenario& sc) {
    if (sc.dynamics.mode == SourceMode::GfmSaturation ||
        sc.dynamics.mode == SourceMode::GfmVirtualImpedance)
        throw ScenarioError("/dynamics/mode",
                            "analyze needs linear or scheduled dynamics; behavioral "
                            "limiter operating points come from simulate");
    Impedance dz{0.0, 0.0};
    double de_mag = 0.0, de_angle = 0.0;
    if (sc.dynamics.mode == SourceMode::Scheduled && !sc.dynamics.schedule.empty()) {
        const ScheduleStep& last = sc.dynamics.schedule.back();
        dz = Impedance{last.dr_s, last.dx_s};
        de_mag = last.de_mag;
        de_angle = last.de_angle;
    }
    FaultResistance rf = FaultResistance::open_circuit();
    if (sc.fault.enabled && !sc.fault.r_f_steps.empty())
        rf = FaultResistance::ohmic(sc.fault.r_f_steps.back().r_f);
    IqNetworkCase c = make_case(sc.system, sc.fault.m_f, rf, dz, de_mag, de_angle,
                                sc.relay.m, sc.relay.k_rst);
    c.validate();
    return c;
}

void write_iq_decision(const RelayDecision& dec, const Scenario& sc,
                       const std::string& path) {
    json d;
    d["element"] = "iq_distance";
    d["tripped"] = dec.tripped;
    d["trip_time_s"] = dec.trip_time;
    d["loop"] = dec.tripped ? loop_name(dec.loop) : "";
    d["detect_time_s"] = dec.detect_time;
    d["arm_time_s"] = dec.arm_time;
    d["trip_mode"] = sc.relay.trip_mode == TripMode::ConsecutiveTime
                         ? "consecutive_time"
                         : "threshold";
    d["settings_hash"] = sc.hash;
    write_text(path, d.dump(2) + "\n");
}

void write_quad_decision(const QuadDecision& dec, const Scenario& sc,
                         const std::string& path) {
    json d;
    d["element"] = "quadrilateral_distance";
    d["picked_up"] = dec.picked_up;
    d["pickup_time_s"] = dec.pickup_time;
    d["loop"] = dec.picked_up ? loop_name(dec.loop) : "";
    d["transient_overreach"] = dec.transient_overreach;
    d["settings_hash"] = sc.hash;
    write_text(path, d.dump(2) + "\n");
}

void write_iq_traces(const RelayDecision& dec, double fs, double t0,
                     const std::string& out_dir) {
    for (int l = 0; l < 6; ++l) {
        const std::string path =
            join(out_dir, std::string("traces_iq_") +
                              loop_name(kLoops[static_cast<std::size_t>(l)]) + ".csv");
        std::FILE* f = std::fopen(path.c_str(), "wb");
        if (!f) throw std::runtime_error("cannot open for writing: " + path);
        std::fputs("t,psi_op,psi_rst,e_sum\n", f);
        const auto& op = dec.traces.psi_op[l];
        const auto& rst = dec.traces.psi_rst[l];
        const auto& es = dec.traces.e_sum[l];
        for (std::size_t k = 0; k < op.size(); ++k) {
            std::fprintf(f, "%.10g,%.10g,%.10g,%.10g\n",
                         t0 + static_cast<double>(k) / fs, op[k], rst[k], es[k]);
        }
        std::fclose(f);
    }
}

void write_quad_trajectory(const QuadDecision& dec, double decimate_ms,
                           const std::string& out_dir) {
    const std::string path = join(out_dir, "trajectory.csv");
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    std::fputs("t,loop,r,x,inside_z1\n", f);
    const ImpedanceTrajectory& traj = dec.trajectory;
    const std::size_t stride = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(decimate_ms * 1e-3 * traj.fs)));
    for (int l = 0; l < 6; ++l) {
        const auto& loop = traj.loops[l];
        for (std::size_t k = traj.first_valid; k < loop.size(); k += stride) {
            if (!loop[k].valid) continue;
            std::fprintf(f, "%.10g,%s,%.10g,%.10g,%d\n",
                         traj.t0 + static_cast<double>(k) / traj.fs,
                         loop_name(kLoops[static_cast<std::size_t>(l)]), loop[k].r,
                         loop[k].x, dec.inside[l][k] ? 1 : 0);
        }
    }
    std::fclose(f);
}

void run_relays_and_write(const WaveformRecord& rec, const Scenario& sc,
                          const RunOptions& opt) {
    const RelayDecision iq = evaluate_iq_relay(rec, sc.relay);
    const QuadDecision quad = evaluate_quad_relay(rec, sc.quad);
    write_iq_decision(iq, sc, join(opt.out_dir, "decision_iq.json"));
    write_quad_decision(quad, sc, join(opt.out_dir, "decision_quad.json"));
    write_iq_traces(iq, rec.fs, rec.t0, opt.out_dir);
    write_quad_trajectory(quad, opt.traj_decimate_ms, opt.out_dir);
}

std::string cell_suffix(const SweepCell& cell, const SystemConfig& cfg) {
    std::ostringstream s;
    s << "mf" << cell.m_f << "_rf";
    if (cell.open_fault)
        s << "open";
    else
        s << cfg.pu_to_ohm(cell.r_f_pu);
    return s.str();
}

}  // namespace

void run_analyze(const Scenario& sc, const RunOptions& opt) {
    ensure_dir(opt.out_dir);
    const IqNetworkCase c = analysis_case(sc);
    const IqSolution sol = solve_case(c);
    const OracleResult oracle = nodal_oracle(c);
    const PreFault pf = pre_fault_solve(sc.system, sc.fault.m_f);

    const double err_i = std::abs(sol.di_s - oracle.di_s) /
                         std::max(std::abs(oracle.di_s), 1e-12);
    const double err_v = std::abs(sol.dv_s - oracle.dv_s) /
                         std::max(std::abs(oracle.dv_s), 1e-12);

    const double v_base_lg_kv = sc.system.v_base_kv / std::sqrt(3.0);
    const double i_base_ka =
        sc.system.s_base_mva / (std::sqrt(3.0) * sc.system.v_base_kv);

    json out;
    out["case"] = {{"m_f", c.m_f},
                   {"m", c.m},
                   {"r_f_pu", c.r_f.open ? -1.0 : c.r_f.r},
                   {"r_f_ohm", c.r_f.open ? -1.0 : sc.system.pu_to_ohm(c.r_f.r)},
                   {"open_fault", c.r_f.open},
                   {"dz_s_pu", {{"r", c.dz_s.r}, {"x", c.dz_s.x}}},
                   {"de_s", phasor_json(c.de_s)},
                   {"k_rst", c.k_rst}};
    out["pre_fault"] = {{"v_f_pre", phasor_json(pf.v_f_pre)},
                        {"i_s_pre", phasor_json(pf.i_s_pre)},
                        {"e_s", phasor_json(pf.e_s)},
                        {"p_relay_pu", pf.p_relay}};
    out["solution"] = {{"di_s", phasor_json(sol.di_s)},
                       {"dv_s", phasor_json(sol.dv_s)},
                       {"i_s_total", phasor_json(sol.i_s_total)},
                       {"psi_op_pu", sol.psi_op},
                       {"psi_rst_pu", sol.psi_rst},
                       {"psi_op_gt_rst", sol.psi_op > sol.psi_rst}};
    out["solution_si"] = {
        {"di_s_ka_rms", std::abs(sol.di_s) * i_base_ka},
        {"dv_s_kv_rms", std::abs(sol.dv_s) * v_base_lg_kv},
        {"i_s_total_ka_rms", std::abs(sol.i_s_total) * i_base_ka},
        {"psi_op_kv_rms", sol.psi_op * v_base_lg_kv},
        {"psi_rst_kv_rms", sol.psi_rst * v_base_lg_kv}};
    out["ideal"] = {{"psi_op_pu", ideal_operating_quantity(c)}};
    out["oracle"] = {{"di_s", phasor_json(oracle.di_s)},
                     {"dv_s", phasor_json(oracle.dv_s)},
                     {"rel_err_current", err_i},
                     {"rel_err_voltage", err_v},
                     {"agrees", err_i <= 1e-9 && err_v <= 1e-9}};
    out["scenario_hash"] = sc.hash;
    write_text(join(opt.out_dir, "analysis.json"), out.dump(2) + "\n");
    write_manifest(sc, opt);
}

void run_simulate(const Scenario& sc, const RunOptions& opt) {
    ensure_dir(opt.out_dir);
    WaveformRecord rec = simulate(sc.system, sc.dynamics, sc.fault, sc.duration, sc.sim);
    rec.scenario_hash = sc.hash;
    export_waveform(rec, join(opt.out_dir, "waveform.csv"));
    run_relays_and_write(rec, sc, opt);
    write_manifest(sc, opt);
}

void run_replay(const Scenario& sc, const std::string& waveform_path,
                const RunOptions& opt) {
    ensure_dir(opt.out_dir);
    const WaveformRecord rec = import_waveform(waveform_path);
    run_relays_and_write(rec, sc, opt);
    write_manifest(sc, opt);
}

void run_sweep_cmd(const Scenario& sc, const RunOptions& opt) {
    if (!sc.has_sweep) throw ScenarioError("/sweep", "scenario has no sweep block");
    ensure_dir(opt.out_dir);
    const std::vector<RegionMap> maps = run_sweep(sc.sweep_spec(opt.jobs));
    for (const RegionMap& map : maps) {
        const std::string suffix = cell_suffix(map.cell, sc.system);
        {
            const std::string path = join(opt.out_dir, "region_" + suffix + ".csv");
            std::FILE* f = std::fopen(path.c_str(), "wb");
            if (!f) throw std::runtime_error("cannot open for writing: " + path);
            std::fputs("dr,dx,label,i_mag\n", f);
            for (const RegionPoint& pt : map.points)
                std::fprintf(f, "%.10g,%.10g,%s,%.10g\n", pt.dr, pt.dx,
                             region_label_name(pt.label), pt.i_mag);
            std::fclose(f);
        }
        {
            const std::string path = join(opt.out_dir, "boundary_" + suffix + ".csv");
            std::FILE* f = std::fopen(path.c_str(), "wb");
            if (!f) throw std::runtime_error("cannot open for writing: " + path);
            std::fputs("dr,dx\n", f);
            for (const auto& b : map.boundary)
                std::fprintf(f, "%.10g,%.10g\n", b[0], b[1]);
            std::fclose(f);
        }
    }
    write_manifest(sc, opt);
}

void run_matrix(const Scenario& sc, const RunOptions& opt) {
    if (!sc.has_matrix) throw ScenarioError("/matrix", "scenario has no matrix block");
    ensure_dir(opt.out_dir);
    const std::vector<MatrixCase> table = run_fault_matrix(sc.matrix_spec(opt.jobs));
    const std::string path = join(opt.out_dir, "decisions.csv");
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    std::fputs("source,m_f,r_f,iq_trip,iq_time,quad_pickup,quad_transient_overreach\n",
               f);
    for (const MatrixCase& mc : table) {
        if (!mc.error.empty()) {
            std::fprintf(f, "%s,%.10g,%.10g,error,%s,,\n", mc.source.c_str(), mc.m_f,
                         mc.r_f_ohm, mc.error.c_str());
            continue;
        }
        std::fprintf(f, "%s,%.10g,%.10g,%d,%.10g,%d,%d\n", mc.source.c_str(), mc.m_f,
                     mc.r_f_ohm, mc.iq_trip ? 1 : 0, mc.iq_time, mc.quad_pickup ? 1 : 0,
                     mc.quad_transient_overreach ? 1 : 0);
    }
    std::fclose(f);
    write_manifest(sc, opt);
}

}  // namespace iqdist
