#include "iqdist/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace iqdist {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ScenarioError(path, "expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items()) {
        if (!ok.count(key)) throw ScenarioError(path + "/" + key, "unknown key");
    }
}

double num(const json& obj, const std::string& path, const char* key, double dflt) {
    if (!obj.contains(key)) return dflt;
    const json& v = obj.at(key);
    if (!v.is_number()) throw ScenarioError(path + "/" + key, "expected a number");
    return v.get<double>();
}

bool boolean(const json& obj, const std::string& path, const char* key, bool dflt) {
    if (!obj.contains(key)) return dflt;
    const json& v = obj.at(key);
    if (!v.is_boolean()) throw ScenarioError(path + "/" + key, "expected a boolean");
    return v.get<bool>();
}

std::string text(const json& obj, const std::string& path, const char* key,
                 const std::string& dflt) {
    if (!obj.contains(key)) return dflt;
    const json& v = obj.at(key);
    if (!v.is_string()) throw ScenarioError(path + "/" + key, "expected a string");
    return v.get<std::string>();
}

void parse_system(const json& j, SystemConfig& cfg) {
    check_keys(j, "/system",
               {"f_hz", "v_base_kv", "s_base_mva", "line", "source", "grid", "p_pre_pu",
                "e_src_angle_deg"});
    cfg.f_hz = num(j, "/system", "f_hz", cfg.f_hz);
    cfg.v_base_kv = num(j, "/system", "v_base_kv", cfg.v_base_kv);
    cfg.s_base_mva = num(j, "/system", "s_base_mva", cfg.s_base_mva);
    if (cfg.f_hz <= 0.0) throw ScenarioError("/system/f_hz", "must be > 0");
    if (cfg.v_base_kv <= 0.0 || cfg.s_base_mva <= 0.0)
        throw ScenarioError("/system", "bases must be > 0");

    if (j.contains("line")) {
        const json& l = j.at("line");
        check_keys(l, "/system/line",
                   {"length_km", "z1_mag_pu", "z1_angle_deg", "z0_mag_pu", "z0_angle_deg"});
        cfg.line.length_km = num(l, "/system/line", "length_km", cfg.line.length_km);
        const double m1 = num(l, "/system/line", "z1_mag_pu", cfg.line.z1().mag());
        const double a1 =
            deg2rad(num(l, "/system/line", "z1_angle_deg", rad2deg(cfg.line.z1().angle())));
        const double m0 = num(l, "/system/line", "z0_mag_pu", cfg.line.z0().mag());
        const double a0 =
            deg2rad(num(l, "/system/line", "z0_angle_deg", rad2deg(cfg.line.z0().angle())));
        const Impedance z1 = Impedance::from_polar(m1, a1);
        const Impedance z0 = Impedance::from_polar(m0, a0);
        cfg.line.r1 = z1.r;
        cfg.line.x1 = z1.x;
        cfg.line.r0 = z0.r;
        cfg.line.x0 = z0.x;
        if (cfg.line.x1 <= 0.0) throw ScenarioError("/system/line", "x1 must be > 0");
    }

    auto parse_source = [&](const char* key, Impedance& z, double& e_mag) {
        if (!j.contains(key)) return;
        const json& s = j.at(key);
        const std::string path = std::string("/system/") + key;
        check_keys(s, path, {"sir", "z_mag_pu", "angle_deg", "e_mag_pu"});
        const double angle = deg2rad(num(s, path, "angle_deg", rad2deg(z.angle())));
        double mag = z.mag();
        if (s.contains("sir") && s.contains("z_mag_pu"))
            throw ScenarioError(path, "give either sir or z_mag_pu, not both");
        if (s.contains("sir")) mag = num(s, path, "sir", 0.3) * cfg.line.z1().mag();
        if (s.contains("z_mag_pu")) mag = num(s, path, "z_mag_pu", mag);
        if (mag < 0.0) throw ScenarioError(path, "impedance magnitude must be >= 0");
        z = Impedance::from_polar(mag, angle);
        e_mag = num(s, path, "e_mag_pu", e_mag);
    };
    parse_source("source", cfg.z_src, cfg.e_src_mag);
    parse_source("grid", cfg.z_grid, cfg.e_grid_mag);

    if (j.contains("p_pre_pu") && j.contains("e_src_angle_deg"))
        throw ScenarioError("/system", "give either p_pre_pu or e_src_angle_deg, not both");
    if (j.contains("e_src_angle_deg")) {
        cfg.solve_prefault_power = false;
        cfg.e_src_angle_rad = deg2rad(num(j, "/system", "e_src_angle_deg", 0.0));
    } else {
        cfg.solve_prefault_power = true;
        cfg.p_pre = num(j, "/system", "p_pre_pu", cfg.p_pre);
    }
}

void parse_dynamics(const json& j, SourceDynamics& dyn) {
    check_keys(j, "/dynamics",
               {"mode", "schedule", "i_limit_pu", "vi_angle_deg",
                "limiter_time_constant_s"});
    const std::string mode = text(j, "/dynamics", "mode", "linear");
    if (mode == "linear")
        dyn.mode = SourceMode::Linear;
    else if (mode == "scheduled")
        dyn.mode = SourceMode::Scheduled;
    else if (mode == "gfm_saturation")
        dyn.mode = SourceMode::GfmSaturation;
    else if (mode == "gfm_virtual_impedance")
        dyn.mode = SourceMode::GfmVirtualImpedance;
    else
        throw ScenarioError("/dynamics/mode", "unknown mode '" + mode + "'");

    if (dyn.mode == SourceMode::GfmSaturation) dyn.limiter_time_constant = 0.5e-3;
    if (dyn.mode == SourceMode::GfmVirtualImpedance) dyn.limiter_time_constant = 30e-3;

    dyn.i_limit = num(j, "/dynamics", "i_limit_pu", dyn.i_limit);
    dyn.vi_angle = deg2rad(num(j, "/dynamics", "vi_angle_deg", rad2deg(dyn.vi_angle)));
    dyn.limiter_time_constant =
        num(j, "/dynamics", "limiter_time_constant_s", dyn.limiter_time_constant);
    if (dyn.i_limit <= 0.0) throw ScenarioError("/dynamics/i_limit_pu", "must be > 0");
    if (dyn.vi_angle < 0.0 || dyn.vi_angle > kPi / 2.0)
        throw ScenarioError("/dynamics/vi_angle_deg", "must be within [0, 90]");

    if (j.contains("schedule")) {
        if (dyn.mode != SourceMode::Scheduled)
            throw ScenarioError("/dynamics/schedule", "only valid for scheduled mode");
        const json& arr = j.at("schedule");
        if (!arr.is_array()) throw ScenarioError("/dynamics/schedule", "expected an array");
        dyn.schedule.clear();
        int idx = 0;
        double prev_t = -1.0;
        for (const json& e : arr) {
            const std::string path = "/dynamics/schedule/" + std::to_string(idx++);
            check_keys(e, path,
                       {"t_s", "dr_s_pu", "dx_s_pu", "de_mag_pu", "de_angle_deg",
                        "ramp_s"});
            ScheduleStep st;
            st.t = num(e, path, "t_s", 0.0);
            st.dr_s = num(e, path, "dr_s_pu", 0.0);
            st.dx_s = num(e, path, "dx_s_pu", 0.0);
            st.de_mag = num(e, path, "de_mag_pu", 0.0);
            st.de_angle = deg2rad(num(e, path, "de_angle_deg", 0.0));
            st.ramp = num(e, path, "ramp_s", 0.0);
            if (st.t < 0.0) throw ScenarioError(path + "/t_s", "must be >= 0");
            if (st.t <= prev_t) throw ScenarioError(path + "/t_s", "must be increasing");
            if (st.dr_s < 0.0) throw ScenarioError(path + "/dr_s_pu", "must be >= 0");
            prev_t = st.t;
            dyn.schedule.push_back(st);
        }
    } else if (dyn.mode == SourceMode::Scheduled) {
        throw ScenarioError("/dynamics", "scheduled mode needs a schedule");
    }
}

void parse_fault(const json& j, const SystemConfig& cfg, FaultEvent& fault) {
    check_keys(j, "/fault",
               {"enabled", "t_on_s", "m_f", "r_f_ohm", "open_fault", "r_f_schedule",
                "align_voltage_zero"});
    fault.enabled = boolean(j, "/fault", "enabled", true);
    fault.t_on = num(j, "/fault", "t_on_s", fault.t_on);
    fault.m_f = num(j, "/fault", "m_f", fault.m_f);
    fault.align_to_voltage_zero = boolean(j, "/fault", "align_voltage_zero", true);
    if (fault.m_f < 0.0) throw ScenarioError("/fault/m_f", "must be >= 0");

    const bool open = boolean(j, "/fault", "open_fault", false);
    const double r0 = num(j, "/fault", "r_f_ohm", 0.0);
    if (r0 < 0.0) throw ScenarioError("/fault/r_f_ohm", "must be >= 0");
    if (open) {
        if (j.contains("r_f_ohm") || j.contains("r_f_schedule"))
            throw ScenarioError("/fault/open_fault",
                                "an open fault cannot carry a resistance");
        fault.enabled = false;
        fault.r_f_steps.clear();
        return;
    }
    fault.r_f_steps = {{0.0, cfg.ohm_to_pu(r0)}};
    if (j.contains("r_f_schedule")) {
        const json& arr = j.at("r_f_schedule");
        if (!arr.is_array())
            throw ScenarioError("/fault/r_f_schedule", "expected an array");
        int idx = 0;
        double prev_t = 0.0;
        for (const json& e : arr) {
            const std::string path = "/fault/r_f_schedule/" + std::to_string(idx++);
            check_keys(e, path, {"t_s", "r_f_ohm"});
            const double t = num(e, path, "t_s", -1.0);
            const double r = num(e, path, "r_f_ohm", -1.0);
            if (t <= prev_t) throw ScenarioError(path + "/t_s", "must be increasing");
            if (r < 0.0) throw ScenarioError(path + "/r_f_ohm", "must be >= 0");
            fault.r_f_steps.push_back({t, cfg.ohm_to_pu(r)});
            prev_t = t;
        }
    }
}

void parse_relay(const json& j, RelaySettings& r) {
    check_keys(j, "/relay_iq",
               {"m", "p_cycles", "k_rst", "lp_cutoff_hz", "trip_mode",
                "threshold_level_vs", "hold_time_s", "detect_di_pu", "detect_dv_pu",
                "detect_hold_s"});
    r.m = num(j, "/relay_iq", "m", r.m);
    if (j.contains("p_cycles")) {
        const json& v = j.at("p_cycles");
        if (!v.is_number_integer())
            throw ScenarioError("/relay_iq/p_cycles", "expected an integer");
        r.p = v.get<int>();
    }
    r.k_rst = num(j, "/relay_iq", "k_rst", r.k_rst);
    r.lp_cutoff = num(j, "/relay_iq", "lp_cutoff_hz", r.lp_cutoff);
    const std::string mode = text(j, "/relay_iq", "trip_mode", "consecutive_time");
    if (mode == "consecutive_time")
        r.trip_mode = TripMode::ConsecutiveTime;
    else if (mode == "threshold")
        r.trip_mode = TripMode::Threshold;
    else
        throw ScenarioError("/relay_iq/trip_mode", "unknown mode '" + mode + "'");
    r.threshold_level = num(j, "/relay_iq", "threshold_level_vs", r.threshold_level);
    r.hold_time = num(j, "/relay_iq", "hold_time_s", r.hold_time);
    r.detect_di = num(j, "/relay_iq", "detect_di_pu", r.detect_di);
    r.detect_dv = num(j, "/relay_iq", "detect_dv_pu", r.detect_dv);
    r.detect_hold = num(j, "/relay_iq", "detect_hold_s", r.detect_hold);
}

void parse_quad(const json& j, const SystemConfig& cfg, QuadSettings& q) {
    check_keys(j, "/relay_quad",
               {"m", "r_reach_ohm", "dir_angle_deg", "tilt_deg", "settle_time_s",
                "min_pickup_pu", "mimic", "mimic_tau_s"});
    q.m = num(j, "/relay_quad", "m", q.m);
    if (j.contains("r_reach_ohm"))
        q.r_reach = cfg.ohm_to_pu(num(j, "/relay_quad", "r_reach_ohm", 20.0));
    q.dir_angle = deg2rad(num(j, "/relay_quad", "dir_angle_deg", rad2deg(q.dir_angle)));
    q.tilt = deg2rad(num(j, "/relay_quad", "tilt_deg", rad2deg(q.tilt)));
    q.settle_time = num(j, "/relay_quad", "settle_time_s", q.settle_time);
    q.min_pickup = num(j, "/relay_quad", "min_pickup_pu", q.min_pickup);
    q.mimic = boolean(j, "/relay_quad", "mimic", q.mimic);
    q.mimic_tau = num(j, "/relay_quad", "mimic_tau_s", q.mimic_tau);
}

Classifier parse_classifier(const std::string& name, const std::string& path) {
    if (name == "iq_dependability") return Classifier::IqDependability;
    if (name == "quad_zone1_internal") return Classifier::QuadZone1Internal;
    if (name == "quad_zone1_external") return Classifier::QuadZone1External;
    throw ScenarioError(path, "unknown classifier '" + name + "'");
}

void parse_sweep(const json& j, const SystemConfig& cfg, Scenario& sc) {
    check_keys(j, "/sweep",
               {"dr_min_pu", "dr_max_pu", "dr_steps", "dx_min_pu", "dx_max_pu",
                "dx_steps", "i_limit_pu", "classifier", "cells"});
    sc.has_sweep = true;
    sc.dr.min = num(j, "/sweep", "dr_min_pu", 0.0);
    sc.dr.max = num(j, "/sweep", "dr_max_pu", 3.0);
    sc.dx.min = num(j, "/sweep", "dx_min_pu", 0.0);
    sc.dx.max = num(j, "/sweep", "dx_max_pu", 3.0);
    sc.dr.steps = static_cast<int>(num(j, "/sweep", "dr_steps", 81));
    sc.dx.steps = static_cast<int>(num(j, "/sweep", "dx_steps", 81));
    if (sc.dr.steps < 2 || sc.dx.steps < 2)
        throw ScenarioError("/sweep", "grid axes need at least 2 steps");
    sc.sweep_i_limit = num(j, "/sweep", "i_limit_pu", 1.2);
    sc.classifier =
        parse_classifier(text(j, "/sweep", "classifier", "iq_dependability"),
                         "/sweep/classifier");
    if (!j.contains("cells") || !j.at("cells").is_array() || j.at("cells").empty())
        throw ScenarioError("/sweep/cells", "expected a non-empty array");
    int idx = 0;
    for (const json& e : j.at("cells")) {
        const std::string path = "/sweep/cells/" + std::to_string(idx++);
        check_keys(e, path, {"m_f", "r_f_ohm", "open_fault"});
        SweepCell cell;
        cell.m_f = num(e, path, "m_f", 0.5);
        cell.r_f_pu = cfg.ohm_to_pu(num(e, path, "r_f_ohm", 0.0));
        cell.open_fault = boolean(e, path, "open_fault", false);
        if (cell.m_f < 0.0) throw ScenarioError(path + "/m_f", "must be >= 0");
        if (cell.r_f_pu < 0.0) throw ScenarioError(path + "/r_f_ohm", "must be >= 0");
        sc.cells.push_back(cell);
    }
}

void parse_matrix(const json& j, Scenario& sc) {
    check_keys(j, "/matrix", {"sources", "m_f_set", "r_f_ohm_set", "duration_s"});
    sc.has_matrix = true;
    sc.matrix_sources = {"linear", "gfm_saturation", "gfm_virtual_impedance"};
    if (j.contains("sources")) {
        sc.matrix_sources.clear();
        for (const json& e : j.at("sources")) {
            if (!e.is_string())
                throw ScenarioError("/matrix/sources", "expected strings");
            sc.matrix_sources.push_back(e.get<std::string>());
        }
    }
    sc.matrix_m_f = {0.2, 0.45, 0.5, 0.6, 0.7, 0.75, 0.81, 0.9, 0.99};
    if (j.contains("m_f_set")) {
        sc.matrix_m_f.clear();
        for (const json& e : j.at("m_f_set")) {
            if (!e.is_number()) throw ScenarioError("/matrix/m_f_set", "expected numbers");
            sc.matrix_m_f.push_back(e.get<double>());
        }
    }
    sc.matrix_r_f_ohm = {0.0, 2.0, 5.0, 8.0, 10.0, 15.0};
    if (j.contains("r_f_ohm_set")) {
        sc.matrix_r_f_ohm.clear();
        for (const json& e : j.at("r_f_ohm_set")) {
            if (!e.is_number())
                throw ScenarioError("/matrix/r_f_ohm_set", "expected numbers");
            sc.matrix_r_f_ohm.push_back(e.get<double>());
        }
    }
    sc.matrix_duration = num(j, "/matrix", "duration_s", 0.5);
}

void parse_sim(const json& j, Scenario& sc) {
    check_keys(j, "/sim", {"dt_us", "fs_out_hz", "duration_s"});
    const double dt_us = num(j, "/sim", "dt_us", 0.0);
    sc.sim.dt = dt_us > 0.0 ? dt_us * 1e-6 : 0.0;
    sc.sim.fs_out = num(j, "/sim", "fs_out_hz", sc.sim.fs_out);
    sc.duration = num(j, "/sim", "duration_s", sc.duration);
    if (sc.sim.fs_out <= 0.0) throw ScenarioError("/sim/fs_out_hz", "must be > 0");
    if (sc.duration <= 0.0) throw ScenarioError("/sim/duration_s", "must be > 0");
}

}  // namespace

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

Scenario parse_scenario(const json& j) {
    check_keys(j, "",
               {"system", "dynamics", "fault", "relay_iq", "relay_quad", "sweep",
                "matrix", "sim", "seed", "out_dir"});
    Scenario sc;
    if (j.contains("system")) parse_system(j.at("system"), sc.system);
    if (j.contains("dynamics")) parse_dynamics(j.at("dynamics"), sc.dynamics);
    if (j.contains("fault")) parse_fault(j.at("fault"), sc.system, sc.fault);
    else sc.fault.r_f_steps = {{0.0, 0.0}};
    if (j.contains("relay_iq")) parse_relay(j.at("relay_iq"), sc.relay);
    if (j.contains("relay_quad")) parse_quad(j.at("relay_quad"), sc.system, sc.quad);
    if (j.contains("sim")) parse_sim(j.at("sim"), sc);
    if (j.contains("sweep")) parse_sweep(j.at("sweep"), sc.system, sc);
    if (j.contains("matrix")) parse_matrix(j.at("matrix"), sc);
    if (j.contains("seed")) {
        const json& v = j.at("seed");
        if (!v.is_number_unsigned() && !v.is_number_integer())
            throw ScenarioError("/seed", "expected an integer");
        sc.seed = v.get<std::uint64_t>();
    }
    sc.out_dir = text(j, "", "out_dir", sc.out_dir);

    // config-level consistency
    sc.relay.f_nom = sc.system.f_hz;
    sc.quad.f_nom = sc.system.f_hz;
    sc.relay.line = sc.system.line;
    sc.quad.line = sc.system.line;
    try {
        sc.relay.validate();
        sc.quad.validate();
    } catch (const std::invalid_argument& e) {
        throw ScenarioError("/relay", e.what());
    }
    if (sc.fault.enabled) {
        const double min_on =
            (static_cast<double>(sc.relay.p) + 1.0) / sc.system.f_hz;
        if (sc.fault.t_on < min_on)
            throw ScenarioError("/fault/t_on_s",
                                "needs at least (p+1) pre-fault cycles for the memory");
    }

    sc.hash = [&] {
        std::ostringstream h;
        h << std::hex << fnv1a(j.dump());
        return h.str();
    }();
    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ScenarioError("", "cannot open scenario file: " + path);
    json j;
    try {
        j = json::parse(f);
    } catch (const json::parse_error& e) {
        throw ScenarioError("", std::string("JSON parse error: ") + e.what());
    }
    return parse_scenario(j);
}

SweepSpec Scenario::sweep_spec(int jobs) const {
    SweepSpec spec;
    spec.base = system;
    spec.dr = dr;
    spec.dx = dx;
    spec.cells = cells;
    spec.classifier = classifier;
    spec.i_limit = sweep_i_limit;
    spec.m = relay.m;
    spec.k_rst = relay.k_rst;
    spec.quad = quad;
    spec.jobs = jobs;
    return spec;
}

SourceDynamics Scenario::dynamics_by_name(const std::string& name) const {
    if (name == "linear") return SourceDynamics::linear();
    if (name == "gfm_saturation")
        return SourceDynamics::gfm_saturation(dynamics.i_limit);
    if (name == "gfm_virtual_impedance")
        return SourceDynamics::gfm_virtual_impedance(dynamics.i_limit, dynamics.vi_angle);
    if (name == "scheduled") {
        if (dynamics.mode != SourceMode::Scheduled)
            throw ScenarioError("/matrix/sources",
                                "'scheduled' requires a schedule in /dynamics");
        return dynamics;
    }
    throw ScenarioError("/matrix/sources", "unknown source '" + name + "'");
}

FaultMatrixSpec Scenario::matrix_spec(int jobs) const {
    FaultMatrixSpec spec;
    spec.cfg = system;
    for (const std::string& name : matrix_sources)
        spec.sources.push_back({name, dynamics_by_name(name)});
    spec.m_f_set = matrix_m_f;
    spec.r_f_ohm_set = matrix_r_f_ohm;
    spec.relay = relay;
    spec.quad = quad;
    spec.sim = sim;
    spec.t_on = fault.t_on;
    spec.duration = matrix_duration;
    spec.jobs = jobs;
    return spec;
}

}  // namespace iqdist
