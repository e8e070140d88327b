#include "iqdist/waveform.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace iqdist {

using nlohmann::json;

const std::vector<double>& WaveformRecord::voltage(int phase) const {
    switch (phase) {
        case 0: return v_sa;
        case 1: return v_sb;
        default: return v_sc;
    }
}

const std::vector<double>& WaveformRecord::current(int phase) const {
    switch (phase) {
        case 0: return i_sa;
        case 1: return i_sb;
        default: return i_sc;
    }
}

void WaveformRecord::validate() const {
    const std::size_t n = v_sa.size();
    if (v_sb.size() != n || v_sc.size() != n || i_sa.size() != n || i_sb.size() != n ||
        i_sc.size() != n)
        throw std::invalid_argument("waveform channels differ in length");
    if (!(fs > 0.0)) throw std::invalid_argument("waveform sample rate must be > 0");
    if (!(f_nom > 0.0)) throw std::invalid_argument("nominal frequency must be > 0");
}

void export_waveform(const WaveformRecord& rec, const std::string& path) {
    rec.validate();
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    std::fputs("t,v_sa,v_sb,v_sc,i_sa,i_sb,i_sc\n", f);
    for (std::size_t n = 0; n < rec.size(); ++n) {
        std::fprintf(f, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", rec.time_at(n),
                     rec.v_sa[n], rec.v_sb[n], rec.v_sc[n], rec.i_sa[n], rec.i_sb[n],
                     rec.i_sc[n]);
    }
    if (std::fclose(f) != 0) throw std::runtime_error("write failure: " + path);

    json meta;
    meta["fs_hz"] = rec.fs;
    meta["t0_s"] = rec.t0;
    meta["f_hz"] = rec.f_nom;
    meta["v_base_kv"] = rec.v_base_kv;
    meta["s_base_mva"] = rec.s_base_mva;
    meta["t_fault_s"] = rec.t_fault;
    meta["kcl_residual_max"] = rec.kcl_residual_max;
    meta["final_dr_pu"] = rec.final_dr;
    meta["final_dx_pu"] = rec.final_dx;
    meta["scenario_hash"] = rec.scenario_hash;
    std::ofstream mf(path + ".meta");
    if (!mf) throw std::runtime_error("cannot open for writing: " + path + ".meta");
    mf << meta.dump(2) << "\n";
}

namespace {

[[noreturn]] void parse_fail(const std::string& path, std::size_t line, const char* why) {
    std::ostringstream msg;
    msg << "malformed waveform CSV " << path << ":" << line << ": " << why;
    throw std::runtime_error(msg.str());
}

}  // namespace

WaveformRecord import_waveform(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open waveform CSV: " + path);

    WaveformRecord rec;
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(f, line)) parse_fail(path, lineno, "empty file");
    if (line != "t,v_sa,v_sb,v_sc,i_sa,i_sb,i_sc")
        parse_fail(path, lineno, "unexpected header");

    std::vector<double> t;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        double col[7];
        const char* p = line.c_str();
        for (int k = 0; k < 7; ++k) {
            char* end = nullptr;
            col[k] = std::strtod(p, &end);
            if (end == p) parse_fail(path, lineno, "expected a number");
            p = end;
            if (k < 6) {
                if (*p != ',') parse_fail(path, lineno, "expected a comma");
                ++p;
            }
        }
        if (*p != '\0' && *p != '\r') parse_fail(path, lineno, "trailing characters");
        t.push_back(col[0]);
        rec.v_sa.push_back(col[1]);
        rec.v_sb.push_back(col[2]);
        rec.v_sc.push_back(col[3]);
        rec.i_sa.push_back(col[4]);
        rec.i_sb.push_back(col[5]);
        rec.i_sc.push_back(col[6]);
    }
    if (t.size() < 2) parse_fail(path, lineno, "fewer than two samples");

    rec.t0 = t.front();
    const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
    for (std::size_t n = 1; n < t.size(); ++n) {
        if (std::abs((t[n] - t[n - 1]) - dt) > 1e-9)
            parse_fail(path, n + 2, "non-uniform sampling");
    }
    rec.fs = 1.0 / dt;

    std::ifstream mf(path + ".meta");
    if (mf) {
        json meta = json::parse(mf, nullptr, true);
        if (meta.contains("fs_hz")) rec.fs = meta["fs_hz"].get<double>();
        if (meta.contains("t0_s")) rec.t0 = meta["t0_s"].get<double>();
        if (meta.contains("f_hz")) rec.f_nom = meta["f_hz"].get<double>();
        if (meta.contains("v_base_kv")) rec.v_base_kv = meta["v_base_kv"].get<double>();
        if (meta.contains("s_base_mva")) rec.s_base_mva = meta["s_base_mva"].get<double>();
        if (meta.contains("t_fault_s")) rec.t_fault = meta["t_fault_s"].get<double>();
        if (meta.contains("kcl_residual_max"))
            rec.kcl_residual_max = meta["kcl_residual_max"].get<double>();
        if (meta.contains("final_dr_pu")) rec.final_dr = meta["final_dr_pu"].get<double>();
        if (meta.contains("final_dx_pu")) rec.final_dx = meta["final_dx_pu"].get<double>();
        if (meta.contains("scenario_hash"))
            rec.scenario_hash = meta["scenario_hash"].get<std::string>();
    }
    rec.validate();
    return rec;
}

}  // namespace iqdist
