#include "iqdist/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <thread>

namespace iqdist {

namespace {

void parallel_for(int jobs, int count, const std::function<void(int)>& fn) {
    jobs = std::max(1, jobs);
    if (jobs == 1 || count <= 1) {
        for (int k = 0; k < count; ++k) fn(k);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    const int workers = std::min(jobs, count);
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int k = next.fetch_add(1); k < count; k = next.fetch_add(1)) fn(k);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace

const char* region_label_name(RegionLabel l) {
    switch (l) {
        case RegionLabel::OpGtRst: return "op_gt_rst";
        case RegionLabel::OpLeRst: return "op_le_rst";
        case RegionLabel::InsideZ1: return "inside_z1";
        case RegionLabel::OutsideZ1: return "outside_z1";
        case RegionLabel::Degenerate: return "degenerate";
    }
    return "?";
}

namespace {

RegionPoint classify_point(const SweepSpec& spec, const PreFault& pf,
                           const SweepCell& cell, double dr, double dx,
                           const ZonePolygon& zone) {
    RegionPoint pt;
    pt.dr = dr;
    pt.dx = dx;

    IqNetworkCase c;
    c.z_s = spec.base.z_src;
    c.dz_s = Impedance{dr, dx};
    c.z_g = spec.base.z_grid;
    c.z_l = spec.base.line.z1();
    c.m_f = cell.m_f;
    c.m = spec.m;
    c.r_f = cell.open_fault ? FaultResistance::open_circuit()
                            : FaultResistance::ohmic(cell.r_f_pu);
    c.v_f_pre = pf.v_f_pre;
    c.i_s_pre = pf.i_s_pre;
    c.de_s = Phasor(0.0, 0.0);
    c.k_rst = spec.k_rst;

    try {
        const IqSolution sol = solve_case(c);
        pt.i_mag = std::abs(sol.i_s_total);
        switch (spec.classifier) {
            case Classifier::IqDependability:
                // ties classify as external / no-trip
                pt.label = sol.psi_op > sol.psi_rst ? RegionLabel::OpGtRst
                                                    : RegionLabel::OpLeRst;
                break;
            case Classifier::QuadZone1Internal:
            case Classifier::QuadZone1External: {
                const DisturbanceSolution d = disturbance_network(c);
                const Phasor z = d.v_relay / d.i_s;
                pt.label = zone.contains(z.real(), z.imag()) ? RegionLabel::InsideZ1
                                                             : RegionLabel::OutsideZ1;
                break;
            }
        }
    } catch (const DegenerateNetworkError&) {
        pt.label = RegionLabel::Degenerate;
        pt.i_mag = std::numeric_limits<double>::quiet_NaN();
    }
    return pt;
}

// Marching squares on the |I_s| grid for the level crossing; emits the
// interpolated edge intersections of every sign-change cell.
void current_boundary(RegionMap& map, double level) {
    const int nr = map.nr, nx = map.nx;
    auto val = [&](int a, int b) { return map.points[static_cast<std::size_t>(a * nx + b)].i_mag; };
    auto dr_at = [&](int a) { return map.points[static_cast<std::size_t>(a * nx)].dr; };
    auto dx_at = [&](int b) { return map.points[static_cast<std::size_t>(b)].dx; };

    for (int a = 0; a + 1 < nr; ++a) {
        for (int b = 0; b + 1 < nx; ++b) {
            const double v00 = val(a, b), v10 = val(a + 1, b);
            const double v01 = val(a, b + 1), v11 = val(a + 1, b + 1);
            if (std::isnan(v00) || std::isnan(v10) || std::isnan(v01) || std::isnan(v11))
                continue;
            auto cross = [&](double va, double vb) {
                return (va - level) * (vb - level) < 0.0;
            };
            auto lerp = [&](double pa, double pb, double va, double vb) {
                return pa + (pb - pa) * (level - va) / (vb - va);
            };
            if (cross(v00, v10))
                map.boundary.push_back({lerp(dr_at(a), dr_at(a + 1), v00, v10), dx_at(b)});
            if (cross(v00, v01))
                map.boundary.push_back({dr_at(a), lerp(dx_at(b), dx_at(b + 1), v00, v01)});
            if (b + 2 == nx && cross(v01, v11))
                map.boundary.push_back(
                    {lerp(dr_at(a), dr_at(a + 1), v01, v11), dx_at(b + 1)});
            if (a + 2 == nr && cross(v10, v11))
                map.boundary.push_back(
                    {dr_at(a + 1), lerp(dx_at(b), dx_at(b + 1), v10, v11)});
        }
    }
}

}  // namespace

std::vector<RegionMap> run_sweep(const SweepSpec& spec) {
    if (spec.dr.steps < 2 || spec.dx.steps < 2)
        throw std::invalid_argument("sweep: grid axes need at least 2 steps");
    if (spec.cells.empty()) throw std::invalid_argument("sweep: no cells");

    const ZonePolygon zone = make_zone1(spec.quad);

    std::vector<RegionMap> maps(spec.cells.size());
    for (std::size_t ci = 0; ci < spec.cells.size(); ++ci) {
        const SweepCell& cell = spec.cells[ci];
        const PreFault pf = pre_fault_solve(spec.base, cell.m_f);
        RegionMap& map = maps[ci];
        map.cell = cell;
        map.nr = spec.dr.steps;
        map.nx = spec.dx.steps;
        map.points.resize(static_cast<std::size_t>(map.nr) * static_cast<std::size_t>(map.nx));

        parallel_for(spec.jobs, map.nr, [&](int a) {
            for (int b = 0; b < map.nx; ++b) {
                map.points[static_cast<std::size_t>(a * map.nx + b)] =
                    classify_point(spec, pf, cell, spec.dr.at(a), spec.dx.at(b), zone);
            }
        });
        current_boundary(map, spec.i_limit);
    }
    return maps;
}

double size_dz_for_current(const SystemConfig& cfg, double m_f, FaultResistance r_f,
                           double angle_rad, double i_target, double m, double k_rst) {
    IqNetworkCase c = make_case(cfg, m_f, r_f, Impedance{}, 0.0, 0.0, m, k_rst);
    auto mag_at = [&](double s) {
        c.dz_s = Impedance::from_polar(s, angle_rad);
        return std::abs(solve_case(c).i_s_total);
    };
    if (mag_at(0.0) <= i_target) return -1.0;

    // march outward to bracket the first crossing, then bisect
    double hi = 0.01;
    while (mag_at(hi) > i_target) {
        hi *= 1.3;
        if (hi > 1e6)
            throw std::runtime_error("size_dz_for_current: no crossing found");
    }
    double lo = hi / 1.3;
    for (int iter = 0; iter < 100; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mag_at(mid) > i_target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

std::vector<MatrixCase> run_fault_matrix(const FaultMatrixSpec& spec) {
    std::vector<MatrixCase> table;
    for (const MatrixSourceSpec& src : spec.sources)
        for (double m_f : spec.m_f_set)
            for (double rf : spec.r_f_ohm_set)
                table.push_back({src.name, m_f, rf, false, -1.0, false, false, {}});

    const std::size_t per_source = spec.m_f_set.size() * spec.r_f_ohm_set.size();
    parallel_for(spec.jobs, static_cast<int>(table.size()), [&](int idx) {
        MatrixCase& mc = table[static_cast<std::size_t>(idx)];
        const MatrixSourceSpec& src =
            spec.sources[static_cast<std::size_t>(idx) / per_source];
        try {
            FaultEvent fault;
            fault.t_on = spec.t_on;
            fault.m_f = mc.m_f;
            fault.r_f_steps = {{0.0, spec.cfg.ohm_to_pu(mc.r_f_ohm)}};
            const WaveformRecord rec =
                simulate(spec.cfg, src.dynamics, fault, spec.duration, spec.sim);
            const RelayDecision iq = evaluate_iq_relay(rec, spec.relay);
            const QuadDecision quad = evaluate_quad_relay(rec, spec.quad);
            mc.iq_trip = iq.tripped;
            mc.iq_time = iq.tripped ? iq.trip_time - rec.t_fault : -1.0;
            mc.quad_pickup = quad.picked_up;
            mc.quad_transient_overreach = quad.transient_overreach;
        } catch (const std::exception& e) {
            mc.error = e.what();
        }
    });
    return table;
}

}  // namespace iqdist
