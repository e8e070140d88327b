#ifndef IQDIST_SWEEP_HPP
#define IQDIST_SWEEP_HPP

#include <string>
#include <vector>

#include "iqdist/emtsim.hpp"
#include "iqdist/netmodel.hpp"
#include "iqdist/relay_iq.hpp"
#include "iqdist/relay_quad.hpp"

namespace iqdist {

enum class Classifier { IqDependability, QuadZone1Internal, QuadZone1External };

enum class RegionLabel { OpGtRst, OpLeRst, InsideZ1, OutsideZ1, Degenerate };
const char* region_label_name(RegionLabel l);

struct GridAxis {
    double min = 0.0;
    double max = 3.0;
    int steps = 81;

    double at(int k) const {
        return min + (max - min) * static_cast<double>(k) /
                         static_cast<double>(steps - 1);
    }
};

struct SweepCell {
    double m_f = 0.5;
    double r_f_pu = 0.0;
    bool open_fault = false;
};

struct SweepSpec {
    SystemConfig base;
    GridAxis dr, dx;
    std::vector<SweepCell> cells;
    Classifier classifier = Classifier::IqDependability;
    double i_limit = 1.2;  // boundary level for |I_s|
    double m = 0.8;
    double k_rst = 1.0;
    QuadSettings quad;  // used by the quad classifiers
    int jobs = 1;
};

struct RegionPoint {
    double dr = 0.0, dx = 0.0;
    RegionLabel label = RegionLabel::Degenerate;
    double i_mag = 0.0;  // |I_s| of the post-disturbance network
};

struct RegionMap {
    SweepCell cell;
    int nr = 0, nx = 0;
    std::vector<RegionPoint> points;                 // row-major over (dr, dx)
    std::vector<std::array<double, 2>> boundary;     // |I_s| = i_limit polyline
};

std::vector<RegionMap> run_sweep(const SweepSpec& spec);

/// Smallest |dZ_s| along the given angle that limits the post-disturbance
/// sending current magnitude to i_target. Returns a negative value when the
/// unlimited current is already below the target.
double size_dz_for_current(const SystemConfig& cfg, double m_f, FaultResistance r_f,
                           double angle_rad, double i_target, double m, double k_rst);

/// Batch fault-matrix runs: every (source, m_f, R_f) combination through the
/// simulator and both relays.
struct MatrixSourceSpec {
    std::string name;
    SourceDynamics dynamics;
};

struct FaultMatrixSpec {
    SystemConfig cfg;
    std::vector<MatrixSourceSpec> sources;
    std::vector<double> m_f_set;
    std::vector<double> r_f_ohm_set;
    RelaySettings relay;
    QuadSettings quad;
    SimOptions sim;
    double t_on = 0.1;
    double duration = 0.5;
    int jobs = 1;
};

struct MatrixCase {
    std::string source;
    double m_f = 0.0;
    double r_f_ohm = 0.0;
    bool iq_trip = false;
    double iq_time = -1.0;
    bool quad_pickup = false;
    bool quad_transient_overreach = false;
    std::string error;  // per-case failure; empty on success
};

std::vector<MatrixCase> run_fault_matrix(const FaultMatrixSpec& spec);

}  // namespace iqdist

#endif  // IQDIST_SWEEP_HPP
