#ifndef IQDIST_FILTERS_HPP
#define IQDIST_FILTERS_HPP

#include <vector>

namespace iqdist {

/// Causal Butterworth-response low-pass filter (bilinear transform with
/// frequency prewarping), realized as cascaded first/second-order sections.
class ButterworthLowPass {
public:
    ButterworthLowPass(int order, double cutoff_hz, double fs_hz);

    double step(double x);

    /// Resets the internal state to the steady response of a constant input.
    void reset(double x0 = 0.0);

    std::vector<double> apply(const std::vector<double>& in);

private:
    struct Section {
        double b0 = 1.0, b1 = 0.0, b2 = 0.0;
        double a1 = 0.0, a2 = 0.0;  // denominator (a0 normalized to 1)
        double w1 = 0.0, w2 = 0.0;  // direct form II state
        bool first_order = false;
    };
    std::vector<Section> sections_;
};

/// One-sample-memory mimic filter: removes a decaying-DC component with time
/// constant tau while keeping unity gain at the system frequency.
class MimicFilter {
public:
    MimicFilter(double tau_s, double fs_hz, double f_sys_hz);
    double step(double x);
    void reset();
    std::vector<double> apply(const std::vector<double>& in);

    /// Residual phase advance at the system frequency (gain is normalized to
    /// one in the time domain; phasor consumers must unwind this rotation).
    double phase_at_system_frequency() const { return phase_; }

private:
    double d_ = 0.0;
    double gain_ = 1.0;
    double phase_ = 0.0;
    double prev_ = 0.0;
    bool primed_ = false;
};

}  // namespace iqdist

#endif  // IQDIST_FILTERS_HPP
