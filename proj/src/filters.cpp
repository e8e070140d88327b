#include "iqdist/filters.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

namespace iqdist {

namespace {
constexpr double kPiLocal = 3.14159265358979323846;
}

ButterworthLowPass::ButterworthLowPass(int order, double cutoff_hz, double fs_hz) {
    if (order < 1) throw std::invalid_argument("filter order must be >= 1");
    if (!(cutoff_hz > 0.0) || !(cutoff_hz < fs_hz / 2.0))
        throw std::invalid_argument("cutoff must lie in (0, fs/2)");

    const double k = 2.0 * fs_hz;                                  // bilinear constant
    const double wc = k * std::tan(kPiLocal * cutoff_hz / fs_hz);  // prewarped

    // Conjugate pole pairs of the analog prototype become biquads; an odd
    // order contributes one real pole as a first-order section.
    const int pairs = order / 2;
    for (int i = 0; i < pairs; ++i) {
        const double theta = kPiLocal * (2.0 * (i + 1) + order - 1.0) / (2.0 * order);
        const double zeta = -std::cos(theta);  // damping of the pair
        const double a0 = k * k + 2.0 * zeta * wc * k + wc * wc;
        Section s;
        s.b0 = wc * wc / a0;
        s.b1 = 2.0 * s.b0;
        s.b2 = s.b0;
        s.a1 = 2.0 * (wc * wc - k * k) / a0;
        s.a2 = (k * k - 2.0 * zeta * wc * k + wc * wc) / a0;
        sections_.push_back(s);
    }
    if (order % 2 == 1) {
        Section s;
        s.first_order = true;
        const double a0 = k + wc;
        s.b0 = wc / a0;
        s.b1 = s.b0;
        s.a1 = (wc - k) / a0;
        sections_.push_back(s);
    }
}

double ButterworthLowPass::step(double x) {
    for (Section& s : sections_) {
        if (s.first_order) {
            const double w = x - s.a1 * s.w1;
            x = s.b0 * w + s.b1 * s.w1;
            s.w1 = w;
        } else {
            const double w = x - s.a1 * s.w1 - s.a2 * s.w2;
            x = s.b0 * w + s.b1 * s.w1 + s.b2 * s.w2;
            s.w2 = s.w1;
            s.w1 = w;
        }
    }
    return x;
}

void ButterworthLowPass::reset(double x0) {
    for (Section& s : sections_) {
        if (s.first_order) {
            // steady state: w = x0 / (1 + a1)
            s.w1 = x0 / (1.0 + s.a1);
            x0 = s.w1 * (s.b0 + s.b1);
        } else {
            s.w1 = s.w2 = x0 / (1.0 + s.a1 + s.a2);
            x0 = s.w1 * (s.b0 + s.b1 + s.b2);
        }
    }
}

std::vector<double> ButterworthLowPass::apply(const std::vector<double>& in) {
    std::vector<double> out;
    out.reserve(in.size());
    reset(in.empty() ? 0.0 : in.front());
    for (double x : in) out.push_back(step(x));
    return out;
}

MimicFilter::MimicFilter(double tau_s, double fs_hz, double f_sys_hz) {
    if (!(tau_s > 0.0)) throw std::invalid_argument("mimic time constant must be > 0");
    d_ = std::exp(-1.0 / (tau_s * fs_hz));
    const std::complex<double> z =
        std::exp(std::complex<double>(0.0, -2.0 * kPiLocal * f_sys_hz / fs_hz));
    const std::complex<double> h = 1.0 - d_ * z;
    gain_ = 1.0 / std::abs(h);
    phase_ = std::arg(h);
}

double MimicFilter::step(double x) {
    if (!primed_) {
        prev_ = x;
        primed_ = true;
    }
    const double y = gain_ * (x - d_ * prev_);
    prev_ = x;
    return y;
}

void MimicFilter::reset() { primed_ = false; }

std::vector<double> MimicFilter::apply(const std::vector<double>& in) {
    reset();
    std::vector<double> out;
    out.reserve(in.size());
    for (double x : in) out.push_back(step(x));
    return out;
}

}  // namespace iqdist
