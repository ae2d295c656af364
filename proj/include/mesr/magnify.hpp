#pragma once

#include "mesr/media.hpp"

#include <array>
#include <vector>

namespace mesr {

struct MagnifyParams {
    double alpha = 4.0;          // 1 means no magnification; additive gain is alpha - 1
    double gamma = 16.0;         // spatial wavelength cutoff, px
    double band_low = 0.4;       // Hz
    double band_high = -1.0;     // Hz; non-positive means fps / 4
    int levels = 5;              // Laplacian bands; a Gaussian residual sits below them
    double motion_bound = 1.0;   // assumed motion amplitude delta, px

    void validate() const;
};

/// Representative wavelength of pyramid level l: 2^(l+1) px.
double level_wavelength(int level);

/// Gain for a level: 0 below the cutoff, otherwise min(alpha-1, lambda/(8 delta) - 1) clamped at 0.
double level_gain(const MagnifyParams& params, int level);

/// Second-order Butterworth bandpass as a normalized biquad.
struct Biquad {
    std::array<double, 3> b{};
    std::array<double, 3> a{};  // a[0] == 1

    /// Direct form I, initialized to the steady state of a constant x[0].
    std::vector<double> filter(const std::vector<double>& x) const;
    static Biquad butterworth_bandpass(double low_hz, double high_hz, double fps);
};

/// Zero-phase filtering with odd-reflection padding of n/2 samples; both pass orders averaged
/// so the result commutes exactly with time reversal.
std::vector<double> filtfilt(const Biquad& f, const std::vector<double>& x);

struct LaplacianPyramid {
    std::vector<Frame> bands;  // finest first; last entry is the Gaussian residual
};

LaplacianPyramid build_laplacian(const Frame& f, int levels);
Frame collapse_laplacian(const LaplacianPyramid& p);

FrameSequence magnify(const FrameSequence& clip, const MagnifyParams& params);

}  // namespace mesr
