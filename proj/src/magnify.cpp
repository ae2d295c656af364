#include "mesr/magnify.hpp"

#include "mesr/error.hpp"
#include "mesr/imgproc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mesr {

void MagnifyParams::validate() const {
    if (!(alpha >= 1.0)) throw ValidationError("alpha must be >= 1");
    if (!(gamma > 0.0)) throw ValidationError("gamma must be positive");
    if (!(motion_bound > 0.0)) throw ValidationError("motion bound must be positive");
    if (levels < 1) throw ValidationError("pyramid needs at least one level");
    if (!(band_low > 0.0)) throw ValidationError("band low edge must be positive");
}

double level_wavelength(int level) { return std::ldexp(1.0, level + 1); }

double level_gain(const MagnifyParams& params, int level) {
    const double lambda = level_wavelength(level);
    if (lambda < params.gamma) return 0.0;
    const double g = std::min(params.alpha - 1.0, lambda / (8.0 * params.motion_bound) - 1.0);
    return std::max(0.0, g);
}

std::vector<double> Biquad::filter(const std::vector<double>& x) const {
    std::vector<double> y(x.size());
    if (x.empty()) return y;
    // Start in the steady state for a constant input equal to x[0].
    const double dc = x[0] * (b[0] + b[1] + b[2]) / (a[0] + a[1] + a[2]);
    double x1 = x[0], x2 = x[0], y1 = dc, y2 = dc;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = b[0] * x[i] + b[1] * x1 + b[2] * x2 - a[1] * y1 - a[2] * y2;
        x2 = x1;
        x1 = x[i];
        y2 = y1;
        y1 = v;
        y[i] = v;
    }
    return y;
}

Biquad Biquad::butterworth_bandpass(double low_hz, double high_hz, double fps) {
    if (!(low_hz > 0.0 && high_hz > low_hz && high_hz < 0.5 * fps))
        throw ValidationError("temporal band must satisfy 0 < low < high < fps/2");
    const double k = 2.0 * fps;
    const double w1 = k * std::tan(std::numbers::pi * low_hz / fps);
    const double w2 = k * std::tan(std::numbers::pi * high_hz / fps);
    const double bw = w2 - w1;
    const double w0sq = w1 * w2;
    const double a0 = k * k + bw * k + w0sq;
    Biquad f;
    f.b = {bw * k / a0, 0.0, -bw * k / a0};
    f.a = {1.0, (2.0 * w0sq - 2.0 * k * k) / a0, (k * k - bw * k + w0sq) / a0};
    return f;
}

namespace {

std::vector<double> forward_backward(const Biquad& f, const std::vector<double>& padded) {
    std::vector<double> y = f.filter(padded);
    std::reverse(y.begin(), y.end());
    y = f.filter(y);
    std::reverse(y.begin(), y.end());
    return y;
}

}  // namespace

std::vector<double> filtfilt(const Biquad& f, const std::vector<double>& x) {
    const std::size_t n = x.size();
    if (n == 0) return {};
    const std::size_t pad = std::min(n / 2, n - 1);
    std::vector<double> padded;
    padded.reserve(n + 2 * pad);
    for (std::size_t i = pad; i >= 1; --i) padded.push_back(2.0 * x.front() - x[i]);
    padded.insert(padded.end(), x.begin(), x.end());
    for (std::size_t i = 1; i <= pad; ++i) padded.push_back(2.0 * x.back() - x[n - 1 - i]);

    const std::vector<double> y1 = forward_backward(f, padded);
    std::vector<double> rev(padded.rbegin(), padded.rend());
    std::vector<double> y2 = forward_backward(f, rev);
    std::reverse(y2.begin(), y2.end());

    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = 0.5 * (y1[pad + i] + y2[pad + i]);
    return out;
}

LaplacianPyramid build_laplacian(const Frame& f, int levels) {
    LaplacianPyramid p;
    Frame current = f;
    for (int l = 0; l < levels; ++l) {
        Frame down = imgproc::pyr_down(current);
        const Frame up = imgproc::pyr_up(down, current.width(), current.height());
        Frame band(current.width(), current.height());
        for (std::size_t i = 0; i < band.size(); ++i) band.pixels()[i] = current.pixels()[i] - up.pixels()[i];
        p.bands.push_back(std::move(band));
        current = std::move(down);
    }
    p.bands.push_back(std::move(current));
    return p;
}

Frame collapse_laplacian(const LaplacianPyramid& p) {
    Frame current = p.bands.back();
    for (int l = static_cast<int>(p.bands.size()) - 2; l >= 0; --l) {
        const Frame& band = p.bands[static_cast<std::size_t>(l)];
        Frame up = imgproc::pyr_up(current, band.width(), band.height());
        for (std::size_t i = 0; i < up.size(); ++i) up.pixels()[i] += band.pixels()[i];
        current = std::move(up);
    }
    return current;
}

FrameSequence magnify(const FrameSequence& clip, const MagnifyParams& params) {
    params.validate();
    if (clip.size() < 4) throw ValidationError("magnification needs at least 4 frames");
    const int min_side = 1 << params.levels;
    if (clip.width() < min_side || clip.height() < min_side)
        throw ValidationError("frames too small for the requested pyramid depth");

    const double high = params.band_high > 0.0 ? params.band_high : clip.fps() / 4.0;
    const Biquad bandpass = Biquad::butterworth_bandpass(params.band_low, high, clip.fps());

    std::vector<LaplacianPyramid> pyramids;
    pyramids.reserve(clip.size());
    for (const Frame& f : clip.frames()) pyramids.push_back(build_laplacian(f, params.levels));

    const std::size_t n = clip.size();
    for (std::size_t l = 0; l < pyramids.front().bands.size(); ++l) {
        const double gain = level_gain(params, static_cast<int>(l));
        if (gain <= 0.0) continue;
        const std::size_t count = pyramids.front().bands[l].size();
        std::vector<double> series(n);
        for (std::size_t i = 0; i < count; ++i) {
            for (std::size_t t = 0; t < n; ++t) series[t] = pyramids[t].bands[l].pixels()[i];
            const std::vector<double> filtered = filtfilt(bandpass, series);
            for (std::size_t t = 0; t < n; ++t) pyramids[t].bands[l].pixels()[i] += gain * filtered[t];
        }
    }

    std::vector<Frame> out;
    out.reserve(n);
    for (const auto& p : pyramids) {
        Frame f = collapse_laplacian(p);
        f.clamp_unit();
        out.push_back(std::move(f));
    }
    return FrameSequence(std::move(out), clip.fps(), clip.id());
}

}  // namespace mesr
