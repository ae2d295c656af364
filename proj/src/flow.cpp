#include "mesr/flow.hpp"

#include "mesr/error.hpp"
#include "mesr/imgproc.hpp"

#include <algorithm>

namespace mesr {

namespace {

// Horn-Schunck neighbourhood average (1/6 edge, 1/12 corner), replicated borders.
void local_average(const std::vector<double>& in, int w, int h, std::vector<double>& out) {
    out.resize(in.size());
    auto at = [&](int x, int y) {
        x = std::clamp(x, 0, w - 1);
        y = std::clamp(y, 0, h - 1);
        return in[static_cast<std::size_t>(y) * w + x];
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out[static_cast<std::size_t>(y) * w + x] =
                (at(x - 1, y) + at(x + 1, y) + at(x, y - 1) + at(x, y + 1)) / 6.0 +
                (at(x - 1, y - 1) + at(x + 1, y - 1) + at(x - 1, y + 1) + at(x + 1, y + 1)) / 12.0;
}

std::vector<double> upscale_flow(const std::vector<double>& in, int w, int h, int nw, int nh) {
    const Frame src(w, h, in);
    const Frame dst = imgproc::resize(src, nw, nh);
    std::vector<double> out(dst.pixels().begin(), dst.pixels().end());
    const double s = static_cast<double>(nw) / w;
    for (double& v : out) v *= s;
    return out;
}

}  // namespace

FlowField horn_schunck(const Frame& reference, const Frame& frame, const FlowParams& params) {
    if (reference.width() != frame.width() || reference.height() != frame.height())
        throw ValidationError("flow frames differ in size");
    const auto ref_pyr = imgproc::gaussian_pyramid(reference, params.levels);
    const auto cur_pyr = imgproc::gaussian_pyramid(frame, params.levels);

    std::vector<double> u, v;
    int pw = 0, ph = 0;
    for (int level = params.levels - 1; level >= 0; --level) {
        const Frame& i1 = ref_pyr[level];
        const Frame& i2 = cur_pyr[level];
        const int w = i1.width(), h = i1.height();
        if (u.empty()) {
            u.assign(static_cast<std::size_t>(w) * h, 0.0);
            v.assign(u.size(), 0.0);
        } else {
            u = upscale_flow(u, pw, ph, w, h);
            v = upscale_flow(v, pw, ph, w, h);
        }
        pw = w;
        ph = h;

        const int warps = std::max(1, params.warps);
        const int inner = std::max(1, params.iterations / warps);
        const Frame i1x = imgproc::diff_x(i1);
        const Frame i1y = imgproc::diff_y(i1);
        std::vector<double> ix(u.size()), iy(u.size()), it(u.size()), u0, v0, ub, vb;
        for (int warp = 0; warp < warps; ++warp) {
            Frame warped(w, h);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const std::size_t k = static_cast<std::size_t>(y) * w + x;
                    warped.at(x, y) = i2.sample_clamped(x + u[k], y + v[k]);
                }
            const Frame wx = imgproc::diff_x(warped);
            const Frame wy = imgproc::diff_y(warped);
            for (std::size_t k = 0; k < u.size(); ++k) {
                ix[k] = 0.5 * (i1x.pixels()[k] + wx.pixels()[k]);
                iy[k] = 0.5 * (i1y.pixels()[k] + wy.pixels()[k]);
                it[k] = warped.pixels()[k] - i1.pixels()[k];
            }
            u0 = u;
            v0 = v;
            for (int iter = 0; iter < inner; ++iter) {
                local_average(u, w, h, ub);
                local_average(v, w, h, vb);
                for (std::size_t k = 0; k < u.size(); ++k) {
                    const double r = ix[k] * (ub[k] - u0[k]) + iy[k] * (vb[k] - v0[k]) + it[k];
                    const double t = r / (params.smoothness + ix[k] * ix[k] + iy[k] * iy[k]);
                    u[k] = ub[k] - ix[k] * t;
                    v[k] = vb[k] - iy[k] * t;
                }
            }
        }
    }
    return {pw, ph, std::move(u), std::move(v)};
}

}  // namespace mesr
