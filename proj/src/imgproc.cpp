#include "mesr/imgproc.hpp"

#include <algorithm>

namespace mesr::imgproc {

namespace {

constexpr double kTaps[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

int mirror(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * (n - 1) - i;
    }
    return i;
}

}  // namespace

Frame blur5(const Frame& in) {
    const int w = in.width();
    const int h = in.height();
    Frame tmp(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int k = -2; k <= 2; ++k) s += kTaps[k + 2] * in.at(mirror(x + k, w), y);
            tmp.at(x, y) = s;
        }
    Frame out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int k = -2; k <= 2; ++k) s += kTaps[k + 2] * tmp.at(x, mirror(y + k, h));
            out.at(x, y) = s;
        }
    return out;
}

Frame pyr_down(const Frame& in) {
    const Frame b = blur5(in);
    const int w = (in.width() + 1) / 2;
    const int h = (in.height() + 1) / 2;
    Frame out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(x, y) = b.at(2 * x, 2 * y);
    return out;
}

Frame pyr_up(const Frame& in, int width, int height) {
    Frame up(width, height, 0.0);
    for (int y = 0; y < in.height() && 2 * y < height; ++y)
        for (int x = 0; x < in.width() && 2 * x < width; ++x) up.at(2 * x, 2 * y) = 4.0 * in.at(x, y);
    Frame tmp(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double s = 0.0;
            for (int k = -2; k <= 2; ++k) {
                const int xx = mirror(x + k, width);
                s += kTaps[k + 2] * up.at(xx, y);
            }
            tmp.at(x, y) = s;
        }
    Frame out(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double s = 0.0;
            for (int k = -2; k <= 2; ++k) s += kTaps[k + 2] * tmp.at(x, mirror(y + k, height));
            out.at(x, y) = s;
        }
    return out;
}

std::vector<Frame> gaussian_pyramid(const Frame& in, int levels) {
    std::vector<Frame> pyr{in};
    for (int l = 1; l < levels; ++l) pyr.push_back(pyr_down(pyr.back()));
    return pyr;
}

Frame diff_x(const Frame& in) {
    const int w = in.width();
    Frame out(w, in.height());
    for (int y = 0; y < in.height(); ++y)
        for (int x = 0; x < w; ++x)
            out.at(x, y) = 0.5 * (in.at(std::min(x + 1, w - 1), y) - in.at(std::max(x - 1, 0), y));
    return out;
}

Frame diff_y(const Frame& in) {
    const int h = in.height();
    Frame out(in.width(), h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < in.width(); ++x)
            out.at(x, y) = 0.5 * (in.at(x, std::min(y + 1, h - 1)) - in.at(x, std::max(y - 1, 0)));
    return out;
}

Frame resize(const Frame& in, int width, int height) {
    Frame out(width, height);
    const double sx = static_cast<double>(in.width()) / width;
    const double sy = static_cast<double>(in.height()) / height;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            out.at(x, y) = in.sample_clamped((x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
    return out;
}

}  // namespace mesr::imgproc
