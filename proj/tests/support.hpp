#pragma once

#include "mesr/imgproc.hpp"
#include "mesr/media.hpp"

#include <filesystem>
#include <random>

#include <unistd.h>
#include <string>

namespace mesr::test {

inline Frame random_frame(int w, int h, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Frame f(w, h);
    for (double& v : f.pixels()) v = u(rng);
    return f;
}

/// Smooth random texture in [0.1, 0.9] with structure at a few pixels' scale.
inline Frame textured_frame(int w, int h, std::uint64_t seed, int blurs = 2) {
    Frame f = random_frame(w, h, seed);
    for (int i = 0; i < blurs; ++i) f = imgproc::blur5(f);
    double lo = 1.0, hi = 0.0;
    for (double v : f.pixels()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (double& v : f.pixels()) v = 0.1 + 0.8 * (v - lo) / (hi - lo);
    return f;
}

/// Content moved by (dx, dy): out(x, y) = in(x - dx, y - dy), clamped borders.
inline Frame translated(const Frame& in, double dx, double dy) {
    Frame out(in.width(), in.height());
    for (int y = 0; y < in.height(); ++y)
        for (int x = 0; x < in.width(); ++x) out.at(x, y) = in.sample_clamped(x - dx, y - dy);
    return out;
}

inline FrameSequence random_clip(int w, int h, int n, std::uint64_t seed, double fps = 25.0) {
    std::vector<Frame> frames;
    for (int i = 0; i < n; ++i) frames.push_back(random_frame(w, h, seed * 131 + i));
    return FrameSequence(std::move(frames), fps, "clip");
}

inline FrameSequence repeat(const Frame& f, int n, double fps = 25.0) {
    return FrameSequence(std::vector<Frame>(static_cast<std::size_t>(n), f), fps, "static");
}

inline double mean_abs_diff(const Frame& a, const Frame& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a.pixels()[i] - b.pixels()[i]);
    return s / static_cast<double>(a.size());
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("mesr_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace mesr::test
