#include "mesr/error.hpp"
#include "mesr/tim.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace mesr;

namespace {

double max_abs_diff(const Frame& a, const Frame& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.pixels()[i] - b.pixels()[i]));
    return m;
}

double mean_of(const Frame& f) {
    return std::accumulate(f.pixels().begin(), f.pixels().end(), 0.0) / static_cast<double>(f.size());
}

}  // namespace

TEST(Tim, BasisIsOrthogonalOnSamples) {
    for (std::size_t n : {2u, 5u, 10u, 34u}) {
        for (std::size_t k = 1; k < n; ++k)
            for (std::size_t l = k + 1; l < n; ++l) {
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    const double t = static_cast<double>(j) / static_cast<double>(n - 1);
                    dot += tim_basis(n, k, t) * tim_basis(n, l, t);
                }
                EXPECT_NEAR(dot, 0.0, 1e-10) << n << " " << k << " " << l;
            }
    }
}

TEST(Tim, TwoFramesUseOneDimension) {
    const Frame a = test::random_frame(16, 16, 1), b = test::random_frame(16, 16, 2);
    const TimModel m = tim_fit(FrameSequence({a, b}, 25.0));
    EXPECT_EQ(m.dimension(), 1u);
    const double y0 = tim_basis(2, 1, 0.0), y1 = tim_basis(2, 1, 1.0);
    for (double t : {0.0, 0.2, 0.5, 0.9, 1.0}) {
        const double w = (tim_basis(2, 1, t) - y0) / (y1 - y0);
        const Frame f = m.evaluate(t);
        for (std::size_t i = 0; i < f.size(); ++i)
            EXPECT_NEAR(f.pixels()[i], a.pixels()[i] + w * (b.pixels()[i] - a.pixels()[i]), 1e-12);
    }
}

TEST(Tim, ConstantClip) {
    const Frame f = test::random_frame(16, 16, 3);
    const FrameSequence out = tim_interpolate(test::repeat(f, 7), 13);
    ASSERT_EQ(out.size(), 13u);
    for (const Frame& g : out.frames()) EXPECT_LT(max_abs_diff(g, f), 1e-12);
}

TEST(Tim, ExactReconstructionAtSamples) {
    const FrameSequence clip = test::random_clip(20, 18, 6, 4);
    const TimModel m = tim_fit(clip);
    EXPECT_EQ(m.dimension(), 5u);
    for (std::size_t j = 0; j < 6; ++j) EXPECT_LT(max_abs_diff(m.evaluate(j / 5.0), clip[j]), 1e-6);
    const FrameSequence same = tim_resample(m, 6);
    for (std::size_t j = 0; j < 6; ++j) EXPECT_LT(max_abs_diff(same[j], clip[j]), 1e-6);
}

TEST(Tim, BrightnessRampStaysMonotone) {
    std::vector<Frame> frames;
    for (int j = 1; j <= 5; ++j) frames.emplace_back(16, 16, j / 5.0);
    const FrameSequence out = tim_interpolate(FrameSequence(frames, 25.0), 10);
    for (std::size_t i = 1; i < out.size(); ++i) EXPECT_GE(mean_of(out[i]), mean_of(out[i - 1]) - 1e-12);
}

TEST(Tim, DownsampleKeepsEndpoints) {
    const FrameSequence clip = test::random_clip(24, 24, 34, 5);
    const FrameSequence out = tim_interpolate(clip, 10);
    ASSERT_EQ(out.size(), 10u);
    EXPECT_LT(max_abs_diff(out[0], clip[0]), 1e-6);
    EXPECT_LT(max_abs_diff(out[9], clip[33]), 1e-6);
}

TEST(Tim, LinearInPixels) {
    const FrameSequence clip = test::random_clip(16, 16, 7, 6);
    std::vector<Frame> scaled;
    for (const Frame& f : clip.frames()) {
        Frame g = f;
        for (double& v : g.pixels()) v *= 0.4;
        scaled.push_back(g);
    }
    const TimModel a = tim_fit(clip), b = tim_fit(FrameSequence(scaled, 25.0));
    for (double t : {0.0, 0.13, 0.5, 0.77, 1.0}) {
        const Frame fa = a.evaluate(t), fb = b.evaluate(t);
        for (std::size_t i = 0; i < fa.size(); ++i) EXPECT_NEAR(fb.pixels()[i], 0.4 * fa.pixels()[i], 1e-12);
    }
}

TEST(Tim, ReversalSymmetry) {
    const FrameSequence clip = test::random_clip(16, 16, 8, 7);
    std::vector<Frame> rev(clip.frames().rbegin(), clip.frames().rend());
    const FrameSequence a = tim_interpolate(clip, 15);
    const FrameSequence b = tim_interpolate(FrameSequence(rev, 25.0), 15);
    for (std::size_t j = 0; j < 15; ++j) EXPECT_LT(max_abs_diff(a[j], b[14 - j]), 1e-9);
}

TEST(Tim, OutputLengthAndRange) {
    const FrameSequence clip = test::random_clip(16, 16, 9, 8);
    for (std::size_t len : {2u, 3u, 10u, 40u, 80u}) {
        const FrameSequence out = tim_interpolate(clip, len);
        EXPECT_EQ(out.size(), len);
        for (const Frame& f : out.frames())
            for (double v : f.pixels()) {
                ASSERT_GE(v, 0.0);
                ASSERT_LE(v, 1.0);
            }
    }
}

TEST(Tim, Preconditions) {
    EXPECT_THROW(tim_fit(FrameSequence({Frame(16, 16)}, 25.0)), ValidationError);
    EXPECT_THROW(tim_interpolate(test::random_clip(16, 16, 4, 1), 1), ValidationError);
}
