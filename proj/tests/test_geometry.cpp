#include "mesr/error.hpp"
#include "mesr/geometry.hpp"
#include "mesr/pipeline.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace mesr;

namespace {

const AnchorTriple kAnchors{{50, 60}, {110, 60}, {80, 95}};

Similarity rotation_about(Point2 c, double angle, double scale = 1.0) {
    Similarity s{scale * std::cos(angle), scale * std::sin(angle), 0.0, 0.0};
    const Point2 m = s.apply(c);
    s.tx = c.x - m.x;
    s.ty = c.y - m.y;
    return s;
}

AnchorTriple map(const Similarity& s, const AnchorTriple& a) {
    return {s.apply(a.left_eye), s.apply(a.right_eye), s.apply(a.nasal_spine)};
}

double mean_abs_in(const Frame& a, const Frame& b, const Rect& r) {
    double s = 0.0;
    for (int y = r.y; y < r.bottom(); ++y)
        for (int x = r.x; x < r.right(); ++x) s += std::abs(a.at(x, y) - b.at(x, y));
    return s / (static_cast<double>(r.width) * r.height);
}

int cell_of(const BlockGrid& g, Point2 p) {
    for (int i = 0; i < kBlocks; ++i)
        if (g.cells[i].contains(static_cast<int>(std::floor(p.x)), static_cast<int>(std::floor(p.y)))) return i;
    return -1;
}

}  // namespace

TEST(Track, StaticSequenceIsConstant) {
    const FrameSequence seq = test::repeat(test::textured_frame(160, 160, 1), 6);
    const AnchorPoints pts = track_points(seq, kAnchors);
    ASSERT_EQ(pts.size(), 6u);
    for (const auto& t : pts) {
        EXPECT_NEAR(distance(t.left_eye, kAnchors.left_eye), 0.0, 1e-9);
        EXPECT_NEAR(distance(t.right_eye, kAnchors.right_eye), 0.0, 1e-9);
        EXPECT_NEAR(distance(t.nasal_spine, kAnchors.nasal_spine), 0.0, 1e-9);
    }
}

TEST(Track, FollowsTranslation) {
    const Frame base = test::textured_frame(160, 160, 2);
    std::vector<Frame> frames;
    for (int t = 0; t < 6; ++t) frames.push_back(test::translated(base, 2.0 * t, 0.0));
    const AnchorTriple start{{40, 60}, {90, 60}, {65, 95}};
    const AnchorPoints pts = track_points(FrameSequence(frames, 25.0), start);
    for (std::size_t t = 1; t < pts.size(); ++t) {
        for (auto [a, b] : {std::pair{pts[t].left_eye, pts[t - 1].left_eye}, {pts[t].right_eye, pts[t - 1].right_eye},
                            {pts[t].nasal_spine, pts[t - 1].nasal_spine}}) {
            EXPECT_NEAR(a.x - b.x, 2.0, 0.25);
            EXPECT_NEAR(a.y - b.y, 0.0, 0.25);
        }
    }
}

TEST(Track, FlatRegionDiverges) {
    Frame f = test::textured_frame(160, 160, 3);
    for (int y = 0; y < 160; ++y)
        for (int x = 100; x < 160; ++x) f.at(x, y) = 0.5;
    const FrameSequence seq = test::repeat(f, 3);
    const AnchorTriple start{{40, 60}, {70, 60}, {130, 95}};
    try {
        track_points(seq, start);
        FAIL() << "expected divergence";
    } catch (const ComputeError& e) {
        EXPECT_NE(std::string(e.what()).find("frame"), std::string::npos);
    }
}

TEST(Track, InitialPointOutsideFrame) {
    const FrameSequence seq = test::repeat(test::textured_frame(64, 64, 4), 2);
    EXPECT_THROW(track_points(seq, {{10, 10}, {30, 10}, {200, 40}}), ValidationError);
}

TEST(Grid, IdentityCorrectionKeepsFrames) {
    const FrameSequence seq = test::repeat(test::textured_frame(160, 160, 5), 4);
    const auto out = correct_and_grid(seq, AnchorPoints(4, kAnchors));
    EXPECT_EQ(out.frames, seq);
    for (const auto& s : out.grid.transforms) EXPECT_TRUE(s.is_identity());
    EXPECT_EQ(out.grid.cells, make_grid(kAnchors, 160, 160).cells);
}

TEST(Grid, WidthFromInterOcularDistance) {
    const BlockGrid g = make_grid(kAnchors, 160, 160);
    EXPECT_DOUBLE_EQ(g.width, 144.0);
    EXPECT_EQ(g.bounds().width, 144);
    EXPECT_DOUBLE_EQ(g.height, 105.0);
    // Eye line on the boundary between the second and third rows.
    EXPECT_EQ(g.cells[2 * BlockGrid::kCols].y, 60);
}

TEST(Grid, CellsTileTheFace) {
    const BlockGrid g = make_grid({{47.3, 58.1}, {103.9, 61.7}, {77.2, 96.4}}, 160, 160);
    const Rect b = g.bounds();
    std::vector<int> hits(static_cast<std::size_t>(b.width) * b.height, 0);
    for (const Rect& c : g.cells)
        for (int y = c.y; y < c.bottom(); ++y)
            for (int x = c.x; x < c.right(); ++x) ++hits[static_cast<std::size_t>(y - b.y) * b.width + (x - b.x)];
    for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(Grid, DegenerateAnchorsRejected) {
    EXPECT_THROW(make_grid({{50, 60}, {50, 60}, {80, 95}}, 160, 160), ValidationError);
    EXPECT_THROW(make_grid({{50, 60}, {110, 60}, {80, 60}}, 160, 160), ValidationError);
}

TEST(Grid, CorrectsRotation) {
    const Frame f1 = test::textured_frame(160, 160, 6, 4);
    const Similarity rot = rotation_about({80, 80}, 5.0 * std::numbers::pi / 180.0);
    const Frame f2 = warp_similarity(f1, rot);
    const FrameSequence seq({f1, f2}, 25.0);
    const auto out = correct_and_grid(seq, {kAnchors, map(rot, kAnchors)});
    EXPECT_LT(mean_abs_in(out.frames[1], f1, out.grid.bounds()), 0.02);
}

TEST(Grid, CorrectionIsIdempotent) {
    const Frame f1 = test::textured_frame(160, 160, 7, 3);
    const Similarity s = rotation_about({80, 80}, 0.04, 1.03);
    const FrameSequence seq({f1, warp_similarity(f1, s)}, 25.0);
    const auto once = correct_and_grid(seq, {kAnchors, map(s, kAnchors)});
    const auto twice = correct_and_grid(once.frames, once.anchors);
    EXPECT_EQ(twice.grid.cells, once.grid.cells);
    for (std::size_t t = 0; t < seq.size(); ++t)
        for (std::size_t i = 0; i < f1.size(); ++i)
            ASSERT_NEAR(twice.frames[t].pixels()[i], once.frames[t].pixels()[i], 1e-6);
}

TEST(Grid, CellIndexInvariantUnderRotation) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ux(30, 130), uy(40, 125), ua(-0.2, 0.2), us(0.9, 1.1);
    for (int trial = 0; trial < 50; ++trial) {
        const Similarity s = rotation_about({80, 80}, ua(rng), us(rng));
        const Point2 p{ux(rng), uy(rng)};
        const BlockGrid g = make_grid(kAnchors, 160, 160);
        const Similarity back = Similarity::from_pairs(s.apply(kAnchors.left_eye), s.apply(kAnchors.right_eye),
                                                       kAnchors.left_eye, kAnchors.right_eye);
        const Point2 q = back.apply(s.apply(p));
        if (std::abs(q.x - std::round(q.x)) < 1e-6 || std::abs(q.y - std::round(q.y)) < 1e-6) continue;
        EXPECT_EQ(cell_of(g, q), cell_of(g, p));
    }
}

TEST(Lwm, IdentityFit) {
    const LandmarkSet& m = default_model_face();
    const LwmTransform t = lwm_fit(m, m);
    for (Point2 p : m) EXPECT_LT(distance(t.apply(p), p), 1e-9);
}

TEST(Lwm, UniformScale) {
    const LandmarkSet& m = default_model_face();
    LandmarkSet doubled;
    for (Point2 p : m) doubled.push_back(p * 2.0);
    const LwmTransform t = lwm_fit(m, doubled);
    for (std::size_t i = 0; i < m.size(); ++i) EXPECT_LT(distance(t.apply(m[i]), doubled[i]), 0.5);
    EXPECT_LT(t.max_control_residual(), 1e-6);
}

TEST(Lwm, SmoothWarpResidual) {
    const LandmarkSet& m = default_model_face();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> amp(1.0, 4.0), phase(0.0, 6.28);
    for (int trial = 0; trial < 5; ++trial) {
        const double ax = amp(rng), ay = amp(rng), px = phase(rng), py = phase(rng);
        LandmarkSet warped;
        for (Point2 p : m)
            warped.push_back({p.x + ax * std::sin(p.y / 35.0 + px), p.y + ay * std::cos(p.x / 30.0 + py)});
        EXPECT_LT(lwm_fit(m, warped).max_control_residual(), 0.5);
    }
}

TEST(Lwm, ContinuousAcrossSupportBoundaries) {
    const LandmarkSet& m = default_model_face();
    LandmarkSet warped;
    for (Point2 p : m) warped.push_back({p.x + 2.0 * std::sin(p.y / 20.0), p.y + 1.5 * std::cos(p.x / 25.0)});
    const LwmTransform t = lwm_fit(m, warped);
    // Probe tiny steps along many lines through the face; a jump would show as a large step.
    const double h = 1e-7;
    for (int line = 0; line < 40; ++line) {
        const double y = 5.0 + 3.0 * line;
        for (double x = 10.0; x < 130.0; x += 0.37) {
            const Point2 a = t.apply({x, y});
            const Point2 b = t.apply({x + h, y});
            ASSERT_LT(distance(a, b), 1e-6) << "at " << x << "," << y;
        }
    }
}

TEST(Lwm, RejectsTooFewControls) {
    LandmarkSet few(5);
    for (int i = 0; i < 5; ++i) few[i] = {static_cast<double>(i * 10), static_cast<double>(i * i)};
    EXPECT_THROW(lwm_fit(few, few), ValidationError);
    LandmarkSet same(68, Point2{3, 3});
    EXPECT_THROW(lwm_fit(same, same), ValidationError);
}

TEST(Register, ModelLandmarksGiveCroppedInput) {
    const LandmarkSet& m = default_model_face();
    const Frame f = test::textured_frame(140, 140, 9);
    const FrameSequence clip = test::repeat(f, 3);
    const FrameSequence out = register_clip(clip, m, m);
    const Frame expected = crop(f, model_crop(m));
    ASSERT_EQ(out.size(), 3u);
    EXPECT_LT(test::mean_abs_diff(out[0], expected), 0.005);
}

TEST(Register, SingleFrameAndIdenticalFrames) {
    const LandmarkSet& m = default_model_face();
    LandmarkSet shifted;
    for (Point2 p : m) shifted.push_back({p.x * 1.05 + 3.0, p.y * 1.05 - 2.0});
    const Frame f = test::textured_frame(160, 160, 10);
    const Rect box = model_crop(m);

    const FrameSequence one = register_clip(FrameSequence({f}, 25.0), shifted, m);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one.width(), box.width);
    EXPECT_EQ(one.height(), box.height);

    const FrameSequence two = register_clip(FrameSequence({f, f}, 25.0), shifted, m);
    EXPECT_EQ(two[0], two[1]);
    EXPECT_EQ(two[0], one[0]);
}

TEST(Register, WarpsTowardModel) {
    // A clip rendered with a known pose registers back onto the model-space rendering.
    const LandmarkSet& m = default_model_face();
    const Similarity pose = rotation_about({68, 80}, 0.05, 1.08);
    Similarity placed = pose;
    placed.tx += 8.0;
    placed.ty += 6.0;
    const Frame in_model = test::textured_frame(140, 140, 12, 4);
    Frame in_clip(160, 160);
    const Similarity back = placed.inverse();
    for (int y = 0; y < 160; ++y)
        for (int x = 0; x < 160; ++x) {
            const Point2 p = back.apply({static_cast<double>(x), static_cast<double>(y)});
            in_clip.at(x, y) = in_model.sample_zero(p.x, p.y);
        }
    LandmarkSet lm;
    for (Point2 p : m) lm.push_back(placed.apply(p));
    const FrameSequence out = register_clip(FrameSequence({in_clip}, 25.0), lm, m);
    EXPECT_LT(test::mean_abs_diff(out[0], crop(in_model, model_crop(m))), 0.01);
}

TEST(Files, AnchorAndLandmarkRoundTrip) {
    const auto dir = test::scratch_dir("geomfiles");
    write_anchor_file(dir / "a.csv", kAnchors);
    const AnchorTriple a = read_anchor_file(dir / "a.csv");
    EXPECT_EQ(a.left_eye, kAnchors.left_eye);
    EXPECT_EQ(a.nasal_spine, kAnchors.nasal_spine);
    write_landmark_file(dir / "l.csv", default_model_face());
    EXPECT_EQ(read_landmark_file(dir / "l.csv"), default_model_face());
    EXPECT_EQ(read_landmark_file(std::filesystem::path(MESR_ASSET_DIR) / "model_face_68.csv"), default_model_face());
    std::filesystem::remove_all(dir);
}
