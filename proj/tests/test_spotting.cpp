#include "mesr/error.hpp"
#include "mesr/pipeline.hpp"
#include "mesr/spotting.hpp"
#include "mesr/synth.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <numeric>
#include <random>

using namespace mesr;

namespace {

BlockDistances distances_with(std::size_t n, int k, const std::function<double(std::size_t, int)>& fn) {
    BlockDistances d;
    d.rows.assign(n, {});
    d.valid = {k, static_cast<std::ptrdiff_t>(n) - 1 - k};
    for (std::ptrdiff_t i = d.valid.first; i <= d.valid.last; ++i)
        for (int b = 0; b < kBlocks; ++b) d.rows[static_cast<std::size_t>(i)][b] = fn(static_cast<std::size_t>(i), b);
    return d;
}

std::vector<double> random_series(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    return v;
}

}  // namespace

TEST(Interval, LengthIsOdd) {
    EXPECT_EQ(interval_length(0.32, 25.0), 9);    // 8 bumped to 9
    EXPECT_EQ(interval_length(0.32, 100.0), 33);  // 32 bumped to 33
    EXPECT_EQ(interval_length(0.32, 200.0), 65);  // 64 bumped to 65
    EXPECT_EQ(half_interval(9), 4);
    EXPECT_EQ(half_interval(65), 32);
}

TEST(ChiSquared, Examples) {
    EXPECT_EQ(chi_squared({1.0, 0.0}, {0.0, 1.0}), 2.0);
    EXPECT_EQ(chi_squared({0.5, 0.5, 0.0}, {0.5, 0.5, 0.0}), 0.0);
    EXPECT_NEAR(chi_squared({0.25, 0.75}, {0.5, 0.5}), 0.0625 / 0.75 + 0.0625 / 1.25, 1e-15);
    EXPECT_THROW(chi_squared({1.0}, {0.5, 0.5}), ValidationError);
}

TEST(BlockFd, IdenticalFramesGiveZero) {
    const Frame f = test::textured_frame(160, 160, 1);
    const FrameSequence seq = test::repeat(f, 12);
    const BlockGrid grid = make_grid({{50, 60}, {110, 60}, {80, 95}}, 160, 160);
    const BlockFeatures feats = block_features(seq, grid, SpotParams{});
    for (double d : block_fd(feats, 5, 4)) EXPECT_EQ(d, 0.0);
    const DifferenceSeries s = difference_series(block_distances(feats, 4), 12, 4);
    for (double v : s.initial) EXPECT_EQ(v, 0.0);
    EXPECT_THROW(block_fd(feats, 2, 4), ValidationError);
    EXPECT_THROW(block_fd(feats, 8, 4), ValidationError);
}

TEST(BlockFd, SymmetricInTailAndHead) {
    BlockFeatures feats(9);
    std::mt19937_64 rng(3);
    for (auto& frame : feats)
        for (auto& h : frame) {
            h = random_series(6, rng);
            normalize_l1(h);
        }
    BlockFeatures swapped = feats;
    std::swap(swapped[0], swapped[8]);
    EXPECT_EQ(block_fd(feats, 4, 4), block_fd(swapped, 4, 4));
}

TEST(InitialDifference, TopBlocksMean) {
    const auto single = distances_with(20, 4, [](std::size_t, int b) { return b == 7 ? 3.6 : 0.0; });
    const auto f = initial_difference(single, 12);
    for (std::ptrdiff_t i = 4; i <= 15; ++i) EXPECT_NEAR(f[static_cast<std::size_t>(i)], 0.3, 1e-15);
    EXPECT_EQ(f[0], 0.0);

    std::mt19937_64 rng(5);
    const auto vals = random_series(20 * kBlocks, rng);
    const auto d = distances_with(20, 4, [&](std::size_t i, int b) { return vals[i * kBlocks + b]; });
    const auto all = initial_difference(d, 36);
    for (std::ptrdiff_t i = 4; i <= 15; ++i) {
        const auto& row = d.rows[static_cast<std::size_t>(i)];
        EXPECT_NEAR(all[static_cast<std::size_t>(i)], std::accumulate(row.begin(), row.end(), 0.0) / 36.0, 1e-12);
    }
    EXPECT_THROW(initial_difference(d, 0), ValidationError);
    EXPECT_THROW(initial_difference(d, 37), ValidationError);
}

TEST(Contrast, ConstantAndRampVanish) {
    const int k = 4;
    const IndexRange valid{4, 35};
    std::vector<double> constant(40, 0.0), ramp(40, 0.0);
    for (std::ptrdiff_t i = valid.first; i <= valid.last; ++i) {
        constant[static_cast<std::size_t>(i)] = 0.7;
        ramp[static_cast<std::size_t>(i)] = 0.25 * static_cast<double>(i);  // exact in binary
    }
    IndexRange cv;
    for (double c : contrast(constant, valid, k, &cv)) EXPECT_EQ(c, 0.0);
    EXPECT_EQ(cv.first, 8);
    EXPECT_EQ(cv.last, 31);
    for (double c : contrast(ramp, valid, k)) EXPECT_EQ(c, 0.0);
}

TEST(Contrast, Impulse) {
    const int k = 4;
    std::vector<double> f(40, 0.0);
    f[20] = 1.0;
    const auto c = contrast(f, {4, 35}, k);
    EXPECT_EQ(c[20], 1.0);
    EXPECT_EQ(c[16], 0.0);  // raw value -0.5
    EXPECT_EQ(c[24], 0.0);
    for (double v : c) EXPECT_GE(v, 0.0);
}

TEST(Peaks, TauOneGivesNone) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const auto c = random_series(100, rng);
        EXPECT_TRUE(detect_peaks(c, {0, 99}, 1.0, 4).peaks.empty());
    }
    const auto zero = detect_peaks(std::vector<double>(30, 0.0), {0, 29}, 0.0, 4);
    EXPECT_TRUE(zero.peaks.empty());
    EXPECT_EQ(zero.threshold, 0.0);
}

TEST(Peaks, SingleMaximumAtTauZero) {
    std::vector<double> c(60, 0.0);
    for (int i = 0; i < 60; ++i) c[static_cast<std::size_t>(i)] = std::exp(-0.5 * (i - 31) * (i - 31) / 4.0);
    const SpotResult r = detect_peaks(c, {8, 51}, 0.0, 4);
    ASSERT_EQ(r.peaks.size(), 1u);
    EXPECT_EQ(r.peaks[0], 31u);
}

TEST(Peaks, TieWithinHalfIntervalKeepsFirst) {
    const int k = 8;  // suppression distance k/2 = 4; maxima k/4 = 2 apart
    std::vector<double> c(40, 0.0);
    c[20] = 1.0;
    c[21] = 0.5;
    c[22] = 1.0;
    const SpotResult r = detect_peaks(c, {0, 39}, 0.0, k);
    ASSERT_EQ(r.peaks.size(), 1u);
    EXPECT_EQ(r.peaks[0], 20u);
}

TEST(Peaks, ThresholdBetweenMeanAndMax) {
    std::mt19937_64 rng(9);
    for (double tau : {0.0, 0.3, 0.77, 1.0}) {
        const auto c = random_series(80, rng);
        const SpotResult r = detect_peaks(c, {0, 79}, tau, 6);
        const double mean = std::accumulate(c.begin(), c.end(), 0.0) / 80.0;
        const double mx = *std::max_element(c.begin(), c.end());
        EXPECT_GE(r.threshold, mean - 1e-12);
        EXPECT_LE(r.threshold, mx);
        for (std::size_t i = 1; i < r.peaks.size(); ++i) EXPECT_GE(r.peaks[i] - r.peaks[i - 1], 3u);
        for (std::size_t p : r.peaks) EXPECT_GT(c[p], r.threshold);
    }
}

TEST(Peaks, ScaleInvariant) {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 30; ++trial) {
        const auto f = random_series(120, rng);
        std::vector<double> g = f;
        for (double& v : g) v *= 8.0;  // power of two keeps the arithmetic exact
        const IndexRange valid{4, 115};
        IndexRange cv;
        const auto cf = contrast(f, valid, 4, &cv);
        const auto cg = contrast(g, valid, 4);
        for (double tau : default_tau_sweep())
            EXPECT_EQ(detect_peaks(cf, cv, tau, 4).peaks, detect_peaks(cg, cv, tau, 4).peaks) << tau;
        std::vector<double> h = f;
        for (double& v : h) v *= 3.7;
        const auto ch = contrast(h, valid, 4);
        for (double tau : {0.1, 0.35, 0.6, 0.85})
            EXPECT_EQ(detect_peaks(cf, cv, tau, 4).peaks, detect_peaks(ch, cv, tau, 4).peaks) << tau;
    }
}

TEST(Peaks, IntervalAroundPeak) {
    SpotResult r;
    r.k = 4;
    EXPECT_EQ(r.interval(20, 100), (std::pair<std::size_t, std::size_t>{16, 24}));
    EXPECT_EQ(r.interval(2, 100), (std::pair<std::size_t, std::size_t>{0, 6}));
    EXPECT_EQ(r.interval(98, 100), (std::pair<std::size_t, std::size_t>{94, 99}));
}

TEST(Evaluate, PerfectPeaks) {
    GroundTruth gt;
    std::vector<SequenceScores> scores;
    for (int s = 0; s < 4; ++s) {
        const std::string id = "q" + std::to_string(s);
        const std::size_t onset = 30 + 10 * s;
        gt[id].push_back({onset, onset + 8, "me"});
        SequenceScores sc{id, 150, 9, std::vector<double>(150, 0.0), {8, 141}};
        sc.contrasted[onset + 4] = 1.0;
        scores.push_back(sc);
    }
    const RocCurve curve = roc(scores, gt);
    ASSERT_EQ(curve.points.size(), 21u);
    for (std::size_t i = 0; i + 1 < curve.points.size(); ++i) {
        EXPECT_EQ(curve.points[i].tpr, 1.0);
        EXPECT_EQ(curve.points[i].fpr, 0.0);
    }
    EXPECT_EQ(curve.points.back().tpr, 0.0);
    EXPECT_DOUBLE_EQ(curve.auc, 1.0);
}

TEST(Evaluate, FalsePeakCountsIntervalLength) {
    GroundTruth gt;
    gt["a"].push_back({100, 108, "me"});  // 9 ME frames, 509 - 9 = 500 others
    const SpotEvaluation e = evaluate({{"a", 509, 9, {300}}}, gt);
    EXPECT_EQ(e.false_spots, 1u);
    EXPECT_DOUBLE_EQ(e.fpr, 9.0 / 500.0);
    EXPECT_EQ(e.tpr, 0.0);
}

TEST(Evaluate, MatchWindowUsesQuarterInterval) {
    GroundTruth gt;
    gt["a"].push_back({100, 108, "me"});
    // (N - 1) / 4 = 2 frames of slack on each side.
    for (std::size_t p : {98, 110}) EXPECT_EQ(evaluate({{"a", 300, 9, {p}}}, gt).true_spots, 1u);
    for (std::size_t p : {97, 111}) EXPECT_EQ(evaluate({{"a", 300, 9, {p}}}, gt).false_spots, 1u);
}

TEST(Evaluate, NoDoubleCredit) {
    GroundTruth gt;
    gt["a"].push_back({100, 108, "me"});
    gt["a"].push_back({200, 214, "me"});
    const SpotEvaluation e = evaluate({{"a", 400, 9, {101, 104, 107}}}, gt);
    EXPECT_EQ(e.true_spots, 1u);
    EXPECT_EQ(e.true_frames, 9.0);
    EXPECT_DOUBLE_EQ(e.tpr, 9.0 / 24.0);
    EXPECT_EQ(e.false_frames, 0.0);
}

TEST(Evaluate, EmptyTruthRejected) { EXPECT_THROW(evaluate({{"a", 100, 9, {}}}, {}), ValidationError); }

TEST(Roc, MonotoneInTau) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        GroundTruth gt;
        std::vector<SequenceScores> ds;
        for (int s = 0; s < 6; ++s) {
            SequenceScores sc{"s" + std::to_string(s), 300, 9, random_series(300, rng), {8, 291}};
            gt[sc.id].push_back({static_cast<std::size_t>(50 + 30 * s), static_cast<std::size_t>(58 + 30 * s), "me"});
            ds.push_back(sc);
        }
        const RocCurve c = roc(ds, gt);
        for (std::size_t i = 1; i < c.points.size(); ++i) {
            EXPECT_LE(c.points[i].tpr, c.points[i - 1].tpr);
            EXPECT_LE(c.points[i].fpr, c.points[i - 1].fpr);
        }
    }
}

TEST(Roc, RandomScoresGiveChanceArea) {
    std::mt19937_64 rng(2024);
    double sum = 0.0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        GroundTruth gt;
        std::vector<SequenceScores> ds;
        std::uniform_int_distribution<std::size_t> onset(20, 470);
        for (int s = 0; s < 10; ++s) {
            SequenceScores sc{"r" + std::to_string(s), 500, 9, std::vector<double>(500, 0.0), {8, 491}};
            const auto r = random_series(500, rng);
            for (std::size_t i = 8; i <= 491; ++i) sc.contrasted[i] = r[i];
            const std::size_t o = onset(rng);
            gt[sc.id].push_back({o, o + 8, "me"});
            ds.push_back(std::move(sc));
        }
        sum += roc(ds, gt).auc;
    }
    EXPECT_NEAR(sum / trials, 0.5, 0.05);
}

TEST(Roc, AucClosedAtCorners) {
    EXPECT_DOUBLE_EQ(roc_auc({}), 0.5);
    EXPECT_DOUBLE_EQ(roc_auc({{0.5, 0.5, 0.5}}), 0.5);
    EXPECT_DOUBLE_EQ(roc_auc({{0.5, 1.0, 0.0}}), 1.0);
    EXPECT_DOUBLE_EQ(roc_auc({{0.5, 0.8, 0.2}}), 0.5 * 0.2 * 0.8 + 0.8 * 0.5 * (0.8 + 1.0));
}

TEST(GroundTruthFile, RoundTripAndOneBased) {
    const auto dir = test::scratch_dir("gt");
    GroundTruth gt;
    gt["s01"].push_back({0, 8, "happy"});
    gt["s02"].push_back({49, 57, "surprise"});
    write_ground_truth(dir / "gt.csv", gt);
    const GroundTruth back = read_ground_truth(dir / "gt.csv");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back.at("s02")[0].onset, 49u);
    EXPECT_EQ(back.at("s02")[0].label, "surprise");
    std::ifstream in(dir / "gt.csv");
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    EXPECT_EQ(header, "sequence_id,onset,offset,label");
    EXPECT_EQ(first, "s01,1,9,happy");
    std::ofstream(dir / "bad.csv") << "sequence_id,onset,offset,label\ns01,9,3,x\n";
    EXPECT_THROW(read_ground_truth(dir / "bad.csv"), ValidationError);
    std::filesystem::remove_all(dir);
}

TEST(SpotSequence, ApexSpottedWithoutFalseFrames) {
    // Transients injected into rendered faces under slow drift: some tau isolates the apex.
    const LandmarkSet& model = default_model_face();
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const double th = 0.03 * static_cast<double>(seed);
        Similarity pose{1.02 * std::cos(th), 1.02 * std::sin(th), 0.0, 0.0};
        const Point2 c = pose.apply({68, 80});
        pose.tx = 80 - c.x;
        pose.ty = 80 - c.y;
        const Frame base = render_face(model, pose, 160, 160, seed);
        LandmarkSet lm;
        for (Point2 p : model) lm.push_back(pose.apply(p));
        const Point2 mouth = pose.apply({68, 100});
        TransientSpec spec;
        spec.amplitude_px = 1.5;
        spec.direction_rad = 0.7 * static_cast<double>(seed);
        spec.drift_x = 0.04;
        spec.drift_y = -0.03;
        spec.noise_sigma = 0.01;
        spec.seed = seed;
        const std::size_t onset = 40 + 10 * seed, offset = onset + 8;
        const FrameSequence seq = synthesize_transient(base, onset, offset, 120,
                                                       {static_cast<int>(mouth.x) - 14, static_cast<int>(mouth.y) - 9, 28, 18}, spec);
        const SpotOutput out = spot_sequence(seq, anchors_from_landmarks(lm), SpotParams{});
        GroundTruth gt;
        gt["x"].push_back({onset, offset, "me"});
        bool isolated = false;
        for (double tau : default_tau_sweep()) {
            const SpotResult r = detect_peaks(out.series.contrasted, out.series.contrasted_valid, tau, out.series.k);
            const SpotEvaluation e = evaluate({{"x", seq.size(), out.interval, r.peaks}}, gt);
            if (e.true_spots == 1 && e.false_frames == 0.0) isolated = true;
        }
        EXPECT_TRUE(isolated) << "seed " << seed;
    }
}

TEST(SpotSequence, ParamsValidated) {
    SpotParams p;
    p.top_blocks = 0;
    EXPECT_THROW(p.validate(), ValidationError);
    p = {};
    p.tau = 1.5;
    EXPECT_THROW(p.validate(), ValidationError);
    EXPECT_EQ(parse_spot_feature("hoof"), SpotFeature::HOOF);
    EXPECT_THROW(parse_spot_feature("sift"), ValidationError);
}
