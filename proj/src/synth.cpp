#include "mesr/synth.hpp"

#include "mesr/error.hpp"
#include "mesr/imgproc.hpp"
#include "mesr/pipeline.hpp"
#include "mesr/spotting.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace mesr {

namespace fs = std::filesystem;

const std::vector<SynthClass>& synth_classes() {
    static const std::vector<SynthClass> classes{
        {"negative", 2.0 * std::numbers::pi / 3.0},
        {"positive", 0.0},
        {"surprise", 4.0 * std::numbers::pi / 3.0},
    };
    return classes;
}

namespace {

constexpr int kTextureSize = 140;

// Soft-edged elliptical blob, 1 at the centre.
double blob(double x, double y, double cx, double cy, double rx, double ry) {
    const double d = (x - cx) * (x - cx) / (rx * rx) + (y - cy) * (y - cy) / (ry * ry);
    return std::exp(-d * d);
}

Frame model_texture(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Frame noise(kTextureSize, kTextureSize);
    for (double& v : noise.pixels()) v = gauss(rng);
    for (int i = 0; i < 2; ++i) noise = imgproc::blur5(noise);
    double var = 0.0;
    for (double v : noise.pixels()) var += v * v;
    const double scale = 0.08 / std::sqrt(var / static_cast<double>(noise.size()));

    Frame tex(kTextureSize, kTextureSize);
    for (int y = 0; y < kTextureSize; ++y)
        for (int x = 0; x < kTextureSize; ++x) {
            const double face = blob(x, y, 68, 78, 44, 52);
            double v = 0.3 + 0.3 * face;
            v -= 0.35 * (blob(x, y, 48, 56, 10, 4) + blob(x, y, 88, 56, 10, 4));
            v -= 0.15 * (blob(x, y, 48, 55.5, 3, 3) + blob(x, y, 88, 55.5, 3, 3));
            v -= 0.25 * (blob(x, y, 45, 44, 13, 2.5) + blob(x, y, 91, 44, 13, 2.5));
            v -= 0.3 * (blob(x, y, 63, 84, 2.5, 1.8) + blob(x, y, 73, 84, 2.5, 1.8));
            v += 0.08 * blob(x, y, 68, 72, 3, 10);
            v -= 0.25 * blob(x, y, 68, 101, 14, 4.5);
            v -= 0.15 * blob(x, y, 68, 100.5, 12, 1.2);
            tex.at(x, y) = v + scale * noise.at(x, y);
        }
    tex = imgproc::blur5(tex);
    tex.clamp_unit();
    return tex;
}

struct Subject {
    Similarity pose;  // model -> frame
    Frame base;
    LandmarkSet landmarks;
};

Subject make_subject(int s, const SynthOptions& o, const LandmarkSet& model) {
    std::mt19937_64 rng(o.seed * 7919ULL + static_cast<std::uint64_t>(s) * 104729ULL + 17ULL);
    std::uniform_real_distribution<double> scale(0.95, 1.1), angle(-0.06, 0.06), shift(-4.0, 4.0);
    const double sc = scale(rng), th = angle(rng);
    Similarity pose{sc * std::cos(th), sc * std::sin(th), 0.0, 0.0};
    const Point2 c = pose.apply({68.0, 80.0});
    pose.tx = 0.5 * o.width + shift(rng) - c.x;
    pose.ty = 0.5 * o.height + shift(rng) - c.y;

    Subject sub;
    sub.pose = pose;
    sub.base = render_face(model, pose, o.width, o.height, o.seed * 1000003ULL + static_cast<std::uint64_t>(s));
    for (Point2 p : model) sub.landmarks.push_back(pose.apply(p));
    return sub;
}

// Mouth-region block in frame coordinates.
Rect motion_block(const Subject& sub) {
    const double sc = std::hypot(sub.pose.a, sub.pose.b);
    const Point2 c = sub.pose.apply({68.0, 100.0});
    const int w = static_cast<int>(std::lround(28.0 * sc));
    const int h = static_cast<int>(std::lround(18.0 * sc));
    return {static_cast<int>(std::lround(c.x - 0.5 * w)), static_cast<int>(std::lround(c.y - 0.5 * h)), w, h};
}

std::string seq_id(int subject, int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%02d_%03d", subject + 1, index + 1);
    return buf;
}

void validate(const SynthOptions& o) {
    if (o.subjects < 1) throw ValidationError("synth needs at least one subject");
    if (o.kind == CorpusKind::Spot && o.sequences < 1) throw ValidationError("synth needs at least one sequence");
    if (o.kind == CorpusKind::Mesr && o.per_class < 1) throw ValidationError("per-class count must be >= 1");
    if (o.frames < 60) throw ValidationError("synthetic sequences need at least 60 frames");
    if (!(o.fps > 0.0)) throw ValidationError("fps must be positive");
    if (o.width < 128 || o.height < 128) throw ValidationError("synthetic frames must be at least 128x128");
    if (!(o.amplitude >= 0.0) || !(o.drift >= 0.0) || !(o.noise >= 0.0))
        throw ValidationError("amplitude, drift and noise must be non-negative");
}

}  // namespace

Frame render_face(const LandmarkSet& model, const Similarity& model_to_frame, int width, int height,
                  std::uint64_t seed) {
    if (model.size() != kLandmarkCount) throw ValidationError("model face needs 68 landmarks");
    const Frame tex = model_texture(seed);
    const Similarity back = model_to_frame.inverse();
    Frame out(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const Point2 p = back.apply({static_cast<double>(x), static_cast<double>(y)});
            out.at(x, y) = tex.sample_clamped(p.x, p.y);
        }
    return out;
}

SynthResult synthesize_corpus(const fs::path& out_dir, const SynthOptions& o) {
    validate(o);
    fs::create_directories(out_dir);
    const LandmarkSet& model = default_model_face();
    write_landmark_file(out_dir / "model_face_68.csv", model);

    std::vector<Subject> subjects;
    for (int s = 0; s < o.subjects; ++s) subjects.push_back(make_subject(s, o, model));

    struct Plan {
        int subject;
        int index;
        int label;  // -1 for the unlabeled corpus
    };
    std::vector<Plan> plan;
    if (o.kind == CorpusKind::Spot) {
        std::vector<int> count(static_cast<std::size_t>(o.subjects), 0);
        for (int i = 0; i < o.sequences; ++i) {
            const int s = i % o.subjects;
            plan.push_back({s, count[static_cast<std::size_t>(s)]++, -1});
        }
    } else {
        const int nc = static_cast<int>(synth_classes().size());
        for (int s = 0; s < o.subjects; ++s)
            for (int r = 0; r < o.per_class; ++r)
                for (int c = 0; c < nc; ++c) plan.push_back({s, r * nc + c, c});
    }

    const fs::path gt_path = out_dir / "ground_truth.csv";
    GroundTruth truth;
    DatasetManifest manifest, clips;
    const int me_len = interval_length(0.32, o.fps);

    for (const Plan& p : plan) {
        const Subject& sub = subjects[static_cast<std::size_t>(p.subject)];
        const std::string id = seq_id(p.subject, p.index);
        std::mt19937_64 rng(o.seed * 1000003ULL + static_cast<std::uint64_t>(p.subject) * 1009ULL +
                            static_cast<std::uint64_t>(p.index));
        std::uniform_int_distribution<int> onset_dist(40, o.frames - 40 - me_len);
        std::uniform_real_distribution<double> unit(0.0, 1.0);

        const std::size_t onset = static_cast<std::size_t>(onset_dist(rng));
        const std::size_t offset = onset + static_cast<std::size_t>(me_len) - 1;
        const double drift_dir = 2.0 * std::numbers::pi * unit(rng);

        TransientSpec spec;
        spec.amplitude_px = o.amplitude;
        spec.direction_rad = p.label >= 0 ? synth_classes()[static_cast<std::size_t>(p.label)].direction_rad
                                          : 2.0 * std::numbers::pi * unit(rng);
        spec.drift_x = o.drift * std::cos(drift_dir);
        spec.drift_y = o.drift * std::sin(drift_dir);
        spec.noise_sigma = o.noise;
        spec.seed = rng();
        spec.fps = o.fps;
        const FrameSequence seq =
            synthesize_transient(sub.base, onset, offset, static_cast<std::size_t>(o.frames), motion_block(sub), spec);

        const fs::path dir = out_dir / id;
        save_sequence(dir, seq);
        write_landmark_file(dir / "landmarks.csv", sub.landmarks);
        write_anchor_file(dir / "anchors.csv", anchors_from_landmarks(sub.landmarks));

        const std::string label = p.label >= 0 ? synth_classes()[static_cast<std::size_t>(p.label)].name : "me";
        truth[id].push_back({onset, offset, label});

        ManifestRecord r;
        r.id = id;
        r.dir = dir;
        r.fps = o.fps;
        r.subject = "subject" + std::to_string(p.subject + 1);
        r.anchors = dir / "anchors.csv";
        r.landmarks = dir / "landmarks.csv";
        r.ground_truth = gt_path;
        manifest.records.push_back(r);

        if (o.kind == CorpusKind::Mesr) {
            // Landmarks at the onset frame follow the whole-frame drift exactly.
            LandmarkSet at_onset;
            const double t = static_cast<double>(onset);
            for (Point2 q : sub.landmarks) at_onset.push_back({q.x + spec.drift_x * t, q.y + spec.drift_y * t});
            write_landmark_file(dir / "landmarks_onset.csv", at_onset);
            ManifestRecord c = r;
            c.anchors.reset();
            c.ground_truth.reset();
            c.landmarks = dir / "landmarks_onset.csv";
            c.label = label;
            c.frames = std::make_pair(onset + 1, offset + 1);
            clips.records.push_back(std::move(c));
        }
    }

    write_ground_truth(gt_path, truth);
    SynthResult result;
    result.ground_truth = gt_path;
    result.manifest = out_dir / "manifest.json";
    manifest.save(result.manifest);
    if (o.kind == CorpusKind::Mesr) {
        result.clip_manifest = out_dir / "clips.json";
        clips.save(result.clip_manifest);
    }
    result.sequences = plan.size();
    return result;
}

}  // namespace mesr
