#include "mesr/pipeline.hpp"

#include "mesr/error.hpp"
#include "mesr/tim.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <thread>

namespace mesr {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ValidationError("unknown key '" + key + "' in " + where);
    }
}

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

// ---------------------------------------------------------------------------
// Descriptor spec

void DescriptorSpec::validate() const {
    if (kind == DescriptorKind::HOOF)
        throw ValidationError("combination " + to_string(combo) +
                              " is not valid for HOOF descriptors; HOOF is a spotting feature without plane form");
    partition.validate();
    if (kind == DescriptorKind::LBP) lbp.validate();
    if (bins < 2) throw ValidationError("orientation bins must be >= 2");
}

DescriptorVector describe(const FrameSequence& clip, const DescriptorSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case DescriptorKind::LBP: return lbp_top(clip, spec.partition, spec.combo, spec.lbp);
        case DescriptorKind::HOG: return hog_top(clip, spec.partition, spec.combo, spec.bins, spec.norm);
        case DescriptorKind::HIGO: return higo_top(clip, spec.partition, spec.combo, spec.bins, spec.norm);
        case DescriptorKind::HOOF: break;
    }
    throw ValidationError("unsupported descriptor kind");
}

// ---------------------------------------------------------------------------
// Config

void PipelineConfig::validate() const {
    spot.validate();
    magnify.validate();
    if (tim_length != 0 && tim_length < 2) throw ValidationError("TIM length must be 0 (off) or >= 2");
    descriptor.validate();
    if (descriptor.kind == DescriptorKind::LBP && descriptor.combo != PlaneCombination::XY && tim_length != 0 &&
        tim_length < 2 * descriptor.lbp.r + 1)
        throw ValidationError("TIM length too short for the temporal LBP radius");
    if (!(svm.tolerance > 0.0) || svm.max_epochs < 1) throw ValidationError("invalid SVM stopping rule");
    if (!(mesr_tau >= 0.0 && mesr_tau <= 1.0)) throw ValidationError("MESR tau must be in [0, 1]");
    if (!model_landmarks.empty() && !fs::exists(model_landmarks))
        throw ValidationError("model landmark file not found: " + model_landmarks);
    if (workers < 0) throw ValidationError("workers must be >= 0");
    if (klt.levels < 1 || klt.window < 3 || klt.max_iterations < 1) throw ValidationError("invalid tracker settings");
}

ojson PipelineConfig::to_json() const {
    ojson j;
    j["spot"] = {{"window_seconds", spot.window_seconds},
                 {"feature", to_string(spot.feature)},
                 {"top_blocks", spot.top_blocks},
                 {"tau", spot.tau},
                 {"lbp", {{"p", spot.lbp.p}, {"r", spot.lbp.r}, {"uniform", spot.lbp.uniform}}},
                 {"hoof_bins", spot.hoof_bins},
                 {"flow",
                  {{"smoothness", spot.flow.smoothness},
                   {"iterations", spot.flow.iterations},
                   {"levels", spot.flow.levels},
                   {"warps", spot.flow.warps}}}};
    j["tracker"] = {{"levels", klt.levels},
                    {"window", klt.window},
                    {"max_iterations", klt.max_iterations},
                    {"epsilon", klt.epsilon},
                    {"min_eigen", klt.min_eigen},
                    {"max_residual", klt.max_residual}};
    j["grid"] = {{"width_factor", grid.width_factor}, {"height_factor", grid.height_factor}, {"eye_row", grid.eye_row}};
    j["magnify"] = {{"alpha", magnify.alpha},
                    {"gamma", magnify.gamma},
                    {"band", {magnify.band_low, magnify.band_high}},
                    {"levels", magnify.levels},
                    {"motion_bound", magnify.motion_bound}};
    j["tim_length"] = tim_length;
    j["descriptor"] = {{"kind", to_string(descriptor.kind)},
                       {"partition", {descriptor.partition.nx, descriptor.partition.ny, descriptor.partition.nt}},
                       {"combo", to_string(descriptor.combo)},
                       {"lbp", {{"p", descriptor.lbp.p}, {"r", descriptor.lbp.r}, {"uniform", descriptor.lbp.uniform}}},
                       {"bins", descriptor.bins},
                       {"norm", to_string(descriptor.norm)}};
    j["classifier"] = {{"standardize", svm.standardize},
                       {"tolerance", svm.tolerance},
                       {"max_epochs", svm.max_epochs},
                       {"protocol", protocol == Protocol::LeaveOneSubjectOut ? "loso" : "loo"}};
    j["crop"] = {{"width_factor", crop.width_factor}, {"height_factor", crop.height_factor},
                 {"eye_height", crop.eye_height}};
    j["lwm"] = {{"neighbors", lwm.neighbors}, {"control_tolerance", lwm.control_tolerance}};
    j["mesr_tau"] = mesr_tau;
    j["model_landmarks"] = model_landmarks;
    j["workers"] = workers;
    return j;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
    PipelineConfig c;
    try {
        check_keys(j, {"spot", "tracker", "grid", "magnify", "tim_length", "descriptor", "classifier", "crop", "lwm",
                       "mesr_tau", "model_landmarks", "workers"},
                   "config");
        if (j.contains("spot")) {
            const auto& s = j["spot"];
            check_keys(s, {"window_seconds", "feature", "top_blocks", "tau", "lbp", "hoof_bins", "flow"}, "spot");
            read_opt(s, "window_seconds", c.spot.window_seconds);
            if (s.contains("feature")) c.spot.feature = parse_spot_feature(s["feature"].get<std::string>());
            read_opt(s, "top_blocks", c.spot.top_blocks);
            read_opt(s, "tau", c.spot.tau);
            if (s.contains("lbp")) {
                check_keys(s["lbp"], {"p", "r", "uniform"}, "spot.lbp");
                read_opt(s["lbp"], "p", c.spot.lbp.p);
                read_opt(s["lbp"], "r", c.spot.lbp.r);
                read_opt(s["lbp"], "uniform", c.spot.lbp.uniform);
            }
            read_opt(s, "hoof_bins", c.spot.hoof_bins);
            if (s.contains("flow")) {
                const auto& f = s["flow"];
                check_keys(f, {"smoothness", "iterations", "levels", "warps"}, "spot.flow");
                read_opt(f, "smoothness", c.spot.flow.smoothness);
                read_opt(f, "iterations", c.spot.flow.iterations);
                read_opt(f, "levels", c.spot.flow.levels);
                read_opt(f, "warps", c.spot.flow.warps);
            }
        }
        if (j.contains("tracker")) {
            const auto& t = j["tracker"];
            check_keys(t, {"levels", "window", "max_iterations", "epsilon", "min_eigen", "max_residual"}, "tracker");
            read_opt(t, "levels", c.klt.levels);
            read_opt(t, "window", c.klt.window);
            read_opt(t, "max_iterations", c.klt.max_iterations);
            read_opt(t, "epsilon", c.klt.epsilon);
            read_opt(t, "min_eigen", c.klt.min_eigen);
            read_opt(t, "max_residual", c.klt.max_residual);
        }
        if (j.contains("grid")) {
            const auto& g = j["grid"];
            check_keys(g, {"width_factor", "height_factor", "eye_row"}, "grid");
            read_opt(g, "width_factor", c.grid.width_factor);
            read_opt(g, "height_factor", c.grid.height_factor);
            read_opt(g, "eye_row", c.grid.eye_row);
        }
        if (j.contains("magnify")) {
            const auto& m = j["magnify"];
            check_keys(m, {"alpha", "gamma", "band", "levels", "motion_bound"}, "magnify");
            read_opt(m, "alpha", c.magnify.alpha);
            read_opt(m, "gamma", c.magnify.gamma);
            if (m.contains("band")) {
                const auto band = m["band"].get<std::vector<double>>();
                if (band.size() != 2) throw ValidationError("magnify.band needs [low, high]");
                c.magnify.band_low = band[0];
                c.magnify.band_high = band[1];
            }
            read_opt(m, "levels", c.magnify.levels);
            read_opt(m, "motion_bound", c.magnify.motion_bound);
        }
        read_opt(j, "tim_length", c.tim_length);
        if (j.contains("descriptor")) {
            const auto& d = j["descriptor"];
            check_keys(d, {"kind", "partition", "combo", "lbp", "bins", "norm"}, "descriptor");
            if (d.contains("kind")) c.descriptor.kind = parse_kind(d["kind"].get<std::string>());
            if (d.contains("partition")) {
                const auto p = d["partition"].get<std::vector<int>>();
                if (p.size() != 3) throw ValidationError("descriptor.partition needs [nx, ny, nt]");
                c.descriptor.partition = {p[0], p[1], p[2]};
            }
            if (d.contains("combo")) c.descriptor.combo = parse_combination(d["combo"].get<std::string>());
            if (d.contains("lbp")) {
                check_keys(d["lbp"], {"p", "r", "uniform"}, "descriptor.lbp");
                read_opt(d["lbp"], "p", c.descriptor.lbp.p);
                read_opt(d["lbp"], "r", c.descriptor.lbp.r);
                read_opt(d["lbp"], "uniform", c.descriptor.lbp.uniform);
            }
            read_opt(d, "bins", c.descriptor.bins);
            if (d.contains("norm")) c.descriptor.norm = parse_norm(d["norm"].get<std::string>());
        }
        if (j.contains("classifier")) {
            const auto& s = j["classifier"];
            check_keys(s, {"standardize", "tolerance", "max_epochs", "protocol"}, "classifier");
            read_opt(s, "standardize", c.svm.standardize);
            read_opt(s, "tolerance", c.svm.tolerance);
            read_opt(s, "max_epochs", c.svm.max_epochs);
            if (s.contains("protocol")) {
                const auto p = s["protocol"].get<std::string>();
                if (p == "loso") c.protocol = Protocol::LeaveOneSubjectOut;
                else if (p == "loo") c.protocol = Protocol::LeaveOneSampleOut;
                else throw ValidationError("classifier.protocol must be loso or loo");
            }
        }
        if (j.contains("crop")) {
            const auto& s = j["crop"];
            check_keys(s, {"width_factor", "height_factor", "eye_height"}, "crop");
            read_opt(s, "width_factor", c.crop.width_factor);
            read_opt(s, "height_factor", c.crop.height_factor);
            read_opt(s, "eye_height", c.crop.eye_height);
        }
        if (j.contains("lwm")) {
            const auto& s = j["lwm"];
            check_keys(s, {"neighbors", "control_tolerance"}, "lwm");
            read_opt(s, "neighbors", c.lwm.neighbors);
            read_opt(s, "control_tolerance", c.lwm.control_tolerance);
        }
        read_opt(j, "mesr_tau", c.mesr_tau);
        read_opt(j, "model_landmarks", c.model_landmarks);
        read_opt(j, "workers", c.workers);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed config: ") + e.what());
    }
    c.validate();
    return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

// ---------------------------------------------------------------------------
// Manifest

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j, const fs::path& base) {
    if (!j.is_array()) throw ValidationError("manifest must be a JSON array of clip records");
    if (j.empty()) throw ValidationError("no sequences");
    DatasetManifest m;
    std::set<std::string> ids;
    auto resolve = [&](const std::string& p) {
        fs::path path(p);
        return path.is_absolute() ? path : base / path;
    };
    try {
        for (const auto& e : j) {
            check_keys(e, {"id", "dir", "fps", "subject", "anchors", "landmarks", "ground_truth", "label", "frames"},
                       "manifest record");
            ManifestRecord r;
            r.id = e.at("id").get<std::string>();
            if (r.id.empty()) throw ValidationError("manifest record with empty id");
            if (!ids.insert(r.id).second) throw ValidationError("duplicate clip id '" + r.id + "'");
            r.dir = resolve(e.at("dir").get<std::string>());
            r.fps = e.at("fps").get<double>();
            if (!(r.fps > 0.0)) throw ValidationError("record '" + r.id + "' has non-positive fps");
            r.subject = e.at("subject").get<std::string>();
            if (r.subject.empty()) throw ValidationError("record '" + r.id + "' has an empty subject");
            if (e.contains("anchors")) r.anchors = resolve(e["anchors"].get<std::string>());
            if (e.contains("landmarks")) r.landmarks = resolve(e["landmarks"].get<std::string>());
            if (e.contains("ground_truth")) r.ground_truth = resolve(e["ground_truth"].get<std::string>());
            if (e.contains("label")) r.label = e["label"].get<std::string>();
            if (e.contains("frames")) {
                const auto f = e["frames"].get<std::vector<std::size_t>>();
                if (f.size() != 2 || f[0] < 1 || f[1] < f[0])
                    throw ValidationError("record '" + r.id + "' frames must be [first, last], 1-based");
                r.frames = std::make_pair(f[0], f[1]);
            }
            if (!fs::is_directory(r.dir)) throw ValidationError("record '" + r.id + "': missing directory " + r.dir.string());
            for (const auto* p : {&r.anchors, &r.landmarks, &r.ground_truth})
                if (*p && !fs::exists(**p))
                    throw ValidationError("record '" + r.id + "': missing file " + (*p)->string());
            m.records.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

DatasetManifest DatasetManifest::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open manifest " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("manifest " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(j, path.parent_path());
}

ojson DatasetManifest::to_json(const fs::path& base) const {
    const auto rel = [&](const fs::path& p) { return fs::relative(p, base).generic_string(); };
    ojson out = ojson::array();
    for (const auto& r : records) {
        ojson e;
        e["id"] = r.id;
        e["dir"] = rel(r.dir);
        e["fps"] = r.fps;
        e["subject"] = r.subject;
        if (r.anchors) e["anchors"] = rel(*r.anchors);
        if (r.landmarks) e["landmarks"] = rel(*r.landmarks);
        if (r.ground_truth) e["ground_truth"] = rel(*r.ground_truth);
        if (r.label) e["label"] = *r.label;
        if (r.frames) e["frames"] = {r.frames->first, r.frames->second};
        out.push_back(std::move(e));
    }
    return out;
}

void DatasetManifest::save(const fs::path& path) const { write_text(path, to_json(path.parent_path()).dump(2) + "\n"); }

FrameSequence load_record(const ManifestRecord& r) {
    FrameSequence seq = load_sequence(r.dir, r.fps, r.id);
    if (!r.frames) return seq;
    const auto [first, last] = *r.frames;
    if (last > seq.size())
        throw ValidationError("record '" + r.id + "' frame range ends past the sequence (" + std::to_string(seq.size()) +
                              " frames)");
    return seq.excerpt(first - 1, last - 1, r.id);
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    std::size_t w = workers > 0 ? static_cast<std::size_t>(workers) : std::max(1u, std::thread::hardware_concurrency());
    w = std::min(w, n);
    if (w == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (std::size_t t = 0; t < w; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    for (auto& th : pool) th.join();
}

const LandmarkSet& default_model_face() {
    static const LandmarkSet face = {
        {26, 62},          {26.807, 74.0956}, {29.1971, 85.7264}, {33.0783, 96.4454}, {38.3015, 105.841},
        {44.6661, 113.551}, {51.9273, 119.281}, {59.8062, 122.809}, {68, 124},         {76.1938, 122.809},
        {84.0727, 119.281}, {91.3339, 113.551}, {97.6985, 105.841}, {102.922, 96.4454}, {106.803, 85.7264},
        {109.193, 74.0956}, {110, 62},          {32, 47},          {38, 43.5},        {45, 42.5},
        {52, 43},          {59, 45},          {77, 45},          {84, 43},          {91, 42.5},
        {98, 43.5},        {104, 47},         {68, 56},          {68, 63},          {68, 70},
        {68, 77},          {60, 82},          {64, 84},          {68, 85},          {72, 84},
        {76, 82},          {38, 56},          {44, 52.5},        {52, 52.5},        {58, 56},
        {52, 59},          {44, 59},          {78, 56},          {84, 52.5},        {92, 52.5},
        {98, 56},          {92, 59},          {84, 59},          {54, 100},         {59, 96},
        {64, 94},          {68, 95},          {72, 94},          {77, 96},          {82, 100},
        {77, 105},         {72, 107},         {68, 108},         {64, 107},         {59, 105},
        {57, 100},         {64, 98},          {68, 98.5},        {72, 98},          {79, 100},
        {72, 102},         {68, 102.5},       {64, 102},
    };
    return face;
}

LandmarkSet model_face(const PipelineConfig& config) {
    return config.model_landmarks.empty() ? default_model_face() : read_landmark_file(config.model_landmarks);
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ComputeError("cannot write " + path.string());
    out << text;
}

// ---------------------------------------------------------------------------
// Spotting

namespace {

GroundTruth load_truth(const DatasetManifest& manifest) {
    GroundTruth truth;
    std::set<fs::path> seen;
    for (const auto& r : manifest.records) {
        if (!r.ground_truth || !seen.insert(*r.ground_truth).second) continue;
        for (auto& [id, list] : read_ground_truth(*r.ground_truth)) {
            auto& dst = truth[id];
            dst.insert(dst.end(), list.begin(), list.end());
        }
    }
    for (auto& [id, list] : truth)
        std::sort(list.begin(), list.end(), [](const MeInterval& a, const MeInterval& b) { return a.onset < b.onset; });
    return truth;
}

AnchorTriple record_anchors(const ManifestRecord& r) {
    if (r.anchors) return read_anchor_file(*r.anchors);
    if (r.landmarks) return anchors_from_landmarks(read_landmark_file(*r.landmarks));
    throw ValidationError("record '" + r.id + "' has neither anchors nor landmarks");
}

void require_spot_inputs(const DatasetManifest& manifest) {
    if (manifest.records.empty()) throw ValidationError("no sequences");
    for (const auto& r : manifest.records) {
        if (!r.anchors && !r.landmarks) throw ValidationError("record '" + r.id + "' has neither anchors nor landmarks");
        if (!r.ground_truth) throw ValidationError("record '" + r.id + "' has no ground truth");
    }
}

std::vector<SequencePeaks> peaks_of(const std::vector<SpotRecordResult>& results) {
    std::vector<SequencePeaks> out;
    for (const auto& s : results)
        if (s.ok) out.push_back({s.id, s.output.n_frames, s.output.interval, s.output.result.peaks});
    return out;
}

}  // namespace

SpotRun run_spot(const DatasetManifest& manifest, const PipelineConfig& config) {
    config.validate();
    require_spot_inputs(manifest);
    SpotRun run;
    run.truth = load_truth(manifest);
    if (run.truth.empty()) throw ValidationError("ground truth lists no intervals");

    const auto& recs = manifest.records;
    run.sequences.resize(recs.size());
    parallel_for(recs.size(), config.workers, [&](std::size_t i) {
        SpotRecordResult& res = run.sequences[i];
        res.id = recs[i].id;
        try {
            const FrameSequence seq = load_record(recs[i]);
            res.output = spot_sequence(seq, record_anchors(recs[i]), config.spot, config.klt, config.grid);
            res.ok = true;
        } catch (const std::exception& e) {
            res.error = e.what();
        }
    });
    std::sort(run.sequences.begin(), run.sequences.end(),
              [](const SpotRecordResult& a, const SpotRecordResult& b) { return a.id < b.id; });

    std::vector<SequenceScores> scores;
    for (const auto& s : run.sequences)
        if (s.ok)
            scores.push_back({s.id, s.output.n_frames, s.output.interval, s.output.series.contrasted,
                              s.output.series.contrasted_valid});
    if (scores.empty()) throw ComputeError("every sequence failed; first error: " + run.sequences.front().error);
    run.at_tau = evaluate(peaks_of(run.sequences), run.truth);
    run.curve = roc(scores, run.truth);
    return run;
}

void write_spot_reports(const SpotRun& run, const PipelineConfig& config, const fs::path& out_dir) {
    std::string csv = "tau,tpr,fpr\n";
    for (const auto& p : run.curve.points) csv += fmt(p.tau) + "," + fmt(p.tpr) + "," + fmt(p.fpr) + "\n";
    write_text(out_dir / "roc.csv", csv);

    std::size_t n_ok = 0;
    for (const auto& s : run.sequences) n_ok += s.ok ? 1 : 0;
    ojson summary;
    summary["auc"] = run.curve.auc;
    summary["n"] = n_ok;
    summary["feature"] = to_string(config.spot.feature);
    summary["params"] = config.to_json()["spot"];
    write_text(out_dir / "roc.json", summary.dump(2) + "\n");

    ojson seqs = ojson::array();
    for (const auto& s : run.sequences) {
        ojson e;
        e["id"] = s.id;
        if (!s.ok) {
            e["status"] = "error";
            e["error"] = s.error;
        } else {
            e["status"] = "ok";
            e["n_frames"] = s.output.n_frames;
            e["interval"] = s.output.interval;
            e["threshold"] = s.output.result.threshold;
            ojson peaks = ojson::array();
            for (std::size_t p : s.output.result.peaks) peaks.push_back(p + 1);
            e["peaks"] = peaks;
        }
        seqs.push_back(std::move(e));
    }
    ojson spots;
    spots["tau"] = config.spot.tau;
    spots["tpr"] = run.at_tau.tpr;
    spots["fpr"] = run.at_tau.fpr;
    spots["true_spots"] = run.at_tau.true_spots;
    spots["false_spots"] = run.at_tau.false_spots;
    spots["sequences"] = seqs;
    write_text(out_dir / "spots.json", spots.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Recognition

namespace {

FrameSequence finish_clip(const FrameSequence& aligned, const PipelineConfig& config) {
    FrameSequence clip = config.magnify.alpha > 1.0 ? magnify(aligned, config.magnify) : aligned;
    if (config.tim_length > 0) clip = tim_interpolate(clip, static_cast<std::size_t>(config.tim_length));
    return clip;
}

void require_recognition_inputs(const DatasetManifest& manifest) {
    if (manifest.records.empty()) throw ValidationError("no sequences");
    for (const auto& r : manifest.records) {
        if (!r.landmarks) throw ValidationError("record '" + r.id + "' has no landmarks");
        if (!r.label) throw ValidationError("record '" + r.id + "' has no label");
    }
}

struct AlignedClip {
    std::string id;
    std::string subject;
    int label = -1;
    bool ok = false;
    std::string error;
    FrameSequence frames;
};

std::vector<AlignedClip> align_records(const DatasetManifest& manifest, const PipelineConfig& config,
                                       const std::vector<std::string>& classes) {
    const LandmarkSet model = model_face(config);
    const auto& recs = manifest.records;
    std::vector<AlignedClip> out(recs.size());
    parallel_for(recs.size(), config.workers, [&](std::size_t i) {
        AlignedClip& a = out[i];
        a.id = recs[i].id;
        a.subject = recs[i].subject;
        a.label = static_cast<int>(std::lower_bound(classes.begin(), classes.end(), *recs[i].label) - classes.begin());
        try {
            const FrameSequence clip = load_record(recs[i]);
            a.frames = register_clip(clip, read_landmark_file(*recs[i].landmarks), model, config.crop, config.lwm);
            a.ok = true;
        } catch (const std::exception& e) {
            a.error = e.what();
        }
    });
    std::sort(out.begin(), out.end(), [](const AlignedClip& a, const AlignedClip& b) { return a.id < b.id; });
    return out;
}

DescriptorSet describe_aligned(const std::vector<AlignedClip>& aligned, const PipelineConfig& config,
                               const std::vector<std::string>& classes) {
    DescriptorSet set;
    set.class_names = classes;
    std::vector<std::optional<DescriptorVector>> vecs(aligned.size());
    std::vector<std::string> errors(aligned.size());
    parallel_for(aligned.size(), config.workers, [&](std::size_t i) {
        if (!aligned[i].ok) {
            errors[i] = aligned[i].error;
            return;
        }
        try {
            vecs[i] = describe(finish_clip(aligned[i].frames, config), config.descriptor);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < aligned.size(); ++i) {
        if (!vecs[i]) {
            set.failures.emplace_back(aligned[i].id, errors[i]);
            continue;
        }
        set.layout = vecs[i]->layout;
        set.samples.push_back({std::move(vecs[i]->values), aligned[i].label, aligned[i].subject, aligned[i].id});
    }
    return set;
}

std::vector<std::string> record_labels(const DatasetManifest& manifest) {
    std::vector<std::string> labels;
    for (const auto& r : manifest.records)
        if (r.label) labels.push_back(*r.label);
    return labels;
}

}  // namespace

std::vector<std::string> class_names_of(const std::vector<std::string>& labels) {
    std::set<std::string> s(labels.begin(), labels.end());
    return {s.begin(), s.end()};
}

FrameSequence prepare_clip(const FrameSequence& clip, const LandmarkSet& first_landmarks, const LandmarkSet& model,
                           const PipelineConfig& config) {
    return finish_clip(register_clip(clip, first_landmarks, model, config.crop, config.lwm), config);
}

DescriptorSet extract_descriptors(const DatasetManifest& manifest, const PipelineConfig& config) {
    config.validate();
    require_recognition_inputs(manifest);
    const auto classes = class_names_of(record_labels(manifest));
    return describe_aligned(align_records(manifest, config, classes), config, classes);
}

void write_descriptor_dump(const DescriptorSet& set, const fs::path& csv_path) {
    std::string csv = "id,label";
    const std::size_t dim = set.samples.empty() ? 0 : set.samples.front().features.size();
    for (std::size_t i = 1; i <= dim; ++i) csv += ",v" + std::to_string(i);
    csv += "\n";
    for (const auto& s : set.samples) {
        csv += s.id + "," + set.class_names.at(static_cast<std::size_t>(s.label));
        for (double v : s.features) csv += "," + fmt(v);
        csv += "\n";
    }
    write_text(csv_path, csv);
    fs::path sidecar = csv_path;
    sidecar.replace_extension(".json");
    write_text(sidecar, ojson::parse(layout_json(set.layout)).dump(2) + "\n");
}

RecognizeRun run_recognize(const DatasetManifest& manifest, const PipelineConfig& config) {
    RecognizeRun run;
    run.descriptors = extract_descriptors(manifest, config);
    if (run.descriptors.samples.empty()) throw ComputeError("every clip failed");
    run.report = cross_validate(run.descriptors.samples, config.protocol, config.svm);
    return run;
}

ojson recognize_report_json(const RecognizeRun& run, const PipelineConfig& config) {
    ojson j = ojson::parse(run.report.to_json(run.descriptors.class_names).dump());
    ojson out;
    out["protocol"] = config.protocol == Protocol::LeaveOneSubjectOut ? "loso" : "loo";
    out["alpha"] = config.magnify.alpha;
    out["tim_length"] = config.tim_length;
    out["descriptor"] = ojson::parse(layout_json(run.descriptors.layout));
    for (auto& [k, v] : j.items()) out[k] = v;
    ojson fails = ojson::array();
    for (const auto& [id, err] : run.descriptors.failures) fails.push_back({{"id", id}, {"error", err}});
    out["failures"] = fails;
    return out;
}

const std::vector<double>& alpha_sweep() {
    static const std::vector<double> v{1, 2, 4, 8, 12, 16, 20, 24, 30};
    return v;
}

const std::vector<int>& tim_sweep() {
    static const std::vector<int> v{0, 10, 20, 30, 40, 50, 60, 70, 80};
    return v;
}

namespace {

template <class T, class Apply>
std::vector<SweepPoint> sweep(const DatasetManifest& manifest, const PipelineConfig& config,
                              const std::vector<T>& values, Apply apply, std::string (*name)(T)) {
    config.validate();
    require_recognition_inputs(manifest);
    const auto classes = class_names_of(record_labels(manifest));
    const auto aligned = align_records(manifest, config, classes);
    std::vector<SweepPoint> out;
    for (const T& v : values) {
        PipelineConfig c = config;
        apply(c, v);
        const DescriptorSet set = describe_aligned(aligned, c, classes);
        SweepPoint p{name(v), 0.0, set.samples.size()};
        if (!set.samples.empty()) p.accuracy = cross_validate(set.samples, c.protocol, c.svm).accuracy;
        out.push_back(std::move(p));
    }
    return out;
}

std::string alpha_name(double a) { return fmt(a); }
std::string tim_name(int l) { return l == 0 ? "none" : std::to_string(l); }

}  // namespace

std::vector<SweepPoint> sweep_alpha(const DatasetManifest& manifest, const PipelineConfig& config) {
    return sweep(manifest, config, alpha_sweep(), [](PipelineConfig& c, double a) { c.magnify.alpha = a; },
                 &alpha_name);
}

std::vector<SweepPoint> sweep_tim(const DatasetManifest& manifest, const PipelineConfig& config) {
    return sweep(manifest, config, tim_sweep(), [](PipelineConfig& c, int l) { c.tim_length = l; }, &tim_name);
}

void write_sweep(const std::vector<SweepPoint>& points, const std::string& name, const PipelineConfig& config,
                 const fs::path& out_dir) {
    std::string csv = name + ",accuracy,samples\n";
    for (const auto& p : points) csv += p.setting + "," + fmt(p.accuracy) + "," + std::to_string(p.samples) + "\n";
    write_text(out_dir / ("sweep_" + name + ".csv"), csv);
    ojson j;
    j["sweep"] = name;
    j["descriptor"] = config.to_json()["descriptor"];
    ojson pts = ojson::array();
    for (const auto& p : points) pts.push_back({{name, p.setting}, {"accuracy", p.accuracy}, {"samples", p.samples}});
    j["points"] = pts;
    write_text(out_dir / ("sweep_" + name + ".json"), j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// MESR

namespace {

struct MesrSequence {
    std::string id;
    std::string subject;
    bool ok = false;
    std::string error;
    SequencePeaks peaks;
    std::vector<LabeledSample> training;  // one per GT interval that could be described
    std::vector<MesrSpot> spots;          // one per matched GT interval
    std::vector<std::optional<std::vector<double>>> spot_features;
};

LandmarkSet propagate(const LandmarkSet& first, const Similarity& to_first) {
    const Similarity back = to_first.inverse();
    LandmarkSet out;
    out.reserve(first.size());
    for (Point2 p : first) out.push_back(back.apply(p));
    return out;
}

}  // namespace

MesrRun run_mesr(const DatasetManifest& manifest, const PipelineConfig& config) {
    config.validate();
    require_spot_inputs(manifest);
    for (const auto& r : manifest.records)
        if (!r.landmarks) throw ValidationError("record '" + r.id + "' has no landmarks");

    const GroundTruth truth = load_truth(manifest);
    if (truth.empty()) throw ValidationError("ground truth lists no intervals");
    std::vector<std::string> labels;
    for (const auto& [id, list] : truth)
        for (const auto& g : list) labels.push_back(g.label);
    MesrRun run;
    run.class_names = class_names_of(labels);
    const auto class_id = [&](const std::string& name) {
        return static_cast<int>(std::lower_bound(run.class_names.begin(), run.class_names.end(), name) -
                                run.class_names.begin());
    };

    const LandmarkSet model = model_face(config);
    SpotParams spot = config.spot;
    spot.tau = config.mesr_tau;

    const auto& recs = manifest.records;
    std::vector<MesrSequence> seqs(recs.size());
    parallel_for(recs.size(), config.workers, [&](std::size_t i) {
        const ManifestRecord& r = recs[i];
        MesrSequence& s = seqs[i];
        s.id = r.id;
        s.subject = r.subject;
        try {
            const FrameSequence seq = load_record(r);
            const LandmarkSet lm1 = read_landmark_file(*r.landmarks);
            const AnchorTriple anchors = r.anchors ? read_anchor_file(*r.anchors) : anchors_from_landmarks(lm1);
            const SpotOutput out = spot_sequence(seq, anchors, spot, config.klt, config.grid);
            s.peaks = {r.id, out.n_frames, out.interval, out.result.peaks};
            s.ok = true;

            static const std::vector<MeInterval> none;
            const auto it = truth.find(r.id);
            const auto& gt = it == truth.end() ? none : it->second;
            const auto& transforms = out.grid.transforms;
            auto describe_range = [&](std::size_t first, std::size_t last) {
                const FrameSequence clip = seq.excerpt(first, last, r.id);
                const LandmarkSet lm = propagate(lm1, transforms.at(first));
                return describe(prepare_clip(clip, lm, model, config), config.descriptor).values;
            };

            for (const auto& g : gt) {
                try {
                    s.training.push_back({describe_range(g.onset, g.offset), class_id(g.label), r.subject,
                                          r.id + "@" + std::to_string(g.onset + 1)});
                } catch (const std::exception&) {
                    // A clip that cannot be described is left out of training only.
                }
            }

            // Best (highest contrasted value) peak inside each matched interval.
            std::map<std::ptrdiff_t, std::size_t> best;
            for (const PeakMatch& m : match_peaks(s.peaks, gt)) {
                if (m.interval < 0) continue;
                auto [pos, inserted] = best.emplace(m.interval, m.peak);
                if (!inserted && out.series.contrasted[m.peak] > out.series.contrasted[pos->second]) pos->second = m.peak;
            }
            for (const auto& [g, peak] : best) {
                MesrSpot spot_entry;
                spot_entry.sequence = r.id;
                spot_entry.interval_index = static_cast<std::size_t>(g);
                spot_entry.peak = peak;
                const auto [first, last] = out.result.interval(peak, out.n_frames);
                spot_entry.first = first;
                spot_entry.last = last;
                spot_entry.truth_label = gt[static_cast<std::size_t>(g)].label;
                try {
                    s.spot_features.push_back(describe_range(spot_entry.first, spot_entry.last));
                } catch (const std::exception& e) {
                    spot_entry.error = e.what();
                    s.spot_features.push_back(std::nullopt);
                }
                s.spots.push_back(std::move(spot_entry));
            }
        } catch (const std::exception& e) {
            s.ok = false;
            s.error = e.what();
        }
    });
    std::sort(seqs.begin(), seqs.end(), [](const MesrSequence& a, const MesrSequence& b) { return a.id < b.id; });

    std::vector<SequencePeaks> all_peaks;
    std::vector<LabeledSample> training;
    for (const auto& s : seqs) {
        if (!s.ok) {
            run.failures.emplace_back(s.id, s.error);
            continue;
        }
        all_peaks.push_back(s.peaks);
        training.insert(training.end(), s.training.begin(), s.training.end());
    }
    if (all_peaks.empty()) throw ComputeError("every sequence failed; first error: " + run.failures.front().second);
    run.spotting = evaluate(all_peaks, truth);

    // One classifier per subject that has true spots, trained on every other subject.
    std::set<std::string> subjects;
    for (const auto& s : seqs)
        if (s.ok && !s.spots.empty()) subjects.insert(s.subject);
    std::map<std::string, std::optional<SvmModel>> models;
    for (const auto& subj : subjects) {
        std::vector<LabeledSample> train;
        for (const auto& t : training)
            if (t.subject != subj) train.push_back(t);
        std::set<int> present;
        for (const auto& t : train) present.insert(t.label);
        if (present.size() < 2) {
            run.warnings.push_back("subject '" + subj + "': training set from other subjects has fewer than two classes");
            models[subj] = std::nullopt;
            continue;
        }
        CostSelection sel = select_cost(train, config.svm);
        for (auto& w : sel.warnings) run.warnings.push_back(std::move(w));
        models[subj] = svm_train(train, sel.cost, config.svm);
    }

    std::size_t correct = 0;
    for (auto& s : seqs) {
        if (!s.ok) continue;
        for (std::size_t i = 0; i < s.spots.size(); ++i) {
            MesrSpot& sp = s.spots[i];
            const auto& model = models[s.subject];
            if (model && s.spot_features[i]) {
                sp.predicted_label = run.class_names.at(static_cast<std::size_t>(model->predict(*s.spot_features[i])));
                sp.correct = sp.predicted_label == sp.truth_label;
            }
            correct += sp.correct ? 1 : 0;
            run.spots.push_back(sp);
        }
    }
    run.recognized = correct;
    run.recognition_accuracy =
        run.spots.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(run.spots.size());
    run.overall = mesr_overall(run.spotting.tpr, run.recognition_accuracy);
    return run;
}

ojson mesr_report_json(const MesrRun& run, const PipelineConfig& config) {
    ojson j;
    j["tau"] = config.mesr_tau;
    j["spotting"] = {{"tpr", run.spotting.tpr},
                     {"fpr", run.spotting.fpr},
                     {"true_spots", run.spotting.true_spots},
                     {"false_spots", run.spotting.false_spots},
                     {"true_frames", run.spotting.true_frames},
                     {"me_frames", run.spotting.me_frames},
                     {"false_frames", run.spotting.false_frames},
                     {"non_me_frames", run.spotting.non_me_frames}};
    j["recognition"] = {{"accuracy", run.recognition_accuracy},
                        {"correct", run.recognized},
                        {"total", run.spots.size()},
                        {"class_names", run.class_names}};
    j["overall"] = run.overall;
    j["config"] = {{"alpha", config.magnify.alpha},
                   {"tim_length", config.tim_length},
                   {"descriptor", config.to_json()["descriptor"]}};
    ojson spots = ojson::array();
    for (const auto& s : run.spots) {
        ojson e;
        e["sequence"] = s.sequence;
        e["interval"] = s.interval_index;
        e["peak"] = s.peak + 1;
        e["excerpt"] = {s.first + 1, s.last + 1};
        e["truth"] = s.truth_label;
        e["predicted"] = s.predicted_label;
        e["correct"] = s.correct;
        if (!s.error.empty()) e["error"] = s.error;
        spots.push_back(std::move(e));
    }
    j["spots"] = spots;
    ojson fails = ojson::array();
    for (const auto& [id, err] : run.failures) fails.push_back({{"id", id}, {"error", err}});
    j["failures"] = fails;
    j["warnings"] = run.warnings;
    return j;
}

}  // namespace mesr
