#pragma once

#include "mesr/classify.hpp"
#include "mesr/features.hpp"
#include "mesr/geometry.hpp"
#include "mesr/magnify.hpp"
#include "mesr/spotting.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mesr {

struct DescriptorSpec {
    DescriptorKind kind = DescriptorKind::HIGO;
    CuboidPartition partition{6, 6, 2};
    PlaneCombination combo = PlaneCombination::XYOT;
    LbpParams lbp{8, 2, true};
    int bins = 8;
    GlobalNorm norm = GlobalNorm::L2;

    /// Throws ValidationError for combinations the kind cannot produce (HOOF has no plane form).
    void validate() const;
};

DescriptorVector describe(const FrameSequence& clip, const DescriptorSpec& spec);

struct PipelineConfig {
    SpotParams spot;
    KltParams klt;
    GridParams grid;
    MagnifyParams magnify;
    int tim_length = 10;  // 0 disables interpolation
    DescriptorSpec descriptor;
    SvmOptions svm;
    Protocol protocol = Protocol::LeaveOneSubjectOut;
    CropParams crop;
    LwmParams lwm;
    double mesr_tau = 0.15;
    std::string model_landmarks;  // empty: bundled model face
    int workers = 0;              // 0: hardware concurrency

    void validate() const;
    nlohmann::ordered_json to_json() const;
    static PipelineConfig from_json(const nlohmann::json& j);
    static PipelineConfig load(const std::filesystem::path& path);
};

/// One clip or long sequence. Paths are resolved against the manifest's directory.
struct ManifestRecord {
    std::string id;
    std::filesystem::path dir;
    double fps = 0.0;
    std::string subject;
    std::optional<std::filesystem::path> anchors;
    std::optional<std::filesystem::path> landmarks;
    std::optional<std::filesystem::path> ground_truth;
    std::optional<std::string> label;
    std::optional<std::pair<std::size_t, std::size_t>> frames;  // 1-based inclusive range
};

struct DatasetManifest {
    std::vector<ManifestRecord> records;

    static DatasetManifest load(const std::filesystem::path& path);
    static DatasetManifest from_json(const nlohmann::json& j, const std::filesystem::path& base);
    nlohmann::ordered_json to_json(const std::filesystem::path& base) const;
    void save(const std::filesystem::path& path) const;
};

FrameSequence load_record(const ManifestRecord& r);

/// Runs fn(i) for i in [0, n) on up to `workers` threads; exceptions must be handled inside fn.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

/// Bundled 68-point model face, the same points as assets/model_face_68.csv.
const LandmarkSet& default_model_face();
LandmarkSet model_face(const PipelineConfig& config);

// ---------------------------------------------------------------------------
// Spotting run

struct SpotRecordResult {
    std::string id;
    bool ok = false;
    std::string error;
    SpotOutput output;
};

struct SpotRun {
    std::vector<SpotRecordResult> sequences;  // sorted by id
    GroundTruth truth;
    SpotEvaluation at_tau;
    RocCurve curve;
};

SpotRun run_spot(const DatasetManifest& manifest, const PipelineConfig& config);
void write_spot_reports(const SpotRun& run, const PipelineConfig& config, const std::filesystem::path& out_dir);

// ---------------------------------------------------------------------------
// Recognition run

/// Aligned, magnified, interpolated clip ready for description.
FrameSequence prepare_clip(const FrameSequence& clip, const LandmarkSet& first_landmarks, const LandmarkSet& model,
                           const PipelineConfig& config);

struct DescriptorSet {
    std::vector<LabeledSample> samples;   // successful records, sorted by id
    std::vector<std::string> class_names; // label id -> name
    std::vector<std::pair<std::string, std::string>> failures;  // id, error
    DescriptorLayout layout;
};

/// Label names sorted ascending define class ids.
std::vector<std::string> class_names_of(const std::vector<std::string>& labels);

DescriptorSet extract_descriptors(const DatasetManifest& manifest, const PipelineConfig& config);
void write_descriptor_dump(const DescriptorSet& set, const std::filesystem::path& csv_path);

struct RecognizeRun {
    DescriptorSet descriptors;
    RecognitionReport report;
};

RecognizeRun run_recognize(const DatasetManifest& manifest, const PipelineConfig& config);
nlohmann::ordered_json recognize_report_json(const RecognizeRun& run, const PipelineConfig& config);

/// The magnification levels 1, 2, 4, 8, 12, 16, 20, 24, 30.
const std::vector<double>& alpha_sweep();
/// TIM lengths: 0 (no interpolation), 10, 20, ..., 80.
const std::vector<int>& tim_sweep();

struct SweepPoint {
    std::string setting;  // "4" or "none"
    double accuracy = 0.0;
    std::size_t samples = 0;
};

std::vector<SweepPoint> sweep_alpha(const DatasetManifest& manifest, const PipelineConfig& config);
std::vector<SweepPoint> sweep_tim(const DatasetManifest& manifest, const PipelineConfig& config);
void write_sweep(const std::vector<SweepPoint>& points, const std::string& name, const PipelineConfig& config,
                 const std::filesystem::path& out_dir);

// ---------------------------------------------------------------------------
// Combined spot-then-recognize run

struct MesrSpot {
    std::string sequence;
    std::size_t interval_index = 0;  // into the sequence's ground truth
    std::size_t peak = 0;            // 0-based
    std::size_t first = 0;           // excerpt, 0-based inclusive
    std::size_t last = 0;
    std::string truth_label;
    std::string predicted_label;     // empty when the excerpt failed
    bool correct = false;
    std::string error;
};

struct MesrRun {
    SpotEvaluation spotting;
    std::vector<MesrSpot> spots;  // sorted by sequence, then interval
    std::size_t recognized = 0;
    double recognition_accuracy = 0.0;
    double overall = 0.0;
    std::vector<std::string> class_names;
    std::vector<std::pair<std::string, std::string>> failures;
    std::vector<std::string> warnings;
};

MesrRun run_mesr(const DatasetManifest& manifest, const PipelineConfig& config);
nlohmann::ordered_json mesr_report_json(const MesrRun& run, const PipelineConfig& config);

/// Overall MESR score: spotting TPR times recognition accuracy on the true spots.
inline double mesr_overall(double tpr, double recognition_accuracy) { return tpr * recognition_accuracy; }

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace mesr
