#pragma once

#include "mesr/features.hpp"
#include "mesr/geometry.hpp"
#include "mesr/media.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mesr {

enum class SpotFeature { LBP, HOOF };
std::string to_string(SpotFeature f);
SpotFeature parse_spot_feature(const std::string& name);

struct SpotParams {
    double window_seconds = 0.32;
    SpotFeature feature = SpotFeature::LBP;
    int top_blocks = 12;  // M
    double tau = 0.15;
    LbpParams lbp{8, 3, true};
    int hoof_bins = 8;
    FlowParams flow;

    void validate() const;
};

/// Micro-interval length N = round(window * fps), bumped to the next odd value.
int interval_length(double window_seconds, double fps);
/// k = (N - 1) / 2.
int half_interval(int interval);

inline constexpr int kBlocks = BlockGrid::kRows * BlockGrid::kCols;

/// Per frame, one normalized histogram per grid block.
using BlockFeatures = std::vector<std::array<Histogram, kBlocks>>;

BlockFeatures block_features(const FrameSequence& corrected, const BlockGrid& grid, const SpotParams& params);

/// Symmetric chi-squared distance sum (h-g)^2/(h+g), empty bins contributing 0.
double chi_squared(const Histogram& h, const Histogram& g);

/// Distances between the current frame's block features and the mean of frames i-k and i+k.
std::array<double, kBlocks> block_fd(const BlockFeatures& features, std::size_t i, int k);

/// Inclusive index range; empty when first > last.
struct IndexRange {
    std::ptrdiff_t first = 0;
    std::ptrdiff_t last = -1;

    bool empty() const { return first > last; }
    bool contains(std::ptrdiff_t i) const { return i >= first && i <= last; }
    std::size_t size() const { return empty() ? 0 : static_cast<std::size_t>(last - first + 1); }
};

/// n x 36 block distances; rows outside `valid` are zero.
struct BlockDistances {
    std::vector<std::array<double, kBlocks>> rows;
    IndexRange valid;
};

BlockDistances block_distances(const BlockFeatures& features, int k);

struct DifferenceSeries {
    int k = 0;
    std::vector<double> initial;     // F, zero outside initial_valid
    IndexRange initial_valid;
    std::vector<double> contrasted;  // C, clamped at 0, zero outside contrasted_valid
    IndexRange contrasted_valid;
};

/// F_i: mean of the M largest block distances of each valid frame.
std::vector<double> initial_difference(const BlockDistances& d, int top_blocks);

/// C_i = F_i - (F_{i+k} + F_{i-k}) / 2 with negatives set to 0, defined on [first+k, last-k] of F's range.
std::vector<double> contrast(const std::vector<double>& initial, const IndexRange& initial_valid, int k,
                             IndexRange* contrasted_valid = nullptr);

DifferenceSeries difference_series(const BlockDistances& d, int top_blocks, int k);

struct SpotResult {
    std::vector<std::size_t> peaks;  // ascending frame indices (0-based)
    int k = 0;
    double tau = 0.0;
    double threshold = 0.0;

    /// Spotted interval [peak - k, peak + k] around a peak frame, clamped to the sequence.
    std::pair<std::size_t, std::size_t> interval(std::size_t peak, std::size_t n_frames) const;
};

/// T = C_mean + tau (C_max - C_mean) over the valid range; local maxima strictly above T,
/// then greedy suppression by height with minimum separation k/2 (ties: earlier frame wins).
SpotResult detect_peaks(const std::vector<double>& contrasted, const IndexRange& valid, double tau, int k);

struct SpotOutput {
    std::string id;
    std::size_t n_frames = 0;
    int interval = 0;  // N
    DifferenceSeries series;
    SpotResult result;
    AnchorPoints anchors;
    BlockGrid grid;
};

/// Full spotting chain on one long sequence: track, correct, grid, features, FD, peaks.
SpotOutput spot_sequence(const FrameSequence& seq, const AnchorTriple& first_anchors, const SpotParams& params,
                         const KltParams& klt = {}, const GridParams& grid = {});

// ---------------------------------------------------------------------------
// Evaluation

struct MeInterval {
    std::size_t onset = 0;   // 0-based, inclusive
    std::size_t offset = 0;  // 0-based, inclusive
    std::string label;

    std::size_t frames() const { return offset - onset + 1; }
};

using GroundTruth = std::map<std::string, std::vector<MeInterval>>;

/// CSV sequence_id,onset,offset,label with 1-based frame numbers.
GroundTruth read_ground_truth(const std::filesystem::path& path);
void write_ground_truth(const std::filesystem::path& path, const GroundTruth& truth);

struct SequencePeaks {
    std::string id;
    std::size_t n_frames = 0;
    int interval = 0;  // N
    std::vector<std::size_t> peaks;
};

struct PeakMatch {
    std::size_t peak = 0;
    std::ptrdiff_t interval = -1;  // index into the sequence's GT list, -1 for a false spot
};

/// Which GT interval (if any) each peak falls in, using [onset - (N-1)/4, offset + (N-1)/4].
std::vector<PeakMatch> match_peaks(const SequencePeaks& seq, const std::vector<MeInterval>& truth);

struct SpotEvaluation {
    double true_frames = 0.0;
    double me_frames = 0.0;
    double false_frames = 0.0;
    double non_me_frames = 0.0;
    std::size_t true_spots = 0;   // matched GT intervals
    std::size_t false_spots = 0;  // peaks outside every window
    double tpr = 0.0;
    double fpr = 0.0;  // capped at 1
};

SpotEvaluation evaluate(const std::vector<SequencePeaks>& results, const GroundTruth& truth);

/// Everything needed to re-threshold one sequence.
struct SequenceScores {
    std::string id;
    std::size_t n_frames = 0;
    int interval = 0;
    std::vector<double> contrasted;
    IndexRange valid;
};

struct RocPoint {
    double tau = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;
    double auc = 0.0;
};

/// The threshold sweep 0, 0.05, ..., 1 (21 values).
std::vector<double> default_tau_sweep();

/// Trapezoidal area under (fpr, tpr) points, closed at (0,0) and (1,1).
double roc_auc(std::vector<RocPoint> points);

RocCurve roc(const std::vector<SequenceScores>& dataset, const GroundTruth& truth,
             const std::vector<double>& taus = default_tau_sweep());

}  // namespace mesr
