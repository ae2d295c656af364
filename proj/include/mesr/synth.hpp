#pragma once

#include "mesr/geometry.hpp"
#include "mesr/media.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mesr {

enum class CorpusKind {
    Spot,  // long sequences, one unlabeled transient each
    Mesr,  // long sequences with labeled transients plus an onset-to-offset clip manifest
};

struct SynthOptions {
    CorpusKind kind = CorpusKind::Spot;
    int sequences = 30;    // Spot: total sequences, assigned round-robin to subjects
    int subjects = 6;
    int per_class = 2;     // Mesr: sequences per subject and class
    int frames = 200;
    double fps = 25.0;
    int width = 160;
    int height = 160;
    double amplitude = 1.5;  // px, peak block displacement
    double drift = 0.05;     // px/frame, whole-frame translation speed
    double noise = 0.01;     // pixel noise sigma
    std::uint64_t seed = 1;
};

struct SynthClass {
    std::string name;
    double direction_rad;
};

/// Motion classes of the labeled corpus, in label-id order.
const std::vector<SynthClass>& synth_classes();

/// Textured face image for a subject: the model face drawn in model coordinates and
/// mapped into the frame by `model_to_frame`.
Frame render_face(const LandmarkSet& model, const Similarity& model_to_frame, int width, int height,
                  std::uint64_t seed);

struct SynthResult {
    std::filesystem::path manifest;        // long sequences
    std::filesystem::path ground_truth;
    std::filesystem::path clip_manifest;   // Mesr only: onset-to-offset clips
    std::size_t sequences = 0;
};

/// Writes frame directories, landmark/anchor files, ground truth and manifests under `out_dir`.
SynthResult synthesize_corpus(const std::filesystem::path& out_dir, const SynthOptions& options);

}  // namespace mesr
