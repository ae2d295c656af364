#pragma once

#include "mesr/media.hpp"

#include <array>
#include <filesystem>
#include <vector>

namespace mesr {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    Point2 operator+(Point2 o) const { return {x + o.x, y + o.y}; }
    Point2 operator-(Point2 o) const { return {x - o.x, y - o.y}; }
    Point2 operator*(double s) const { return {x * s, y * s}; }
    bool operator==(const Point2&) const = default;
};

double distance(Point2 a, Point2 b);

/// Inner eye corners and nasal spine point of one frame.
struct AnchorTriple {
    Point2 left_eye;
    Point2 right_eye;
    Point2 nasal_spine;
};

/// One anchor triple per tracked frame.
using AnchorPoints = std::vector<AnchorTriple>;

/// Rotation + uniform scale + translation: p' = s R(theta) p + t.
struct Similarity {
    double a = 1.0;  // s cos(theta)
    double b = 0.0;  // s sin(theta)
    double tx = 0.0;
    double ty = 0.0;

    Point2 apply(Point2 p) const { return {a * p.x - b * p.y + tx, b * p.x + a * p.y + ty}; }
    Similarity inverse() const;
    bool is_identity() const { return a == 1.0 && b == 0.0 && tx == 0.0 && ty == 0.0; }

    /// The unique similarity taking (p0, p1) onto (q0, q1).
    static Similarity from_pairs(Point2 p0, Point2 p1, Point2 q0, Point2 q1);
};

struct KltParams {
    int levels = 3;
    int window = 15;
    int max_iterations = 30;
    double epsilon = 0.01;
    double min_eigen = 1e-6;      // per-pixel structure tensor eigenvalue floor
    double max_residual = 0.08;   // mean |residual| in the window after convergence
};

/// Pyramidal Lucas-Kanade tracking of three anchors through the whole sequence.
/// Throws ComputeError naming the frame when a point diverges.
AnchorPoints track_points(const FrameSequence& seq, const AnchorTriple& initial, const KltParams& params = {});

/// Tracks a single point from `from` to `to`; exposed for tests.
Point2 track_point(const Frame& from, const Frame& to, Point2 p, const KltParams& params = {});

struct GridParams {
    double width_factor = 2.4;   // grid width / inter-ocular distance
    double height_factor = 3.0;  // grid height / eye-to-nasal-spine distance
    int eye_row = 2;             // eye line sits on the top edge of this row (0-based)
};

/// Fixed 6x6 block layout in frame-1 coordinates plus the per-frame corrections.
struct BlockGrid {
    static constexpr int kRows = 6;
    static constexpr int kCols = 6;

    double left = 0.0;  // real-valued face rectangle
    double top = 0.0;
    double width = 0.0;
    double height = 0.0;
    std::array<Rect, kRows * kCols> cells{};  // row-major
    std::vector<Similarity> transforms;       // frame t -> frame 1

    Rect bounds() const;
    bool operator==(const BlockGrid&) const = default;
};

/// Grid placement from the frame-1 anchors alone.
BlockGrid make_grid(const AnchorTriple& first, int frame_width, int frame_height, const GridParams& params = {});

/// Warp by an inverse map: out(p) = in(inverse(p)), bilinear, zero outside.
Frame warp_similarity(const Frame& in, const Similarity& forward);

struct CorrectedSequence {
    FrameSequence frames;
    BlockGrid grid;
    AnchorPoints anchors;  // anchors after correction
};

/// Removes in-plane rotation and scale changes relative to frame 1 and lays out the grid.
CorrectedSequence correct_and_grid(const FrameSequence& seq, const AnchorPoints& pts, const GridParams& params = {});

inline constexpr std::size_t kLandmarkCount = 68;
using LandmarkSet = std::vector<Point2>;

struct LwmParams {
    int neighbors = 12;
    double control_tolerance = 0.5;  // px, enforced at fit time
};

/// Local weighted mean mapping built from control-point correspondences.
class LwmTransform {
public:
    Point2 apply(Point2 p) const;
    std::size_t control_count() const { return controls_.size(); }
    double max_control_residual() const;

    friend LwmTransform lwm_fit(const LandmarkSet& source, const LandmarkSet& target, const LwmParams& params);

private:
    // Quadratic in normalized local coordinates u = (x - cx)/R, v = (y - cy)/R:
    // c0 + c1 u + c2 v + c3 u^2 + c4 uv + c5 v^2.
    struct Local {
        Point2 center;
        double radius = 0.0;
        std::array<double, 6> px{};
        std::array<double, 6> py{};
    };
    Point2 evaluate_local(std::size_t i, Point2 p) const;

    std::vector<Point2> controls_;
    std::vector<Point2> targets_;
    std::vector<Local> locals_;
};

LwmTransform lwm_fit(const LandmarkSet& source, const LandmarkSet& target, const LwmParams& params = {});

struct CropParams {
    double width_factor = 1.8;   // x model inter-ocular distance
    double height_factor = 2.2;
    double eye_height = 0.3;     // eye line at this fraction of the crop height
};

/// Crop rectangle in model coordinates from the model's eye centres.
Rect model_crop(const LandmarkSet& model, const CropParams& params = {});
Point2 left_eye_center(const LandmarkSet& lm);
Point2 right_eye_center(const LandmarkSet& lm);

/// Registers every frame of `clip` to the model face with one LWM fit from frame-1 landmarks.
FrameSequence register_clip(const FrameSequence& clip, const LandmarkSet& first_frame_landmarks,
                            const LandmarkSet& model_landmarks, const CropParams& crop = {},
                            const LwmParams& params = {});

// File formats.
AnchorTriple read_anchor_file(const std::filesystem::path& path);
void write_anchor_file(const std::filesystem::path& path, const AnchorTriple& a);
LandmarkSet read_landmark_file(const std::filesystem::path& path);
void write_landmark_file(const std::filesystem::path& path, const LandmarkSet& lm);

/// Anchor triple from the 68-point layout (inner eye corners 39/42, subnasale 33).
AnchorTriple anchors_from_landmarks(const LandmarkSet& lm);

}  // namespace mesr
