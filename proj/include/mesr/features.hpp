#pragma once

#include "mesr/flow.hpp"
#include "mesr/media.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mesr {

using Histogram = std::vector<double>;

struct LbpParams {
    int p = 8;
    int r = 3;
    bool uniform = true;

    /// p(p-1)+3 with uniform mapping, 2^p otherwise.
    int bins() const;
    void validate() const;
    bool operator==(const LbpParams&) const = default;
};

/// Code (or uniform bin) of the circular neighbourhood around an integer centre.
int lbp_code(const Frame& frame, int x, int y, const LbpParams& params);

/// Uniform-2 mapping table indexed by raw code; non-uniform patterns map to the last bin.
const std::vector<int>& uniform_table(int p);

/// Number of circular 0/1 transitions in a p-bit pattern.
int circular_transitions(unsigned code, int p);

/// L1-normalized LBP histogram over all valid centres inside `region`.
Histogram lbp_frame_histogram(const Frame& frame, const Rect& region, const LbpParams& params);

/// Block counts along X, Y and T for spatio-temporal descriptors.
struct CuboidPartition {
    int nx = 1;
    int ny = 1;
    int nt = 1;

    int count() const { return nx * ny * nt; }
    void validate() const;
    bool operator==(const CuboidPartition&) const = default;
};

enum class Plane { XY = 0, XT = 1, YT = 2 };
enum class PlaneCombination { TOP, XYOT, XOT, YOT, XY };

/// Planes used by a combination, always in XY, XT, YT order.
std::vector<Plane> planes_of(PlaneCombination combo);
std::string to_string(PlaneCombination combo);
PlaneCombination parse_combination(const std::string& name);

enum class DescriptorKind { LBP, HOG, HIGO, HOOF };
std::string to_string(DescriptorKind kind);
DescriptorKind parse_kind(const std::string& name);

enum class GlobalNorm { None, L1, L2 };
std::string to_string(GlobalNorm norm);
GlobalNorm parse_norm(const std::string& name);

struct DescriptorLayout {
    DescriptorKind kind = DescriptorKind::LBP;
    CuboidPartition partition;
    PlaneCombination combo = PlaneCombination::TOP;
    LbpParams lbp;              // LBP only
    int orientation_bins = 8;   // HOG / HIGO only
    GlobalNorm norm = GlobalNorm::None;
    bool signed_orientation = true;

    int bins_per_plane() const;
    std::size_t length() const;
};

struct DescriptorVector {
    std::vector<double> values;
    DescriptorLayout layout;
    std::size_t empty_histograms = 0;  // cuboid-plane histograms that had no votes
};

/// Dense video volume (x fastest, then y, then t).
class Volume {
public:
    explicit Volume(const FrameSequence& clip);

    int width() const { return w_; }
    int height() const { return h_; }
    int length() const { return t_; }
    double at(int x, int y, int t) const { return data_[(static_cast<std::size_t>(t) * h_ + y) * w_ + x]; }

private:
    int w_, h_, t_;
    std::vector<double> data_;
};

/// Half-open voxel range of cuboid (ix, iy, it).
struct Cuboid {
    int x0, x1, y0, y1, t0, t1;
};
Cuboid cuboid_bounds(const Volume& vol, const CuboidPartition& part, int ix, int iy, int it);

/// Cuboid-major concatenation; planes within a cuboid follow XY, XT, YT restricted to the combination.
/// Cuboid order: iy, then ix, then it (it fastest).
DescriptorVector lbp_top(const FrameSequence& clip, const CuboidPartition& partition, PlaneCombination combo,
                         const LbpParams& params);

/// Per-pixel orientation and magnitude of the [-1 0 1] derivatives.
struct GradientField {
    int width = 0;
    int height = 0;
    std::vector<double> theta;      // atan2(I_y, I_x) in [-pi, pi]
    std::vector<double> magnitude;
};

GradientField gradient(const Frame& frame);

enum class Vote { Weighted, Count };

inline constexpr double kMinGradientMagnitude = 1e-7;

/// Orientation bin of theta: B equal bins with edges at -pi + 2 pi k / B; pi wraps to the last bin.
int orientation_bin(double theta, int bins);

/// L1-normalized orientation histogram (HOG: magnitude votes, HIGO: counts).
/// Pixels with magnitude below kMinGradientMagnitude are ignored; an all-zero result means no votes.
Histogram hog_histogram(std::span<const double> theta, std::span<const double> magnitude, int bins, Vote vote);
Histogram hog_histogram(const GradientField& g, const Rect& region, int bins, Vote vote);

DescriptorVector hog_top(const FrameSequence& clip, const CuboidPartition& partition, PlaneCombination combo,
                         int bins = 8, GlobalNorm norm = GlobalNorm::L2);
DescriptorVector higo_top(const FrameSequence& clip, const CuboidPartition& partition, PlaneCombination combo,
                          int bins = 8, GlobalNorm norm = GlobalNorm::L2);

inline constexpr double kMinFlowMagnitude = 1e-4;

/// Magnitude-weighted flow-orientation histogram over a region of a precomputed field.
Histogram hoof_histogram(const FlowField& flow, const Rect& region, int bins = 8);

/// Dense flow reference -> frame, then hoof_histogram over the region.
Histogram hoof(const Frame& frame, const Frame& reference, const Rect& region, int bins = 8,
               const FlowParams& params = {});

/// True when every entry is zero (flagged "no votes" histogram).
bool is_empty_histogram(const Histogram& h);

void normalize_l1(std::span<double> v);
void normalize_global(std::span<double> v, GlobalNorm norm);

/// Descriptor dump: header JSON sidecar plus CSV rows id,label,v_1..v_d.
std::string layout_json(const DescriptorLayout& layout);

}  // namespace mesr
