#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace mesr {

/// Axis-aligned pixel rectangle, half-open: [x, x+width) x [y, y+height).
struct Rect {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;

    int right() const { return x + width; }
    int bottom() const { return y + height; }
    bool empty() const { return width <= 0 || height <= 0; }
    bool contains(int px, int py) const { return px >= x && px < right() && py >= y && py < bottom(); }
    bool inside(int frame_width, int frame_height) const {
        return x >= 0 && y >= 0 && right() <= frame_width && bottom() <= frame_height;
    }
    bool operator==(const Rect&) const = default;
};

/// Grayscale image with row-major luminance in [0,1].
class Frame {
public:
    Frame() = default;
    Frame(int width, int height, double fill = 0.0);
    Frame(int width, int height, std::vector<double> pixels);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return pixels_.size(); }

    double at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
    double& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

    std::span<const double> pixels() const { return pixels_; }
    std::span<double> pixels() { return pixels_; }

    /// Bilinear read; out-of-bounds taps contribute 0.
    double sample_zero(double x, double y) const;
    /// Bilinear read with coordinates clamped to the frame.
    double sample_clamped(double x, double y) const;

    void clamp_unit();

    bool operator==(const Frame&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> pixels_;
};

/// Ordered frames sharing one size, with a frame rate and an opaque id.
class FrameSequence {
public:
    FrameSequence() = default;
    FrameSequence(std::vector<Frame> frames, double fps, std::string id = {});

    const std::vector<Frame>& frames() const { return frames_; }
    const Frame& operator[](std::size_t i) const { return frames_[i]; }
    std::size_t size() const { return frames_.size(); }
    int width() const { return frames_.front().width(); }
    int height() const { return frames_.front().height(); }
    double fps() const { return fps_; }
    const std::string& id() const { return id_; }

    /// Frames [first, last] inclusive, clamped to the sequence.
    FrameSequence excerpt(std::size_t first, std::size_t last, std::string id) const;

    bool operator==(const FrameSequence&) const = default;

private:
    std::vector<Frame> frames_;
    double fps_ = 0.0;
    std::string id_;
};

Frame crop(const Frame& frame, const Rect& region);

// PGM (binary P5, maxval 255). Reading also accepts P6 and converts with BT.601 weights.
Frame read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Frame& frame);

/// Frame file name for 0-based index i: frame_%06d.pgm, numbering from 000001.
std::string frame_filename(std::size_t index);

/// Loads every frame_*.pgm in `dir`, ordered lexicographically.
FrameSequence load_sequence(const std::filesystem::path& dir, double fps, std::string id);
void save_sequence(const std::filesystem::path& dir, const FrameSequence& seq);

struct TransientSpec {
    double amplitude_px = 2.0;   // peak rigid shift of the block content
    double direction_rad = 0.0;  // shift direction, image coordinates (y down)
    double intensity = 0.0;      // peak height of a Gaussian brightness bump centred in the block
    double drift_x = 0.0;        // slow whole-frame translation, px/frame
    double drift_y = 0.0;
    double noise_sigma = 0.0;    // additive Gaussian pixel noise
    std::uint64_t seed = 0;
    double fps = 25.0;
};

/// Raised-cosine activation in [0,1]: 0 outside [onset, offset], 1 at the midpoint apex.
double transient_profile(std::size_t frame, std::size_t onset, std::size_t offset);

/// Builds `len` frames from `base`. Block content shifts by profile(t) * amplitude along
/// the given direction and optionally brightens; the whole frame drifts and gets noise.
/// Indices are 0-based.
FrameSequence synthesize_transient(const Frame& base, std::size_t onset, std::size_t offset, std::size_t len,
                                   const Rect& block, const TransientSpec& spec);

}  // namespace mesr
