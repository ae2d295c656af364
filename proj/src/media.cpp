#include "mesr/media.hpp"

#include "mesr/error.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace mesr {

namespace fs = std::filesystem;

Frame::Frame(int width, int height, double fill)
    : width_(width), height_(height), pixels_(static_cast<std::size_t>(width) * height, fill) {
    if (width <= 0 || height <= 0) throw ValidationError("frame dimensions must be positive");
}

Frame::Frame(int width, int height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width <= 0 || height <= 0) throw ValidationError("frame dimensions must be positive");
    if (pixels_.size() != static_cast<std::size_t>(width) * height)
        throw ValidationError("pixel count does not match frame dimensions");
}

double Frame::sample_zero(double x, double y) const {
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const int x0 = static_cast<int>(fx);
    const int y0 = static_cast<int>(fy);
    const double ax = x - fx;
    const double ay = y - fy;
    auto tap = [&](int px, int py) {
        return (px < 0 || py < 0 || px >= width_ || py >= height_) ? 0.0 : at(px, py);
    };
    if (ax == 0.0 && ay == 0.0) return tap(x0, y0);
    const double top = (1.0 - ax) * tap(x0, y0) + ax * tap(x0 + 1, y0);
    const double bot = (1.0 - ax) * tap(x0, y0 + 1) + ax * tap(x0 + 1, y0 + 1);
    return (1.0 - ay) * top + ay * bot;
}

double Frame::sample_clamped(double x, double y) const {
    x = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
    y = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
    const int x0 = static_cast<int>(x);
    const int y0 = static_cast<int>(y);
    const int x1 = std::min(x0 + 1, width_ - 1);
    const int y1 = std::min(y0 + 1, height_ - 1);
    const double ax = x - x0;
    const double ay = y - y0;
    if (ax == 0.0 && ay == 0.0) return at(x0, y0);
    const double top = (1.0 - ax) * at(x0, y0) + ax * at(x1, y0);
    const double bot = (1.0 - ax) * at(x0, y1) + ax * at(x1, y1);
    return (1.0 - ay) * top + ay * bot;
}

void Frame::clamp_unit() {
    for (double& v : pixels_) v = std::clamp(v, 0.0, 1.0);
}

FrameSequence::FrameSequence(std::vector<Frame> frames, double fps, std::string id)
    : frames_(std::move(frames)), fps_(fps), id_(std::move(id)) {
    if (frames_.empty()) throw ValidationError("frame sequence is empty");
    if (!(fps_ > 0.0)) throw ValidationError("fps must be positive");
    const int w = frames_.front().width();
    const int h = frames_.front().height();
    if (w < 16 || h < 16) throw ValidationError("frames must be at least 16x16 pixels");
    for (const Frame& f : frames_)
        if (f.width() != w || f.height() != h) throw ValidationError("inconsistent dimensions");
}

FrameSequence FrameSequence::excerpt(std::size_t first, std::size_t last, std::string id) const {
    last = std::min(last, frames_.size() - 1);
    if (first > last) throw ValidationError("excerpt range is empty");
    std::vector<Frame> out(frames_.begin() + static_cast<std::ptrdiff_t>(first),
                           frames_.begin() + static_cast<std::ptrdiff_t>(last) + 1);
    return FrameSequence(std::move(out), fps_, std::move(id));
}

Frame crop(const Frame& frame, const Rect& region) {
    if (region.empty() || !region.inside(frame.width(), frame.height()))
        throw ValidationError("crop region outside frame");
    Frame out(region.width, region.height);
    for (int y = 0; y < region.height; ++y)
        for (int x = 0; x < region.width; ++x) out.at(x, y) = frame.at(region.x + x, region.y + y);
    return out;
}

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
    std::string tok;
    while (in) {
        int c = in.peek();
        if (c == '#') {
            std::string skip;
            std::getline(in, skip);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    while (in && !std::isspace(in.peek()) && in.peek() != EOF) tok.push_back(static_cast<char>(in.get()));
    return tok;
}

}  // namespace

Frame read_pgm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    const std::string magic = next_token(in);
    if (magic != "P5" && magic != "P6") throw ValidationError("undecodable file (not binary PGM/PPM): " + path.string());
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(next_token(in));
        h = std::stoi(next_token(in));
        maxval = std::stoi(next_token(in));
    } catch (const std::exception&) {
        throw ValidationError("undecodable header: " + path.string());
    }
    if (w <= 0 || h <= 0 || maxval != 255) throw ValidationError("unsupported PGM header: " + path.string());
    in.get();  // single whitespace before raster

    const int channels = magic == "P6" ? 3 : 1;
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * channels);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) throw ValidationError("truncated raster: " + path.string());

    std::vector<double> px(static_cast<std::size_t>(w) * h);
    for (std::size_t i = 0; i < px.size(); ++i) {
        if (channels == 1) {
            px[i] = raw[i] / 255.0;
        } else {
            const double y = 0.299 * raw[3 * i] + 0.587 * raw[3 * i + 1] + 0.114 * raw[3 * i + 2];
            px[i] = std::clamp(y / 255.0, 0.0, 1.0);
        }
    }
    return Frame(w, h, std::move(px));
}

void write_pgm(const fs::path& path, const Frame& frame) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << "P5\n" << frame.width() << ' ' << frame.height() << "\n255\n";
    std::vector<unsigned char> raw(frame.size());
    const auto px = frame.pixels();
    for (std::size_t i = 0; i < raw.size(); ++i)
        raw[i] = static_cast<unsigned char>(std::lround(std::clamp(px[i], 0.0, 1.0) * 255.0));
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

std::string frame_filename(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%06zu.pgm", index + 1);
    return buf;
}

FrameSequence load_sequence(const fs::path& dir, double fps, std::string id) {
    if (!fs::is_directory(dir)) throw ValidationError("missing directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && name.rfind("frame_", 0) == 0 && entry.path().extension() == ".pgm")
            files.push_back(entry.path());
    }
    if (files.empty()) throw ValidationError("no frame_*.pgm files in " + dir.string());
    std::sort(files.begin(), files.end());

    std::vector<Frame> frames;
    frames.reserve(files.size());
    for (const auto& f : files) {
        frames.push_back(read_pgm(f));
        if (frames.back().width() != frames.front().width() || frames.back().height() != frames.front().height())
            throw ValidationError("inconsistent dimensions in " + f.string());
    }
    return FrameSequence(std::move(frames), fps, std::move(id));
}

void save_sequence(const fs::path& dir, const FrameSequence& seq) {
    fs::create_directories(dir);
    for (std::size_t i = 0; i < seq.size(); ++i) write_pgm(dir / frame_filename(i), seq[i]);
}

double transient_profile(std::size_t frame, std::size_t onset, std::size_t offset) {
    if (frame < onset || frame > offset) return 0.0;
    if (offset == onset) return 1.0;
    const double phase = static_cast<double>(frame - onset) / static_cast<double>(offset - onset);
    return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * phase));
}

FrameSequence synthesize_transient(const Frame& base, std::size_t onset, std::size_t offset, std::size_t len,
                                   const Rect& block, const TransientSpec& spec) {
    if (onset > offset) throw ValidationError("onset > offset");
    if (offset >= len) throw ValidationError("offset beyond sequence length");
    if (block.empty() || !block.inside(base.width(), base.height())) throw ValidationError("block out of bounds");

    const double ux = std::cos(spec.direction_rad);
    const double uy = std::sin(spec.direction_rad);
    const double cx = block.x + 0.5 * (block.width - 1);
    const double cy = block.y + 0.5 * (block.height - 1);
    const double sigma = 0.25 * std::min(block.width, block.height);

    std::vector<Frame> frames;
    frames.reserve(len);
    for (std::size_t t = 0; t < len; ++t) {
        const double a = transient_profile(t, onset, offset);
        const double gx = spec.drift_x * static_cast<double>(t);
        const double gy = spec.drift_y * static_cast<double>(t);
        const double lx = a * spec.amplitude_px * ux;
        const double ly = a * spec.amplitude_px * uy;

        Frame f(base.width(), base.height());
        for (int y = 0; y < base.height(); ++y) {
            for (int x = 0; x < base.width(); ++x) {
                double v;
                if (block.contains(x, y)) {
                    v = base.sample_clamped(x - gx - lx, y - gy - ly);
                    if (spec.intensity != 0.0 && a > 0.0) {
                        const double dx = x - cx, dy = y - cy;
                        v += a * spec.intensity * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
                    }
                } else {
                    v = base.sample_clamped(x - gx, y - gy);
                }
                f.at(x, y) = v;
            }
        }
        if (spec.noise_sigma > 0.0) {
            std::mt19937_64 rng(spec.seed * 1000003ULL + t);
            std::normal_distribution<double> noise(0.0, spec.noise_sigma);
            for (double& v : f.pixels()) v += noise(rng);
        }
        f.clamp_unit();
        frames.push_back(std::move(f));
    }
    return FrameSequence(std::move(frames), spec.fps, "synthetic");
}

}  // namespace mesr
