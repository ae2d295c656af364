#include "mesr/features.hpp"

#include "mesr/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace mesr {

// ---------------------------------------------------------------------------
// LBP

int LbpParams::bins() const { return uniform ? p * (p - 1) + 3 : 1 << p; }

void LbpParams::validate() const {
    if (p < 4 || p > 16) throw ValidationError("LBP neighbour count must be in [4,16]");
    if (r < 1) throw ValidationError("LBP radius must be >= 1");
}

int circular_transitions(unsigned code, int p) {
    int n = 0;
    for (int i = 0; i < p; ++i) n += ((code >> i) & 1u) != ((code >> ((i + 1) % p)) & 1u);
    return n;
}

const std::vector<int>& uniform_table(int p) {
    static std::mutex mu;
    static std::map<int, std::vector<int>> cache;
    std::lock_guard lock(mu);
    auto it = cache.find(p);
    if (it != cache.end()) return it->second;
    std::vector<int> table(1u << p);
    const int last = p * (p - 1) + 2;
    int next = 0;
    for (unsigned c = 0; c < table.size(); ++c) table[c] = circular_transitions(c, p) <= 2 ? next++ : last;
    return cache.emplace(p, std::move(table)).first->second;
}

namespace {

struct Offset {
    double du, dv;
};

// Neighbour i sits at angle 2 pi i / p, counter-clockwise from east on screen (v grows downward).
std::vector<Offset> circle_offsets(const LbpParams& params) {
    std::vector<Offset> out;
    for (int i = 0; i < params.p; ++i) {
        const double a = 2.0 * std::numbers::pi * i / params.p;
        double du = params.r * std::cos(a);
        double dv = -params.r * std::sin(a);
        if (std::abs(du - std::round(du)) < 1e-9) du = std::round(du);
        if (std::abs(dv - std::round(dv)) < 1e-9) dv = std::round(dv);
        out.push_back({du, dv});
    }
    return out;
}

// Bilinear read from any 2-D accessor; callers guarantee the taps are in range.
template <class Get>
double bilinear(Get&& get, double u, double v) {
    const double fu = std::floor(u), fv = std::floor(v);
    const int u0 = static_cast<int>(fu), v0 = static_cast<int>(fv);
    const double au = u - fu, av = v - fv;
    if (au == 0.0 && av == 0.0) return get(u0, v0);
    if (av == 0.0) return (1.0 - au) * get(u0, v0) + au * get(u0 + 1, v0);
    if (au == 0.0) return (1.0 - av) * get(u0, v0) + av * get(u0, v0 + 1);
    const double top = (1.0 - au) * get(u0, v0) + au * get(u0 + 1, v0);
    const double bot = (1.0 - au) * get(u0, v0 + 1) + au * get(u0 + 1, v0 + 1);
    return (1.0 - av) * top + av * bot;
}

template <class Get>
int lbp_at(Get&& get, int u, int v, const std::vector<Offset>& offsets,
           const std::vector<int>* table) {
    const double centre = get(u, v);
    unsigned code = 0;
    for (std::size_t i = 0; i < offsets.size(); ++i)
        if (bilinear(get, u + offsets[i].du, v + offsets[i].dv) >= centre) code |= 1u << i;
    return table ? (*table)[code] : static_cast<int>(code);
}

}  // namespace

int lbp_code(const Frame& frame, int x, int y, const LbpParams& params) {
    params.validate();
    if (x - params.r < 0 || y - params.r < 0 || x + params.r >= frame.width() || y + params.r >= frame.height())
        throw ValidationError("LBP centre too close to the frame border");
    const auto offsets = circle_offsets(params);
    auto get = [&](int u, int v) { return frame.at(u, v); };
    return lbp_at(get, x, y, offsets, params.uniform ? &uniform_table(params.p) : nullptr);
}

Histogram lbp_frame_histogram(const Frame& frame, const Rect& region, const LbpParams& params) {
    params.validate();
    const auto offsets = circle_offsets(params);
    const auto* table = params.uniform ? &uniform_table(params.p) : nullptr;
    auto get = [&](int u, int v) { return frame.at(u, v); };

    Histogram h(static_cast<std::size_t>(params.bins()), 0.0);
    const int x0 = std::max(region.x, params.r);
    const int y0 = std::max(region.y, params.r);
    const int x1 = std::min(region.right(), frame.width() - params.r);
    const int y1 = std::min(region.bottom(), frame.height() - params.r);
    std::size_t n = 0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            h[static_cast<std::size_t>(lbp_at(get, x, y, offsets, table))] += 1.0;
            ++n;
        }
    if (n == 0) throw ValidationError("region too small for LBP radius");
    for (double& v : h) v /= static_cast<double>(n);
    return h;
}

// ---------------------------------------------------------------------------
// Layout helpers

void CuboidPartition::validate() const {
    if (nx < 1 || ny < 1 || nt < 1) throw ValidationError("cuboid partition counts must be >= 1");
}

std::vector<Plane> planes_of(PlaneCombination combo) {
    switch (combo) {
        case PlaneCombination::TOP: return {Plane::XY, Plane::XT, Plane::YT};
        case PlaneCombination::XYOT: return {Plane::XT, Plane::YT};
        case PlaneCombination::XOT: return {Plane::XT};
        case PlaneCombination::YOT: return {Plane::YT};
        case PlaneCombination::XY: return {Plane::XY};
    }
    return {};
}

std::string to_string(PlaneCombination combo) {
    switch (combo) {
        case PlaneCombination::TOP: return "TOP";
        case PlaneCombination::XYOT: return "XYOT";
        case PlaneCombination::XOT: return "XOT";
        case PlaneCombination::YOT: return "YOT";
        case PlaneCombination::XY: return "XY";
    }
    return "?";
}

namespace {

std::string upper(std::string s) {
    for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

}  // namespace

PlaneCombination parse_combination(const std::string& name) {
    for (auto c : {PlaneCombination::TOP, PlaneCombination::XYOT, PlaneCombination::XOT, PlaneCombination::YOT,
                   PlaneCombination::XY})
        if (to_string(c) == upper(name)) return c;
    throw ValidationError("unknown plane combination: " + name);
}

std::string to_string(DescriptorKind kind) {
    switch (kind) {
        case DescriptorKind::LBP: return "LBP";
        case DescriptorKind::HOG: return "HOG";
        case DescriptorKind::HIGO: return "HIGO";
        case DescriptorKind::HOOF: return "HOOF";
    }
    return "?";
}

DescriptorKind parse_kind(const std::string& name) {
    for (auto k : {DescriptorKind::LBP, DescriptorKind::HOG, DescriptorKind::HIGO, DescriptorKind::HOOF})
        if (to_string(k) == upper(name)) return k;
    throw ValidationError("unknown descriptor kind: " + name);
}

std::string to_string(GlobalNorm norm) {
    switch (norm) {
        case GlobalNorm::None: return "none";
        case GlobalNorm::L1: return "l1";
        case GlobalNorm::L2: return "l2";
    }
    return "?";
}

GlobalNorm parse_norm(const std::string& name) {
    for (auto n : {GlobalNorm::None, GlobalNorm::L1, GlobalNorm::L2})
        if (upper(to_string(n)) == upper(name)) return n;
    throw ValidationError("unknown normalization: " + name);
}

int DescriptorLayout::bins_per_plane() const {
    return kind == DescriptorKind::LBP ? lbp.bins() : orientation_bins;
}

std::size_t DescriptorLayout::length() const {
    return static_cast<std::size_t>(partition.count()) * planes_of(combo).size() *
           static_cast<std::size_t>(bins_per_plane());
}

bool is_empty_histogram(const Histogram& h) {
    return std::all_of(h.begin(), h.end(), [](double v) { return v == 0.0; });
}

void normalize_l1(std::span<double> v) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    if (s > 0.0)
        for (double& x : v) x /= s;
}

void normalize_global(std::span<double> v, GlobalNorm norm) {
    if (norm == GlobalNorm::L1) {
        normalize_l1(v);
    } else if (norm == GlobalNorm::L2) {
        double s = 0.0;
        for (double x : v) s += x * x;
        s = std::sqrt(s);
        if (s > 0.0)
            for (double& x : v) x /= s;
    }
}

std::string layout_json(const DescriptorLayout& layout) {
    nlohmann::ordered_json j;
    j["kind"] = to_string(layout.kind);
    j["partition"] = {layout.partition.nx, layout.partition.ny, layout.partition.nt};
    j["combo"] = to_string(layout.combo);
    if (layout.kind == DescriptorKind::LBP) {
        j["params"] = {{"p", layout.lbp.p}, {"r", layout.lbp.r}, {"uniform", layout.lbp.uniform}};
    } else {
        j["params"] = {{"bins", layout.orientation_bins}, {"signed", layout.signed_orientation}};
    }
    j["global_norm"] = to_string(layout.norm);
    j["length"] = layout.length();
    return j.dump();
}

// ---------------------------------------------------------------------------
// Volumes and cuboids

Volume::Volume(const FrameSequence& clip)
    : w_(clip.width()), h_(clip.height()), t_(static_cast<int>(clip.size())) {
    data_.reserve(static_cast<std::size_t>(w_) * h_ * t_);
    for (const Frame& f : clip.frames()) data_.insert(data_.end(), f.pixels().begin(), f.pixels().end());
}

Cuboid cuboid_bounds(const Volume& vol, const CuboidPartition& part, int ix, int iy, int it) {
    auto edge = [](int n, int parts, int i) { return static_cast<int>(static_cast<long>(n) * i / parts); };
    return {edge(vol.width(), part.nx, ix),  edge(vol.width(), part.nx, ix + 1),
            edge(vol.height(), part.ny, iy), edge(vol.height(), part.ny, iy + 1),
            edge(vol.length(), part.nt, it), edge(vol.length(), part.nt, it + 1)};
}

namespace {

// Per-voxel values for one plane, stored like the volume; -1 marks "no value".
using PlaneMap = std::vector<int>;

PlaneMap lbp_plane_codes(const Volume& vol, Plane plane, const LbpParams& params) {
    const int w = vol.width(), h = vol.height(), T = vol.length(), r = params.r;
    const auto offsets = circle_offsets(params);
    const auto* table = params.uniform ? &uniform_table(params.p) : nullptr;
    PlaneMap codes(static_cast<std::size_t>(w) * h * T, -1);
    for (int t = 0; t < T; ++t)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                int code = -1;
                if (plane == Plane::XY) {
                    if (x < r || y < r || x >= w - r || y >= h - r) continue;
                    auto get = [&](int u, int v) { return vol.at(u, v, t); };
                    code = lbp_at(get, x, y, offsets, table);
                } else if (plane == Plane::XT) {
                    if (x < r || t < r || x >= w - r || t >= T - r) continue;
                    auto get = [&](int u, int v) { return vol.at(u, y, v); };
                    code = lbp_at(get, x, t, offsets, table);
                } else {
                    if (y < r || t < r || y >= h - r || t >= T - r) continue;
                    auto get = [&](int u, int v) { return vol.at(x, u, v); };
                    code = lbp_at(get, y, t, offsets, table);
                }
                codes[(static_cast<std::size_t>(t) * h + y) * w + x] = code;
            }
    return codes;
}

// Appends one histogram per selected plane for every cuboid, in layout order.
template <class PlaneHistogram>
DescriptorVector assemble(const Volume& vol, const DescriptorLayout& layout, PlaneHistogram&& plane_hist) {
    DescriptorVector out;
    out.layout = layout;
    out.values.reserve(layout.length());
    const auto planes = planes_of(layout.combo);
    const auto& part = layout.partition;
    for (int iy = 0; iy < part.ny; ++iy)
        for (int ix = 0; ix < part.nx; ++ix)
            for (int it = 0; it < part.nt; ++it) {
                const Cuboid c = cuboid_bounds(vol, part, ix, iy, it);
                for (Plane p : planes) {
                    Histogram h = plane_hist(p, c);
                    if (is_empty_histogram(h)) ++out.empty_histograms;
                    out.values.insert(out.values.end(), h.begin(), h.end());
                }
            }
    return out;
}

bool uses_temporal_plane(PlaneCombination combo) { return combo != PlaneCombination::XY; }

}  // namespace

DescriptorVector lbp_top(const FrameSequence& clip, const CuboidPartition& partition, PlaneCombination combo,
                         const LbpParams& params) {
    params.validate();
    partition.validate();
    const Volume vol(clip);
    if (uses_temporal_plane(combo) && vol.length() < 2 * params.r + 1)
        throw ValidationError("clip too short for the temporal LBP radius");
    if (vol.width() < 2 * params.r + 1 || vol.height() < 2 * params.r + 1)
        throw ValidationError("frames too small for the LBP radius");

    std::array<PlaneMap, 3> codes;
    for (Plane p : planes_of(combo)) codes[static_cast<int>(p)] = lbp_plane_codes(vol, p, params);

    DescriptorLayout layout;
    layout.kind = DescriptorKind::LBP;
    layout.partition = partition;
    layout.combo = combo;
    layout.lbp = params;
    layout.norm = GlobalNorm::None;

    const int w = vol.width(), h = vol.height();
    return assemble(vol, layout, [&](Plane p, const Cuboid& c) {
        const PlaneMap& map = codes[static_cast<int>(p)];
        Histogram hist(static_cast<std::size_t>(params.bins()), 0.0);
        for (int t = c.t0; t < c.t1; ++t)
            for (int y = c.y0; y < c.y1; ++y)
                for (int x = c.x0; x < c.x1; ++x) {
                    const int code = map[(static_cast<std::size_t>(t) * h + y) * w + x];
                    if (code >= 0) hist[static_cast<std::size_t>(code)] += 1.0;
                }
        normalize_l1(hist);
        return hist;
    });
}

// ---------------------------------------------------------------------------
// Gradients and orientation histograms

namespace {

double orientation(double dv, double du) {
    // +0.0 folds a negative zero so that atan2 never returns -pi for a zero vertical derivative.
    return std::atan2(dv + 0.0, du + 0.0);
}

}  // namespace

GradientField gradient(const Frame& frame) {
    const int w = frame.width(), h = frame.height();
    if (w < 3 || h < 3) throw ValidationError("gradient needs at least a 3x3 frame");
    GradientField g{w, h, std::vector<double>(frame.size()), std::vector<double>(frame.size())};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double ix = frame.at(std::min(x + 1, w - 1), y) - frame.at(std::max(x - 1, 0), y);
            const double iy = frame.at(x, std::min(y + 1, h - 1)) - frame.at(x, std::max(y - 1, 0));
            const std::size_t k = static_cast<std::size_t>(y) * w + x;
            g.theta[k] = orientation(iy, ix);
            g.magnitude[k] = std::sqrt(ix * ix + iy * iy);
        }
    return g;
}

int orientation_bin(double theta, int bins) {
    const int b = static_cast<int>(std::floor((theta + std::numbers::pi) * bins / (2.0 * std::numbers::pi)));
    return std::clamp(b, 0, bins - 1);
}

Histogram hog_histogram(std::span<const double> theta, std::span<const double> magnitude, int bins, Vote vote) {
    if (theta.size() != magnitude.size()) throw ValidationError("theta and magnitude differ in length");
    if (bins < 1) throw ValidationError("orientation bins must be >= 1");
    Histogram h(static_cast<std::size_t>(bins), 0.0);
    for (std::size_t i = 0; i < theta.size(); ++i) {
        if (!(magnitude[i] >= kMinGradientMagnitude)) continue;
        h[static_cast<std::size_t>(orientation_bin(theta[i], bins))] += vote == Vote::Weighted ? magnitude[i] : 1.0;
    }
    normalize_l1(h);
    return h;
}

Histogram hog_histogram(const GradientField& g, const Rect& region, int bins, Vote vote) {
    if (region.empty() || !region.inside(g.width, g.height)) throw ValidationError("histogram region outside frame");
    std::vector<double> th, m;
    for (int y = region.y; y < region.bottom(); ++y)
        for (int x = region.x; x < region.right(); ++x) {
            const std::size_t k = static_cast<std::size_t>(y) * g.width + x;
            th.push_back(g.theta[k]);
            m.push_back(g.magnitude[k]);
        }
    return hog_histogram(th, m, bins, vote);
}

namespace {

struct PlaneGradients {
    std::vector<double> theta;
    std::vector<double> magnitude;
};

PlaneGradients plane_gradients(const Volume& vol, Plane plane) {
    const int w = vol.width(), h = vol.height(), T = vol.length();
    const std::size_t n = static_cast<std::size_t>(w) * h * T;
    PlaneGradients g{std::vector<double>(n), std::vector<double>(n)};
    for (int t = 0; t < T; ++t)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double dx = vol.at(std::min(x + 1, w - 1), y, t) - vol.at(std::max(x - 1, 0), y, t);
                const double dy = vol.at(x, std::min(y + 1, h - 1), t) - vol.at(x, std::max(y - 1, 0), t);
                const double dt = vol.at(x, y, std::min(t + 1, T - 1)) - vol.at(x, y, std::max(t - 1, 0));
                double du = 0.0, dv = 0.0;
                switch (plane) {
                    case Plane::XY: du = dx; dv = dy; break;
                    case Plane::XT: du = dx; dv = dt; break;
                    case Plane::YT: du = dy; dv = dt; break;
                }
                const std::size_t k = (static_cast<std::size_t>(t) * h + y) * w + x;
                g.theta[k] = orientation(dv, du);
                g.magnitude[k] = std::sqrt(du * du + dv * dv);
            }
    return g;
}

DescriptorVector orientation_top(const FrameSequence& clip, const CuboidPartition& partition,
                                 PlaneCombination combo, int bins, GlobalNorm norm, Vote vote) {
    partition.validate();
    if (bins < 1) throw ValidationError("orientation bins must be >= 1");
    const Volume vol(clip);
    if (uses_temporal_plane(combo) && vol.length() < 2)
        throw ValidationError("clip too short for temporal gradients");

    std::array<PlaneGradients, 3> grads;
    for (Plane p : planes_of(combo)) grads[static_cast<int>(p)] = plane_gradients(vol, p);

    DescriptorLayout layout;
    layout.kind = vote == Vote::Weighted ? DescriptorKind::HOG : DescriptorKind::HIGO;
    layout.partition = partition;
    layout.combo = combo;
    layout.orientation_bins = bins;
    layout.norm = norm;

    const int w = vol.width(), h = vol.height();
    DescriptorVector out = assemble(vol, layout, [&](Plane p, const Cuboid& c) {
        const PlaneGradients& g = grads[static_cast<int>(p)];
        std::vector<double> th, m;
        th.reserve(static_cast<std::size_t>(c.x1 - c.x0) * (c.y1 - c.y0) * (c.t1 - c.t0));
        m.reserve(th.capacity());
        for (int t = c.t0; t < c.t1; ++t)
            for (int y = c.y0; y < c.y1; ++y)
                for (int x = c.x0; x < c.x1; ++x) {
                    const std::size_t k = (static_cast<std::size_t>(t) * h + y) * w + x;
                    th.push_back(g.theta[k]);
                    m.push_back(g.magnitude[k]);
                }
        return hog_histogram(th, m, bins, vote);
    });
    normalize_global(out.values, norm);
    return out;
}

}  // namespace

DescriptorVector hog_top(const FrameSequence& clip, const CuboidPartition& partition, PlaneCombination combo,
                         int bins, GlobalNorm norm) {
    return orientation_top(clip, partition, combo, bins, norm, Vote::Weighted);
}

DescriptorVector higo_top(const FrameSequence& clip, const CuboidPartition& partition, PlaneCombination combo,
                          int bins, GlobalNorm norm) {
    return orientation_top(clip, partition, combo, bins, norm, Vote::Count);
}

// ---------------------------------------------------------------------------
// HOOF

Histogram hoof_histogram(const FlowField& flow, const Rect& region, int bins) {
    if (region.empty() || !region.inside(flow.width, flow.height)) throw ValidationError("HOOF region outside frame");
    Histogram h(static_cast<std::size_t>(bins), 0.0);
    for (int y = region.y; y < region.bottom(); ++y)
        for (int x = region.x; x < region.right(); ++x) {
            const std::size_t k = static_cast<std::size_t>(y) * flow.width + x;
            const double m = std::hypot(flow.u[k], flow.v[k]);
            if (m < kMinFlowMagnitude) continue;
            h[static_cast<std::size_t>(orientation_bin(orientation(flow.v[k], flow.u[k]), bins))] += m;
        }
    normalize_l1(h);
    return h;
}

Histogram hoof(const Frame& frame, const Frame& reference, const Rect& region, int bins, const FlowParams& params) {
    return hoof_histogram(horn_schunck(reference, frame, params), region, bins);
}

}  // namespace mesr
