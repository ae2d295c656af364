#include "mesr/geometry.hpp"

#include "mesr/error.hpp"
#include "mesr/imgproc.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

namespace mesr {

namespace fs = std::filesystem;

double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

Similarity Similarity::inverse() const {
    const double d = a * a + b * b;
    Similarity inv;
    inv.a = a / d;
    inv.b = -b / d;
    inv.tx = -(inv.a * tx - inv.b * ty);
    inv.ty = -(inv.b * tx + inv.a * ty);
    return inv;
}

Similarity Similarity::from_pairs(Point2 p0, Point2 p1, Point2 q0, Point2 q1) {
    if (p0 == q0 && p1 == q1) return {};
    // Complex-number form: q = z p + t with z = (q1 - q0) / (p1 - p0).
    const double px = p1.x - p0.x, py = p1.y - p0.y;
    const double qx = q1.x - q0.x, qy = q1.y - q0.y;
    const double d = px * px + py * py;
    if (d <= 0.0) throw ValidationError("degenerate point pair for similarity");
    Similarity s;
    s.a = (qx * px + qy * py) / d;
    s.b = (qy * px - qx * py) / d;
    s.tx = q0.x - (s.a * p0.x - s.b * p0.y);
    s.ty = q0.y - (s.b * p0.x + s.a * p0.y);
    return s;
}

// ---------------------------------------------------------------------------
// Pyramidal Lucas-Kanade

namespace {

struct TrackLevel {
    Frame image;
    Frame dx;
    Frame dy;
};

std::vector<TrackLevel> track_pyramid(const Frame& f, int levels) {
    std::vector<TrackLevel> out;
    for (Frame& img : imgproc::gaussian_pyramid(f, levels)) {
        Frame gx = imgproc::diff_x(img);
        Frame gy = imgproc::diff_y(img);
        out.push_back({std::move(img), std::move(gx), std::move(gy)});
    }
    return out;
}

bool inside(const Frame& f, Point2 p) {
    return p.x >= 0.0 && p.y >= 0.0 && p.x <= f.width() - 1 && p.y <= f.height() - 1;
}

struct TrackOutcome {
    Point2 position;
    double min_eigen = 0.0;
    double residual = 0.0;
};

TrackOutcome track_one(const std::vector<TrackLevel>& from, const std::vector<TrackLevel>& to, Point2 p,
                       const KltParams& params) {
    const int half = params.window / 2;
    const int levels = static_cast<int>(from.size());
    double gx = 0.0, gy = 0.0;
    TrackOutcome outcome;

    for (int level = levels - 1; level >= 0; --level) {
        const double scale = std::ldexp(1.0, -level);
        const Point2 pl{p.x * scale, p.y * scale};
        const TrackLevel& a = from[level];
        const TrackLevel& b = to[level];

        double gxx = 0.0, gxy = 0.0, gyy = 0.0;
        const int n = (2 * half + 1) * (2 * half + 1);
        std::vector<double> ix(n), iy(n), iv(n);
        int k = 0;
        for (int wy = -half; wy <= half; ++wy)
            for (int wx = -half; wx <= half; ++wx, ++k) {
                const double sx = pl.x + wx, sy = pl.y + wy;
                ix[k] = a.dx.sample_clamped(sx, sy);
                iy[k] = a.dy.sample_clamped(sx, sy);
                iv[k] = a.image.sample_clamped(sx, sy);
                gxx += ix[k] * ix[k];
                gxy += ix[k] * iy[k];
                gyy += iy[k] * iy[k];
            }
        const double det = gxx * gyy - gxy * gxy;
        const double tr = gxx + gyy;
        const double min_eig = 0.5 * (tr - std::sqrt(std::max(0.0, tr * tr - 4.0 * det))) / n;

        double vx = 0.0, vy = 0.0;
        if (min_eig > 0.0 && det > 0.0) {
            for (int it = 0; it < params.max_iterations; ++it) {
                double bx = 0.0, by = 0.0;
                k = 0;
                for (int wy = -half; wy <= half; ++wy)
                    for (int wx = -half; wx <= half; ++wx, ++k) {
                        const double diff =
                            iv[k] - b.image.sample_clamped(pl.x + wx + gx + vx, pl.y + wy + gy + vy);
                        bx += diff * ix[k];
                        by += diff * iy[k];
                    }
                const double ex = (gyy * bx - gxy * by) / det;
                const double ey = (gxx * by - gxy * bx) / det;
                vx += ex;
                vy += ey;
                if (std::hypot(ex, ey) < params.epsilon) break;
            }
        }
        if (level == 0) {
            outcome.min_eigen = min_eig;
            double res = 0.0;
            k = 0;
            for (int wy = -half; wy <= half; ++wy)
                for (int wx = -half; wx <= half; ++wx, ++k)
                    res += std::abs(iv[k] - b.image.sample_clamped(pl.x + wx + gx + vx, pl.y + wy + gy + vy));
            outcome.residual = res / n;
            outcome.position = {p.x + gx + vx, p.y + gy + vy};
        } else {
            gx = 2.0 * (gx + vx);
            gy = 2.0 * (gy + vy);
        }
    }
    return outcome;
}

Point2 checked_track(const std::vector<TrackLevel>& from, const std::vector<TrackLevel>& to, Point2 p,
                     const KltParams& params, std::size_t frame_index) {
    const TrackOutcome r = track_one(from, to, p, params);
    const std::string where = " at frame " + std::to_string(frame_index + 1);
    if (r.min_eigen < params.min_eigen) throw ComputeError("tracking divergence (textureless window)" + where);
    if (!inside(from.front().image, r.position)) throw ComputeError("tracking divergence (point left frame)" + where);
    if (!(r.residual <= params.max_residual)) throw ComputeError("tracking divergence (residual too high)" + where);
    return r.position;
}

}  // namespace

Point2 track_point(const Frame& from, const Frame& to, Point2 p, const KltParams& params) {
    return checked_track(track_pyramid(from, params.levels), track_pyramid(to, params.levels), p, params, 1);
}

AnchorPoints track_points(const FrameSequence& seq, const AnchorTriple& initial, const KltParams& params) {
    for (Point2 p : {initial.left_eye, initial.right_eye, initial.nasal_spine})
        if (!inside(seq[0], p)) throw ValidationError("initial anchor outside frame 1");

    AnchorPoints out{initial};
    out.reserve(seq.size());
    auto prev = track_pyramid(seq[0], params.levels);
    for (std::size_t t = 1; t < seq.size(); ++t) {
        auto cur = track_pyramid(seq[t], params.levels);
        const AnchorTriple& last = out.back();
        out.push_back({checked_track(prev, cur, last.left_eye, params, t),
                       checked_track(prev, cur, last.right_eye, params, t),
                       checked_track(prev, cur, last.nasal_spine, params, t)});
        prev = std::move(cur);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Rotation/scale correction and the block grid

Rect BlockGrid::bounds() const {
    const Rect& tl = cells.front();
    const Rect& br = cells.back();
    return {tl.x, tl.y, br.right() - tl.x, br.bottom() - tl.y};
}

BlockGrid make_grid(const AnchorTriple& first, int frame_width, int frame_height, const GridParams& params) {
    const double iod = distance(first.left_eye, first.right_eye);
    const Point2 mid = (first.left_eye + first.right_eye) * 0.5;
    const double eye_nose = distance(mid, first.nasal_spine);
    if (iod < 1.0 || eye_nose < 1.0) throw ValidationError("degenerate anchor geometry (coincident points)");
    const Point2 e = first.right_eye - first.left_eye;
    const Point2 n = first.nasal_spine - first.left_eye;
    if (std::abs(e.x * n.y - e.y * n.x) / (iod * distance(first.left_eye, first.nasal_spine)) < 0.05)
        throw ValidationError("degenerate anchor geometry (collinear points)");

    BlockGrid g;
    g.width = params.width_factor * iod;
    g.height = params.height_factor * eye_nose;
    g.left = mid.x - 0.5 * g.width;
    g.top = mid.y - params.eye_row * g.height / BlockGrid::kRows;

    int xs[BlockGrid::kCols + 1];
    int ys[BlockGrid::kRows + 1];
    for (int i = 0; i <= BlockGrid::kCols; ++i)
        xs[i] = static_cast<int>(std::lround(g.left + i * g.width / BlockGrid::kCols));
    for (int i = 0; i <= BlockGrid::kRows; ++i)
        ys[i] = static_cast<int>(std::lround(g.top + i * g.height / BlockGrid::kRows));
    for (int r = 0; r < BlockGrid::kRows; ++r)
        for (int c = 0; c < BlockGrid::kCols; ++c)
            g.cells[r * BlockGrid::kCols + c] = {xs[c], ys[r], xs[c + 1] - xs[c], ys[r + 1] - ys[r]};
    const Rect b = g.bounds();
    for (const Rect& c : g.cells)
        if (c.empty()) throw ValidationError("grid cell collapsed to zero size");
    if (!b.inside(frame_width, frame_height)) throw ValidationError("face grid extends outside the frame");
    return g;
}

Frame warp_similarity(const Frame& in, const Similarity& forward) {
    if (forward.is_identity()) return in;
    const Similarity inv = forward.inverse();
    Frame out(in.width(), in.height());
    for (int y = 0; y < in.height(); ++y)
        for (int x = 0; x < in.width(); ++x) {
            const Point2 s = inv.apply({static_cast<double>(x), static_cast<double>(y)});
            out.at(x, y) = in.sample_zero(s.x, s.y);
        }
    return out;
}

CorrectedSequence correct_and_grid(const FrameSequence& seq, const AnchorPoints& pts, const GridParams& params) {
    if (pts.size() != seq.size()) throw ValidationError("anchor count does not match frame count");
    const AnchorTriple& ref = pts.front();
    BlockGrid grid = make_grid(ref, seq.width(), seq.height(), params);

    std::vector<Frame> frames;
    frames.reserve(seq.size());
    AnchorPoints corrected;
    corrected.reserve(seq.size());
    for (std::size_t t = 0; t < seq.size(); ++t) {
        const Similarity s =
            Similarity::from_pairs(pts[t].left_eye, pts[t].right_eye, ref.left_eye, ref.right_eye);
        grid.transforms.push_back(s);
        frames.push_back(warp_similarity(seq[t], s));
        corrected.push_back({s.apply(pts[t].left_eye), s.apply(pts[t].right_eye), s.apply(pts[t].nasal_spine)});
    }
    return {FrameSequence(std::move(frames), seq.fps(), seq.id()), std::move(grid), std::move(corrected)};
}

// ---------------------------------------------------------------------------
// Local weighted mean

namespace {

double lwm_weight(double rho) {
    if (rho >= 1.0) return 0.0;
    return 1.0 - 3.0 * rho * rho + 2.0 * rho * rho * rho;
}

std::array<double, 6> monomials(double u, double v) { return {1.0, u, v, u * u, u * v, v * v}; }

}  // namespace

Point2 LwmTransform::evaluate_local(std::size_t i, Point2 p) const {
    const Local& l = locals_[i];
    const auto m = monomials((p.x - l.center.x) / l.radius, (p.y - l.center.y) / l.radius);
    Point2 out;
    for (int j = 0; j < 6; ++j) {
        out.x += l.px[j] * m[j];
        out.y += l.py[j] * m[j];
    }
    return out;
}

Point2 LwmTransform::apply(Point2 p) const {
    double sx = 0.0, sy = 0.0, sw = 0.0;
    std::size_t nearest = 0;
    double nearest_d = INFINITY;
    for (std::size_t i = 0; i < locals_.size(); ++i) {
        const double d = distance(p, locals_[i].center);
        if (d < nearest_d) {
            nearest_d = d;
            nearest = i;
        }
        const double w = lwm_weight(d / locals_[i].radius);
        if (w <= 0.0) continue;
        const Point2 q = evaluate_local(i, p);
        sx += w * q.x;
        sy += w * q.y;
        sw += w;
    }
    if (sw <= 0.0) return evaluate_local(nearest, p);
    return {sx / sw, sy / sw};
}

double LwmTransform::max_control_residual() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < controls_.size(); ++i) worst = std::max(worst, distance(apply(controls_[i]), targets_[i]));
    return worst;
}

LwmTransform lwm_fit(const LandmarkSet& source, const LandmarkSet& target, const LwmParams& params) {
    if (source.size() != target.size()) throw ValidationError("landmark sets differ in size");
    const std::size_t n = source.size();
    const std::size_t support = static_cast<std::size_t>(params.neighbors);
    if (n < support) throw ValidationError("fewer control points than the LWM support size");

    LwmTransform t;
    t.controls_ = source;
    t.targets_ = target;
    t.locals_.resize(n);

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return distance(source[a], source[i]) < distance(source[b], source[i]);
        });
        const double radius = distance(source[order[support - 1]], source[i]);
        if (!(radius > 0.0)) throw ValidationError("degenerate support set (coincident control points)");

        Eigen::MatrixXd a(support, 6);
        Eigen::VectorXd bx(support), by(support);
        for (std::size_t r = 0; r < support; ++r) {
            const Point2 s = source[order[r]];
            const auto m = monomials((s.x - source[i].x) / radius, (s.y - source[i].y) / radius);
            for (int c = 0; c < 6; ++c) a(static_cast<Eigen::Index>(r), c) = m[c];
            bx(static_cast<Eigen::Index>(r)) = target[order[r]].x;
            by(static_cast<Eigen::Index>(r)) = target[order[r]].y;
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        if (sv(sv.size() - 1) < 1e-8 * sv(0))
            throw ValidationError("degenerate support set around control point " + std::to_string(i));
        const Eigen::VectorXd cx = svd.solve(bx);
        const Eigen::VectorXd cy = svd.solve(by);

        auto& l = t.locals_[i];
        l.center = source[i];
        l.radius = radius;
        for (int c = 0; c < 6; ++c) {
            l.px[c] = cx(c);
            l.py[c] = cy(c);
        }
    }

    const double residual = t.max_control_residual();
    if (residual > params.control_tolerance)
        throw ComputeError("LWM control residual " + std::to_string(residual) + " px exceeds tolerance");
    return t;
}

Point2 left_eye_center(const LandmarkSet& lm) {
    Point2 c;
    for (int i = 36; i <= 41; ++i) c = c + lm[i];
    return c * (1.0 / 6.0);
}

Point2 right_eye_center(const LandmarkSet& lm) {
    Point2 c;
    for (int i = 42; i <= 47; ++i) c = c + lm[i];
    return c * (1.0 / 6.0);
}

Rect model_crop(const LandmarkSet& model, const CropParams& params) {
    if (model.size() != kLandmarkCount) throw ValidationError("model landmark set must hold 68 points");
    const Point2 l = left_eye_center(model);
    const Point2 r = right_eye_center(model);
    const double iod = distance(l, r);
    const Point2 mid = (l + r) * 0.5;
    const int w = static_cast<int>(std::lround(params.width_factor * iod));
    const int h = static_cast<int>(std::lround(params.height_factor * iod));
    const int x = static_cast<int>(std::lround(mid.x - 0.5 * w));
    const int y = static_cast<int>(std::lround(mid.y - params.eye_height * h));
    return {x, y, w, h};
}

FrameSequence register_clip(const FrameSequence& clip, const LandmarkSet& first_frame_landmarks,
                            const LandmarkSet& model_landmarks, const CropParams& crop, const LwmParams& params) {
    if (first_frame_landmarks.size() != kLandmarkCount || model_landmarks.size() != kLandmarkCount)
        throw ValidationError("landmark sets must hold 68 points");
    // Model -> clip mapping, so every output pixel is pulled from the clip.
    const LwmTransform to_clip = lwm_fit(model_landmarks, first_frame_landmarks, params);
    const Rect box = model_crop(model_landmarks, crop);

    std::vector<Point2> lookup(static_cast<std::size_t>(box.width) * box.height);
    for (int y = 0; y < box.height; ++y)
        for (int x = 0; x < box.width; ++x)
            lookup[static_cast<std::size_t>(y) * box.width + x] =
                to_clip.apply({static_cast<double>(box.x + x), static_cast<double>(box.y + y)});

    std::vector<Frame> frames;
    frames.reserve(clip.size());
    for (const Frame& f : clip.frames()) {
        Frame out(box.width, box.height);
        auto px = out.pixels();
        for (std::size_t i = 0; i < lookup.size(); ++i) px[i] = f.sample_zero(lookup[i].x, lookup[i].y);
        frames.push_back(std::move(out));
    }
    return FrameSequence(std::move(frames), clip.fps(), clip.id());
}

// ---------------------------------------------------------------------------
// Files

namespace {

std::vector<std::vector<double>> read_numeric_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
            } catch (const std::exception&) {
                numeric = false;
                break;
            }
        }
        if (numeric && !row.empty()) rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

AnchorTriple read_anchor_file(const fs::path& path) {
    const auto rows = read_numeric_csv(path);
    if (rows.empty() || rows.front().size() != 6) throw ValidationError("anchor file needs one row lx,ly,rx,ry,nx,ny");
    const auto& r = rows.front();
    return {{r[0], r[1]}, {r[2], r[3]}, {r[4], r[5]}};
}

void write_anchor_file(const fs::path& path, const AnchorTriple& a) {
    std::ofstream out(path);
    out.precision(17);
    out << "lx,ly,rx,ry,nx,ny\n"
        << a.left_eye.x << ',' << a.left_eye.y << ',' << a.right_eye.x << ',' << a.right_eye.y << ','
        << a.nasal_spine.x << ',' << a.nasal_spine.y << '\n';
}

LandmarkSet read_landmark_file(const fs::path& path) {
    const auto rows = read_numeric_csv(path);
    if (rows.size() != kLandmarkCount) throw ValidationError("landmark file must hold 68 rows: " + path.string());
    LandmarkSet lm;
    for (const auto& r : rows) {
        if (r.size() != 2) throw ValidationError("landmark rows must be x,y: " + path.string());
        lm.push_back({r[0], r[1]});
    }
    return lm;
}

void write_landmark_file(const fs::path& path, const LandmarkSet& lm) {
    std::ofstream out(path);
    out.precision(17);
    out << "x,y\n";
    for (const Point2& p : lm) out << p.x << ',' << p.y << '\n';
}

AnchorTriple anchors_from_landmarks(const LandmarkSet& lm) {
    if (lm.size() != kLandmarkCount) throw ValidationError("landmark set must hold 68 points");
    return {lm[39], lm[42], lm[33]};
}

}  // namespace mesr
