#include "mesr/spotting.hpp"

#include "mesr/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace mesr {

std::string to_string(SpotFeature f) { return f == SpotFeature::LBP ? "LBP" : "HOOF"; }

SpotFeature parse_spot_feature(const std::string& name) {
    std::string n = name;
    for (char& c : n) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (n == "LBP") return SpotFeature::LBP;
    if (n == "HOOF") return SpotFeature::HOOF;
    throw ValidationError("unknown spotting feature: " + name);
}

void SpotParams::validate() const {
    if (!(window_seconds > 0.0)) throw ValidationError("spotting window must be positive");
    if (top_blocks < 1 || top_blocks > kBlocks) throw ValidationError("M must be in [1, 36]");
    if (!(tau >= 0.0 && tau <= 1.0)) throw ValidationError("tau must be in [0, 1]");
    lbp.validate();
}

int interval_length(double window_seconds, double fps) {
    int n = static_cast<int>(std::lround(window_seconds * fps));
    n = std::max(n, 1);
    if (n % 2 == 0) ++n;
    return n;
}

int half_interval(int interval) { return (interval - 1) / 2; }

BlockFeatures block_features(const FrameSequence& corrected, const BlockGrid& grid, const SpotParams& params) {
    BlockFeatures out(corrected.size());
    if (params.feature == SpotFeature::LBP) {
        for (std::size_t t = 0; t < corrected.size(); ++t)
            for (int b = 0; b < kBlocks; ++b) out[t][b] = lbp_frame_histogram(corrected[t], grid.cells[b], params.lbp);
    } else {
        // Flow against the fixed first frame.
        for (std::size_t t = 0; t < corrected.size(); ++t) {
            const FlowField flow = horn_schunck(corrected[0], corrected[t], params.flow);
            for (int b = 0; b < kBlocks; ++b) out[t][b] = hoof_histogram(flow, grid.cells[b], params.hoof_bins);
        }
    }
    return out;
}

double chi_squared(const Histogram& h, const Histogram& g) {
    if (h.size() != g.size()) throw ValidationError("histograms differ in length");
    double d = 0.0;
    for (std::size_t b = 0; b < h.size(); ++b) {
        const double s = h[b] + g[b];
        if (s == 0.0) continue;
        const double diff = h[b] - g[b];
        d += diff * diff / s;
    }
    return d;
}

std::array<double, kBlocks> block_fd(const BlockFeatures& features, std::size_t i, int k) {
    const std::size_t n = features.size();
    if (k < 0 || i < static_cast<std::size_t>(k) || i + static_cast<std::size_t>(k) >= n)
        throw ValidationError("frame index outside the valid FD range");
    std::array<double, kBlocks> d{};
    for (int b = 0; b < kBlocks; ++b) {
        const Histogram& tail = features[i - k][b];
        const Histogram& head = features[i + k][b];
        Histogram aff(tail.size());
        for (std::size_t j = 0; j < aff.size(); ++j) aff[j] = 0.5 * (tail[j] + head[j]);
        d[b] = chi_squared(features[i][b], aff);
    }
    return d;
}

BlockDistances block_distances(const BlockFeatures& features, int k) {
    const auto n = static_cast<std::ptrdiff_t>(features.size());
    if (n <= 2 * k) throw ValidationError("sequence shorter than the micro-interval");
    BlockDistances out;
    out.rows.assign(features.size(), {});
    out.valid = {k, n - 1 - k};
    for (std::ptrdiff_t i = out.valid.first; i <= out.valid.last; ++i)
        out.rows[static_cast<std::size_t>(i)] = block_fd(features, static_cast<std::size_t>(i), k);
    return out;
}

std::vector<double> initial_difference(const BlockDistances& d, int top_blocks) {
    if (top_blocks < 1 || top_blocks > kBlocks) throw ValidationError("M must be in [1, 36]");
    if (d.valid.empty()) throw ValidationError("sequence shorter than the micro-interval");
    std::vector<double> f(d.rows.size(), 0.0);
    for (std::ptrdiff_t i = d.valid.first; i <= d.valid.last; ++i) {
        auto row = d.rows[static_cast<std::size_t>(i)];
        std::partial_sort(row.begin(), row.begin() + top_blocks, row.end(), std::greater<>());
        double s = 0.0;
        for (int j = 0; j < top_blocks; ++j) s += row[j];
        f[static_cast<std::size_t>(i)] = s / top_blocks;
    }
    return f;
}

std::vector<double> contrast(const std::vector<double>& initial, const IndexRange& initial_valid, int k,
                             IndexRange* contrasted_valid) {
    const IndexRange valid{initial_valid.first + k, initial_valid.last - k};
    std::vector<double> c(initial.size(), 0.0);
    for (std::ptrdiff_t i = valid.first; i <= valid.last; ++i) {
        const auto u = static_cast<std::size_t>(i);
        const double v = initial[u] - 0.5 * (initial[u + k] + initial[u - k]);
        c[u] = v > 0.0 ? v : 0.0;
    }
    if (contrasted_valid) *contrasted_valid = valid;
    return c;
}

DifferenceSeries difference_series(const BlockDistances& d, int top_blocks, int k) {
    DifferenceSeries s;
    s.k = k;
    s.initial = initial_difference(d, top_blocks);
    s.initial_valid = d.valid;
    s.contrasted = contrast(s.initial, s.initial_valid, k, &s.contrasted_valid);
    return s;
}

std::pair<std::size_t, std::size_t> SpotResult::interval(std::size_t p, std::size_t n_frames) const {
    const std::size_t lo = p >= static_cast<std::size_t>(k) ? p - k : 0;
    return {lo, std::min(p + k, n_frames - 1)};
}

SpotResult detect_peaks(const std::vector<double>& contrasted, const IndexRange& valid, double tau, int k) {
    if (valid.empty() || valid.first < 0 || static_cast<std::size_t>(valid.last) >= contrasted.size())
        throw ValidationError("contrasted difference vector has no valid range");
    SpotResult r;
    r.k = k;
    r.tau = tau;

    double sum = 0.0, cmax = contrasted[static_cast<std::size_t>(valid.first)];
    for (std::ptrdiff_t i = valid.first; i <= valid.last; ++i) {
        sum += contrasted[static_cast<std::size_t>(i)];
        cmax = std::max(cmax, contrasted[static_cast<std::size_t>(i)]);
    }
    const double cmean = sum / static_cast<double>(valid.size());
    // Pinned at the ends so tau = 1 never lets rounding admit the maximum itself.
    r.threshold = tau >= 1.0 ? cmax : std::min(cmax, cmean + tau * (cmax - cmean));

    // Local maxima: strictly above the left neighbour, not below the right one (first frame of a
    // plateau). Neighbours outside the valid range do not constrain.
    std::vector<std::size_t> candidates;
    for (std::ptrdiff_t i = valid.first; i <= valid.last; ++i) {
        const double v = contrasted[static_cast<std::size_t>(i)];
        if (!(v > r.threshold)) continue;
        if (i > valid.first && !(v > contrasted[static_cast<std::size_t>(i - 1)])) continue;
        if (i < valid.last && !(v >= contrasted[static_cast<std::size_t>(i + 1)])) continue;
        candidates.push_back(static_cast<std::size_t>(i));
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return contrasted[a] > contrasted[b]; });

    const double min_distance = k / 2.0;
    for (std::size_t c : candidates) {
        const bool clear = std::none_of(r.peaks.begin(), r.peaks.end(), [&](std::size_t p) {
            return std::abs(static_cast<double>(c) - static_cast<double>(p)) < min_distance;
        });
        if (clear) r.peaks.push_back(c);
    }
    std::sort(r.peaks.begin(), r.peaks.end());
    return r;
}

SpotOutput spot_sequence(const FrameSequence& seq, const AnchorTriple& first_anchors, const SpotParams& params,
                         const KltParams& klt, const GridParams& grid) {
    params.validate();
    SpotOutput out;
    out.id = seq.id();
    out.n_frames = seq.size();
    out.interval = interval_length(params.window_seconds, seq.fps());
    const int k = half_interval(out.interval);
    if (seq.size() <= static_cast<std::size_t>(4 * k))
        throw ValidationError("sequence " + seq.id() + " too short for the micro-interval");

    out.anchors = track_points(seq, first_anchors, klt);
    CorrectedSequence corrected = correct_and_grid(seq, out.anchors, grid);
    out.grid = corrected.grid;
    const BlockFeatures features = block_features(corrected.frames, corrected.grid, params);
    out.series = difference_series(block_distances(features, k), params.top_blocks, k);
    out.result = detect_peaks(out.series.contrasted, out.series.contrasted_valid, params.tau, k);
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation

GroundTruth read_ground_truth(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open ground truth " + path.string());
    GroundTruth truth;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string id, on, off, label;
        std::getline(ss, id, ',');
        std::getline(ss, on, ',');
        std::getline(ss, off, ',');
        std::getline(ss, label);
        if (id == "sequence_id") continue;
        long onset = 0, offset = 0;
        try {
            onset = std::stol(on);
            offset = std::stol(off);
        } catch (const std::exception&) {
            throw ValidationError("malformed ground-truth row: " + line);
        }
        if (onset < 1 || offset < onset) throw ValidationError("ground truth needs 1 <= onset <= offset: " + line);
        if (!label.empty() && label.back() == '\r') label.pop_back();
        truth[id].push_back({static_cast<std::size_t>(onset - 1), static_cast<std::size_t>(offset - 1), label});
    }
    for (auto& [id, list] : truth) {
        std::sort(list.begin(), list.end(), [](const MeInterval& a, const MeInterval& b) { return a.onset < b.onset; });
        for (std::size_t i = 1; i < list.size(); ++i)
            if (list[i].onset <= list[i - 1].offset) throw ValidationError("overlapping ME intervals in " + id);
    }
    return truth;
}

void write_ground_truth(const std::filesystem::path& path, const GroundTruth& truth) {
    std::ofstream out(path);
    out << "sequence_id,onset,offset,label\n";
    for (const auto& [id, list] : truth)
        for (const auto& m : list) out << id << ',' << m.onset + 1 << ',' << m.offset + 1 << ',' << m.label << '\n';
}

std::vector<PeakMatch> match_peaks(const SequencePeaks& seq, const std::vector<MeInterval>& truth) {
    const double slack = (seq.interval - 1) / 4.0;
    std::vector<PeakMatch> out;
    for (std::size_t p : seq.peaks) {
        PeakMatch m{p, -1};
        for (std::size_t g = 0; g < truth.size(); ++g) {
            const double lo = static_cast<double>(truth[g].onset) - slack;
            const double hi = static_cast<double>(truth[g].offset) + slack;
            if (static_cast<double>(p) >= lo && static_cast<double>(p) <= hi) {
                m.interval = static_cast<std::ptrdiff_t>(g);
                break;
            }
        }
        out.push_back(m);
    }
    return out;
}

SpotEvaluation evaluate(const std::vector<SequencePeaks>& results, const GroundTruth& truth) {
    if (truth.empty()) throw ValidationError("empty ground truth");
    SpotEvaluation e;
    static const std::vector<MeInterval> none;
    for (const auto& seq : results) {
        const auto it = truth.find(seq.id);
        const auto& gt = it == truth.end() ? none : it->second;
        double me = 0.0;
        for (const auto& g : gt) me += static_cast<double>(g.frames());
        e.me_frames += me;
        e.non_me_frames += static_cast<double>(seq.n_frames) - me;

        std::set<std::ptrdiff_t> hit;
        for (const PeakMatch& m : match_peaks(seq, gt)) {
            if (m.interval < 0) {
                ++e.false_spots;
                e.false_frames += seq.interval;
            } else {
                hit.insert(m.interval);
            }
        }
        for (std::ptrdiff_t g : hit) e.true_frames += static_cast<double>(gt[static_cast<std::size_t>(g)].frames());
        e.true_spots += hit.size();
    }
    e.tpr = e.me_frames > 0.0 ? e.true_frames / e.me_frames : 0.0;
    e.fpr = e.non_me_frames > 0.0 ? std::min(1.0, e.false_frames / e.non_me_frames) : 0.0;
    return e;
}

std::vector<double> default_tau_sweep() {
    std::vector<double> taus;
    for (int i = 0; i <= 20; ++i) taus.push_back(i / 20.0);
    return taus;
}

double roc_auc(std::vector<RocPoint> points) {
    points.push_back({0.0, 0.0, 0.0});
    points.push_back({0.0, 1.0, 1.0});
    std::sort(points.begin(), points.end(), [](const RocPoint& a, const RocPoint& b) {
        return a.fpr < b.fpr || (a.fpr == b.fpr && a.tpr < b.tpr);
    });
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i)
        area += (points[i].fpr - points[i - 1].fpr) * 0.5 * (points[i].tpr + points[i - 1].tpr);
    return area;
}

RocCurve roc(const std::vector<SequenceScores>& dataset, const GroundTruth& truth, const std::vector<double>& taus) {
    RocCurve curve;
    for (double tau : taus) {
        std::vector<SequencePeaks> peaks;
        for (const auto& s : dataset) {
            SequencePeaks p{s.id, s.n_frames, s.interval, {}};
            if (!s.valid.empty()) p.peaks = detect_peaks(s.contrasted, s.valid, tau, half_interval(s.interval)).peaks;
            peaks.push_back(std::move(p));
        }
        const SpotEvaluation e = evaluate(peaks, truth);
        curve.points.push_back({tau, e.tpr, e.fpr});
    }
    curve.auc = roc_auc(curve.points);
    return curve;
}

}  // namespace mesr
