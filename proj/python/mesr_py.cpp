#include "mesr/classify.hpp"
#include "mesr/error.hpp"
#include "mesr/features.hpp"
#include "mesr/magnify.hpp"
#include "mesr/pipeline.hpp"
#include "mesr/spotting.hpp"
#include "mesr/synth.hpp"
#include "mesr/tim.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

namespace py = pybind11;
using namespace mesr;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Frame to_frame(const Array& a) {
    if (a.ndim() != 2) throw ValidationError("frame must be a 2-D array (height, width)");
    const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
    return Frame(w, h, std::vector<double>(a.data(), a.data() + a.size()));
}

FrameSequence to_clip(const Array& a, double fps) {
    if (a.ndim() != 3) throw ValidationError("clip must be a 3-D array (frames, height, width)");
    const auto n = a.shape(0), h = a.shape(1), w = a.shape(2);
    std::vector<Frame> frames;
    frames.reserve(static_cast<std::size_t>(n));
    for (py::ssize_t t = 0; t < n; ++t) {
        const double* p = a.data() + t * h * w;
        frames.emplace_back(static_cast<int>(w), static_cast<int>(h), std::vector<double>(p, p + h * w));
    }
    return FrameSequence(std::move(frames), fps);
}

Array from_clip(const FrameSequence& clip) {
    Array out({static_cast<py::ssize_t>(clip.size()), static_cast<py::ssize_t>(clip.height()),
               static_cast<py::ssize_t>(clip.width())});
    double* dst = out.mutable_data();
    for (const Frame& f : clip.frames()) dst = std::copy(f.pixels().begin(), f.pixels().end(), dst);
    return out;
}

Array from_vector(const std::vector<double>& v) {
    Array out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

CuboidPartition partition_of(const std::tuple<int, int, int>& p) {
    return {std::get<0>(p), std::get<1>(p), std::get<2>(p)};
}

std::vector<LabeledSample> samples_of(const Array& x, const std::vector<int>& labels,
                                      const std::vector<std::string>& subjects) {
    if (x.ndim() != 2) throw ValidationError("features must be a 2-D array (samples, dims)");
    const auto n = static_cast<std::size_t>(x.shape(0)), d = static_cast<std::size_t>(x.shape(1));
    if (labels.size() != n) throw ValidationError("one label per sample required");
    if (!subjects.empty() && subjects.size() != n) throw ValidationError("one subject per sample required");
    std::vector<LabeledSample> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].features.assign(x.data() + i * d, x.data() + (i + 1) * d);
        out[i].label = labels[i];
        out[i].subject = subjects.empty() ? "s" : subjects[i];
        out[i].id = std::to_string(i);
    }
    return out;
}

PipelineConfig config_of(const std::optional<std::string>& json) {
    return json ? PipelineConfig::from_json(nlohmann::json::parse(*json)) : PipelineConfig{};
}

}  // namespace

PYBIND11_MODULE(mesr, m) {
    m.doc() = "Micro-expression spotting and recognition";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<ComputeError>(m, "ComputeError", PyExc_RuntimeError);

    // Media
    m.def(
        "load_sequence",
        [](const std::filesystem::path& dir, double fps) { return from_clip(load_sequence(dir, fps, "")); },
        py::arg("dir"), py::arg("fps") = 25.0, "Load a PGM/PPM frame directory as a (frames, h, w) array in [0, 1].");
    m.def(
        "save_sequence",
        [](const std::filesystem::path& dir, const Array& clip) { save_sequence(dir, to_clip(clip, 25.0)); },
        py::arg("dir"), py::arg("clip"));

    // Features
    m.def(
        "lbp_code",
        [](const Array& frame, int x, int y, int p, int r, bool uniform) {
            return lbp_code(to_frame(frame), x, y, {p, r, uniform});
        },
        py::arg("frame"), py::arg("x"), py::arg("y"), py::arg("p") = 8, py::arg("r") = 1, py::arg("uniform") = false);
    m.def(
        "hog_histogram",
        [](const Array& theta, const Array& magnitude, int bins, bool count) {
            return from_vector(hog_histogram(std::span<const double>(theta.data(), theta.size()),
                                             std::span<const double>(magnitude.data(), magnitude.size()), bins,
                                             count ? Vote::Count : Vote::Weighted));
        },
        py::arg("theta"), py::arg("magnitude"), py::arg("bins") = 8, py::arg("count") = false,
        "Orientation histogram; count=True gives the magnitude-free (HIGO) variant.");
    m.def(
        "lbp_top",
        [](const Array& clip, std::tuple<int, int, int> partition, const std::string& combo, int p, int r,
           bool uniform) {
            return from_vector(
                lbp_top(to_clip(clip, 25.0), partition_of(partition), parse_combination(combo), {p, r, uniform})
                    .values);
        },
        py::arg("clip"), py::arg("partition") = std::make_tuple(1, 1, 1), py::arg("combo") = "TOP",
        py::arg("p") = 8, py::arg("r") = 1, py::arg("uniform") = true);
    m.def(
        "hog_top",
        [](const Array& clip, std::tuple<int, int, int> partition, const std::string& combo, int bins,
           const std::string& norm) {
            return from_vector(hog_top(to_clip(clip, 25.0), partition_of(partition), parse_combination(combo), bins,
                                       parse_norm(norm))
                                   .values);
        },
        py::arg("clip"), py::arg("partition") = std::make_tuple(1, 1, 1), py::arg("combo") = "TOP",
        py::arg("bins") = 8, py::arg("norm") = "L2");
    m.def(
        "higo_top",
        [](const Array& clip, std::tuple<int, int, int> partition, const std::string& combo, int bins,
           const std::string& norm) {
            return from_vector(higo_top(to_clip(clip, 25.0), partition_of(partition), parse_combination(combo), bins,
                                        parse_norm(norm))
                                   .values);
        },
        py::arg("clip"), py::arg("partition") = std::make_tuple(1, 1, 1), py::arg("combo") = "TOP",
        py::arg("bins") = 8, py::arg("norm") = "L2");

    // Magnification and interpolation
    m.def(
        "magnify",
        [](const Array& clip, double fps, double alpha, double gamma, std::optional<std::pair<double, double>> band,
           int levels, double motion_bound) {
            MagnifyParams p;
            p.alpha = alpha;
            p.gamma = gamma;
            p.levels = levels;
            p.motion_bound = motion_bound;
            if (band) {
                p.band_low = band->first;
                p.band_high = band->second;
            }
            return from_clip(magnify(to_clip(clip, fps), p));
        },
        py::arg("clip"), py::arg("fps") = 25.0, py::arg("alpha") = 4.0, py::arg("gamma") = 16.0,
        py::arg("band") = py::none(), py::arg("levels") = 5, py::arg("motion_bound") = 1.0);
    m.def(
        "tim_interpolate",
        [](const Array& clip, std::size_t length) { return from_clip(tim_interpolate(to_clip(clip, 25.0), length)); },
        py::arg("clip"), py::arg("length") = 10);

    // Spotting
    m.def("interval_length", &interval_length, py::arg("window_seconds"), py::arg("fps"));
    m.def(
        "difference_series",
        [](const Array& distances, int k, int top_blocks) {
            if (distances.ndim() != 2 || distances.shape(1) != kBlocks)
                throw ValidationError("distances must have shape (frames, " + std::to_string(kBlocks) + ")");
            const auto n = static_cast<std::size_t>(distances.shape(0));
            BlockDistances d;
            d.rows.resize(n);
            for (std::size_t i = 0; i < n; ++i)
                std::copy(distances.data() + i * kBlocks, distances.data() + (i + 1) * kBlocks, d.rows[i].begin());
            d.valid = {k, static_cast<std::ptrdiff_t>(n) - 1 - k};
            const DifferenceSeries s = difference_series(d, top_blocks, k);
            return py::make_tuple(from_vector(s.initial), from_vector(s.contrasted),
                                  py::make_tuple(s.contrasted_valid.first, s.contrasted_valid.last));
        },
        py::arg("distances"), py::arg("k"), py::arg("top_blocks") = 12,
        "Initial and contrasted difference series from per-block distances; rows outside [k, n-1-k] are ignored.");
    m.def(
        "detect_peaks",
        [](const std::vector<double>& contrasted, std::pair<std::ptrdiff_t, std::ptrdiff_t> valid, double tau,
           int k) {
            const SpotResult r = detect_peaks(contrasted, {valid.first, valid.second}, tau, k);
            return py::make_tuple(r.peaks, r.threshold);
        },
        py::arg("contrasted"), py::arg("valid"), py::arg("tau"), py::arg("k"),
        "Returns (0-based peak frames, threshold).");
    m.def(
        "roc_auc",
        [](const std::vector<std::pair<double, double>>& fpr_tpr) {
            std::vector<RocPoint> pts;
            for (const auto& [f, t] : fpr_tpr) pts.push_back({0.0, t, f});
            return roc_auc(std::move(pts));
        },
        py::arg("points"), "Trapezoidal area under (fpr, tpr) points, closed at (0,0) and (1,1).");

    // Classification
    py::class_<SvmModel>(m, "SvmModel")
        .def("predict",
             [](const SvmModel& model, const Array& x) {
                 if (x.ndim() == 1) return std::vector<int>{model.predict(std::span<const double>(x.data(), x.size()))};
                 std::vector<int> out;
                 const auto d = static_cast<std::size_t>(x.shape(1));
                 for (py::ssize_t i = 0; i < x.shape(0); ++i)
                     out.push_back(model.predict(std::span<const double>(x.data() + i * d, d)));
                 return out;
             })
        .def_property_readonly("classes", &SvmModel::classes)
        .def_property_readonly("cost", &SvmModel::cost)
        .def("to_json", [](const SvmModel& model) { return model.to_json().dump(); })
        .def_static("from_json", [](const std::string& s) { return SvmModel::from_json(nlohmann::json::parse(s)); });
    m.def(
        "svm_train",
        [](const Array& x, const std::vector<int>& labels, double cost) {
            return svm_train(samples_of(x, labels, {}), cost);
        },
        py::arg("features"), py::arg("labels"), py::arg("cost") = 1.0, "One-versus-one linear SVM.");
    m.def(
        "loso_evaluate",
        [](const Array& x, const std::vector<int>& labels, const std::vector<std::string>& subjects) {
            const RecognitionReport r = loso_evaluate(samples_of(x, labels, subjects));
            return py::dict(py::arg("accuracy") = r.accuracy, py::arg("correct") = r.correct,
                            py::arg("total") = r.total, py::arg("predictions") = r.predictions,
                            py::arg("confusion") = r.confusion);
        },
        py::arg("features"), py::arg("labels"), py::arg("subjects"));
    m.def("cost_grid", &cost_grid);

    // Pipeline
    m.def("default_config", [] { return PipelineConfig{}.to_json().dump(2); });
    m.def(
        "synthesize",
        [](const std::filesystem::path& out, const std::string& kind, int sequences, int subjects, int per_class,
           int frames, std::uint64_t seed) {
            SynthOptions o;
            if (kind == "spot")
                o.kind = CorpusKind::Spot;
            else if (kind == "mesr")
                o.kind = CorpusKind::Mesr;
            else
                throw ValidationError("kind must be 'spot' or 'mesr'");
            o.sequences = sequences;
            o.subjects = subjects;
            o.per_class = per_class;
            o.frames = frames;
            o.seed = seed;
            const SynthResult r = synthesize_corpus(out, o);
            py::dict d;
            d["manifest"] = r.manifest;
            d["ground_truth"] = r.ground_truth;
            d["clips"] = r.clip_manifest.empty() ? py::object(py::none()) : py::cast(r.clip_manifest);
            d["sequences"] = r.sequences;
            return d;
        },
        py::arg("out_dir"), py::arg("kind") = "spot", py::arg("sequences") = 30, py::arg("subjects") = 6,
        py::arg("per_class") = 2, py::arg("frames") = 200, py::arg("seed") = 1);
    m.def(
        "run_spot",
        [](const std::filesystem::path& manifest, const std::filesystem::path& out,
           const std::optional<std::string>& config) {
            const PipelineConfig cfg = config_of(config);
            cfg.validate();
            SpotRun run;
            {
                py::gil_scoped_release release;
                run = run_spot(DatasetManifest::load(manifest), cfg);
                write_spot_reports(run, cfg, out);
            }
            py::list roc;
            for (const auto& p : run.curve.points) roc.append(py::make_tuple(p.tau, p.tpr, p.fpr));
            return py::dict(py::arg("auc") = run.curve.auc, py::arg("tpr") = run.at_tau.tpr,
                            py::arg("fpr") = run.at_tau.fpr, py::arg("roc") = roc);
        },
        py::arg("manifest"), py::arg("out_dir"), py::arg("config") = py::none(),
        "Spot every sequence of a manifest and write roc.csv, roc.json and spots.json.");
    m.def(
        "run_recognize",
        [](const std::filesystem::path& manifest, const std::optional<std::string>& config) {
            const PipelineConfig cfg = config_of(config);
            cfg.validate();
            RecognizeRun run;
            {
                py::gil_scoped_release release;
                run = run_recognize(DatasetManifest::load(manifest), cfg);
            }
            return recognize_report_json(run, cfg).dump();
        },
        py::arg("manifest"), py::arg("config") = py::none(), "Recognition report as a JSON string.");
    m.def(
        "run_mesr",
        [](const std::filesystem::path& manifest, const std::optional<std::string>& config) {
            const PipelineConfig cfg = config_of(config);
            cfg.validate();
            MesrRun run;
            {
                py::gil_scoped_release release;
                run = run_mesr(DatasetManifest::load(manifest), cfg);
            }
            return mesr_report_json(run, cfg).dump();
        },
        py::arg("manifest"), py::arg("config") = py::none(), "Combined spot-and-recognize report as a JSON string.");
}
