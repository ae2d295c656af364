// mesr: spotting, recognition and the combined spot-then-recognize run from the command line.
#include "mesr/error.hpp"
#include "mesr/pipeline.hpp"
#include "mesr/synth.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace mesr;

namespace {

struct Common {
    std::string manifest;
    std::string config;
    std::string out = "mesr_out";
    int workers = -1;
};

struct RecognitionFlags {
    std::optional<double> alpha;
    std::optional<double> gamma;
    std::string band;
    std::optional<int> levels;
    std::optional<int> tim_len;
    std::string descriptor;
    std::string combo;
    std::vector<int> partition;
    std::string protocol;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("-m,--manifest", c.manifest, "dataset manifest (JSON array of clip records)")->required();
    cmd->add_option("-c,--config", c.config, "pipeline config JSON; defaults when omitted");
    cmd->add_option("-o,--out", c.out, "output directory");
    cmd->add_option("-j,--workers", c.workers, "worker threads (0 = all cores)");
}

void add_recognition(CLI::App* cmd, RecognitionFlags& f) {
    cmd->add_option("--alpha", f.alpha, "magnification factor (1 = none)");
    cmd->add_option("--gamma", f.gamma, "spatial wavelength cutoff in px");
    cmd->add_option("--band", f.band, "temporal passband lo:hi in Hz");
    cmd->add_option("--levels", f.levels, "Laplacian pyramid levels");
    cmd->add_option("--tim-len", f.tim_len, "TIM output length (0 = no interpolation)");
    cmd->add_option("--descriptor", f.descriptor, "LBP, HOG or HIGO");
    cmd->add_option("--combo", f.combo, "TOP, XYOT, XOT, YOT or XY");
    cmd->add_option("--partition", f.partition, "cuboid counts nx ny nt")->expected(3);
    cmd->add_option("--protocol", f.protocol, "loso or loo");
}

PipelineConfig base_config(const Common& c) {
    PipelineConfig cfg = c.config.empty() ? PipelineConfig{} : PipelineConfig::load(c.config);
    if (c.workers >= 0) cfg.workers = c.workers;
    return cfg;
}

void apply_recognition(PipelineConfig& cfg, const RecognitionFlags& f) {
    if (f.alpha) cfg.magnify.alpha = *f.alpha;
    if (f.gamma) cfg.magnify.gamma = *f.gamma;
    if (!f.band.empty()) {
        const auto colon = f.band.find(':');
        if (colon == std::string::npos) throw ValidationError("--band expects lo:hi");
        try {
            cfg.magnify.band_low = std::stod(f.band.substr(0, colon));
            cfg.magnify.band_high = std::stod(f.band.substr(colon + 1));
        } catch (const std::exception&) {
            throw ValidationError("--band expects numeric lo:hi");
        }
    }
    if (f.levels) cfg.magnify.levels = *f.levels;
    if (f.tim_len) cfg.tim_length = *f.tim_len;
    if (!f.descriptor.empty()) cfg.descriptor.kind = parse_kind(f.descriptor);
    if (!f.combo.empty()) cfg.descriptor.combo = parse_combination(f.combo);
    if (!f.partition.empty()) cfg.descriptor.partition = {f.partition[0], f.partition[1], f.partition[2]};
    if (f.protocol == "loso") cfg.protocol = Protocol::LeaveOneSubjectOut;
    else if (f.protocol == "loo") cfg.protocol = Protocol::LeaveOneSampleOut;
    else if (!f.protocol.empty()) throw ValidationError("--protocol must be loso or loo");
}

void report_failures(const std::vector<std::pair<std::string, std::string>>& failures) {
    for (const auto& [id, err] : failures) std::cerr << "warning: " << id << ": " << err << "\n";
}

int run_sweep(const std::string& which, const DatasetManifest& manifest, const PipelineConfig& cfg,
              const fs::path& out) {
    if (which == "alpha") {
        const auto pts = sweep_alpha(manifest, cfg);
        write_sweep(pts, "alpha", cfg, out);
        for (const auto& p : pts) std::printf("alpha=%s accuracy=%.4f\n", p.setting.c_str(), p.accuracy);
    } else if (which == "tim") {
        const auto pts = sweep_tim(manifest, cfg);
        write_sweep(pts, "tim", cfg, out);
        for (const auto& p : pts) std::printf("tim=%s accuracy=%.4f\n", p.setting.c_str(), p.accuracy);
    } else if (which == "tau") {
        const SpotRun run = run_spot(manifest, cfg);
        write_spot_reports(run, cfg, out);
        for (const auto& p : run.curve.points) std::printf("tau=%.2f tpr=%.4f fpr=%.4f\n", p.tau, p.tpr, p.fpr);
        std::printf("auc=%.4f\n", run.curve.auc);
    } else {
        throw ValidationError("unknown sweep '" + which + "' (tau, alpha or tim)");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Micro-expression spotting and recognition"};
    app.require_subcommand(1);

    Common spot_c, rec_c, mesr_c, eval_c;
    RecognitionFlags rec_f, mesr_f, eval_f;

    auto* spot = app.add_subcommand("spot", "spot transients in long sequences and write ROC reports");
    add_common(spot, spot_c);
    std::string spot_feature;
    std::optional<double> spot_tau;
    spot->add_option("--feature", spot_feature, "LBP or HOOF");
    spot->add_option("--tau", spot_tau, "threshold fraction for the per-sequence peak report");

    auto* rec = app.add_subcommand("recognize", "align, magnify, interpolate, describe and classify clips");
    add_common(rec, rec_c);
    add_recognition(rec, rec_f);
    std::string rec_sweep, dump_magnified;
    bool dump_descriptors = false, save_model = false;
    rec->add_option("--sweep", rec_sweep, "alpha or tim");
    rec->add_flag("--dump-descriptors", dump_descriptors, "write descriptors.csv and its layout sidecar");
    rec->add_flag("--save-model", save_model, "train on every clip and write model.json");
    rec->add_option("--dump-magnified", dump_magnified, "write aligned, magnified clips as PGM directories");

    auto* mesr_cmd = app.add_subcommand("mesr", "spot, excerpt and recognize in one pass");
    add_common(mesr_cmd, mesr_c);
    add_recognition(mesr_cmd, mesr_f);
    std::optional<double> mesr_tau;
    mesr_cmd->add_option("--tau", mesr_tau, "spotting threshold fraction");

    auto* eval = app.add_subcommand("eval", "parameter sweeps: tau (ROC), alpha or tim");
    add_common(eval, eval_c);
    add_recognition(eval, eval_f);
    std::string eval_sweep;
    eval->add_option("--sweep", eval_sweep, "tau, alpha or tim")->required();

    auto* synth = app.add_subcommand("synth", "generate a synthetic test corpus");
    SynthOptions so;
    std::string synth_out, synth_kind = "spot";
    synth->add_option("-o,--out", synth_out, "output directory")->required();
    synth->add_option("--kind", synth_kind, "spot or mesr");
    synth->add_option("--sequences", so.sequences, "sequence count (spot corpus)");
    synth->add_option("--subjects", so.subjects, "subject count");
    synth->add_option("--per-class", so.per_class, "sequences per subject and class (mesr corpus)");
    synth->add_option("--frames", so.frames, "frames per sequence");
    synth->add_option("--fps", so.fps, "frame rate");
    synth->add_option("--amplitude", so.amplitude, "peak transient displacement in px");
    synth->add_option("--drift", so.drift, "whole-frame drift in px/frame");
    synth->add_option("--noise", so.noise, "pixel noise sigma");
    synth->add_option("--seed", so.seed, "random seed");

    auto* config = app.add_subcommand("config", "print or check pipeline configs");
    bool print_defaults = false;
    std::string check;
    config->add_flag("--print-defaults", print_defaults, "print the default config as JSON");
    config->add_option("--check", check, "validate a config file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*config) {
            if (!check.empty()) {
                PipelineConfig::load(check);
                std::cout << "ok\n";
            } else if (print_defaults) {
                std::cout << PipelineConfig{}.to_json().dump(2) << "\n";
            } else {
                throw ValidationError("config needs --print-defaults or --check FILE");
            }
            return 0;
        }
        if (*synth) {
            if (synth_kind == "spot") so.kind = CorpusKind::Spot;
            else if (synth_kind == "mesr") so.kind = CorpusKind::Mesr;
            else throw ValidationError("--kind must be spot or mesr");
            const SynthResult r = synthesize_corpus(synth_out, so);
            std::cout << "wrote " << r.sequences << " sequences; manifest " << r.manifest.string() << "\n";
            if (!r.clip_manifest.empty()) std::cout << "clip manifest " << r.clip_manifest.string() << "\n";
            return 0;
        }
        if (*spot) {
            PipelineConfig cfg = base_config(spot_c);
            if (!spot_feature.empty()) cfg.spot.feature = parse_spot_feature(spot_feature);
            if (spot_tau) cfg.spot.tau = *spot_tau;
            cfg.validate();
            const DatasetManifest manifest = DatasetManifest::load(spot_c.manifest);
            const SpotRun run = run_spot(manifest, cfg);
            write_spot_reports(run, cfg, spot_c.out);
            for (const auto& s : run.sequences)
                if (!s.ok) std::cerr << "warning: " << s.id << ": " << s.error << "\n";
            std::printf("auc=%.4f tpr=%.4f fpr=%.4f (tau=%.2f)\n", run.curve.auc, run.at_tau.tpr, run.at_tau.fpr,
                        cfg.spot.tau);
            return 0;
        }
        if (*rec) {
            PipelineConfig cfg = base_config(rec_c);
            apply_recognition(cfg, rec_f);
            cfg.validate();
            const DatasetManifest manifest = DatasetManifest::load(rec_c.manifest);
            const fs::path out = rec_c.out;
            if (!dump_magnified.empty()) {
                const LandmarkSet model = model_face(cfg);
                for (const auto& r : manifest.records) {
                    if (!r.landmarks) throw ValidationError("record '" + r.id + "' has no landmarks");
                    const FrameSequence aligned =
                        register_clip(load_record(r), read_landmark_file(*r.landmarks), model, cfg.crop, cfg.lwm);
                    save_sequence(fs::path(dump_magnified) / r.id,
                                  cfg.magnify.alpha > 1.0 ? magnify(aligned, cfg.magnify) : aligned);
                }
            }
            if (!rec_sweep.empty()) return run_sweep(rec_sweep, manifest, cfg, out);
            const RecognizeRun run = run_recognize(manifest, cfg);
            report_failures(run.descriptors.failures);
            for (const auto& w : run.report.warnings) std::cerr << "warning: " << w << "\n";
            write_text(out / "recognition.json", recognize_report_json(run, cfg).dump(2) + "\n");
            if (dump_descriptors) write_descriptor_dump(run.descriptors, out / "descriptors.csv");
            if (save_model) {
                const CostSelection sel = select_cost(run.descriptors.samples, cfg.svm);
                const SvmModel model = svm_train(run.descriptors.samples, sel.cost, cfg.svm);
                nlohmann::json j = model.to_json();
                j["class_names"] = run.descriptors.class_names;
                write_text(out / "model.json", j.dump(2) + "\n");
            }
            std::printf("accuracy=%.4f (%zu/%zu)\n", run.report.accuracy, run.report.correct, run.report.total);
            return 0;
        }
        if (*mesr_cmd) {
            PipelineConfig cfg = base_config(mesr_c);
            apply_recognition(cfg, mesr_f);
            if (mesr_tau) cfg.mesr_tau = *mesr_tau;
            cfg.validate();
            const DatasetManifest manifest = DatasetManifest::load(mesr_c.manifest);
            const MesrRun run = run_mesr(manifest, cfg);
            report_failures(run.failures);
            for (const auto& w : run.warnings) std::cerr << "warning: " << w << "\n";
            write_text(fs::path(mesr_c.out) / "mesr.json", mesr_report_json(run, cfg).dump(2) + "\n");
            std::printf("tpr=%.4f fpr=%.4f recognition=%.4f overall=%.4f\n", run.spotting.tpr, run.spotting.fpr,
                        run.recognition_accuracy, run.overall);
            return 0;
        }
        if (*eval) {
            PipelineConfig cfg = base_config(eval_c);
            apply_recognition(cfg, eval_f);
            cfg.validate();
            return run_sweep(eval_sweep, DatasetManifest::load(eval_c.manifest), cfg, eval_c.out);
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
