#include "mesr/classify.hpp"

#include "mesr/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace mesr {

Standardizer Standardizer::fit(std::span<const LabeledSample> samples) {
    Standardizer s;
    if (samples.empty()) return s;
    const std::size_t d = samples.front().features.size();
    s.mean.assign(d, 0.0);
    s.scale.assign(d, 1.0);
    for (const auto& x : samples)
        for (std::size_t i = 0; i < d; ++i) s.mean[i] += x.features[i];
    const double n = static_cast<double>(samples.size());
    for (double& m : s.mean) m /= n;
    std::vector<double> var(d, 0.0);
    for (const auto& x : samples)
        for (std::size_t i = 0; i < d; ++i) {
            const double e = x.features[i] - s.mean[i];
            var[i] += e * e;
        }
    for (std::size_t i = 0; i < d; ++i) {
        const double sd = std::sqrt(var[i] / n);
        s.scale[i] = sd > 0.0 ? sd : 1.0;
    }
    return s;
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
    if (empty()) return {x.begin(), x.end()};
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean[i]) / scale[i];
    return out;
}

double BinarySvm::decision(std::span<const double> x) const {
    double s = bias;
    for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * x[i];
    return s;
}

BinarySvm train_binary(const std::vector<std::vector<double>>& x, const std::vector<int>& y, double cost,
                       const SvmOptions& options) {
    if (x.empty() || x.size() != y.size()) throw ValidationError("SVM training set is empty or mislabelled");
    if (!(cost > 0.0)) throw ValidationError("SVM cost must be positive");
    const std::size_t n = x.size();
    const std::size_t d = x.front().size();

    BinarySvm svm;
    svm.weights.assign(d, 0.0);
    std::vector<double> alpha(n, 0.0);
    std::vector<double> qii(n, 1.0);  // constant bias feature
    for (std::size_t i = 0; i < n; ++i) {
        if (x[i].size() != d) throw ValidationError("SVM feature length mismatch");
        if (y[i] != 1 && y[i] != -1) throw ValidationError("binary SVM labels must be +1 or -1");
        for (double v : x[i]) qii[i] += v * v;
    }
    if (std::find(y.begin(), y.end(), 1) == y.end() || std::find(y.begin(), y.end(), -1) == y.end())
        throw ValidationError("binary SVM needs both labels");

    for (int epoch = 0; epoch < options.max_epochs; ++epoch) {
        double max_step = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double yi = static_cast<double>(y[i]);
            const double g = yi * svm.decision(x[i]) - 1.0;
            const double next = std::clamp(alpha[i] - g / qii[i], 0.0, cost);
            const double step = next - alpha[i];
            if (step == 0.0) continue;
            alpha[i] = next;
            for (std::size_t k = 0; k < d; ++k) svm.weights[k] += step * yi * x[i][k];
            svm.bias += step * yi;
            max_step = std::max(max_step, std::abs(step));
        }
        double wnorm = svm.bias * svm.bias;
        for (double w : svm.weights) wnorm += w * w;
        double asum = 0.0;
        for (double a : alpha) asum += a;
        svm.dual_objective.push_back(asum - 0.5 * wnorm);
        svm.epochs = epoch + 1;
        if (max_step < options.tolerance) break;
    }
    return svm;
}

namespace {

std::vector<int> distinct_labels(std::span<const LabeledSample> samples) {
    std::set<int> s;
    for (const auto& x : samples) s.insert(x.label);
    return {s.begin(), s.end()};
}

}  // namespace

SvmModel svm_train(std::span<const LabeledSample> samples, double cost, const SvmOptions& options) {
    if (samples.empty()) throw ValidationError("no training samples");
    const std::size_t d = samples.front().features.size();
    for (const auto& s : samples)
        if (s.features.size() != d) throw ValidationError("descriptor length differs between samples");

    SvmModel model;
    model.classes_ = distinct_labels(samples);
    if (model.classes_.size() < 2) throw ValidationError("training needs at least two classes");
    model.cost_ = cost;
    model.dimension_ = d;
    if (options.standardize) model.standardizer_ = Standardizer::fit(samples);

    std::vector<std::vector<double>> z;
    z.reserve(samples.size());
    for (const auto& s : samples) z.push_back(model.standardizer_.apply(s.features));

    for (std::size_t a = 0; a < model.classes_.size(); ++a)
        for (std::size_t b = a + 1; b < model.classes_.size(); ++b) {
            std::vector<std::vector<double>> xs;
            std::vector<int> ys;
            for (std::size_t i = 0; i < samples.size(); ++i) {
                if (samples[i].label == model.classes_[a]) {
                    xs.push_back(z[i]);
                    ys.push_back(1);
                } else if (samples[i].label == model.classes_[b]) {
                    xs.push_back(z[i]);
                    ys.push_back(-1);
                }
            }
            model.machines_.push_back({model.classes_[a], model.classes_[b], train_binary(xs, ys, cost, options)});
        }
    return model;
}

std::vector<double> SvmModel::decisions(std::span<const double> x) const {
    if (x.size() != dimension_) throw ValidationError("descriptor length does not match the model");
    const std::vector<double> z = standardizer_.apply(x);
    std::vector<double> out;
    out.reserve(machines_.size());
    for (const auto& m : machines_) out.push_back(m.svm.decision(z));
    return out;
}

int SvmModel::predict(std::span<const double> x) const {
    const std::vector<double> dec = decisions(x);
    std::map<int, int> votes;
    std::map<int, double> score;
    for (int c : classes_) {
        votes[c] = 0;
        score[c] = 0.0;
    }
    for (std::size_t i = 0; i < machines_.size(); ++i) {
        const auto& m = machines_[i];
        ++votes[dec[i] > 0.0 ? m.positive : m.negative];
        score[m.positive] += dec[i];
        score[m.negative] -= dec[i];
    }
    // classes_ is ascending, so strict comparisons leave the lowest id on a full tie.
    int best = classes_.front();
    for (int c : classes_) {
        if (votes[c] > votes[best] || (votes[c] == votes[best] && score[c] > score[best])) best = c;
    }
    return best;
}

nlohmann::json SvmModel::to_json() const {
    nlohmann::json j;
    j["classes"] = classes_;
    j["cost"] = cost_;
    j["dimension"] = dimension_;
    j["standardizer"] = {{"mean", standardizer_.mean}, {"scale", standardizer_.scale}};
    auto& ms = j["machines"] = nlohmann::json::array();
    for (const auto& m : machines_)
        ms.push_back({{"positive", m.positive}, {"negative", m.negative}, {"weights", m.svm.weights},
                      {"bias", m.svm.bias}});
    return j;
}

SvmModel SvmModel::from_json(const nlohmann::json& j) {
    SvmModel m;
    try {
        m.classes_ = j.at("classes").get<std::vector<int>>();
        m.cost_ = j.at("cost").get<double>();
        m.dimension_ = j.at("dimension").get<std::size_t>();
        m.standardizer_.mean = j.at("standardizer").at("mean").get<std::vector<double>>();
        m.standardizer_.scale = j.at("standardizer").at("scale").get<std::vector<double>>();
        for (const auto& e : j.at("machines")) {
            PairMachine p;
            p.positive = e.at("positive").get<int>();
            p.negative = e.at("negative").get<int>();
            p.svm.weights = e.at("weights").get<std::vector<double>>();
            p.svm.bias = e.at("bias").get<double>();
            if (p.svm.weights.size() != m.dimension_) throw ValidationError("model weight length mismatch");
            m.machines_.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed model: ") + e.what());
    }
    if (m.classes_.size() < 2 || m.machines_.size() != m.classes_.size() * (m.classes_.size() - 1) / 2)
        throw ValidationError("model machine count does not match its classes");
    return m;
}

const std::vector<double>& cost_grid() {
    static const std::vector<double> grid{0.1, 1.0, 2.0, 10.0, 100.0, 1000.0};
    return grid;
}

std::vector<int> stratified_folds(std::span<const LabeledSample> samples, int folds) {
    if (folds < 2) throw ValidationError("need at least two folds");
    std::map<int, int> seen;
    std::vector<int> out(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) out[i] = seen[samples[i].label]++ % folds;
    return out;
}

CostSelection select_cost(std::span<const LabeledSample> samples, const SvmOptions& options) {
    constexpr int kFolds = 5;
    CostSelection sel;
    const std::vector<int> fold = stratified_folds(samples, kFolds);
    const auto& grid = cost_grid();
    sel.accuracy.assign(grid.size(), 0.0);

    std::vector<std::vector<LabeledSample>> train(kFolds), test(kFolds);
    std::vector<bool> usable(kFolds, false);
    for (int f = 0; f < kFolds; ++f) {
        for (std::size_t i = 0; i < samples.size(); ++i) (fold[i] == f ? test : train)[f].push_back(samples[i]);
        usable[f] = !test[f].empty() && distinct_labels(train[f]).size() >= 2;
        if (!test[f].empty() && !usable[f])
            sel.warnings.push_back("cost search: fold " + std::to_string(f) + " skipped, training split has one class");
    }
    if (std::none_of(usable.begin(), usable.end(), [](bool b) { return b; })) {
        sel.cost = 1.0;
        sel.warnings.push_back("cost search: no usable fold, using C = 1");
        return sel;
    }

    for (std::size_t c = 0; c < grid.size(); ++c) {
        std::size_t correct = 0, total = 0;
        for (int f = 0; f < kFolds; ++f) {
            if (!usable[f]) continue;
            const SvmModel m = svm_train(train[f], grid[c], options);
            for (const auto& s : test[f]) {
                correct += m.predict(s.features) == s.label ? 1 : 0;
                ++total;
            }
        }
        sel.accuracy[c] = static_cast<double>(correct) / static_cast<double>(total);
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < grid.size(); ++c)
        if (sel.accuracy[c] > sel.accuracy[best]) best = c;
    sel.cost = grid[best];
    return sel;
}

SvmModel train_excluding(std::span<const LabeledSample> samples, const std::string& held_out,
                         const SvmOptions& options, CostSelection* selection) {
    std::vector<LabeledSample> train;
    for (const auto& s : samples)
        if (s.subject != held_out) train.push_back(s);
    CostSelection sel = select_cost(train, options);
    SvmModel m = svm_train(train, sel.cost, options);
    if (selection) *selection = std::move(sel);
    return m;
}

RecognitionReport cross_validate(std::span<const LabeledSample> samples, Protocol protocol,
                                 const SvmOptions& options) {
    if (samples.empty()) throw ValidationError("no samples to evaluate");
    RecognitionReport r;
    for (const auto& s : samples) {
        if (s.label < 0) throw ValidationError("class labels must be non-negative");
        r.num_classes = std::max(r.num_classes, s.label + 1);
    }
    r.confusion.assign(static_cast<std::size_t>(r.num_classes), std::vector<std::size_t>(r.num_classes, 0));
    r.predictions.assign(samples.size(), -1);

    // Rounds: one per subject (in first-seen order) or one per sample.
    std::vector<std::vector<std::size_t>> rounds;
    if (protocol == Protocol::LeaveOneSubjectOut) {
        std::map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            auto [it, inserted] = index.emplace(samples[i].subject, rounds.size());
            if (inserted) rounds.emplace_back();
            rounds[it->second].push_back(i);
        }
    } else {
        for (std::size_t i = 0; i < samples.size(); ++i) rounds.push_back({i});
    }
    if (rounds.size() < 2) throw ValidationError("cross-validation needs at least two folds");

    for (const auto& held : rounds) {
        std::vector<LabeledSample> train;
        std::vector<bool> out(samples.size(), false);
        for (std::size_t i : held) out[i] = true;
        for (std::size_t i = 0; i < samples.size(); ++i)
            if (!out[i]) train.push_back(samples[i]);

        const std::vector<int> known = distinct_labels(train);
        if (known.size() < 2) {
            r.warnings.push_back("fold holding out '" + samples[held.front()].id +
                                 "' skipped: training set has fewer than two classes");
            for (std::size_t i : held) {
                auto& sc = r.per_subject[samples[i].subject];
                ++sc.total;
                ++r.total;
            }
            continue;
        }
        for (std::size_t i : held)
            if (!std::binary_search(known.begin(), known.end(), samples[i].label))
                r.warnings.push_back("sample '" + samples[i].id + "' has class " + std::to_string(samples[i].label) +
                                     " absent from its training fold; counted as an error");

        CostSelection sel = select_cost(train, options);
        for (auto& w : sel.warnings) r.warnings.push_back(std::move(w));
        const SvmModel model = svm_train(train, sel.cost, options);
        r.fold_costs.push_back(sel.cost);
        ++r.rounds;

        for (std::size_t i : held) {
            const int p = model.predict(samples[i].features);
            r.predictions[i] = p;
            const bool ok = p == samples[i].label;
            auto& sc = r.per_subject[samples[i].subject];
            ++sc.total;
            ++r.total;
            if (ok) {
                ++sc.correct;
                ++r.correct;
            }
            ++r.confusion[static_cast<std::size_t>(samples[i].label)][static_cast<std::size_t>(p)];
        }
    }
    r.accuracy = r.total ? static_cast<double>(r.correct) / static_cast<double>(r.total) : 0.0;
    return r;
}

nlohmann::json RecognitionReport::to_json(const std::vector<std::string>& class_names) const {
    nlohmann::ordered_json j;
    j["accuracy"] = accuracy;
    j["correct"] = correct;
    j["total"] = total;
    j["num_classes"] = num_classes;
    if (!class_names.empty()) j["class_names"] = class_names;
    j["confusion"] = confusion;
    auto& ps = j["per_subject"] = nlohmann::ordered_json::object();
    for (const auto& [name, s] : per_subject)
        ps[name] = {{"correct", s.correct},
                    {"total", s.total},
                    {"accuracy", s.total ? static_cast<double>(s.correct) / static_cast<double>(s.total) : 0.0}};
    j["fold_costs"] = fold_costs;
    j["warnings"] = warnings;
    return nlohmann::json::parse(j.dump());
}

}  // namespace mesr
