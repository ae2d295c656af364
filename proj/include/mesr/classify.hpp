#pragma once

#include <nlohmann/json.hpp>

#include <map>
#include <span>
#include <string>
#include <vector>

namespace mesr {

struct LabeledSample {
    std::vector<double> features;
    int label = 0;
    std::string subject;
    std::string id;
};

/// Per-dimension z-score from training statistics. Constant dimensions are only centred.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static Standardizer fit(std::span<const LabeledSample> samples);
    std::vector<double> apply(std::span<const double> x) const;
    bool empty() const { return mean.empty(); }
};

struct SvmOptions {
    bool standardize = true;
    double tolerance = 1e-4;  // max |delta alpha| within an epoch
    int max_epochs = 1000;
};

/// Binary linear SVM, hinge loss, bias learned as a weight on a constant feature of 1.
struct BinarySvm {
    std::vector<double> weights;
    double bias = 0.0;
    std::vector<double> dual_objective;  // after each epoch
    int epochs = 0;

    double decision(std::span<const double> x) const;
};

/// Dual coordinate descent on min 1/2 a'Qa - e'a, 0 <= a <= C. Labels are +1 / -1.
BinarySvm train_binary(const std::vector<std::vector<double>>& x, const std::vector<int>& y, double cost,
                       const SvmOptions& options = {});

struct PairMachine {
    int positive = 0;
    int negative = 0;
    BinarySvm svm;
};

/// One-vs-one multi-class linear SVM.
class SvmModel {
public:
    int predict(std::span<const double> x) const;
    /// Signed decision value of each pairwise machine (positive favours machine.positive).
    std::vector<double> decisions(std::span<const double> x) const;

    const std::vector<int>& classes() const { return classes_; }
    const std::vector<PairMachine>& machines() const { return machines_; }
    double cost() const { return cost_; }
    std::size_t dimension() const { return dimension_; }

    nlohmann::json to_json() const;
    static SvmModel from_json(const nlohmann::json& j);

    friend SvmModel svm_train(std::span<const LabeledSample> samples, double cost, const SvmOptions& options);

private:
    std::vector<int> classes_;
    std::vector<PairMachine> machines_;
    Standardizer standardizer_;
    double cost_ = 1.0;
    std::size_t dimension_ = 0;
};

SvmModel svm_train(std::span<const LabeledSample> samples, double cost, const SvmOptions& options = {});

/// {0.1, 1, 2, 10, 100, 1000}
const std::vector<double>& cost_grid();

struct CostSelection {
    double cost = 0.0;
    std::vector<double> accuracy;  // pooled CV accuracy per grid value
    std::vector<std::string> warnings;
};

/// Fold of each sample under stratified k-fold: the j-th sample of a class goes to fold j mod k.
std::vector<int> stratified_folds(std::span<const LabeledSample> samples, int folds);

/// Stratified 5-fold CV over the cost grid; highest accuracy wins, smallest cost on ties.
CostSelection select_cost(std::span<const LabeledSample> samples, const SvmOptions& options = {});

enum class Protocol { LeaveOneSubjectOut, LeaveOneSampleOut };

struct SubjectScore {
    std::size_t correct = 0;
    std::size_t total = 0;
};

struct RecognitionReport {
    double accuracy = 0.0;
    std::size_t correct = 0;
    std::size_t total = 0;
    int num_classes = 0;
    std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
    std::map<std::string, SubjectScore> per_subject;
    std::vector<int> predictions;                     // aligned with the input samples
    std::vector<double> fold_costs;
    std::size_t rounds = 0;
    std::vector<std::string> warnings;

    nlohmann::json to_json(const std::vector<std::string>& class_names = {}) const;
};

/// Trains on every sample whose subject differs from `held_out` (cost chosen by CV on that set).
SvmModel train_excluding(std::span<const LabeledSample> samples, const std::string& held_out,
                         const SvmOptions& options = {}, CostSelection* selection = nullptr);

RecognitionReport cross_validate(std::span<const LabeledSample> samples, Protocol protocol,
                                 const SvmOptions& options = {});

inline RecognitionReport loso_evaluate(std::span<const LabeledSample> samples, const SvmOptions& options = {}) {
    return cross_validate(samples, Protocol::LeaveOneSubjectOut, options);
}

}  // namespace mesr
