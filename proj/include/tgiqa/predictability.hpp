#pragma once

// Point-wise predictability of task-model correctness M from a quality score
// Q: one-feature logistic regression P(M | Q) scored by AUC and cross-entropy,
// plus per-label and per-image-id (content-controlled) variants.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tgiqa/stats.hpp"

namespace tgiqa {

struct LogRegConfig {
    double l2 = 1e-4;  // penalty on the weight only; the bias is free
    double tol = 1e-8;
    int max_iterations = 100;
};

struct LogRegModel {
    double weight = 0.0;
    double bias = 0.0;
    LogRegConfig config;
    int iterations = 0;
    /// Penalized objective at the start and after every iteration.
    std::vector<double> objective_trace;
};

/// Mean log-loss plus (l2 / 2) * weight^2.
double logistic_objective(std::span<const double> q, std::span<const int> m, double weight, double bias, double l2);

/// Damped Newton (IRLS) from zero. Throws SingleClass when m has one class and
/// NoConvergence when max_iterations pass without a step below tol.
LogRegModel fit_logreg(std::span<const double> q, std::span<const int> m, const LogRegConfig& config = {});

double predict_proba(const LogRegModel& model, double q);
std::vector<double> predict_proba(const LogRegModel& model, std::span<const double> q);

/// Mann-Whitney AUC with ties counted as one half. Throws SingleClass.
double auc(std::span<const double> scores, std::span<const int> labels);

/// Mean binary cross-entropy in nats, probabilities clamped to [1e-12, 1 - 1e-12].
double cross_entropy(std::span<const double> probs, std::span<const int> labels);

struct SplitSpec {
    double train_frac = 0.8;
    std::uint64_t seed = 0;
};

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Splits sample indices by image id so all variants of an id share a side.
/// The train side holds floor(train_frac * ids + 0.5) ids chosen by a keyed hash.
Split split_by_image(std::span<const JoinedSample> samples, const SplitSpec& spec);

/// Sizes of `folds` contiguous chunks over n items; the remainder goes to the
/// last chunks (76 items -> 15, 15, 15, 15, 16).
std::vector<std::size_t> fold_sizes(std::size_t n, std::size_t folds);

struct PredictOptions {
    LogRegConfig logreg;
    BootstrapOptions bootstrap;
};

struct PointwiseResult {
    double auc = 0.0;
    ConfidenceInterval auc_ci;
    double ce = 0.0;
    ConfidenceInterval ce_ci;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    LogRegModel model;
};

PointwiseResult pointwise_predictability(std::span<const JoinedSample> samples, const SplitSpec& split,
                                         const PredictOptions& options = {});
PointwiseResult pointwise_predictability(const ScoreTable& scores, const CorrectnessTable& correctness,
                                         const std::string& metric, const std::string& model, const SplitSpec& split,
                                         const PredictOptions& options = {});

struct LabelPredictability {
    double mauc = 0.0;
    double mce = 0.0;
    double sigma_auc = 0.0;
    double sigma_ce = 0.0;
    std::size_t labels_used = 0;
    std::size_t labels_skipped = 0;
    std::map<int, double> auc_by_label;
};

/// One model per label, each scored by k-fold cross-validation over the
/// label's image ids. Labels lacking a class (or any usable fold) are skipped.
LabelPredictability per_label_predictability(std::span<const JoinedSample> samples,
                                             const std::map<std::string, int>& labels, std::size_t folds = 5,
                                             std::uint64_t seed = 0, const LogRegConfig& config = {});

struct ImageKFoldResult {
    double mauc = 0.0;
    double sigma = 0.0;
    double mce = 0.0;
    std::size_t ids_used = 0;
    std::size_t ids_skipped = 0;
    std::size_t folds_used = 0;
    std::size_t folds_skipped = 0;
};

/// k-fold cross-validation over the variants of each image id separately;
/// averages AUC over all (id, fold) pairs.
ImageKFoldResult per_image_kfold(std::span<const JoinedSample> samples, std::size_t folds = 5,
                                 std::uint64_t seed = 0, const LogRegConfig& config = {});

/// image_id -> label lookup from a manifest.
std::map<std::string, int> labels_by_image(const DatasetManifest& manifest);

}  // namespace tgiqa
