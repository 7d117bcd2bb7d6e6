#pragma once

// Task-guided quality scores. Strong guidance reads a trained classifier's
// logits; weak guidance (zero-shot) reads cosine similarities between image
// embeddings and embedded class prompts. Neither path sees ground-truth labels.

#include <span>
#include <string>
#include <vector>

#include "tgiqa/tensor_io.hpp"

namespace tgiqa {

struct QualityTriple {
    double q_p = 0.0;  // max class probability, in [1/K, 1]
    double q_h = 0.0;  // prediction entropy in nats, in [0, ln K]
    double q_l = 0.0;  // max raw logit or similarity
};

/// Max-subtracted softmax. Throws NonFinite on NaN/Inf input.
std::vector<double> softmax(std::span<const double> logits);
std::vector<double> softmax(std::span<const float> logits);

/// Scores one row. Probabilities are softmax(row / temperature); q_l is the
/// untempered row maximum.
QualityTriple quality_from_row(std::span<const float> row, double temperature = 1.0);

/// One triple per logits row (K >= 2).
std::vector<QualityTriple> strong_tg_scores(const TensorF32& logits);

/// Scales each row to unit Euclidean norm; rows with norm below 1e-12 raise
/// ZeroNormRow.
TensorF32 normalize_rows(const TensorF32& t);

/// s = z W^T for row-normalized z (n x d) and w (K x d).
TensorF32 zeroshot_similarities(const TensorF32& z, const TensorF32& w);

inline constexpr double kDefaultTemperature = 0.01;

std::vector<QualityTriple> zsclip_scores(const TensorF32& similarities, double temperature = kDefaultTemperature);

/// Appends prefix.q_p / prefix.q_h / prefix.q_l records for each manifest entry.
void append_quality_scores(ScoreTable& table, const DatasetManifest& manifest,
                           const std::vector<QualityTriple>& triples, const std::string& prefix);

/// correct = 1 when the first arg-max of a logits row equals the entry's label.
CorrectnessTable correctness_from_logits(const TensorF32& logits, const DatasetManifest& manifest,
                                         const std::string& model);

}  // namespace tgiqa
