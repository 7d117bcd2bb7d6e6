#include "tgiqa/tg_iqa.hpp"

#include <algorithm>
#include <cmath>

#include "tgiqa/error.hpp"
#include "tgiqa/kernels.hpp"

namespace tgiqa {

namespace {

constexpr double kNormTolerance = 1e-5;

template <typename T>
std::vector<double> softmax_impl(std::span<const T> logits) {
    if (logits.empty()) throw Error(Errc::InvalidArgument, "softmax of an empty vector");
    double m = -INFINITY;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (!std::isfinite(logits[i])) throw Error(Errc::NonFinite, "logit " + std::to_string(i) + " is not finite");
        m = std::max(m, static_cast<double>(logits[i]));
    }
    std::vector<double> p(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(static_cast<double>(logits[i]) - m);
        total += p[i];
    }
    for (auto& v : p) v /= total;
    return p;
}

double row_norm(std::span<const float> row) {
    double sq = 0.0;
    for (float v : row) sq += static_cast<double>(v) * v;
    return std::sqrt(sq);
}

void require_normalized(const TensorF32& t, const char* what) {
    for (std::size_t r = 0; r < t.rows; ++r) {
        const double norm = row_norm(t.row(r));
        if (std::abs(norm - 1.0) > kNormTolerance) {
            throw Error(Errc::NotNormalized, std::string(what) + " row " + std::to_string(r) + " has norm " +
                                                 std::to_string(norm));
        }
    }
}

}  // namespace

std::vector<double> softmax(std::span<const double> logits) { return softmax_impl(logits); }
std::vector<double> softmax(std::span<const float> logits) { return softmax_impl(logits); }

QualityTriple quality_from_row(std::span<const float> row, double temperature) {
    if (row.empty()) throw Error(Errc::InvalidArgument, "empty score row");
    if (!(temperature > 0.0)) throw Error(Errc::InvalidArgument, "temperature must be positive");
    double m = -INFINITY;
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (!std::isfinite(row[i])) throw Error(Errc::NonFinite, "entry " + std::to_string(i) + " is not finite");
        m = std::max(m, static_cast<double>(row[i]));
    }
    // With d_i = (z_i - max) / T and S = sum exp(d_i):
    //   max prob = 1 / S,  entropy = ln S - sum exp(d_i) d_i / S.
    // Underflowed terms contribute 0 * d_i = 0, which is the 0 ln 0 = 0 rule.
    double total = 0.0;
    double weighted = 0.0;
    for (float v : row) {
        const double d = (static_cast<double>(v) - m) / temperature;
        const double e = std::exp(d);
        total += e;
        weighted += e * d;
    }
    const double max_entropy = std::log(static_cast<double>(row.size()));
    QualityTriple q;
    q.q_p = 1.0 / total;
    q.q_h = std::clamp(std::log(total) - weighted / total, 0.0, max_entropy);
    q.q_l = m;
    return q;
}

std::vector<QualityTriple> strong_tg_scores(const TensorF32& logits) {
    if (logits.cols < 2) throw Error(Errc::InvalidArgument, "logits need at least 2 classes");
    return kernels::omp::quality_rows(logits, 1.0);
}

TensorF32 normalize_rows(const TensorF32& t) {
    TensorF32 out = t;
    for (std::size_t r = 0; r < t.rows; ++r) {
        const double norm = row_norm(t.row(r));
        if (!(norm > 1e-12)) throw Error(Errc::ZeroNormRow, "row " + std::to_string(r));
        auto dst = out.row(r);
        for (auto& v : dst) v = static_cast<float>(v / norm);
    }
    return out;
}

TensorF32 zeroshot_similarities(const TensorF32& z, const TensorF32& w) {
    if (z.cols != w.cols) {
        throw Error(Errc::DimensionMismatch, "embedding width " + std::to_string(z.cols) + " vs text width " +
                                                 std::to_string(w.cols));
    }
    require_normalized(z, "image embedding");
    require_normalized(w, "text weight");
    return kernels::omp::similarity_matrix(z, w);
}

std::vector<QualityTriple> zsclip_scores(const TensorF32& similarities, double temperature) {
    if (!(temperature > 0.0)) throw Error(Errc::InvalidArgument, "temperature must be positive");
    return kernels::omp::quality_rows(similarities, temperature);
}

void append_quality_scores(ScoreTable& table, const DatasetManifest& manifest,
                           const std::vector<QualityTriple>& triples, const std::string& prefix) {
    if (triples.size() != manifest.size()) {
        throw Error(Errc::AlignmentError, prefix + " scores have " + std::to_string(triples.size()) +
                                              " rows but the manifest has " + std::to_string(manifest.size()));
    }
    for (std::size_t i = 0; i < triples.size(); ++i) {
        const auto key = manifest.entries[i].key();
        table.add(key, prefix + ".q_p", triples[i].q_p);
        table.add(key, prefix + ".q_h", triples[i].q_h);
        table.add(key, prefix + ".q_l", triples[i].q_l);
    }
}

CorrectnessTable correctness_from_logits(const TensorF32& logits, const DatasetManifest& manifest,
                                         const std::string& model) {
    check_alignment(logits, manifest, "logits");
    CorrectnessTable table;
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const auto row = logits.row(i);
        if (row.empty()) throw Error(Errc::InvalidArgument, "logits have no columns");
        const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
        table.add(manifest.entries[i].key(), model, best == manifest.entries[i].label ? 1 : 0);
    }
    return table;
}

}  // namespace tgiqa
