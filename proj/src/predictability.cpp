#include "tgiqa/predictability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "tgiqa/error.hpp"
#include "tgiqa/rng.hpp"

namespace tgiqa {

namespace {

constexpr double kProbFloor = 1e-12;

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void require_labels(std::span<const int> m) {
    bool pos = false;
    bool neg = false;
    for (int v : m) {
        if (v != 0 && v != 1) throw Error(Errc::InvalidArgument, "labels must be 0 or 1");
        (v ? pos : neg) = true;
    }
    if (!pos || !neg) throw Error(Errc::SingleClass, "labels contain a single class");
}

bool has_both_classes(std::span<const int> m) {
    bool pos = false;
    bool neg = false;
    for (int v : m) (v ? pos : neg) = true;
    return pos && neg;
}

struct Columns {
    std::vector<double> q;
    std::vector<int> m;
};

Columns gather(std::span<const JoinedSample> samples, std::span<const std::size_t> idx) {
    Columns c;
    c.q.reserve(idx.size());
    c.m.reserve(idx.size());
    for (std::size_t i : idx) {
        c.q.push_back(samples[i].q);
        c.m.push_back(samples[i].m);
    }
    return c;
}

double population_sd(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double mu = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - mu) * (x - mu);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

// Scores ordered like the model's predicted probabilities. Using the sign of
// the weight rather than sigmoid outputs avoids ties from saturation.
std::vector<double> oriented(const LogRegModel& model, std::span<const double> q) {
    std::vector<double> out(q.size(), 0.0);
    if (model.weight == 0.0) return out;
    const double sign = model.weight > 0.0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < q.size(); ++i) out[i] = sign * q[i];
    return out;
}

struct FoldScore {
    bool valid = false;
    double auc = 0.0;
    double ce = 0.0;
};

FoldScore score_fold(const Columns& train, const Columns& test, const LogRegConfig& config) {
    if (!has_both_classes(train.m) || !has_both_classes(test.m)) return {};
    const LogRegModel model = fit_logreg(train.q, train.m, config);
    const auto probs = predict_proba(model, test.q);
    return {true, auc(oriented(model, test.q), test.m), cross_entropy(probs, test.m)};
}

// Positions 0..n-1 shuffled by the stream for `key`, then cut into chunks.
std::vector<std::size_t> fold_of_position(std::size_t n, std::size_t folds, std::uint64_t key) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng::Stream stream(key);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[stream.below(i)]);
    const auto sizes = fold_sizes(n, folds);
    std::vector<std::size_t> fold(n);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < sizes.size(); ++f) {
        for (std::size_t k = 0; k < sizes[f]; ++k) fold[perm[pos++]] = f;
    }
    return fold;
}

}  // namespace

double logistic_objective(std::span<const double> q, std::span<const int> m, double weight, double bias, double l2) {
    double loss = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double eta = weight * q[i] + bias;
        loss += softplus(eta) - m[i] * eta;
    }
    return loss / static_cast<double>(q.size()) + 0.5 * l2 * weight * weight;
}

LogRegModel fit_logreg(std::span<const double> q, std::span<const int> m, const LogRegConfig& config) {
    if (q.size() != m.size()) throw Error(Errc::DimensionMismatch, "scores and labels differ in length");
    if (q.size() < 2) throw Error(Errc::InvalidArgument, "logistic regression needs at least 2 samples");
    require_labels(m);
    for (double v : q) {
        if (!std::isfinite(v)) throw Error(Errc::NonFinite, "non-finite quality score");
    }

    const double n = static_cast<double>(q.size());
    LogRegModel model;
    model.config = config;
    double w = 0.0;
    double b = 0.0;
    double objective = logistic_objective(q, m, w, b, config.l2);
    model.objective_trace.push_back(objective);

    for (int iter = 1; iter <= config.max_iterations; ++iter) {
        double gw = 0.0, gb = 0.0, hww = 0.0, hwb = 0.0, hbb = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) {
            const double p = sigmoid(w * q[i] + b);
            const double r = p - m[i];
            const double s = p * (1.0 - p);
            gw += r * q[i];
            gb += r;
            hww += s * q[i] * q[i];
            hwb += s * q[i];
            hbb += s;
        }
        gw = gw / n + config.l2 * w;
        gb /= n;
        hww = hww / n + config.l2;
        hwb /= n;
        hbb /= n;

        double dw = 0.0;
        double db = 0.0;
        const double det = hww * hbb - hwb * hwb;
        if (det > 1e-300 && std::isfinite(det)) {
            dw = (hbb * gw - hwb * gb) / det;
            db = (hww * gb - hwb * gw) / det;
        } else {
            dw = gw / hww;
            db = hbb > 0.0 ? gb / hbb : gb;
        }

        // Halve the step until the objective does not increase.
        double t = 1.0;
        double next = objective;
        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
            next = logistic_objective(q, m, w - t * dw, b - t * db, config.l2);
            if (next <= objective) {
                accepted = true;
                break;
            }
        }
        model.iterations = iter;
        if (!accepted) {
            // No descent direction left at working precision.
            model.objective_trace.push_back(objective);
            model.weight = w;
            model.bias = b;
            return model;
        }
        w -= t * dw;
        b -= t * db;
        objective = next;
        model.objective_trace.push_back(objective);
        if (std::max(std::abs(t * dw), std::abs(t * db)) < config.tol) {
            model.weight = w;
            model.bias = b;
            return model;
        }
    }
    throw Error(Errc::NoConvergence, "IRLS did not converge in " + std::to_string(config.max_iterations) +
                                         " iterations");
}

double predict_proba(const LogRegModel& model, double q) { return sigmoid(model.weight * q + model.bias); }

std::vector<double> predict_proba(const LogRegModel& model, std::span<const double> q) {
    std::vector<double> out(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) out[i] = predict_proba(model, q[i]);
    return out;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw Error(Errc::DimensionMismatch, "scores and labels differ in length");
    require_labels(labels);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Doubled ranks stay integral under tie averaging: a tie run over sorted
    // positions i..j has doubled average rank i + j + 2.
    std::int64_t pos = 0;
    std::int64_t doubled_rank_sum = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        std::int64_t run_pos = 0;
        for (std::size_t k = i; k <= j; ++k) run_pos += labels[order[k]];
        doubled_rank_sum += run_pos * static_cast<std::int64_t>(i + j + 2);
        pos += run_pos;
        i = j + 1;
    }
    const std::int64_t neg = static_cast<std::int64_t>(scores.size()) - pos;
    const std::int64_t u2 = doubled_rank_sum - pos * (pos + 1);
    const std::int64_t d2 = 2 * pos * neg;
    // Divide the smaller side and subtract from one, so that
    // auc(s, y) + auc(s, 1 - y) == 1 holds exactly in floating point.
    if (2 * u2 <= d2) return static_cast<double>(u2) / static_cast<double>(d2);
    return 1.0 - static_cast<double>(d2 - u2) / static_cast<double>(d2);
}

double cross_entropy(std::span<const double> probs, std::span<const int> labels) {
    if (probs.size() != labels.size()) throw Error(Errc::DimensionMismatch, "probs and labels differ in length");
    if (probs.empty()) throw Error(Errc::EmptyInput, "cross-entropy of an empty sample");
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = std::clamp(probs[i], kProbFloor, 1.0 - kProbFloor);
        total += labels[i] ? -std::log(p) : -std::log1p(-p);
    }
    return total / static_cast<double>(probs.size());
}

Split split_by_image(std::span<const JoinedSample> samples, const SplitSpec& spec) {
    if (!(spec.train_frac > 0.0 && spec.train_frac < 1.0)) {
        throw Error(Errc::InvalidArgument, "train fraction must lie in (0,1)");
    }
    std::set<std::string> unique;
    for (const auto& s : samples) unique.insert(s.key.image_id);
    if (unique.size() < 2) throw Error(Errc::InvalidArgument, "need at least 2 image ids to split");

    const std::uint64_t key = rng::derive(spec.seed, "split");
    std::vector<std::pair<std::uint64_t, std::string>> ranked;
    ranked.reserve(unique.size());
    for (const auto& id : unique) ranked.emplace_back(rng::derive(key, id), id);
    std::sort(ranked.begin(), ranked.end());

    auto n_train = static_cast<std::size_t>(std::floor(spec.train_frac * static_cast<double>(ranked.size()) + 0.5));
    n_train = std::clamp<std::size_t>(n_train, 1, ranked.size() - 1);
    std::set<std::string> train_ids;
    for (std::size_t i = 0; i < n_train; ++i) train_ids.insert(ranked[i].second);

    Split split;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        (train_ids.count(samples[i].key.image_id) ? split.train : split.test).push_back(i);
    }
    return split;
}

std::vector<std::size_t> fold_sizes(std::size_t n, std::size_t folds) {
    if (folds == 0) throw Error(Errc::InvalidArgument, "fold count must be positive");
    const std::size_t base = n / folds;
    const std::size_t rem = n % folds;
    std::vector<std::size_t> sizes(folds, base);
    for (std::size_t f = folds - rem; f < folds; ++f) ++sizes[f];
    return sizes;
}

PointwiseResult pointwise_predictability(std::span<const JoinedSample> samples, const SplitSpec& spec,
                                         const PredictOptions& options) {
    const Split split = split_by_image(samples, spec);
    const Columns train = gather(samples, split.train);
    const Columns test = gather(samples, split.test);

    PointwiseResult r;
    r.train_size = split.train.size();
    r.test_size = split.test.size();
    r.model = fit_logreg(train.q, train.m, options.logreg);
    const auto probs = predict_proba(r.model, test.q);
    const auto ranked = oriented(r.model, test.q);
    r.auc = auc(ranked, test.m);
    r.ce = cross_entropy(probs, test.m);

    const auto resampled_auc = [&](std::span<const std::size_t> idx) {
        std::vector<double> s(idx.size());
        std::vector<int> y(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            s[i] = ranked[idx[i]];
            y[i] = test.m[idx[i]];
        }
        if (!has_both_classes(y)) return std::numeric_limits<double>::quiet_NaN();
        return auc(s, y);
    };
    const auto resampled_ce = [&](std::span<const std::size_t> idx) {
        std::vector<double> p(idx.size());
        std::vector<int> y(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            p[i] = probs[idx[i]];
            y[i] = test.m[idx[i]];
        }
        return cross_entropy(p, y);
    };
    r.auc_ci = bootstrap_ci_indexed(test.q.size(), resampled_auc, options.bootstrap);
    r.ce_ci = bootstrap_ci_indexed(test.q.size(), resampled_ce, options.bootstrap);
    return r;
}

PointwiseResult pointwise_predictability(const ScoreTable& scores, const CorrectnessTable& correctness,
                                         const std::string& metric, const std::string& model, const SplitSpec& split,
                                         const PredictOptions& options) {
    const auto joined = join_samples(scores, correctness, metric, model);
    return pointwise_predictability(joined, split, options);
}

LabelPredictability per_label_predictability(std::span<const JoinedSample> samples,
                                             const std::map<std::string, int>& labels, std::size_t folds,
                                             std::uint64_t seed, const LogRegConfig& config) {
    std::map<int, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto it = labels.find(samples[i].key.image_id);
        if (it == labels.end()) {
            throw Error(Errc::AlignmentError, "no label for image id '" + samples[i].key.image_id + "'");
        }
        by_label[it->second].push_back(i);
    }

    LabelPredictability out;
    std::vector<double> aucs;
    std::vector<double> ces;
    const std::uint64_t fold_key = rng::derive(seed, "label-folds");
    for (const auto& [label, members] : by_label) {
        // Folds partition the label's ids (sorted bytewise) by a permutation
        // keyed on the id count, so identical data yields identical folds.
        std::vector<std::string> ids;
        for (std::size_t i : members) ids.push_back(samples[i].key.image_id);
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        const auto fold = fold_of_position(ids.size(), folds, rng::derive(fold_key, ids.size()));

        std::vector<double> fold_auc;
        std::vector<double> fold_ce;
        for (std::size_t f = 0; f < folds; ++f) {
            std::vector<std::size_t> train_idx;
            std::vector<std::size_t> test_idx;
            for (std::size_t i : members) {
                const auto pos = static_cast<std::size_t>(
                    std::lower_bound(ids.begin(), ids.end(), samples[i].key.image_id) - ids.begin());
                (fold[pos] == f ? test_idx : train_idx).push_back(i);
            }
            const FoldScore s = score_fold(gather(samples, train_idx), gather(samples, test_idx), config);
            if (!s.valid) continue;
            fold_auc.push_back(s.auc);
            fold_ce.push_back(s.ce);
        }
        if (fold_auc.empty()) {
            ++out.labels_skipped;
            continue;
        }
        const double label_auc = mean(fold_auc);
        out.auc_by_label[label] = label_auc;
        aucs.push_back(label_auc);
        ces.push_back(mean(fold_ce));
    }
    if (aucs.empty()) throw Error(Errc::AllLabelsSkipped, std::to_string(out.labels_skipped) + " labels skipped");
    out.labels_used = aucs.size();
    out.mauc = mean(aucs);
    out.mce = mean(ces);
    out.sigma_auc = population_sd(aucs);
    out.sigma_ce = population_sd(ces);
    return out;
}

ImageKFoldResult per_image_kfold(std::span<const JoinedSample> samples, std::size_t folds, std::uint64_t seed,
                                 const LogRegConfig& config) {
    std::map<std::string, std::vector<std::size_t>> by_id;
    for (std::size_t i = 0; i < samples.size(); ++i) by_id[samples[i].key.image_id].push_back(i);

    ImageKFoldResult out;
    std::vector<double> aucs;
    std::vector<double> ces;
    const std::uint64_t fold_key = rng::derive(seed, "image-folds");
    for (auto& [id, members] : by_id) {
        std::sort(members.begin(), members.end(),
                  [&](std::size_t a, std::size_t b) { return samples[a].key < samples[b].key; });
        const Columns all = gather(samples, members);
        if (members.size() < folds || !has_both_classes(all.m)) {
            ++out.ids_skipped;
            continue;
        }
        const auto fold = fold_of_position(members.size(), folds, rng::derive(fold_key, id));
        std::size_t used_here = 0;
        for (std::size_t f = 0; f < folds; ++f) {
            std::vector<std::size_t> train_idx;
            std::vector<std::size_t> test_idx;
            for (std::size_t k = 0; k < members.size(); ++k) {
                (fold[k] == f ? test_idx : train_idx).push_back(members[k]);
            }
            const FoldScore s = score_fold(gather(samples, train_idx), gather(samples, test_idx), config);
            if (!s.valid) {
                ++out.folds_skipped;
                continue;
            }
            aucs.push_back(s.auc);
            ces.push_back(s.ce);
            ++used_here;
        }
        if (used_here == 0) {
            ++out.ids_skipped;
        } else {
            ++out.ids_used;
        }
    }
    if (aucs.empty()) throw Error(Errc::AllIdsSkipped, std::to_string(out.ids_skipped) + " image ids skipped");
    out.folds_used = aucs.size();
    out.mauc = mean(aucs);
    out.sigma = population_sd(aucs);
    out.mce = mean(ces);
    return out;
}

std::map<std::string, int> labels_by_image(const DatasetManifest& manifest) {
    std::map<std::string, int> out;
    for (const auto& e : manifest.entries) {
        auto [it, inserted] = out.emplace(e.image_id, e.label);
        if (!inserted && it->second != e.label) {
            throw Error(Errc::InvalidArgument, "image id '" + e.image_id + "' carries two labels");
        }
    }
    return out;
}

}  // namespace tgiqa
