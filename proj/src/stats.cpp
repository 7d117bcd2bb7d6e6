#include "tgiqa/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>

#include "tgiqa/error.hpp"
#include "tgiqa/kernels.hpp"

namespace tgiqa {

namespace {

void require_paired(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw Error(Errc::DimensionMismatch, "paired inputs of length " + std::to_string(x.size()) + " and " +
                                                 std::to_string(y.size()));
    }
    if (x.size() < 2) throw Error(Errc::DegenerateInput, "need at least 2 pairs");
}

// Counts pairs i < j with v[i] > v[j] while merge-sorting v.
std::int64_t count_inversions(std::vector<double>& v) {
    std::vector<double> buf(v.size());
    std::int64_t inversions = 0;
    for (std::size_t width = 1; width < v.size(); width *= 2) {
        for (std::size_t lo = 0; lo < v.size(); lo += 2 * width) {
            const std::size_t mid = std::min(lo + width, v.size());
            const std::size_t hi = std::min(lo + 2 * width, v.size());
            std::size_t i = lo;
            std::size_t j = mid;
            std::size_t k = lo;
            while (i < mid && j < hi) {
                if (v[j] < v[i]) {
                    inversions += static_cast<std::int64_t>(mid - i);
                    buf[k++] = v[j++];
                } else {
                    buf[k++] = v[i++];
                }
            }
            while (i < mid) buf[k++] = v[i++];
            while (j < hi) buf[k++] = v[j++];
        }
        v.swap(buf);
    }
    return inversions;
}

std::int64_t tied_pairs_sorted(std::span<const double> sorted) {
    std::int64_t ties = 0;
    std::size_t run = 1;
    for (std::size_t i = 1; i <= sorted.size(); ++i) {
        if (i < sorted.size() && sorted[i] == sorted[i - 1]) {
            ++run;
        } else {
            ties += static_cast<std::int64_t>(run * (run - 1) / 2);
            run = 1;
        }
    }
    return ties;
}

CoefficientSummary summarize(std::span<const double> q, std::span<const double> m,
                             double (*coefficient)(std::span<const double>, std::span<const double>),
                             const ReportOptions& options) {
    CoefficientSummary out;
    out.signed_value = coefficient(q, m);
    out.value = std::abs(out.signed_value);
    const auto paired = [&](std::span<const std::size_t> idx) {
        std::vector<double> qs(idx.size());
        std::vector<double> ms(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            qs[i] = q[idx[i]];
            ms[i] = m[idx[i]];
        }
        return coefficient(qs, ms);
    };
    const ConfidenceInterval ci =
        bootstrap_ci_indexed(q.size(), paired, {options.resamples, options.level, options.seed});
    out.ci = out.signed_value < 0 ? ConfidenceInterval{-ci.hi, -ci.lo} : ci;
    out.p_value = permutation_p_value(q, m, coefficient, options.permutations, options.seed);
    return out;
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::vector<JoinedSample> join_samples(const ScoreTable& scores, const CorrectnessTable& correctness,
                                       const std::string& metric, const std::string& model) {
    const auto q = scores.by_metric(metric);
    const auto m = correctness.by_model(model);
    std::vector<JoinedSample> out;
    for (const auto& [key, value] : q) {
        auto it = m.find(key);
        if (it != m.end()) out.push_back({key, value, it->second});
    }
    if (out.empty()) {
        throw Error(Errc::EmptyJoin, "no samples shared by metric '" + metric + "' and model '" + model + "'");
    }
    return out;
}

std::vector<GroupSummary> group_means(std::span<const JoinedSample> samples) {
    if (samples.empty()) throw Error(Errc::EmptyJoin, "no samples to group");
    struct Acc {
        double q = 0.0;
        double m = 0.0;
        std::size_t n = 0;
    };
    std::map<GroupKey, Acc> acc;
    for (const auto& s : samples) {
        auto& a = acc[GroupKey{s.key.corruption, s.key.severity}];
        a.q += s.q;
        a.m += s.m;
        ++a.n;
    }
    std::vector<GroupSummary> out;
    out.reserve(acc.size());
    for (const auto& [key, a] : acc) {
        out.push_back({key, a.q / static_cast<double>(a.n), a.m / static_cast<double>(a.n), a.n});
    }
    return out;
}

std::vector<GroupSummary> group_means(const ScoreTable& scores, const CorrectnessTable& correctness,
                                      const std::string& metric, const std::string& model) {
    const auto joined = join_samples(scores, correctness, metric, model);
    return group_means(joined);
}

double mean(std::span<const double> v) {
    if (v.empty()) throw Error(Errc::EmptyInput, "mean of an empty vector");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double pearson(std::span<const double> x, std::span<const double> y) {
    require_paired(x, y);
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw Error(Errc::DegenerateInput, "zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
    require_paired(x, y);
    return pearson(average_ranks(x), average_ranks(y));
}

double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
    require_paired(x, y);
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
    });

    const auto n0 = static_cast<std::int64_t>(n * (n - 1) / 2);
    std::int64_t x_ties = 0;
    std::int64_t joint_ties = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        const std::size_t run = j - i + 1;
        x_ties += static_cast<std::int64_t>(run * (run - 1) / 2);
        std::size_t a = i;
        while (a <= j) {
            std::size_t b = a;
            while (b + 1 <= j && y[order[b + 1]] == y[order[a]]) ++b;
            const std::size_t r = b - a + 1;
            joint_ties += static_cast<std::int64_t>(r * (r - 1) / 2);
            a = b + 1;
        }
        i = j + 1;
    }

    std::vector<double> ys(n);
    for (std::size_t k = 0; k < n; ++k) ys[k] = y[order[k]];
    const std::int64_t swaps = count_inversions(ys);
    const std::int64_t y_ties = tied_pairs_sorted(ys);

    const std::int64_t untied_x = n0 - x_ties;
    const std::int64_t untied_y = n0 - y_ties;
    if (untied_x == 0 || untied_y == 0) throw Error(Errc::DegenerateInput, "all values tied");
    const std::int64_t concordant_minus_discordant = n0 - x_ties - y_ties + joint_ties - 2 * swaps;
    return static_cast<double>(concordant_minus_discordant) /
           std::sqrt(static_cast<double>(untied_x) * static_cast<double>(untied_y));
}

double percentile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw Error(Errc::EmptyInput, "percentile of an empty vector");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

ConfidenceInterval percentile_interval(std::vector<double> stats, double level) {
    if (!(level > 0.0 && level <= 1.0)) throw Error(Errc::InvalidArgument, "confidence level outside (0,1]");
    std::erase_if(stats, [](double v) { return !std::isfinite(v); });
    if (stats.empty()) throw Error(Errc::DegenerateInput, "every bootstrap resample was degenerate");
    std::sort(stats.begin(), stats.end());
    const double alpha = 1.0 - level;
    return {percentile_sorted(stats, alpha / 2.0), percentile_sorted(stats, 1.0 - alpha / 2.0)};
}

ConfidenceInterval bootstrap_ci_indexed(std::size_t n, const std::function<double(std::span<const std::size_t>)>& stat,
                                        const BootstrapOptions& options) {
    if (n == 0) throw Error(Errc::EmptyInput, "bootstrap over an empty sample");
    if (options.resamples == 0) throw Error(Errc::InvalidArgument, "bootstrap needs at least one resample");
    const kernels::IndexStatistic guarded = [&](std::span<const std::size_t> idx) {
        try {
            return stat(idx);
        } catch (const Error& e) {
            if (e.code() == Errc::DegenerateInput) return std::numeric_limits<double>::quiet_NaN();
            throw;
        }
    };
    return percentile_interval(kernels::omp::resample_statistics(n, options.resamples, options.seed, guarded),
                               options.level);
}

ConfidenceInterval bootstrap_ci(std::span<const double> values,
                                const std::function<double(std::span<const double>)>& statistic,
                                const BootstrapOptions& options) {
    if (values.empty()) throw Error(Errc::EmptyInput, "bootstrap over an empty sample");
    return bootstrap_ci_indexed(
        values.size(),
        [&](std::span<const std::size_t> idx) {
            std::vector<double> resampled(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) resampled[i] = values[idx[i]];
            return statistic(resampled);
        },
        options);
}

double permutation_p_value(std::span<const double> x, std::span<const double> y,
                           const std::function<double(std::span<const double>, std::span<const double>)>& coefficient,
                           std::size_t permutations, std::uint64_t seed) {
    require_paired(x, y);
    const double observed = std::abs(coefficient(x, y));
    const auto stats = kernels::omp::permutation_statistics(
        y.size(), permutations, seed, [&](std::span<const std::size_t> perm) {
            std::vector<double> yp(perm.size());
            for (std::size_t i = 0; i < perm.size(); ++i) yp[i] = y[perm[i]];
            return coefficient(x, yp);
        });
    std::size_t extreme = 0;
    for (double s : stats) {
        if (std::abs(s) >= observed - 1e-12) ++extreme;
    }
    return static_cast<double>(1 + extreme) / static_cast<double>(1 + permutations);
}

CorrelationReport correlation_report(std::span<const GroupSummary> summaries, const std::string& metric,
                                     const std::string& model, const ReportOptions& options) {
    if (summaries.size() < 3) {
        throw Error(Errc::TooFewGroups, metric + "/" + model + ": " + std::to_string(summaries.size()) +
                                            " groups, need at least 3");
    }
    std::vector<double> q(summaries.size());
    std::vector<double> m(summaries.size());
    for (std::size_t i = 0; i < summaries.size(); ++i) {
        q[i] = summaries[i].mean_q;
        m[i] = summaries[i].mean_m;
    }
    CorrelationReport r;
    r.metric = metric;
    r.model = model;
    r.groups = summaries.size();
    r.krcc = summarize(q, m, &kendall_tau_b, options);
    r.srcc = summarize(q, m, &spearman, options);
    r.plcc = summarize(q, m, &pearson, options);
    return r;
}

std::string correlation_csv_header() {
    return "metric,model,groups,krcc,krcc_signed,krcc_lo,krcc_hi,krcc_p,srcc,srcc_signed,srcc_lo,srcc_hi,srcc_p,"
           "plcc,plcc_signed,plcc_lo,plcc_hi,plcc_p";
}

std::string correlation_csv_row(const CorrelationReport& r) {
    std::string out = r.metric + "," + r.model + "," + std::to_string(r.groups);
    for (const auto* c : {&r.krcc, &r.srcc, &r.plcc}) {
        out += "," + num(c->value) + "," + num(c->signed_value) + "," + num(c->ci.lo) + "," + num(c->ci.hi) + "," +
               num(c->p_value);
    }
    return out;
}

}  // namespace tgiqa
