#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tgiqa/tensor_io.hpp"

namespace tgiqa {

/// A (corruption, severity) group; ("clean", 0) or (name, 1..5).
struct GroupKey {
    std::string corruption;
    int severity = 0;

    auto operator<=>(const GroupKey&) const = default;
};

struct GroupSummary {
    GroupKey key;
    double mean_q = 0.0;
    double mean_m = 0.0;  // accuracy within the group
    std::size_t n = 0;
};

/// One image variant with its quality score and task-model correctness.
struct JoinedSample {
    SampleKey key;
    double q = 0.0;
    int m = 0;
};

/// Inner join on sample key, ordered by key. Throws EmptyJoin if nothing matches.
std::vector<JoinedSample> join_samples(const ScoreTable& scores, const CorrectnessTable& correctness,
                                       const std::string& metric, const std::string& model);

std::vector<GroupSummary> group_means(std::span<const JoinedSample> samples);
std::vector<GroupSummary> group_means(const ScoreTable& scores, const CorrectnessTable& correctness,
                                      const std::string& metric, const std::string& model);

double mean(std::span<const double> v);

/// Sample Pearson correlation. DegenerateInput for n < 2 or zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

/// 1-based ranks; tied values share the mean of their ranks.
std::vector<double> average_ranks(std::span<const double> v);

/// Pearson correlation of average ranks.
double spearman(std::span<const double> x, std::span<const double> y);

/// Kendall tau-b, (C - D) / sqrt((n0 - n1)(n0 - n2)), in O(n log n).
double kendall_tau_b(std::span<const double> x, std::span<const double> y);

struct ConfidenceInterval {
    double lo = 0.0;
    double hi = 0.0;

    double half_width() const { return 0.5 * (hi - lo); }
};

struct BootstrapOptions {
    std::size_t resamples = 1000;
    double level = 0.95;
    std::uint64_t seed = 0;
};

/// Linear-interpolated quantile of sorted values (numpy's default rule).
double percentile_sorted(std::span<const double> sorted, double q);

/// Percentile interval of bootstrap statistics, dropping non-finite ones.
ConfidenceInterval percentile_interval(std::vector<double> stats, double level);

/// Percentile bootstrap over index resamples of [0, n). The statistic may
/// throw DegenerateInput for a resample; such resamples are dropped.
ConfidenceInterval bootstrap_ci_indexed(std::size_t n, const std::function<double(std::span<const std::size_t>)>& stat,
                                        const BootstrapOptions& options);

ConfidenceInterval bootstrap_ci(std::span<const double> values,
                                const std::function<double(std::span<const double>)>& statistic,
                                const BootstrapOptions& options = {});

/// Two-sided permutation p-value for a paired coefficient: y is permuted
/// against x and p = (1 + #{|stat_perm| >= |stat_obs|}) / (1 + permutations).
double permutation_p_value(std::span<const double> x, std::span<const double> y,
                           const std::function<double(std::span<const double>, std::span<const double>)>& coefficient,
                           std::size_t permutations, std::uint64_t seed);

struct CoefficientSummary {
    double value = 0.0;   // |coefficient|
    double signed_value = 0.0;
    ConfidenceInterval ci;  // interval of |coefficient| (mirrored when negative)
    double p_value = 1.0;
};

struct CorrelationReport {
    std::string metric;
    std::string model;
    std::size_t groups = 0;
    CoefficientSummary krcc;
    CoefficientSummary srcc;
    CoefficientSummary plcc;
};

struct ReportOptions {
    std::size_t resamples = 1000;
    std::size_t permutations = 1000;
    double level = 0.95;
    std::uint64_t seed = 0;
};

/// Group-level KRCC/SRCC/PLCC between mean quality and accuracy with
/// bootstrap CIs over groups and permutation p-values. Needs >= 3 groups.
CorrelationReport correlation_report(std::span<const GroupSummary> summaries, const std::string& metric,
                                     const std::string& model, const ReportOptions& options = {});

std::string correlation_csv_header();
std::string correlation_csv_row(const CorrelationReport& report);

}  // namespace tgiqa
