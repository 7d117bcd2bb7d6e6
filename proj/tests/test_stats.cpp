#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/oracles.hpp"
#include "tgiqa/error.hpp"
#include "tgiqa/kernels.hpp"
#include "tgiqa/stats.hpp"

using namespace tgiqa;

namespace {

Errc code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return Errc::InvalidArgument;
}

// Integer-valued draws so that ties are common.
std::vector<double> tied_vector(std::size_t n, int levels, std::mt19937_64& gen) {
    std::uniform_int_distribution<int> d(0, levels - 1);
    std::vector<double> v(n);
    for (auto& x : v) x = d(gen);
    return v;
}

std::vector<GroupSummary> random_groups(std::size_t n, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<GroupSummary> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = {{"c" + std::to_string(i / 5), static_cast<int>(i % 5) + 1}, u(gen), u(gen), 10};
    return g;
}

}  // namespace

TEST(Pearson, Examples) {
    const std::vector<double> x{1, 2, 3, 5};
    std::vector<double> affine, neg;
    for (double v : x) {
        affine.push_back(2 * v + 1);
        neg.push_back(-v);
    }
    EXPECT_DOUBLE_EQ(pearson(x, affine), 1.0);
    EXPECT_DOUBLE_EQ(pearson(x, neg), -1.0);
    const std::vector<double> y{2, 1, 4, 5};
    // Means 2.75 and 3; sxy = 8, sxx = 8.75, syy = 10.
    EXPECT_NEAR(pearson(x, y), 8.0 / std::sqrt(87.5), 1e-15);
    EXPECT_NEAR(pearson(x, y), oracle::pearson(x, y), 1e-15);
}

TEST(Pearson, Errors) {
    const std::vector<double> one{1};
    const std::vector<double> flat{2, 2, 2};
    const std::vector<double> x{1, 2, 3};
    EXPECT_EQ(code_of([&] { pearson(one, one); }), Errc::DegenerateInput);
    EXPECT_EQ(code_of([&] { pearson(x, flat); }), Errc::DegenerateInput);
    EXPECT_EQ(code_of([&] { pearson(x, one); }), Errc::DimensionMismatch);
}

TEST(Spearman, Examples) {
    const std::vector<double> x{1, 2, 2, 3};
    const std::vector<double> y{1, 3, 2, 4};
    EXPECT_NEAR(spearman(x, y), oracle::pearson(oracle::ranks(x), oracle::ranks(y)), 1e-15);
    std::vector<double> cubes, rev;
    for (double v : y) {
        cubes.push_back(std::exp(v) + v * v * v);
        rev.push_back(-v);
    }
    EXPECT_DOUBLE_EQ(spearman(y, cubes), 1.0);
    EXPECT_DOUBLE_EQ(spearman(y, rev), -1.0);
    const std::vector<double> flat{1, 1, 1, 1};
    EXPECT_EQ(code_of([&] { spearman(x, flat); }), Errc::DegenerateInput);
}

TEST(Spearman, EqualsPearsonOfRanksExactly) {
    std::mt19937_64 gen(1);
    for (int t = 0; t < 50; ++t) {
        const auto x = tied_vector(40, 6, gen);
        const auto y = tied_vector(40, 9, gen);
        EXPECT_EQ(spearman(x, y), pearson(average_ranks(x), average_ranks(y)));
        EXPECT_EQ(average_ranks(x), oracle::ranks(x));
    }
}

TEST(Kendall, Examples) {
    const std::vector<double> x{1, 2, 3};
    const std::vector<double> y{1, 3, 2};
    EXPECT_NEAR(kendall_tau_b(x, y), 1.0 / 3.0, 1e-15);
    EXPECT_DOUBLE_EQ(kendall_tau_b(x, x), 1.0);
    const std::vector<double> tx{1, 1, 2};
    const std::vector<double> ty{1, 2, 3};
    EXPECT_NEAR(kendall_tau_b(tx, ty), oracle::kendall_tau_b(tx, ty), 1e-15);
    // (C - D) / sqrt((3 - 1) * 3) with C = 2, D = 0.
    EXPECT_NEAR(kendall_tau_b(tx, ty), 2.0 / std::sqrt(6.0), 1e-15);
    const std::vector<double> flat{4, 4, 4};
    EXPECT_EQ(code_of([&] { kendall_tau_b(x, flat); }), Errc::DegenerateInput);
}

TEST(Kendall, MatchesPairCountingOracleWithTies) {
    std::mt19937_64 gen(2);
    std::uniform_int_distribution<std::size_t> size(2, 200);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = size(gen);
        const auto x = tied_vector(n, 2 + t % 12, gen);
        const auto y = tied_vector(n, 2 + t % 7, gen);
        double want = 0;
        try {
            want = oracle::kendall_tau_b(x, y);
        } catch (...) {
        }
        if (!std::isfinite(want)) continue;  // all tied in one argument
        EXPECT_NEAR(kendall_tau_b(x, y), want, 1e-12) << "n=" << n;
    }
}

TEST(Coefficients, RangeSymmetryAndInvariance) {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> d(0, 1);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> x(30), y(30), fx(30), ax(30);
        for (std::size_t i = 0; i < 30; ++i) {
            x[i] = d(gen);
            y[i] = 0.5 * x[i] + d(gen);
            fx[i] = std::exp(x[i]);
            ax[i] = 3.0 * x[i] + 7.0;
        }
        for (auto f : {&pearson, &spearman, &kendall_tau_b}) {
            const double c = f(x, y);
            EXPECT_GE(c, -1.0);
            EXPECT_LE(c, 1.0);
            EXPECT_NEAR(f(y, x), c, 1e-12);
        }
        EXPECT_EQ(spearman(fx, y), spearman(x, y));
        EXPECT_EQ(kendall_tau_b(fx, y), kendall_tau_b(x, y));
        EXPECT_NEAR(pearson(ax, y), pearson(x, y), 1e-12);
    }
}

TEST(Percentile, NumpyLinearRule) {
    const std::vector<double> v{1, 2, 3, 4};
    EXPECT_DOUBLE_EQ(percentile_sorted(v, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(percentile_sorted(v, 1.0), 4.0);
    EXPECT_DOUBLE_EQ(percentile_sorted(v, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(percentile_sorted(v, 0.025), 1.075);  // numpy.percentile([1,2,3,4], 2.5)
}

TEST(Bootstrap, Examples) {
    const std::vector<double> flat(50, 3.5);
    const auto mean_fn = [](std::span<const double> v) { return mean(v); };
    const auto ci = bootstrap_ci(flat, mean_fn, {1000, 0.95, 1});
    EXPECT_EQ(ci.lo, 3.5);
    EXPECT_EQ(ci.hi, 3.5);

    std::vector<double> coin(1000);
    for (std::size_t i = 0; i < coin.size(); ++i) coin[i] = static_cast<double>(i % 2);
    const auto b = bootstrap_ci(coin, mean_fn, {1000, 0.95, 2});
    EXPECT_LE(b.lo, 0.5);
    EXPECT_GE(b.hi, 0.5);
    EXPECT_LT(b.hi - b.lo, 0.07);
    EXPECT_EQ(code_of([&] { bootstrap_ci(std::vector<double>{}, mean_fn); }), Errc::EmptyInput);
}

TEST(Bootstrap, LevelOneGivesResampleExtremes) {
    std::mt19937_64 gen(4);
    std::normal_distribution<double> d(0, 1);
    std::vector<double> v(40);
    for (auto& x : v) x = d(gen);
    const auto ci = bootstrap_ci(v, [](std::span<const double> s) { return mean(s); }, {300, 1.0, 5});
    // Recompute every resample statistic independently from the keyed indices.
    std::vector<std::size_t> idx(v.size());
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t r = 0; r < 300; ++r) {
        tgiqa::kernels::bootstrap_indices(5, r, v.size(), idx);
        double s = 0;
        for (auto i : idx) s += v[i];
        lo = std::min(lo, s / static_cast<double>(v.size()));
        hi = std::max(hi, s / static_cast<double>(v.size()));
    }
    EXPECT_NEAR(ci.lo, lo, 1e-12);
    EXPECT_NEAR(ci.hi, hi, 1e-12);
}

TEST(Bootstrap, DeterministicForSeed) {
    std::mt19937_64 gen(5);
    const auto g = random_groups(40, gen);
    std::vector<double> q, m;
    for (const auto& s : g) {
        q.push_back(s.mean_q);
        m.push_back(s.mean_m);
    }
    const auto srcc = [&](std::span<const std::size_t> idx) {
        std::vector<double> a, b;
        for (auto i : idx) {
            a.push_back(q[i]);
            b.push_back(m[i]);
        }
        return spearman(a, b);
    };
    const auto a = bootstrap_ci_indexed(q.size(), srcc, {1000, 0.95, 9});
    const auto b = bootstrap_ci_indexed(q.size(), srcc, {1000, 0.95, 9});
    EXPECT_EQ(a.lo, b.lo);
    EXPECT_EQ(a.hi, b.hi);
    const auto c = bootstrap_ci_indexed(q.size(), srcc, {1000, 0.95, 10});
    EXPECT_TRUE(a.lo != c.lo || a.hi != c.hi);
}

TEST(Bootstrap, DegenerateResamplesDropped) {
    // Two distinct values out of 3: some resamples are constant.
    const std::vector<double> x{0, 0, 1}, y{1, 2, 3};
    const auto ci = bootstrap_ci_indexed(
        3,
        [&](std::span<const std::size_t> idx) {
            std::vector<double> a, b;
            for (auto i : idx) {
                a.push_back(x[i]);
                b.push_back(y[i]);
            }
            return pearson(a, b);
        },
        {500, 0.95, 1});
    EXPECT_TRUE(std::isfinite(ci.lo));
    EXPECT_TRUE(std::isfinite(ci.hi));
}

TEST(Permutation, PValueRules) {
    const std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8};
    const std::vector<double> y = x;
    const double p = permutation_p_value(x, y, &pearson, 999, 3);
    // Only the identity (and perhaps nothing else) reaches |r| = 1.
    EXPECT_LT(p, 0.01);
    EXPECT_GE(p, 1.0 / 1000.0);
    std::mt19937_64 gen(6);
    std::normal_distribution<double> d(0, 1);
    std::vector<double> a(30), b(30);
    for (auto& v : a) v = d(gen);
    for (auto& v : b) v = d(gen);
    const double q = permutation_p_value(a, b, &spearman, 999, 4);
    EXPECT_GT(q, 0.0);
    EXPECT_LE(q, 1.0);
}

TEST(GroupMeans, SingleGroupAndCount) {
    ScoreTable s;
    CorrectnessTable c;
    for (int i = 0; i < 4; ++i) {
        const SampleKey k{"id" + std::to_string(i), "contrast", 2};
        s.add(k, "tv", i);
        c.add(k, "resnet", i < 2);
    }
    const auto g = group_means(s, c, "tv", "resnet");
    ASSERT_EQ(g.size(), 1u);
    EXPECT_EQ(g[0].mean_m, 0.5);
    EXPECT_EQ(g[0].mean_q, 1.5);
    EXPECT_EQ(g[0].n, 4u);
    EXPECT_EQ(code_of([&] { group_means(s, c, "tv", "vit"); }), Errc::EmptyJoin);
    CorrectnessTable other;
    other.add({"zzz", "clean", 0}, "resnet", 1);
    EXPECT_EQ(code_of([&] { group_means(s, other, "tv", "resnet"); }), Errc::EmptyJoin);
}

TEST(GroupMeans, SeventyFiveGroups) {
    ScoreTable s;
    CorrectnessTable c;
    for (int kind = 0; kind < 15; ++kind) {
        for (int sev = 1; sev <= 5; ++sev) {
            for (int i = 0; i < 3; ++i) {
                const SampleKey k{"id" + std::to_string(i), "k" + std::to_string(kind), sev};
                s.add(k, "tv", kind + sev);
                c.add(k, "resnet", (i + kind) % 2);
            }
        }
    }
    const auto g = group_means(s, c, "tv", "resnet");
    EXPECT_EQ(g.size(), 75u);
    for (const auto& x : g) EXPECT_EQ(x.n, 3u);
}

TEST(CorrelationReport, IdenticalSeriesAndTooFewGroups) {
    std::mt19937_64 gen(7);
    auto g = random_groups(20, gen);
    for (auto& s : g) s.mean_m = s.mean_q;
    const auto r = correlation_report(g, "tv", "resnet", {200, 200, 0.95, 1});
    EXPECT_DOUBLE_EQ(r.krcc.value, 1.0);
    EXPECT_DOUBLE_EQ(r.srcc.value, 1.0);
    EXPECT_DOUBLE_EQ(r.plcc.value, 1.0);
    EXPECT_EQ(r.groups, 20u);
    g.resize(2);
    EXPECT_EQ(code_of([&] { correlation_report(g, "tv", "resnet"); }), Errc::TooFewGroups);
}

TEST(CorrelationReport, NegativeCoefficientReportedAsMagnitude) {
    std::mt19937_64 gen(8);
    auto g = random_groups(30, gen);
    for (auto& s : g) s.mean_m = 1.0 - s.mean_q + 0.01 * s.mean_m;
    const auto r = correlation_report(g, "q_h", "resnet", {300, 300, 0.95, 2});
    EXPECT_LT(r.plcc.signed_value, -0.9);
    EXPECT_EQ(r.plcc.value, -r.plcc.signed_value);
    EXPECT_LE(r.plcc.ci.lo, r.plcc.ci.hi);
    EXPECT_GT(r.plcc.ci.lo, 0.0);
}

TEST(CorrelationReport, MatchesNaiveFormulas) {
    std::mt19937_64 gen(9);
    auto g = random_groups(75, gen);
    for (auto& s : g) s.mean_m = 0.6 * s.mean_q + 0.4 * s.mean_m;
    const auto r = correlation_report(g, "tv", "resnet", {100, 100, 0.95, 3});
    std::vector<double> q, m;
    for (const auto& s : g) {
        q.push_back(s.mean_q);
        m.push_back(s.mean_m);
    }
    EXPECT_NEAR(r.plcc.signed_value, oracle::pearson(q, m), 1e-12);
    EXPECT_NEAR(r.srcc.signed_value, oracle::pearson(oracle::ranks(q), oracle::ranks(m)), 1e-12);
    EXPECT_NEAR(r.krcc.signed_value, oracle::kendall_tau_b(q, m), 1e-12);
}

TEST(CorrelationReport, IndependentSeriesCalibrated) {
    std::mt19937_64 gen(10);
    int quiet = 0;
    const int trials = 40;
    for (int t = 0; t < trials; ++t) {
        const auto g = random_groups(75, gen);
        const auto r = correlation_report(g, "tv", "resnet", {50, 500, 0.95, static_cast<std::uint64_t>(t)});
        bool ok = true;
        for (const auto* c : {&r.krcc, &r.srcc, &r.plcc}) ok = ok && c->value < 0.3 && c->p_value > 0.05;
        quiet += ok;
    }
    EXPECT_GE(quiet, static_cast<int>(0.9 * trials));
}

TEST(CorrelationReport, CsvRowShape) {
    std::mt19937_64 gen(11);
    const auto g = random_groups(10, gen);
    const auto r = correlation_report(g, "tv", "resnet", {50, 50, 0.95, 1});
    const auto header = correlation_csv_header();
    const auto row = correlation_csv_row(r);
    EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(row.begin(), row.end(), ','));
    EXPECT_EQ(row.rfind("tv,resnet,10,", 0), 0u);
}
