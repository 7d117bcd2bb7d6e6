#pragma once

// Reference implementations used as test oracles. They are written from the
// definitions (pair counting, path enumeration) and share no code with the
// library beyond its data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "tgiqa/causal.hpp"

namespace oracle {

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<long double>(x.size());
    long double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const long double mx = sx / n, my = sy / n;
    long double cxy = 0, cxx = 0, cyy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        cxy += (x[i] - mx) * (y[i] - my);
        cxx += (x[i] - mx) * (x[i] - mx);
        cyy += (y[i] - my) * (y[i] - my);
    }
    return static_cast<double>(cxy / std::sqrt(cxx * cyy));
}

// Rank of v[i] = (#less) + (#equal + 1) / 2, straight from the definition.
inline std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::size_t less = 0, equal = 0;
        for (double w : v) {
            less += w < v[i];
            equal += w == v[i];
        }
        r[i] = static_cast<double>(less) + (static_cast<double>(equal) + 1.0) / 2.0;
    }
    return r;
}

inline double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
    std::int64_t concordant = 0, discordant = 0, tx = 0, ty = 0;
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = x[i] - x[j];
            const double dy = y[i] - y[j];
            if (dx == 0) ++tx;
            if (dy == 0) ++ty;
            if (dx != 0 && dy != 0) ((dx > 0) == (dy > 0) ? concordant : discordant)++;
        }
    }
    const auto n0 = static_cast<std::int64_t>(n * (n - 1) / 2);
    return static_cast<double>(concordant - discordant) /
           std::sqrt(static_cast<double>(n0 - tx) * static_cast<double>(n0 - ty));
}

inline double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
    double wins = 0;
    double pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!y[i]) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j]) continue;
            pairs += 1;
            wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
    }
    return wins / pairs;
}

// d-separation by enumerating every simple undirected path between a and b
// and applying the chain / fork / collider rules to each interior node.
inline bool d_separated(const tgiqa::Dag& dag, std::size_t a, std::size_t b, const std::set<std::size_t>& z) {
    const std::size_t n = dag.size();
    std::vector<std::set<std::size_t>> descendants(n);
    for (std::size_t v = 0; v < n; ++v) {
        std::vector<std::size_t> stack{v};
        while (!stack.empty()) {
            const std::size_t u = stack.back();
            stack.pop_back();
            if (!descendants[v].insert(u).second) continue;
            for (std::size_t c : dag.children(u)) stack.push_back(c);
        }
    }
    const auto is_edge = [&](std::size_t p, std::size_t c) {
        const auto& ps = dag.parents(c);
        return std::find(ps.begin(), ps.end(), p) != ps.end();
    };
    const auto blocked = [&](const std::vector<std::size_t>& path) {
        for (std::size_t k = 1; k + 1 < path.size(); ++k) {
            const std::size_t prev = path[k - 1], v = path[k], next = path[k + 1];
            const bool collider = is_edge(prev, v) && is_edge(next, v);
            if (collider) {
                bool opened = false;
                for (std::size_t d : descendants[v]) opened = opened || z.count(d);
                if (!opened) return true;
            } else if (z.count(v)) {
                return true;
            }
        }
        return false;
    };
    std::vector<std::size_t> path{a};
    std::vector<char> on_path(n, 0);
    on_path[a] = 1;
    bool connected = false;
    std::function<void(std::size_t)> walk = [&](std::size_t v) {
        if (connected) return;
        if (v == b) {
            if (!blocked(path)) connected = true;
            return;
        }
        std::vector<std::size_t> nbrs = dag.parents(v);
        nbrs.insert(nbrs.end(), dag.children(v).begin(), dag.children(v).end());
        for (std::size_t u : nbrs) {
            if (on_path[u]) continue;
            on_path[u] = 1;
            path.push_back(u);
            walk(u);
            path.pop_back();
            on_path[u] = 0;
        }
    };
    walk(a);
    return !connected;
}

// Asymptotic Kolmogorov p-value of the one-sample KS test against U(0,1),
// with Stephens' small-sample correction.
inline double ks_uniform_p_value(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double d = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        d = std::max(d, (static_cast<double>(i) + 1) / n - v[i]);
        d = std::max(d, v[i] - static_cast<double>(i) / n);
    }
    const double t = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
    double p = 0;
    for (int k = 1; k <= 100; ++k) {
        p += 2 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * t * t);
    }
    return std::clamp(p, 0.0, 1.0);
}

// Upper chi-square quantile via the Wilson-Hilferty approximation.
inline double chi_square_upper(double df, double z_alpha) {
    const double h = 2.0 / (9.0 * df);
    return df * std::pow(1.0 - h + z_alpha * std::sqrt(h), 3.0);
}

inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("tgiqa_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::vector<std::uint8_t> from_hex(const std::string& hex) {
    std::vector<std::uint8_t> out;
    for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
        out.push_back(static_cast<std::uint8_t>(std::stoi(hex.substr(i, 2), nullptr, 16)));
    }
    return out;
}

}  // namespace oracle
