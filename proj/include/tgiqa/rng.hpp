#pragma once

// Counter-based random streams.
//
// Every random decision in the toolkit is a pure function of a 64-bit key and
// a draw counter. Keys are derived from (seed, image_id), (seed, resample
// index), (seed, row) and so on, which makes results independent of
// iteration order and thread scheduling.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace tgiqa::rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += kGolden;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// FNV-1a followed by a splitmix finalizer.
constexpr std::uint64_t hash_string(std::string_view s) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return splitmix64(h);
}

constexpr std::uint64_t derive(std::uint64_t key, std::uint64_t salt) noexcept {
    return splitmix64(key ^ splitmix64(salt + 0x632BE59BD9B4E019ULL));
}

inline std::uint64_t derive(std::uint64_t key, std::string_view salt) noexcept {
    return derive(key, hash_string(salt));
}

/// Stream of draws for one key. Draw i is splitmix64(key + i * golden), so
/// the stream is reproducible from (key, counter) alone.
class Stream {
public:
    explicit constexpr Stream(std::uint64_t key) noexcept : key_(key) {}

    constexpr std::uint64_t next() noexcept { return splitmix64(key_ + (counter_++) * kGolden); }

    /// Uniform on [0, 1) with 53 bits.
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1].
    double uniform_open0() noexcept { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

    /// Unbiased integer in [0, n) via Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t n) noexcept {
        unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                m = static_cast<unsigned __int128>(next()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal via Box-Muller (one variate per two uniforms).
    double normal() noexcept {
        const double u1 = uniform_open0();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    /// Poisson by sequential inversion; intended for mean <= ~700.
    std::uint64_t poisson(double mean) noexcept {
        if (mean <= 0.0) return 0;
        double u = uniform();
        double p = std::exp(-mean);
        double cdf = p;
        std::uint64_t k = 0;
        while (u > cdf && k < 100000) {
            ++k;
            p *= mean / static_cast<double>(k);
            cdf += p;
            if (p == 0.0 && static_cast<double>(k) > mean) break;
        }
        return k;
    }

    constexpr std::uint64_t key() const noexcept { return key_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace tgiqa::rng
