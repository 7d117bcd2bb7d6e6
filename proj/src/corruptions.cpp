#include "tgiqa/corruptions.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>

#include "tgiqa/error.hpp"
#include "tgiqa/rng.hpp"

namespace tgiqa {

namespace {

std::uint8_t clamp_round(double v) {
    const double r = std::round(v);
    return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

std::size_t severity_index(int severity) {
    if (severity < 1 || severity > 5) {
        throw Error(Errc::InvalidArgument, "severity " + std::to_string(severity) + " outside [1,5]");
    }
    return static_cast<std::size_t>(severity - 1);
}

ImageBuffer gaussian_noise(const ImageBuffer& img, double sigma, rng::Stream& stream) {
    ImageBuffer out = img;
    for (auto& s : out.samples) s = clamp_round(s + sigma * stream.normal());
    return out;
}

ImageBuffer shot_noise(const ImageBuffer& img, double photons, rng::Stream& stream) {
    ImageBuffer out = img;
    for (auto& s : out.samples) {
        const double lambda = s / 255.0 * photons;
        s = clamp_round(static_cast<double>(stream.poisson(lambda)) / photons * 255.0);
    }
    return out;
}

std::vector<double> gaussian_kernel(double sigma) {
    const int half = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * half + 1));
    double total = 0.0;
    for (int i = -half; i <= half; ++i) {
        const double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[static_cast<std::size_t>(i + half)] = w;
        total += w;
    }
    for (auto& w : k) w /= total;
    return k;
}

// Separable blur with clamp-to-edge borders.
ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma) {
    const auto kernel = gaussian_kernel(sigma);
    const auto half = static_cast<std::ptrdiff_t>(kernel.size() / 2);
    const auto w = static_cast<std::ptrdiff_t>(img.width);
    const auto h = static_cast<std::ptrdiff_t>(img.height);
    const std::size_t ch = img.channels;

    std::vector<double> tmp(img.samples.size(), 0.0);
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (std::ptrdiff_t k = -half; k <= half; ++k) {
                    const std::ptrdiff_t xx = std::clamp<std::ptrdiff_t>(x + k, 0, w - 1);
                    acc += kernel[static_cast<std::size_t>(k + half)] *
                           img.samples[static_cast<std::size_t>(y * w + xx) * ch + c];
                }
                tmp[static_cast<std::size_t>(y * w + x) * ch + c] = acc;
            }
        }
    }
    ImageBuffer out = img;
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (std::ptrdiff_t k = -half; k <= half; ++k) {
                    const std::ptrdiff_t yy = std::clamp<std::ptrdiff_t>(y + k, 0, h - 1);
                    acc += kernel[static_cast<std::size_t>(k + half)] * tmp[static_cast<std::size_t>(yy * w + x) * ch + c];
                }
                out.samples[static_cast<std::size_t>(y * w + x) * ch + c] = clamp_round(acc);
            }
        }
    }
    return out;
}

// Scales deviations from the per-channel mean, so the mean is a fixed point.
ImageBuffer contrast(const ImageBuffer& img, double factor) {
    ImageBuffer out = img;
    const std::size_t ch = img.channels;
    for (std::size_t c = 0; c < ch; ++c) {
        double sum = 0.0;
        for (std::size_t i = 0; i < img.pixel_count(); ++i) sum += img.samples[i * ch + c];
        const double mean = sum / static_cast<double>(img.pixel_count());
        for (std::size_t i = 0; i < img.pixel_count(); ++i) {
            const double v = img.samples[i * ch + c];
            out.samples[i * ch + c] = clamp_round((v - mean) * factor + mean);
        }
    }
    return out;
}

ImageBuffer brightness(const ImageBuffer& img, int offset) {
    ImageBuffer out = img;
    for (auto& s : out.samples) s = static_cast<std::uint8_t>(std::min(255, s + offset));
    return out;
}

// Block averaging; the block size is clamped to the image so tiny images
// collapse to a single block instead of failing.
ImageBuffer pixelate(const ImageBuffer& img, std::size_t block) {
    block = std::min({block, img.width, img.height});
    ImageBuffer out = img;
    const std::size_t ch = img.channels;
    for (std::size_t by = 0; by < img.height; by += block) {
        for (std::size_t bx = 0; bx < img.width; bx += block) {
            const std::size_t ye = std::min(by + block, img.height);
            const std::size_t xe = std::min(bx + block, img.width);
            const std::size_t count = (ye - by) * (xe - bx);
            for (std::size_t c = 0; c < ch; ++c) {
                std::size_t sum = 0;
                for (std::size_t y = by; y < ye; ++y)
                    for (std::size_t x = bx; x < xe; ++x) sum += img.at(x, y, c);
                const auto avg = static_cast<std::uint8_t>((sum + count / 2) / count);
                for (std::size_t y = by; y < ye; ++y)
                    for (std::size_t x = bx; x < xe; ++x) out.at(x, y, c) = avg;
            }
        }
    }
    return out;
}

std::vector<CorruptionKind> canonical_kinds(const std::vector<CorruptionKind>& kinds) {
    std::vector<CorruptionKind> out = kinds;
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<int> canonical_severities(const std::vector<int>& sev) {
    std::vector<int> out = sev;
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace

std::string_view corruption_name(CorruptionKind kind) noexcept {
    switch (kind) {
        case CorruptionKind::GaussianNoise: return "gaussian_noise";
        case CorruptionKind::ShotNoise: return "shot_noise";
        case CorruptionKind::GaussianBlur: return "gaussian_blur";
        case CorruptionKind::Contrast: return "contrast";
        case CorruptionKind::Brightness: return "brightness";
        case CorruptionKind::Pixelate: return "pixelate";
    }
    return "unknown";
}

CorruptionKind parse_corruption(std::string_view name) {
    for (auto kind : kAllCorruptions) {
        if (corruption_name(kind) == name) return kind;
    }
    throw Error(Errc::UnknownKind, "corruption '" + std::string(name) + "'");
}

ImageBuffer apply_corruption(const ImageBuffer& img, const CorruptionSpec& spec) {
    const std::size_t s = severity_index(spec.severity);
    rng::Stream stream(rng::derive(spec.seed, static_cast<std::uint64_t>(spec.kind)));
    switch (spec.kind) {
        case CorruptionKind::GaussianNoise: return gaussian_noise(img, severity_table::kGaussianSigma[s], stream);
        case CorruptionKind::ShotNoise: return shot_noise(img, severity_table::kShotPhotons[s], stream);
        case CorruptionKind::GaussianBlur: return gaussian_blur(img, severity_table::kBlurRadius[s]);
        case CorruptionKind::Contrast: return contrast(img, severity_table::kContrastFactor[s]);
        case CorruptionKind::Brightness: return brightness(img, severity_table::kBrightnessOffset[s]);
        case CorruptionKind::Pixelate: return pixelate(img, severity_table::kPixelateBlock[s]);
    }
    throw Error(Errc::UnknownKind, "corruption kind " + std::to_string(static_cast<int>(spec.kind)));
}

void validate_policy(const MixturePolicy& policy) {
    if (policy.corruptions.empty()) throw Error(Errc::InvalidArgument, "mixture policy has no corruptions");
    if (policy.severities.empty()) throw Error(Errc::InvalidArgument, "mixture policy has no severities");
    for (int s : policy.severities) severity_index(s);
    if (!(policy.p_c >= 0.0 && policy.p_c <= 1.0)) {
        throw Error(Errc::InvalidArgument, "p_c " + std::to_string(policy.p_c) + " outside [0,1]");
    }
}

std::size_t corrupted_count(std::size_t n, double p_c) {
    return static_cast<std::size_t>(std::floor(p_c * static_cast<double>(n) + 0.5));
}

std::uint64_t sweep_variant_seed(std::uint64_t seed, int n_percent) {
    return rng::derive(rng::derive(seed, "mixture-sweep"), static_cast<std::uint64_t>(n_percent));
}

std::uint64_t image_noise_seed(std::uint64_t seed, const std::string& image_id) {
    return rng::derive(rng::derive(seed, "pixels"), image_id);
}

DatasetManifest build_mixture(const DatasetManifest& clean, const MixturePolicy& policy) {
    validate_policy(policy);
    for (std::size_t i = 0; i < clean.entries.size(); ++i) {
        if (!clean.entries[i].is_clean()) {
            throw Error(Errc::NonCleanInput, "entry " + std::to_string(i) + " (" + clean.entries[i].image_id +
                                                 ") is already corrupted");
        }
    }
    const auto kinds = canonical_kinds(policy.corruptions);
    const auto severities = canonical_severities(policy.severities);
    const std::size_t n = clean.entries.size();
    const std::size_t k = corrupted_count(n, policy.p_c);

    // Rank entries by a keyed hash of their id; the k lowest are corrupted.
    const std::uint64_t select_key = rng::derive(policy.seed, "select");
    std::vector<std::pair<std::uint64_t, std::size_t>> ranked(n);
    for (std::size_t i = 0; i < n; ++i) ranked[i] = {rng::derive(select_key, clean.entries[i].image_id), i};
    std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return clean.entries[a.second].image_id < clean.entries[b.second].image_id;
    });

    DatasetManifest out = clean;
    const std::uint64_t assign_key = rng::derive(policy.seed, "assign");
    for (std::size_t r = 0; r < k; ++r) {
        auto& e = out.entries[ranked[r].second];
        rng::Stream stream(rng::derive(assign_key, e.image_id));
        const auto kind = kinds[stream.below(kinds.size())];
        const int severity = severities[stream.below(severities.size())];
        e.corruption = std::string(corruption_name(kind));
        e.severity = severity;
    }
    return out;
}

DatasetManifest corrupt_dataset(const DatasetManifest& clean, const MixturePolicy& policy,
                                const std::filesystem::path& in_dir, const std::filesystem::path& out_dir) {
    DatasetManifest mixture = build_mixture(clean, policy);
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < mixture.entries.size(); ++i) {
        if (!mixture.entries[i].is_clean()) todo.push_back(i);
    }

    std::optional<Error> failure;
    std::size_t failure_index = todo.size();
    std::mutex failure_mutex;
    const auto count = static_cast<std::ptrdiff_t>(todo.size());

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t t = 0; t < count; ++t) {
        auto& e = mixture.entries[todo[static_cast<std::size_t>(t)]];
        try {
            const auto src = in_dir / e.path;
            if (!std::filesystem::exists(src)) throw Error(Errc::MissingImage, src.string());
            const ImageBuffer img = decode_pnm(read_file_bytes(src));
            const CorruptionSpec spec{parse_corruption(e.corruption), e.severity,
                                      image_noise_seed(policy.seed, e.image_id)};
            const auto rel = std::filesystem::path(e.corruption) / std::to_string(e.severity) / e.path;
            write_file_bytes(out_dir / rel, encode_pnm(apply_corruption(img, spec)));
            e.path = rel.generic_string();
        } catch (const std::exception& ex) {
            const auto* err = dynamic_cast<const Error*>(&ex);
            std::lock_guard lock(failure_mutex);
            // Report the first failing entry in manifest order, independent of scheduling.
            if (static_cast<std::size_t>(t) < failure_index) {
                failure_index = static_cast<std::size_t>(t);
                failure = err ? *err : Error(Errc::IoError, ex.what());
            }
        }
    }
    if (failure) throw *failure;
    return mixture;
}

}  // namespace tgiqa
