#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tgiqa/image.hpp"
#include "tgiqa/tensor_io.hpp"

namespace tgiqa {

enum class CorruptionKind { GaussianNoise, ShotNoise, GaussianBlur, Contrast, Brightness, Pixelate };

inline constexpr std::array<CorruptionKind, 6> kAllCorruptions = {
    CorruptionKind::GaussianNoise, CorruptionKind::ShotNoise,  CorruptionKind::GaussianBlur,
    CorruptionKind::Contrast,      CorruptionKind::Brightness, CorruptionKind::Pixelate};

std::string_view corruption_name(CorruptionKind kind) noexcept;
/// Throws UnknownKind for names outside the supported set.
CorruptionKind parse_corruption(std::string_view name);

/// Severity parameter tables, index 0 is severity 1.
namespace severity_table {
inline constexpr std::array<double, 5> kGaussianSigma = {8, 13, 18, 26, 38};
inline constexpr std::array<double, 5> kShotPhotons = {60, 25, 12, 5, 3};
inline constexpr std::array<double, 5> kBlurRadius = {1, 2, 3, 4, 6};
inline constexpr std::array<double, 5> kContrastFactor = {0.75, 0.5, 0.4, 0.3, 0.15};
inline constexpr std::array<int, 5> kBrightnessOffset = {25, 45, 65, 85, 110};
inline constexpr std::array<std::size_t, 5> kPixelateBlock = {2, 3, 4, 6, 8};
}  // namespace severity_table

struct CorruptionSpec {
    CorruptionKind kind = CorruptionKind::GaussianNoise;
    int severity = 1;
    std::uint64_t seed = 0;
};

/// Same dimensions and channels out; deterministic for a given spec.
ImageBuffer apply_corruption(const ImageBuffer& img, const CorruptionSpec& spec);

struct MixturePolicy {
    std::vector<CorruptionKind> corruptions;
    std::vector<int> severities;
    double p_c = 0.0;
    std::uint64_t seed = 0;
};

void validate_policy(const MixturePolicy& policy);

/// Number of corrupted entries for n images: floor(p_c * n + 0.5).
std::size_t corrupted_count(std::size_t n, double p_c);

/// Turns a clean manifest into a clean/corrupted mixture. Exactly
/// corrupted_count(n, p_c) entries are corrupted; which ones, and their
/// (kind, severity), depend only on (seed, image_id). Entry order and paths
/// are kept.
DatasetManifest build_mixture(const DatasetManifest& clean, const MixturePolicy& policy);

/// Seed of the sweep variant p_c = N/100, so each variant draws independently.
std::uint64_t sweep_variant_seed(std::uint64_t seed, int n_percent);

/// Builds the mixture, writes each corrupted image to
/// out_dir/<kind>/<severity>/<path> and returns the mixture manifest with
/// those relative paths. Clean entries keep their path and are not copied.
DatasetManifest corrupt_dataset(const DatasetManifest& clean, const MixturePolicy& policy,
                                const std::filesystem::path& in_dir, const std::filesystem::path& out_dir);

/// Seed of the pixel noise for one corrupted image.
std::uint64_t image_noise_seed(std::uint64_t seed, const std::string& image_id);

}  // namespace tgiqa
