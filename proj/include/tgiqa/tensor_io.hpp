#pragma once

// Interchange formats: NPY v1.0 float32 matrices, JSON Lines manifests and
// CSV score/correctness tables.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace tgiqa {

/// Dense row-major float32 matrix. Row order always follows manifest order.
struct TensorF32 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data;

    TensorF32() = default;
    TensorF32(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}
    TensorF32(std::size_t r, std::size_t c, std::vector<float> values);

    float& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<float> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const float> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool operator==(const TensorF32&) const = default;
};

enum class FiniteCheck { Reject, Allow };

/// Parses an NPY v1.0 buffer holding a little-endian float32 C-order array of
/// rank 1 or 2. Rank-1 arrays load as a single row.
TensorF32 parse_npy(std::span<const std::uint8_t> bytes, FiniteCheck check = FiniteCheck::Reject);

/// Emits NPY v1.0 with the header padded to a 64-byte boundary, byte for byte
/// what numpy.save writes for the same 2-D float32 array.
std::vector<std::uint8_t> write_npy(const TensorF32& t);

TensorF32 load_npy(const std::filesystem::path& path, FiniteCheck check = FiniteCheck::Reject);
void save_npy(const TensorF32& t, const std::filesystem::path& path);

/// Identifies one image variant: an image id under a corruption at a severity.
struct SampleKey {
    std::string image_id;
    std::string corruption = "clean";
    int severity = 0;

    auto operator<=>(const SampleKey&) const = default;
};

struct ManifestEntry {
    std::string image_id;
    std::string path;
    int label = 0;
    std::string corruption = "clean";
    int severity = 0;

    SampleKey key() const { return {image_id, corruption, severity}; }
    bool is_clean() const { return corruption == "clean"; }
    bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;

    std::size_t size() const { return entries.size(); }
    bool operator==(const DatasetManifest&) const = default;
};

/// Checks key uniqueness and the clean <=> severity 0 rule.
void validate_manifest(const DatasetManifest& manifest);

DatasetManifest parse_manifest(const std::string& text);
DatasetManifest load_manifest(const std::filesystem::path& path);
std::string format_manifest(const DatasetManifest& manifest);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Throws AlignmentError unless the tensor has one row per manifest entry.
void check_alignment(const TensorF32& t, const DatasetManifest& manifest, const std::string& what);

struct ScoreRecord {
    SampleKey key;
    std::string metric;
    double value = 0.0;

    bool operator==(const ScoreRecord&) const = default;
};

struct ScoreTable {
    std::vector<ScoreRecord> records;

    void add(SampleKey key, std::string metric, double value);
    /// Values of one metric keyed by sample.
    std::map<SampleKey, double> by_metric(const std::string& metric) const;
    std::vector<std::string> metrics() const;
    bool operator==(const ScoreTable&) const = default;
};

struct CorrectnessRecord {
    SampleKey key;
    std::string model;
    int correct = 0;

    bool operator==(const CorrectnessRecord&) const = default;
};

struct CorrectnessTable {
    std::vector<CorrectnessRecord> records;

    void add(SampleKey key, std::string model, int correct);
    std::map<SampleKey, int> by_model(const std::string& model) const;
    std::vector<std::string> models() const;
    bool operator==(const CorrectnessTable&) const = default;
};

/// Nine significant digits, trailing zeros kept: 0.567 -> "0.567000000".
std::string format_score_value(double value);

ScoreTable parse_scores(const std::string& text);
std::string format_scores(const ScoreTable& table);
ScoreTable load_scores(const std::filesystem::path& path);
void write_scores(const ScoreTable& table, const std::filesystem::path& path);

CorrectnessTable parse_correctness(const std::string& text);
std::string format_correctness(const CorrectnessTable& table);
CorrectnessTable load_correctness(const std::filesystem::path& path);
void write_correctness(const CorrectnessTable& table, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_text(const std::filesystem::path& path, const std::string& text);

}  // namespace tgiqa
