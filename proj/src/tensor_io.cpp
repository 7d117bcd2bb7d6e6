#include "tgiqa/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tgiqa/error.hpp"

namespace tgiqa {

namespace {

constexpr std::uint8_t kMagic[6] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
constexpr std::size_t kPreamble = 10;  // magic + version + header length

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

// Returns the raw text of the value that follows 'key': in the header dict.
std::string header_value(const std::string& header, const std::string& key, Errc missing) {
    const std::string quoted = "'" + key + "'";
    auto pos = header.find(quoted);
    if (pos == std::string::npos) {
        throw Error(missing, "NPY header lacks field '" + key + "'");
    }
    pos = header.find(':', pos + quoted.size());
    if (pos == std::string::npos) {
        throw Error(missing, "NPY header field '" + key + "' has no value");
    }
    ++pos;
    while (pos < header.size() && header[pos] == ' ') ++pos;
    std::size_t end = pos;
    if (pos < header.size() && header[pos] == '(') {
        end = header.find(')', pos);
        if (end == std::string::npos) throw Error(Errc::UnsupportedShape, "unterminated shape tuple");
        return header.substr(pos, end - pos + 1);
    }
    if (pos < header.size() && header[pos] == '\'') {
        end = header.find('\'', pos + 1);
        if (end == std::string::npos) throw Error(Errc::UnsupportedDtype, "unterminated descr string");
        return header.substr(pos + 1, end - pos - 1);
    }
    end = header.find_first_of(",}", pos);
    return trim(header.substr(pos, end - pos));
}

std::vector<std::size_t> parse_shape(const std::string& tuple) {
    std::vector<std::size_t> dims;
    std::string inner = tuple.substr(1, tuple.size() - 2);
    std::stringstream ss(inner);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string t = trim(item);
        if (t.empty()) continue;
        std::size_t v = 0;
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || ptr != t.data() + t.size()) {
            throw Error(Errc::UnsupportedShape, "shape entry '" + t + "' is not a count");
        }
        dims.push_back(v);
    }
    return dims;
}

void check_finite(std::span<const float> values, FiniteCheck check) {
    if (check == FiniteCheck::Allow) return;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw Error(Errc::NonFinite, "element " + std::to_string(i) + " is not finite");
        }
    }
}

std::string shape_text(std::size_t rows, std::size_t cols) {
    return "(" + std::to_string(rows) + ", " + std::to_string(cols) + ")";
}

bool csv_safe(const std::string& s) {
    return s.find_first_of(",\"\r\n") == std::string::npos;
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string::npos) {
            if (start < text.size()) lines.push_back(text.substr(start));
            break;
        }
        std::string line = text.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
        start = nl + 1;
    }
    return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

std::string row_error(std::size_t line_no, const std::string& why) {
    return "line " + std::to_string(line_no) + ": " + why;
}

SampleKey parse_key(const std::vector<std::string>& f, std::size_t line_no) {
    SampleKey key{f[0], f[1], 0};
    if (key.image_id.empty()) throw Error(Errc::MalformedRow, row_error(line_no, "empty image_id"));
    if (key.corruption.empty()) throw Error(Errc::MalformedRow, row_error(line_no, "empty corruption"));
    if (!parse_number(f[2], key.severity)) {
        throw Error(Errc::MalformedRow, row_error(line_no, "severity '" + f[2] + "' is not an integer"));
    }
    return key;
}

std::string key_text(const SampleKey& k) {
    return "(" + k.image_id + ", " + k.corruption + ", " + std::to_string(k.severity) + ")";
}

}  // namespace

TensorF32::TensorF32(std::size_t r, std::size_t c, std::vector<float> values)
    : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != rows * cols) {
        throw Error(Errc::DimensionMismatch, "tensor data length " + std::to_string(data.size()) +
                                                 " != " + std::to_string(rows) + "x" + std::to_string(cols));
    }
}

TensorF32 parse_npy(std::span<const std::uint8_t> bytes, FiniteCheck check) {
    if (bytes.size() < kPreamble || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
        throw Error(Errc::BadMagic, "magic string is not \\x93NUMPY");
    }
    if (bytes[6] != 1 || bytes[7] != 0) {
        throw Error(Errc::BadMagic, "version " + std::to_string(bytes[6]) + "." + std::to_string(bytes[7]) +
                                        " is not 1.0");
    }
    const std::size_t header_len = static_cast<std::size_t>(bytes[8]) | (static_cast<std::size_t>(bytes[9]) << 8);
    if (bytes.size() < kPreamble + header_len) {
        throw Error(Errc::TruncatedPayload, "header length " + std::to_string(header_len) + " exceeds buffer");
    }
    const std::string header(reinterpret_cast<const char*>(bytes.data() + kPreamble), header_len);

    const std::string descr = header_value(header, "descr", Errc::UnsupportedDtype);
    if (descr != "<f4") {
        throw Error(Errc::UnsupportedDtype, "descr '" + descr + "' (only '<f4' is supported)");
    }
    const std::string order = header_value(header, "fortran_order", Errc::UnsupportedOrder);
    if (order == "True") throw Error(Errc::UnsupportedOrder, "fortran_order is True");
    if (order != "False") throw Error(Errc::UnsupportedOrder, "fortran_order '" + order + "' is not a bool");

    const std::string shape_raw = header_value(header, "shape", Errc::UnsupportedShape);
    if (shape_raw.empty() || shape_raw.front() != '(') {
        throw Error(Errc::UnsupportedShape, "shape '" + shape_raw + "' is not a tuple");
    }
    const auto dims = parse_shape(shape_raw);
    std::size_t rows = 0;
    std::size_t cols = 0;
    if (dims.size() == 1) {
        rows = 1;
        cols = dims[0];
    } else if (dims.size() == 2) {
        rows = dims[0];
        cols = dims[1];
    } else {
        throw Error(Errc::UnsupportedShape, "shape " + shape_raw + " has rank " + std::to_string(dims.size()));
    }

    const std::size_t count = rows * cols;
    const std::size_t payload = count * sizeof(float);
    const std::size_t available = bytes.size() - kPreamble - header_len;
    if (available < payload) {
        throw Error(Errc::TruncatedPayload, "shape " + shape_raw + " needs " + std::to_string(payload) +
                                                " payload bytes, found " + std::to_string(available));
    }

    TensorF32 t(rows, cols);
    const std::uint8_t* src = bytes.data() + kPreamble + header_len;
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t bits = static_cast<std::uint32_t>(src[4 * i]) | (static_cast<std::uint32_t>(src[4 * i + 1]) << 8) |
                             (static_cast<std::uint32_t>(src[4 * i + 2]) << 16) |
                             (static_cast<std::uint32_t>(src[4 * i + 3]) << 24);
        t.data[i] = std::bit_cast<float>(bits);
    }
    check_finite(t.data, check);
    return t;
}

std::vector<std::uint8_t> write_npy(const TensorF32& t) {
    std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': " + shape_text(t.rows, t.cols) + ", }";
    // Pad so that preamble + header + '\n' is a multiple of 64.
    const std::size_t unpadded = kPreamble + header.size() + 1;
    header.append((64 - unpadded % 64) % 64, ' ');
    header.push_back('\n');

    std::vector<std::uint8_t> out(kPreamble + header.size() + t.data.size() * 4);
    std::size_t pos = 0;
    for (std::uint8_t b : kMagic) out[pos++] = b;
    out[pos++] = 1;
    out[pos++] = 0;
    out[pos++] = static_cast<std::uint8_t>(header.size() & 0xFF);
    out[pos++] = static_cast<std::uint8_t>(header.size() >> 8);
    for (char c : header) out[pos++] = static_cast<std::uint8_t>(c);
    for (float v : t.data) {
        const auto bits = std::bit_cast<std::uint32_t>(v);
        for (int shift = 0; shift < 32; shift += 8) out[pos++] = static_cast<std::uint8_t>(bits >> shift);
    }
    return out;
}

TensorF32 load_npy(const std::filesystem::path& path, FiniteCheck check) {
    const auto bytes = read_file_bytes(path);
    try {
        return parse_npy(bytes, check);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

void save_npy(const TensorF32& t, const std::filesystem::path& path) {
    write_file_bytes(path, write_npy(t));
}

void validate_manifest(const DatasetManifest& manifest) {
    std::set<SampleKey> seen;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& e = manifest.entries[i];
        if (e.severity < 0 || e.severity > 5) {
            throw Error(Errc::SeverityMismatch, "entry " + std::to_string(i) + ": severity " +
                                                    std::to_string(e.severity) + " outside [0,5]");
        }
        if (e.is_clean() != (e.severity == 0)) {
            throw Error(Errc::SeverityMismatch, "entry " + std::to_string(i) + ": corruption '" + e.corruption +
                                                    "' with severity " + std::to_string(e.severity));
        }
        if (!seen.insert(e.key()).second) {
            throw Error(Errc::DuplicateKey, "entry " + std::to_string(i) + ": " + key_text(e.key()));
        }
    }
}

DatasetManifest parse_manifest(const std::string& text) {
    DatasetManifest manifest;
    const auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        if (trim(lines[i]).empty()) continue;
        ManifestEntry entry;
        try {
            const auto j = nlohmann::json::parse(lines[i]);
            entry.image_id = j.at("image_id").get<std::string>();
            entry.path = j.at("path").get<std::string>();
            entry.label = j.at("label").get<int>();
            entry.corruption = j.at("corruption").get<std::string>();
            entry.severity = j.at("severity").get<int>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::MalformedLine, "line " + std::to_string(line_no) + ": " + e.what());
        }
        if (entry.image_id.empty() || entry.label < 0) {
            throw Error(Errc::MalformedLine, "line " + std::to_string(line_no) + ": empty image_id or negative label");
        }
        manifest.entries.push_back(std::move(entry));
    }
    validate_manifest(manifest);
    return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    return parse_manifest(read_file_text(path));
}

std::string format_manifest(const DatasetManifest& manifest) {
    std::string out;
    for (const auto& e : manifest.entries) {
        nlohmann::ordered_json j;
        j["image_id"] = e.image_id;
        j["path"] = e.path;
        j["label"] = e.label;
        j["corruption"] = e.corruption;
        j["severity"] = e.severity;
        out += j.dump();
        out += '\n';
    }
    return out;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    write_file_text(path, format_manifest(manifest));
}

void check_alignment(const TensorF32& t, const DatasetManifest& manifest, const std::string& what) {
    if (t.rows != manifest.size()) {
        throw Error(Errc::AlignmentError, what + " has " + std::to_string(t.rows) + " rows but the manifest has " +
                                              std::to_string(manifest.size()) + " entries");
    }
}

void ScoreTable::add(SampleKey key, std::string metric, double value) {
    records.push_back({std::move(key), std::move(metric), value});
}

std::map<SampleKey, double> ScoreTable::by_metric(const std::string& metric) const {
    std::map<SampleKey, double> out;
    for (const auto& r : records) {
        if (r.metric == metric) out.emplace(r.key, r.value);
    }
    return out;
}

std::vector<std::string> ScoreTable::metrics() const {
    std::vector<std::string> out;
    for (const auto& r : records) {
        if (std::find(out.begin(), out.end(), r.metric) == out.end()) out.push_back(r.metric);
    }
    return out;
}

void CorrectnessTable::add(SampleKey key, std::string model, int correct) {
    records.push_back({std::move(key), std::move(model), correct});
}

std::map<SampleKey, int> CorrectnessTable::by_model(const std::string& model) const {
    std::map<SampleKey, int> out;
    for (const auto& r : records) {
        if (r.model == model) out.emplace(r.key, r.correct);
    }
    return out;
}

std::vector<std::string> CorrectnessTable::models() const {
    std::vector<std::string> out;
    for (const auto& r : records) {
        if (std::find(out.begin(), out.end(), r.model) == out.end()) out.push_back(r.model);
    }
    return out;
}

std::string format_score_value(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%#.9g", value);
    return buf;
}

ScoreTable parse_scores(const std::string& text) {
    const auto lines = split_lines(text);
    if (lines.empty() || lines[0] != "image_id,corruption,severity,metric,value") {
        throw Error(Errc::MalformedRow, "line 1: expected header image_id,corruption,severity,metric,value");
    }
    ScoreTable table;
    std::set<std::pair<SampleKey, std::string>> seen;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        if (lines[i].empty()) continue;
        const auto f = split_fields(lines[i]);
        if (f.size() != 5) {
            throw Error(Errc::MalformedRow, row_error(line_no, "expected 5 fields, found " + std::to_string(f.size())));
        }
        SampleKey key = parse_key(f, line_no);
        double value = 0.0;
        if (f[3].empty()) throw Error(Errc::MalformedRow, row_error(line_no, "empty metric"));
        if (!parse_number(f[4], value)) {
            throw Error(Errc::MalformedRow, row_error(line_no, "value '" + f[4] + "' is not a number"));
        }
        if (!seen.emplace(key, f[3]).second) {
            throw Error(Errc::DuplicateKey, row_error(line_no, key_text(key) + " metric " + f[3]));
        }
        table.add(std::move(key), f[3], value);
    }
    return table;
}

std::string format_scores(const ScoreTable& table) {
    std::string out = "image_id,corruption,severity,metric,value\n";
    std::set<std::pair<SampleKey, std::string>> seen;
    for (const auto& r : table.records) {
        if (!csv_safe(r.key.image_id) || !csv_safe(r.key.corruption) || !csv_safe(r.metric)) {
            throw Error(Errc::MalformedRow, "field contains a comma, quote or newline: " + key_text(r.key));
        }
        if (!seen.emplace(r.key, r.metric).second) {
            throw Error(Errc::DuplicateKey, key_text(r.key) + " metric " + r.metric);
        }
        out += r.key.image_id + ',' + r.key.corruption + ',' + std::to_string(r.key.severity) + ',' + r.metric + ',' +
               format_score_value(r.value) + '\n';
    }
    return out;
}

ScoreTable load_scores(const std::filesystem::path& path) {
    try {
        return parse_scores(read_file_text(path));
    } catch (const Error& e) {
        if (e.code() == Errc::IoError) throw;
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

void write_scores(const ScoreTable& table, const std::filesystem::path& path) {
    write_file_text(path, format_scores(table));
}

CorrectnessTable parse_correctness(const std::string& text) {
    const auto lines = split_lines(text);
    if (lines.empty() || lines[0] != "image_id,corruption,severity,model,correct") {
        throw Error(Errc::MalformedRow, "line 1: expected header image_id,corruption,severity,model,correct");
    }
    CorrectnessTable table;
    std::set<std::pair<SampleKey, std::string>> seen;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        if (lines[i].empty()) continue;
        const auto f = split_fields(lines[i]);
        if (f.size() != 5) {
            throw Error(Errc::MalformedRow, row_error(line_no, "expected 5 fields, found " + std::to_string(f.size())));
        }
        SampleKey key = parse_key(f, line_no);
        if (f[3].empty()) throw Error(Errc::MalformedRow, row_error(line_no, "empty model"));
        if (f[4] != "0" && f[4] != "1") {
            throw Error(Errc::MalformedRow, row_error(line_no, "correct '" + f[4] + "' is not 0 or 1"));
        }
        if (!seen.emplace(key, f[3]).second) {
            throw Error(Errc::DuplicateKey, row_error(line_no, key_text(key) + " model " + f[3]));
        }
        table.add(std::move(key), f[3], f[4] == "1" ? 1 : 0);
    }
    return table;
}

std::string format_correctness(const CorrectnessTable& table) {
    std::string out = "image_id,corruption,severity,model,correct\n";
    std::set<std::pair<SampleKey, std::string>> seen;
    for (const auto& r : table.records) {
        if (!csv_safe(r.key.image_id) || !csv_safe(r.key.corruption) || !csv_safe(r.model)) {
            throw Error(Errc::MalformedRow, "field contains a comma, quote or newline: " + key_text(r.key));
        }
        if (!seen.emplace(r.key, r.model).second) {
            throw Error(Errc::DuplicateKey, key_text(r.key) + " model " + r.model);
        }
        out += r.key.image_id + ',' + r.key.corruption + ',' + std::to_string(r.key.severity) + ',' + r.model + ',' +
               (r.correct ? "1" : "0") + '\n';
    }
    return out;
}

CorrectnessTable load_correctness(const std::filesystem::path& path) {
    try {
        return parse_correctness(read_file_text(path));
    } catch (const Error& e) {
        if (e.code() == Errc::IoError) throw;
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

void write_correctness(const CorrectnessTable& table, const std::filesystem::path& path) {
    write_file_text(path, format_correctness(table));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

std::string read_file_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::IoError, "short write to " + path.string());
}

void write_file_text(const std::filesystem::path& path, const std::string& text) {
    write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace tgiqa
