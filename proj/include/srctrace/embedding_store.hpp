#pragma once

// Embedding matrices (EMB1 binary files), JSON-Lines manifests, and the
// in-memory Corpus that joins them by row position.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "srctrace/error.hpp"

namespace srctrace {

using ClassId = std::uint32_t;

// ---------------------------------------------------------------------------
// EMB1 container
//
//   offset  size  field
//        0     4  magic "EMB1" (45 4D 42 31)
//        4     4  u32 LE version (= 1)
//        8     4  u32 LE dim
//       12     8  u64 LE count
//       20    64  extractor_id, UTF-8, NUL padded
//       84     4  u32 LE layer_index
//       88     -  count * dim binary32 LE, row-major
// ---------------------------------------------------------------------------

inline constexpr std::array<unsigned char, 4> kEmbMagic{0x45, 0x4D, 0x42, 0x31};
inline constexpr std::uint32_t kEmbVersion = 1;
inline constexpr std::size_t kExtractorIdBytes = 64;
inline constexpr std::size_t kEmbHeaderBytes = 4 + 4 + 4 + 8 + kExtractorIdBytes + 4;

struct EmbeddingSet {
  std::string extractor_id;
  std::uint32_t layer_index = 0;
  std::uint32_t dim = 0;
  std::uint64_t count = 0;
  std::vector<float> matrix;  // count * dim, row-major

  std::span<const float> row(std::size_t i) const {
    return {matrix.data() + i * dim, dim};
  }

  friend bool operator==(const EmbeddingSet&, const EmbeddingSet&) = default;
};

namespace detail {

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t b = 0; b < sizeof(U); ++b) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * b)) & 0xFF));
  }
}

template <typename U>
U get_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) v |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return static_cast<U>(v);
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace detail

// Throws DataError naming the first row holding a NaN or infinity.
inline void validate_finite(const EmbeddingSet& set) {
  if (set.matrix.size() != set.count * static_cast<std::uint64_t>(set.dim)) {
    throw DataError("matrix holds " + std::to_string(set.matrix.size()) + " values, expected count*dim = " +
                    std::to_string(set.count * set.dim));
  }
  for (std::size_t i = 0; i < set.count; ++i) {
    for (float v : set.row(i)) {
      if (!std::isfinite(v)) throw DataError("non-finite value in row " + std::to_string(i));
    }
  }
}

inline std::string encode_embeddings(const EmbeddingSet& set) {
  if (set.dim == 0) throw DataError("dim must be > 0");
  if (set.extractor_id.size() > kExtractorIdBytes) {
    throw DataError("extractor_id longer than 64 bytes: " + set.extractor_id);
  }
  if (set.extractor_id.find('\0') != std::string::npos) throw DataError("extractor_id contains NUL");
  validate_finite(set);

  std::string out;
  out.reserve(kEmbHeaderBytes + set.matrix.size() * 4);
  out.append(reinterpret_cast<const char*>(kEmbMagic.data()), kEmbMagic.size());
  detail::put_le<std::uint32_t>(out, kEmbVersion);
  detail::put_le<std::uint32_t>(out, set.dim);
  detail::put_le<std::uint64_t>(out, set.count);
  out.append(set.extractor_id);
  out.append(kExtractorIdBytes - set.extractor_id.size(), '\0');
  detail::put_le<std::uint32_t>(out, set.layer_index);
  for (float v : set.matrix) detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

inline EmbeddingSet decode_embeddings(std::string_view bytes, const std::string& origin = "<memory>") {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < kEmbMagic.size() || !std::equal(kEmbMagic.begin(), kEmbMagic.end(), p)) {
    throw FormatError(origin + ": bad magic, not an EMB1 file");
  }
  if (bytes.size() < kEmbHeaderBytes) throw TruncationError(origin + ": truncated header");

  const auto version = detail::get_le<std::uint32_t>(p + 4);
  if (version != kEmbVersion) throw FormatError(origin + ": unsupported version " + std::to_string(version));

  EmbeddingSet set;
  set.dim = detail::get_le<std::uint32_t>(p + 8);
  set.count = detail::get_le<std::uint64_t>(p + 12);
  const char* id = bytes.data() + 20;
  set.extractor_id.assign(id, strnlen(id, kExtractorIdBytes));
  set.layer_index = detail::get_le<std::uint32_t>(p + 84);
  if (set.dim == 0) throw FormatError(origin + ": dim is 0");

  const std::uint64_t payload = bytes.size() - kEmbHeaderBytes;
  // Guard the multiplication; a corrupt count must not overflow into a small number.
  if (set.count > payload / 4 / set.dim) {
    throw TruncationError(origin + ": payload has " + std::to_string(payload) + " bytes, header declares " +
                          std::to_string(set.count) + " x " + std::to_string(set.dim) + " floats");
  }
  const std::uint64_t values = set.count * set.dim;
  if (payload != values * 4) {
    throw FormatError(origin + ": " + std::to_string(payload - values * 4) + " trailing bytes after payload");
  }

  set.matrix.resize(values);
  const unsigned char* q = p + kEmbHeaderBytes;
  for (std::uint64_t i = 0; i < values; ++i, q += 4) {
    set.matrix[i] = std::bit_cast<float>(detail::get_le<std::uint32_t>(q));
  }
  try {
    validate_finite(set);
  } catch (const DataError& e) {
    throw DataError(origin + ": " + e.what());
  }
  return set;
}

inline EmbeddingSet load_embeddings(const std::filesystem::path& path) {
  return decode_embeddings(detail::read_file_bytes(path), path.string());
}

// Validation happens before the file is opened, so a rejected set leaves no file behind.
inline void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_embeddings(set));
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

struct SampleRecord {
  std::string sample_id;
  std::string dataset;
  std::string checkpoint;
  std::optional<std::string> acoustic_model;
  std::optional<std::string> vocoder;
  std::optional<std::string> speaker;
  std::optional<std::string> language;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

enum class LabelField { dataset, checkpoint, acoustic_model, vocoder, speaker, language };

inline std::string_view to_string(LabelField f) {
  switch (f) {
    case LabelField::dataset: return "dataset";
    case LabelField::checkpoint: return "checkpoint";
    case LabelField::acoustic_model: return "acoustic_model";
    case LabelField::vocoder: return "vocoder";
    case LabelField::speaker: return "speaker";
    case LabelField::language: return "language";
  }
  return "?";
}

inline std::optional<LabelField> parse_label_field(std::string_view name) {
  for (auto f : {LabelField::dataset, LabelField::checkpoint, LabelField::acoustic_model, LabelField::vocoder,
                 LabelField::speaker, LabelField::language}) {
    if (to_string(f) == name) return f;
  }
  return std::nullopt;
}

inline std::optional<std::string> field_value(const SampleRecord& r, LabelField f) {
  switch (f) {
    case LabelField::dataset: return r.dataset;
    case LabelField::checkpoint: return r.checkpoint;
    case LabelField::acoustic_model: return r.acoustic_model;
    case LabelField::vocoder: return r.vocoder;
    case LabelField::speaker: return r.speaker;
    case LabelField::language: return r.language;
  }
  return std::nullopt;
}

namespace detail {

inline std::string required_string(const nlohmann::json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) throw SchemaError(line, std::string("missing required field \"") + key + "\"");
  if (!it->is_string()) throw SchemaError(line, std::string("field \"") + key + "\" must be a string");
  auto value = it->get<std::string>();
  if (value.empty()) throw SchemaError(line, std::string("field \"") + key + "\" is empty");
  return value;
}

// Absent, null and "" all read as missing.
inline std::optional<std::string> optional_string(const nlohmann::json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw SchemaError(line, std::string("field \"") + key + "\" must be a string or null");
  auto value = it->get<std::string>();
  if (value.empty()) return std::nullopt;
  return value;
}

}  // namespace detail

inline SampleRecord parse_manifest_line(std::string_view text, std::size_t line) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(line, std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw SchemaError(line, "record must be a JSON object");
  SampleRecord r;
  r.sample_id = detail::required_string(obj, "sample_id", line);
  r.dataset = detail::required_string(obj, "dataset", line);
  r.checkpoint = detail::required_string(obj, "checkpoint", line);
  r.acoustic_model = detail::optional_string(obj, "acoustic_model", line);
  r.vocoder = detail::optional_string(obj, "vocoder", line);
  r.speaker = detail::optional_string(obj, "speaker", line);
  r.language = detail::optional_string(obj, "language", line);
  return r;
}

inline std::vector<SampleRecord> parse_manifest(std::istream& in) {
  std::vector<SampleRecord> records;
  std::unordered_map<std::string, std::size_t> seen;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    auto r = parse_manifest_line(text, line);
    auto [it, fresh] = seen.emplace(r.sample_id, line);
    if (!fresh) {
      throw DuplicateError(line, "duplicate sample_id \"" + r.sample_id + "\" (first seen on line " +
                                     std::to_string(it->second) + ")");
    }
    records.push_back(std::move(r));
  }
  return records;
}

inline std::vector<SampleRecord> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return parse_manifest(in);
  } catch (const LineError& e) {
    // Keep the concrete type so callers can still catch DuplicateError / SchemaError.
    if (dynamic_cast<const DuplicateError*>(&e)) throw DuplicateError(e.line(), path.string() + ": " + e.what());
    throw SchemaError(e.line(), path.string() + ": " + e.what());
  }
}

inline nlohmann::ordered_json to_json(const SampleRecord& r) {
  nlohmann::ordered_json j;
  j["sample_id"] = r.sample_id;
  j["dataset"] = r.dataset;
  j["checkpoint"] = r.checkpoint;
  if (r.acoustic_model) j["acoustic_model"] = *r.acoustic_model;
  if (r.vocoder) j["vocoder"] = *r.vocoder;
  if (r.speaker) j["speaker"] = *r.speaker;
  if (r.language) j["language"] = *r.language;
  return j;
}

inline void write_manifest(std::span<const SampleRecord> records, const std::filesystem::path& path) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  detail::write_file_bytes(path, out);
}

// ---------------------------------------------------------------------------
// Relabel maps and Corpus
// ---------------------------------------------------------------------------

// Maps sample_id or checkpoint to a replacement label. A sample_id entry wins
// over a checkpoint entry. Text form: one "key<TAB>label" per line, '#' comments.
struct RelabelMap {
  std::map<std::string, std::string> labels;

  std::optional<std::string> lookup(const SampleRecord& r) const {
    if (auto it = labels.find(r.sample_id); it != labels.end()) return it->second;
    if (auto it = labels.find(r.checkpoint); it != labels.end()) return it->second;
    return std::nullopt;
  }
};

inline RelabelMap parse_relabel_map(std::istream& in) {
  RelabelMap map;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty() || text[0] == '#') continue;
    auto tab = text.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == text.size()) {
      throw SchemaError(line, "expected \"key<TAB>label\"");
    }
    auto key = text.substr(0, tab);
    if (!map.labels.emplace(key, text.substr(tab + 1)).second) {
      throw DuplicateError(line, "duplicate relabel key \"" + key + "\"");
    }
  }
  return map;
}

inline RelabelMap load_relabel_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_relabel_map(in);
}

using LabelTarget = std::variant<LabelField, RelabelMap>;

inline std::optional<std::string> target_value(const SampleRecord& r, const LabelTarget& target) {
  if (const auto* f = std::get_if<LabelField>(&target)) return field_value(r, *f);
  return std::get<RelabelMap>(target).lookup(r);
}

inline std::string describe(const LabelTarget& target) {
  if (const auto* f = std::get_if<LabelField>(&target)) return std::string(to_string(*f));
  return "relabel";
}

// Records and embedding rows aligned by position, plus one class view.
struct Corpus {
  std::vector<SampleRecord> records;
  EmbeddingSet embeddings;
  std::string target;
  std::vector<std::string> class_names;  // lexicographic; index == ClassId
  std::vector<ClassId> labels;           // labels[i] is the class of records[i]

  std::size_t size() const { return records.size(); }
  std::size_t num_classes() const { return class_names.size(); }
  std::span<const float> row(std::size_t i) const { return embeddings.row(i); }
};

// Assigns lexicographically ordered class indices to the distinct label strings.
inline std::vector<std::string> class_index_order(std::span<const std::string> labels) {
  std::set<std::string> distinct(labels.begin(), labels.end());
  return {distinct.begin(), distinct.end()};
}

inline Corpus build_corpus(std::vector<SampleRecord> records, EmbeddingSet set, const LabelTarget& target) {
  if (records.size() != set.count) {
    throw AlignmentError("manifest has " + std::to_string(records.size()) + " records but embedding file has " +
                         std::to_string(set.count) + " rows");
  }
  std::vector<std::string> raw;
  raw.reserve(records.size());
  std::vector<std::string> missing;
  for (const auto& r : records) {
    auto v = target_value(r, target);
    if (!v) {
      missing.push_back(r.sample_id);
      continue;
    }
    raw.push_back(std::move(*v));
  }
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " sample(s) have no " + describe(target) + " label:";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
    if (missing.size() > 20) msg += " ...";
    throw LabelError(msg);
  }

  Corpus c;
  c.class_names = class_index_order(raw);
  std::unordered_map<std::string, ClassId> index;
  for (ClassId i = 0; i < c.class_names.size(); ++i) index.emplace(c.class_names[i], i);
  c.labels.reserve(raw.size());
  for (const auto& v : raw) c.labels.push_back(index.at(v));
  c.records = std::move(records);
  c.embeddings = std::move(set);
  c.target = describe(target);
  return c;
}

}  // namespace srctrace
