#pragma once

// Support index snapshots: the vectors go into an EMB1 file, class indices
// into a sidecar "<path>.labels" holding one u32 LE per row.

#include <filesystem>
#include <string>
#include <vector>

#include "srctrace/embedding_store.hpp"
#include "srctrace/knn.hpp"

namespace srctrace {

inline std::filesystem::path labels_sidecar(const std::filesystem::path& path) {
  auto p = path;
  p += ".labels";
  return p;
}

inline void save_index_snapshot(const SupportIndex& index, const std::filesystem::path& path,
                                const std::string& extractor_id, std::uint32_t layer_index) {
  EmbeddingSet set;
  set.extractor_id = extractor_id;
  set.layer_index = layer_index;
  set.dim = index.dim();
  set.count = index.size();
  set.matrix.assign(index.vectors().begin(), index.vectors().end());
  std::string labels;
  labels.reserve(index.size() * 4);
  for (auto c : index.classes()) detail::put_le<std::uint32_t>(labels, c);
  const auto bytes = encode_embeddings(set);
  detail::write_file_bytes(path, bytes);
  detail::write_file_bytes(labels_sidecar(path), labels);
}

// sample_ids and class_names restore the metadata the binary files do not
// carry; empty vectors yield positional ids ("0", "1", ...) and numeric class names.
inline SupportIndex load_index_snapshot(const std::filesystem::path& path, std::vector<std::string> sample_ids = {},
                                        std::vector<std::string> class_names = {}) {
  auto set = load_embeddings(path);
  const auto raw = detail::read_file_bytes(labels_sidecar(path));
  if (raw.size() != set.count * 4) {
    throw TruncationError(labels_sidecar(path).string() + ": expected " + std::to_string(set.count * 4) + " bytes, found " +
                          std::to_string(raw.size()));
  }
  std::vector<ClassId> labels(set.count);
  ClassId max_class = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels[i] = detail::get_le<std::uint32_t>(reinterpret_cast<const unsigned char*>(raw.data()) + 4 * i);
    max_class = std::max(max_class, labels[i]);
  }
  if (sample_ids.empty()) {
    for (std::size_t i = 0; i < labels.size(); ++i) sample_ids.push_back(std::to_string(i));
  }
  if (class_names.empty()) {
    for (ClassId c = 0; c <= max_class && !labels.empty(); ++c) class_names.push_back(std::to_string(c));
  }
  return SupportIndex(set.dim, std::move(set.matrix), std::move(labels), std::move(sample_ids), std::move(class_names));
}

}  // namespace srctrace
