#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "srctrace/embedding_store.hpp"
#include "srctrace/rng.hpp"

namespace testing_support {

// Fresh per-test scratch directory under the build tree.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::path(SRCTRACE_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<float> gaussian(std::size_t n, std::size_t dim, std::uint64_t seed, double scale = 1.0) {
  srctrace::Xoshiro256 rng(seed);
  std::vector<float> v(n * dim);
  for (auto& x : v) x = static_cast<float>(rng.normal() * scale);
  return v;
}

inline srctrace::EmbeddingSet make_set(std::vector<float> values, std::uint32_t dim) {
  srctrace::EmbeddingSet s;
  s.extractor_id = "test";
  s.dim = dim;
  s.count = values.size() / dim;
  s.matrix = std::move(values);
  return s;
}

// One record per row; checkpoint carries the label, dataset and architecture
// are supplied by the caller or default to a single value.
inline std::vector<srctrace::SampleRecord> records_for(const std::vector<std::string>& checkpoints,
                                                        const std::vector<std::string>& datasets = {},
                                                        const std::vector<std::string>& archs = {}) {
  std::vector<srctrace::SampleRecord> out;
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    srctrace::SampleRecord r;
    r.sample_id = "s" + std::to_string(i);
    r.checkpoint = checkpoints[i];
    r.dataset = datasets.empty() ? "ds" : datasets[i];
    if (!archs.empty()) r.acoustic_model = archs[i];
    out.push_back(std::move(r));
  }
  return out;
}

inline srctrace::Corpus corpus_for(std::vector<float> values, std::uint32_t dim,
                                   const std::vector<std::string>& checkpoints,
                                   const std::vector<std::string>& datasets = {},
                                   const std::vector<std::string>& archs = {}) {
  return srctrace::build_corpus(records_for(checkpoints, datasets, archs), make_set(std::move(values), dim),
                                srctrace::LabelField::checkpoint);
}

}  // namespace testing_support
