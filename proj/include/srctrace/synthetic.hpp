#pragma once

// Synthetic corpora of isotropic Gaussian clusters, one cluster per
// checkpoint. Used by the test suites and by tools/make_fixture.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "srctrace/embedding_store.hpp"
#include "srctrace/error.hpp"
#include "srctrace/rng.hpp"

namespace srctrace::synthetic {

struct ClusterSpec {
  std::size_t classes = 40;
  std::size_t per_class = 200;
  std::uint32_t dim = 32;
  double sigma = 1.0;
  double centroid_scale = 4.0;  // centroids ~ N(0, (centroid_scale * sigma)^2 I)
  double min_separation = 8.0;  // minimum centroid distance, in units of sigma
  std::size_t datasets = 4;     // checkpoints are dealt round-robin over datasets
  std::size_t architectures = 4;
  std::uint64_t seed = 1;
  std::string extractor_id = "synthetic";
  std::uint32_t layer_index = 0;
};

struct ClusterFixture {
  std::vector<SampleRecord> records;
  EmbeddingSet embeddings;
  std::vector<std::vector<double>> centroids;
};

inline std::string checkpoint_name(std::size_t c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt%03zu", c);
  return buf;
}

inline double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(s);
}

// Rejection-samples centroids until every pair is at least
// min_separation * sigma apart. min_separation = 0 puts every cluster at the origin.
inline ClusterFixture make_clusters(const ClusterSpec& spec) {
  if (spec.classes == 0 || spec.dim == 0 || spec.datasets == 0 || spec.architectures == 0) {
    throw RangeError("cluster fixture needs classes, dim, datasets and architectures > 0");
  }
  Xoshiro256 rng(spec.seed);
  ClusterFixture f;
  const double min_dist = spec.min_separation * spec.sigma;
  for (std::size_t c = 0; c < spec.classes; ++c) {
    std::vector<double> mu(spec.dim, 0.0);
    if (spec.min_separation > 0) {
      for (std::size_t attempt = 0;; ++attempt) {
        if (attempt > 10000) throw RangeError("cannot place centroids at the requested separation");
        for (auto& v : mu) v = rng.normal() * spec.centroid_scale * spec.sigma;
        bool ok = true;
        for (const auto& other : f.centroids) ok = ok && distance(mu, other) >= min_dist;
        if (ok) break;
      }
    }
    f.centroids.push_back(std::move(mu));
  }

  f.embeddings.extractor_id = spec.extractor_id;
  f.embeddings.layer_index = spec.layer_index;
  f.embeddings.dim = spec.dim;
  f.embeddings.count = spec.classes * spec.per_class;
  f.embeddings.matrix.reserve(f.embeddings.count * spec.dim);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      SampleRecord r;
      r.sample_id = checkpoint_name(c) + "_" + std::to_string(i);
      r.dataset = "ds" + std::to_string(c % spec.datasets);
      r.checkpoint = checkpoint_name(c);
      r.acoustic_model = "arch" + std::to_string(c % spec.architectures);
      r.speaker = "spk" + std::to_string(i % 3);
      f.records.push_back(std::move(r));
      for (std::size_t j = 0; j < spec.dim; ++j) {
        f.embeddings.matrix.push_back(static_cast<float>(f.centroids[c][j] + rng.normal() * spec.sigma));
      }
    }
  }
  return f;
}

}  // namespace srctrace::synthetic
