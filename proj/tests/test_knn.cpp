#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "srctrace/index_snapshot.hpp"
#include "srctrace/knn.hpp"
#include "support.hpp"

using namespace srctrace;

namespace {

SupportIndex index_over(const std::vector<float>& values, std::uint32_t dim, std::vector<ClassId> classes,
                        std::size_t num_classes) {
  std::vector<std::string> ids, names;
  for (std::size_t i = 0; i < classes.size(); ++i) ids.push_back("s" + std::to_string(i));
  for (std::size_t c = 0; c < num_classes; ++c) names.push_back("c" + std::to_string(c));
  return SupportIndex(dim, values, std::move(classes), std::move(ids), std::move(names));
}

SupportIndex random_index(std::size_t n, std::uint32_t dim, std::uint64_t seed, std::size_t num_classes = 5) {
  Xoshiro256 rng(seed + 1000);
  std::vector<ClassId> cls(n);
  for (auto& c : cls) c = static_cast<ClassId>(rng.below(num_classes));
  return index_over(testing_support::gaussian(n, dim, seed), dim, cls, num_classes);
}

oracle::Points points_of(const SupportIndex& idx) {
  auto v = idx.vectors();
  return {idx.dim(), std::vector<float>(v.begin(), v.end())};
}

// Condensing a reduced set again must leave a subset that is 1-NN consistent with it.
void expect_recondense_consistent(const SupportIndex& reduced, std::uint64_t seed) {
  auto again = condense(reduced, seed);
  EXPECT_LE(again.size(), reduced.size());
  auto pts = points_of(reduced);
  std::vector<std::uint32_t> cls(reduced.classes().begin(), reduced.classes().end());
  // source rows of `again` point into the original index; map them back to positions in `reduced`
  std::vector<std::size_t> pos;
  for (auto src : again.source_rows()) {
    auto it = std::find(reduced.source_rows().begin(), reduced.source_rows().end(), src);
    pos.push_back(static_cast<std::size_t>(it - reduced.source_rows().begin()));
  }
  EXPECT_EQ(oracle::one_nn_consistency(pts, cls, pos), 1.0);
}

}  // namespace

TEST(Knn, MatchesExhaustiveScan) {
  auto idx = random_index(1000, 16, 7);
  auto pts = points_of(idx);
  auto queries = testing_support::gaussian(100, 16, 8);
  for (std::size_t k : {1u, 5u, 21u}) {
    for (std::size_t q = 0; q < 100; ++q) {
      const float* qv = queries.data() + q * 16;
      auto got = query(idx, {qv, 16}, k);
      ASSERT_EQ(got.indices, oracle::knn(pts, qv, k)) << "k=" << k << " q=" << q;
      for (std::size_t j = 0; j < k; ++j) {
        EXPECT_NEAR(got.distances[j], std::sqrt(oracle::sq_dist(pts.row(got.indices[j]), qv, 16)), 1e-9);
        if (j > 0) {
          EXPECT_LE(got.distances[j - 1], got.distances[j]);
        }
      }
    }
  }
}

TEST(Knn, SelfQueryHasZeroDistance) {
  auto idx = random_index(50, 8, 1);
  for (std::size_t j = 0; j < idx.size(); ++j) {
    auto nl = query(idx, idx.vector(j), 1);
    EXPECT_EQ(nl.indices[0], j);
    EXPECT_EQ(nl.distances[0], 0.0);
  }
}

TEST(Knn, EqualDistancesBreakByPosition) {
  // four points on the unit circle around the origin, plus one far away
  std::vector<float> v{0, 1, 1, 0, 0, -1, -1, 0, 9, 9};
  auto idx = index_over(v, 2, {0, 1, 0, 1, 0}, 2);
  const float origin[2] = {0, 0};
  auto nl = query(idx, origin, 4);
  EXPECT_EQ(nl.indices, (std::vector<std::size_t>{0, 1, 2, 3}));
  auto nl2 = query(idx, origin, 2);
  EXPECT_EQ(nl2.indices, (std::vector<std::size_t>{0, 1}));
}

TEST(Knn, ArgumentErrors) {
  auto idx = random_index(10, 4, 2);
  const float q3[3] = {0, 0, 0};
  const float q4[4] = {0, 0, 0, 0};
  EXPECT_THROW(query(idx, q3, 1), DimError);
  EXPECT_THROW(query(idx, q4, 0), RangeError);
  EXPECT_THROW(query(idx, q4, 11), RangeError);
  EXPECT_NO_THROW(query(idx, q4, 10));
  EXPECT_THROW(query(idx, q4, 10, 3), RangeError);  // only 9 usable with one excluded
}

TEST(Knn, MetricAxioms) {
  auto a = testing_support::gaussian(200, 12, 3);
  for (std::size_t i = 0; i + 1 < 200; ++i) {
    std::span<const float> x(a.data() + i * 12, 12), y(a.data() + (i + 1) * 12, 12);
    EXPECT_EQ(squared_l2(x, y), squared_l2(y, x));
    EXPECT_EQ(squared_l2(x, x), 0.0);
    EXPECT_GE(squared_l2(x, y), 0.0);
  }
}

TEST(Knn, PositiveScalingKeepsNeighbourOrder) {
  auto base = testing_support::gaussian(400, 10, 11);
  auto queries = testing_support::gaussian(30, 10, 12);
  std::vector<ClassId> cls(400, 0);
  auto idx = index_over(base, 10, cls, 1);
  for (float c : {0.25f, 2.0f, 3.7f}) {
    std::vector<float> scaled(base), qs(queries);
    for (auto& x : scaled) x *= c;
    for (auto& x : qs) x *= c;
    auto sidx = index_over(scaled, 10, cls, 1);
    for (std::size_t q = 0; q < 30; ++q) {
      EXPECT_EQ(query(idx, {queries.data() + q * 10, 10}, 21).indices,
                query(sidx, {qs.data() + q * 10, 10}, 21).indices)
          << "c=" << c;
    }
  }
}

TEST(Knn, BatchMatchesSingleQueriesAndIsOrderFree) {
  auto idx = random_index(300, 8, 4);
  auto qs = testing_support::gaussian(37, 8, 5);
  auto batch = query_batch(idx, {qs, 8}, 5);
  ASSERT_EQ(batch.size(), 37u);
  for (std::size_t q = 0; q < 37; ++q) {
    auto one = query(idx, {qs.data() + q * 8, 8}, 5);
    EXPECT_EQ(batch[q].indices, one.indices);
    EXPECT_EQ(batch[q].distances, one.distances);
  }
  // reversed query order gives reversed results
  std::vector<float> rev;
  for (std::size_t q = 37; q-- > 0;) rev.insert(rev.end(), qs.begin() + q * 8, qs.begin() + (q + 1) * 8);
  auto rb = query_batch(idx, {rev, 8}, 5);
  for (std::size_t q = 0; q < 37; ++q) EXPECT_EQ(rb[q].indices, batch[36 - q].indices);
}

TEST(Knn, ParallelIsBitIdenticalToSerial) {
  auto idx = random_index(500, 16, 6);
  auto qs = testing_support::gaussian(203, 16, 9);
  auto serial = classify_batch(idx, {qs, 16}, 21, 1);
  for (std::size_t workers : {2u, 3u, 8u}) {
    EXPECT_EQ(classify_batch(idx, {qs, 16}, 21, workers), serial) << workers;
  }
  EXPECT_EQ(classify_batch(idx, {std::span<const float>(qs.data(), 16), 16}, 21)[0], classify(idx, {qs.data(), 16}, 21));
}

TEST(Knn, BatchExclusionSkipsSelf) {
  auto idx = random_index(60, 4, 3);
  std::vector<std::size_t> ex(60);
  std::iota(ex.begin(), ex.end(), 0);
  auto v = idx.vectors();
  auto res = query_batch(idx, {v, 4}, 3, 2, ex);
  auto pts = points_of(idx);
  for (std::size_t i = 0; i < 60; ++i) EXPECT_EQ(res[i].indices, oracle::knn(pts, pts.row(i), 3, i));
}

TEST(Knn, BatchErrorsNameTheRow) {
  auto idx = random_index(10, 4, 3);
  std::vector<float> qs(12, 0.f);
  EXPECT_THROW(query_batch(idx, {qs, 3}, 1), DimError);
  EXPECT_THROW(query_batch(idx, {std::span<const float>(qs.data(), 8), 4}, 11), RangeError);
}

TEST(Vote, MajorityAndTieRules) {
  // single class: always that class
  auto one = index_over({0, 1, 2, 3, 4}, 1, {0, 0, 0, 0, 0}, 1);
  const float q0[1] = {10};
  EXPECT_EQ(classify(one, q0, 5).predicted_class, 0u);

  // [A, A, B] -> A
  auto idx = index_over({0, 1, 2, 100}, 1, {0, 0, 1, 1}, 2);
  const float q1[1] = {0};
  EXPECT_EQ(classify(idx, q1, 3).predicted_class, 0u);

  // k=2, [A, B] with distances [1.0, 0.5] -> B (smaller summed distance)
  NeighborList nl{{0, 1}, {1.0, 0.5}};
  auto ab = index_over({0, 0}, 1, {0, 1}, 2);
  auto r = vote(ab, nl);
  EXPECT_EQ(r.predicted_class, 1u);
  EXPECT_DOUBLE_EQ(r.mean_distance, 0.75);

  // full tie on count and distance -> lower class index
  NeighborList tie{{0, 1}, {1.0, 1.0}};
  EXPECT_EQ(vote(ab, tie).predicted_class, 0u);
}

TEST(Vote, AgreesWithOracleAndIsTotal) {
  auto idx = random_index(400, 6, 21, 7);
  auto qs = testing_support::gaussian(150, 6, 22);
  for (std::size_t k : {1u, 4u, 9u, 21u}) {
    for (std::size_t q = 0; q < 150; ++q) {
      auto nl = query(idx, {qs.data() + q * 6, 6}, k);
      std::vector<std::uint32_t> cls;
      for (auto p : nl.indices) cls.push_back(idx.class_of(p));
      auto r = vote(idx, nl);
      EXPECT_EQ(r.predicted_class, oracle::vote(cls, nl.distances));
      EXPECT_NE(std::find(cls.begin(), cls.end(), r.predicted_class), cls.end());
      std::uint32_t total = 0;
      for (auto [c, n] : r.histogram) total += n;
      EXPECT_EQ(total, k);
    }
  }
}

TEST(Index, BuildFromSelection) {
  auto c = testing_support::corpus_for(testing_support::gaussian(10, 3, 1), 3,
                                       {"a", "b", "a", "b", "a", "b", "a", "b", "a", "b"});
  const std::vector<std::size_t> sel{7, 2, 5, 0};
  auto idx = build_index(c, std::span<const std::size_t>(sel));
  EXPECT_EQ(idx.size(), 4u);
  EXPECT_EQ(idx.sample_id(0), "s7");
  EXPECT_EQ(idx.source_row(1), 2u);
  EXPECT_EQ(idx.class_of(0), 1u);
  EXPECT_EQ(build_index(c).size(), 10u);

  const std::vector<std::size_t> empty, oob{3, 10}, dup{1, 1};
  EXPECT_THROW(build_index(c, std::span<const std::size_t>(empty)), EmptySupportError);
  EXPECT_THROW(build_index(c, std::span<const std::size_t>(oob)), RangeError);
  EXPECT_THROW(build_index(c, std::span<const std::size_t>(dup)), RangeError);
}

TEST(Condense, SeparatedClustersStayConsistentAndShrink) {
  const std::size_t per = 100, classes = 4, dim = 5;
  std::vector<float> v;
  std::vector<ClassId> cls;
  auto noise = testing_support::gaussian(per * classes, dim, 31);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < per; ++i) {
      for (std::size_t j = 0; j < dim; ++j) v.push_back(noise[(c * per + i) * dim + j] + (j == c % dim ? 20.f : 0.f));
      cls.push_back(static_cast<ClassId>(c));
    }
  }
  auto idx = index_over(v, dim, cls, classes);
  auto pts = points_of(idx);
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    auto cnn = condense(idx, seed);
    std::vector<std::size_t> kept(cnn.source_rows().begin(), cnn.source_rows().end());
    EXPECT_TRUE(std::is_sorted(kept.begin(), kept.end()));
    EXPECT_EQ(oracle::one_nn_consistency(pts, cls, kept), 1.0);
    EXPECT_LT(cnn.size(), idx.size());
    EXPECT_GE(cnn.size(), classes);
    expect_recondense_consistent(cnn, seed + 100);
  }
}

TEST(Condense, OverlappingClassesStayConsistent) {
  auto idx = random_index(300, 3, 17, 3);
  auto pts = points_of(idx);
  std::vector<std::uint32_t> cls(idx.classes().begin(), idx.classes().end());
  for (std::uint64_t seed : {5u, 6u}) {
    auto cnn = condense(idx, seed);
    std::vector<std::size_t> kept(cnn.source_rows().begin(), cnn.source_rows().end());
    EXPECT_EQ(oracle::one_nn_consistency(pts, cls, kept), 1.0);
    EXPECT_EQ(condense(idx, seed).source_rows().size(), kept.size());
    expect_recondense_consistent(cnn, seed + 100);
  }
}

TEST(Condense, SingleClassKeepsOneVector) {
  auto idx = index_over(testing_support::gaussian(50, 4, 2), 4, std::vector<ClassId>(50, 0), 1);
  EXPECT_EQ(condense(idx, 0).size(), 1u);
}

TEST(Snapshot, RoundTripAnswersQueriesIdentically) {
  auto dir = testing_support::scratch("snapshot");
  auto idx = random_index(120, 6, 9, 4);
  save_index_snapshot(idx, dir / "idx.emb", "unit", 3);
  std::vector<std::string> ids(idx.sample_ids().begin(), idx.sample_ids().end());
  std::vector<std::string> names(idx.class_names().begin(), idx.class_names().end());
  auto back = load_index_snapshot(dir / "idx.emb", ids, names);
  EXPECT_EQ(load_embeddings(dir / "idx.emb").layer_index, 3u);
  auto qs = testing_support::gaussian(25, 6, 10);
  EXPECT_EQ(classify_batch(back, {qs, 6}, 7), classify_batch(idx, {qs, 6}, 7));
  EXPECT_EQ(back.sample_id(5), idx.sample_id(5));

  // a sidecar cut short is reported, not silently padded
  auto labels = detail::read_file_bytes(labels_sidecar(dir / "idx.emb"));
  labels.resize(labels.size() - 4);
  detail::write_file_bytes(labels_sidecar(dir / "idx.emb"), labels);
  EXPECT_THROW(load_index_snapshot(dir / "idx.emb"), TruncationError);
}
