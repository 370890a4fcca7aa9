#pragma once

// Exact Euclidean k-nearest-neighbour search over a labelled support set,
// majority-vote classification and Hart's condensed nearest neighbour.
//
// Ordering rule used everywhere: neighbours are ranked by squared distance
// (accumulated in double), ties broken by ascending support position.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "srctrace/embedding_store.hpp"
#include "srctrace/error.hpp"
#include "srctrace/rng.hpp"

namespace srctrace {

inline constexpr std::size_t kDefaultK = 21;

// Squared Euclidean distance with a fixed 4-lane accumulation order, so the
// result does not depend on how the compiler vectorises the loop.
inline double squared_l2(std::span<const float> a, std::span<const float> b) noexcept {
  const std::size_t n = a.size();
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const double d0 = double(a[j]) - double(b[j]);
    const double d1 = double(a[j + 1]) - double(b[j + 1]);
    const double d2 = double(a[j + 2]) - double(b[j + 2]);
    const double d3 = double(a[j + 3]) - double(b[j + 3]);
    s0 += d0 * d0;
    s1 += d1 * d1;
    s2 += d2 * d2;
    s3 += d3 * d3;
  }
  for (; j < n; ++j) {
    const double d = double(a[j]) - double(b[j]);
    s0 += d * d;
  }
  return (s0 + s1) + (s2 + s3);
}

class SupportIndex {
 public:
  SupportIndex() = default;

  // source_rows records which corpus rows the support vectors came from.
  SupportIndex(std::uint32_t dim, std::vector<float> vectors, std::vector<ClassId> class_of,
               std::vector<std::string> sample_ids, std::vector<std::string> class_names,
               std::vector<std::size_t> source_rows = {})
      : dim_(dim),
        vectors_(std::move(vectors)),
        class_of_(std::move(class_of)),
        sample_ids_(std::move(sample_ids)),
        class_names_(std::move(class_names)),
        source_rows_(std::move(source_rows)) {
    if (class_of_.empty()) throw EmptySupportError("support set is empty");
    if (dim_ == 0) throw DimError("support dim is 0");
    if (vectors_.size() != class_of_.size() * dim_) throw AlignmentError("support vectors do not match label count");
    if (sample_ids_.size() != class_of_.size()) throw AlignmentError("support sample_ids do not match label count");
    if (source_rows_.empty()) {
      source_rows_.resize(class_of_.size());
      std::iota(source_rows_.begin(), source_rows_.end(), std::size_t{0});
    }
    if (source_rows_.size() != class_of_.size()) throw AlignmentError("support source_rows do not match label count");
    for (ClassId c : class_of_) {
      if (c >= class_names_.size()) throw LabelError("class index " + std::to_string(c) + " has no name");
    }
    for (float v : vectors_) {
      if (!std::isfinite(v)) throw DataError("non-finite support vector value");
    }
  }

  std::size_t size() const { return class_of_.size(); }
  std::uint32_t dim() const { return dim_; }
  std::size_t num_classes() const { return class_names_.size(); }
  std::span<const float> vector(std::size_t i) const { return {vectors_.data() + i * dim_, dim_}; }
  std::span<const float> vectors() const { return vectors_; }
  ClassId class_of(std::size_t i) const { return class_of_[i]; }
  std::span<const ClassId> classes() const { return class_of_; }
  const std::string& sample_id(std::size_t i) const { return sample_ids_[i]; }
  std::span<const std::string> sample_ids() const { return sample_ids_; }
  std::span<const std::string> class_names() const { return class_names_; }
  std::size_t source_row(std::size_t i) const { return source_rows_[i]; }
  std::span<const std::size_t> source_rows() const { return source_rows_; }

  // Sub-index over the given positions of this index, in the given order.
  SupportIndex subset(std::span<const std::size_t> positions) const {
    std::vector<float> v;
    v.reserve(positions.size() * dim_);
    std::vector<ClassId> c;
    std::vector<std::string> ids;
    std::vector<std::size_t> src;
    for (auto p : positions) {
      if (p >= size()) throw RangeError("support position " + std::to_string(p) + " out of range");
      auto row = vector(p);
      v.insert(v.end(), row.begin(), row.end());
      c.push_back(class_of_[p]);
      ids.push_back(sample_ids_[p]);
      src.push_back(source_rows_[p]);
    }
    return SupportIndex(dim_, std::move(v), std::move(c), std::move(ids), class_names_, std::move(src));
  }

 private:
  std::uint32_t dim_ = 0;
  std::vector<float> vectors_;
  std::vector<ClassId> class_of_;
  std::vector<std::string> sample_ids_;
  std::vector<std::string> class_names_;
  std::vector<std::size_t> source_rows_;
};

// Index over the selected corpus rows (all rows when selection is empty), order preserved.
inline SupportIndex build_index(const Corpus& corpus, std::optional<std::span<const std::size_t>> selection = std::nullopt) {
  std::vector<std::size_t> rows;
  if (selection) {
    rows.assign(selection->begin(), selection->end());
    if (rows.empty()) throw EmptySupportError("selection is empty");
    std::vector<bool> used(corpus.size(), false);
    for (auto r : rows) {
      if (r >= corpus.size()) throw RangeError("selection row " + std::to_string(r) + " out of range");
      if (used[r]) throw RangeError("selection row " + std::to_string(r) + " listed twice");
      used[r] = true;
    }
  } else {
    if (corpus.size() == 0) throw EmptySupportError("corpus is empty");
    rows.resize(corpus.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
  }
  const auto dim = corpus.embeddings.dim;
  std::vector<float> v;
  v.reserve(rows.size() * dim);
  std::vector<ClassId> c;
  c.reserve(rows.size());
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  for (auto r : rows) {
    auto row = corpus.row(r);
    v.insert(v.end(), row.begin(), row.end());
    c.push_back(corpus.labels[r]);
    ids.push_back(corpus.records[r].sample_id);
  }
  return SupportIndex(dim, std::move(v), std::move(c), std::move(ids), corpus.class_names, std::move(rows));
}

struct NeighborList {
  std::vector<std::size_t> indices;  // support positions
  std::vector<double> distances;     // true Euclidean distances, non-decreasing

  std::size_t size() const { return indices.size(); }
  friend bool operator==(const NeighborList&, const NeighborList&) = default;
};

namespace detail {

// Bounded max-heap of the k best (squared distance, position) pairs.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) { heap_.reserve(k); }

  void offer(double d2, std::size_t pos) {
    const Entry e{d2, pos};
    if (heap_.size() < k_) {
      heap_.push_back(e);
      std::push_heap(heap_.begin(), heap_.end());
    } else if (e < heap_.front()) {
      std::pop_heap(heap_.begin(), heap_.end());
      heap_.back() = e;
      std::push_heap(heap_.begin(), heap_.end());
    }
  }

  NeighborList finish() {
    std::sort_heap(heap_.begin(), heap_.end());
    NeighborList out;
    out.indices.reserve(heap_.size());
    out.distances.reserve(heap_.size());
    for (const auto& e : heap_) {
      out.indices.push_back(e.pos);
      out.distances.push_back(std::sqrt(e.d2));
    }
    heap_.clear();
    return out;
  }

 private:
  struct Entry {
    double d2;
    std::size_t pos;
    bool operator<(const Entry& o) const { return d2 < o.d2 || (d2 == o.d2 && pos < o.pos); }
  };
  std::size_t k_;
  std::vector<Entry> heap_;
};

inline void check_query(const SupportIndex& index, std::size_t query_dim, std::size_t k, std::size_t usable) {
  if (query_dim != index.dim()) {
    throw DimError("query dim " + std::to_string(query_dim) + " != index dim " + std::to_string(index.dim()));
  }
  if (k < 1 || k > usable) {
    throw RangeError("k = " + std::to_string(k) + " outside [1, " + std::to_string(usable) + "]");
  }
}

inline constexpr std::size_t kNoExclusion = static_cast<std::size_t>(-1);

}  // namespace detail

// The k nearest support vectors. exclude, when set, names one support position
// that is skipped (used for leave-self-out neighbourhood analysis).
inline NeighborList query(const SupportIndex& index, std::span<const float> vec, std::size_t k,
                          std::size_t exclude = detail::kNoExclusion) {
  const std::size_t usable = index.size() - (exclude < index.size() ? 1 : 0);
  detail::check_query(index, vec.size(), k, usable);
  detail::TopK top(k);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (i == exclude) continue;
    top.offer(squared_l2(vec, index.vector(i)), i);
  }
  return top.finish();
}

// A row-major block of query vectors.
struct QueryBlock {
  std::span<const float> values;
  std::size_t dim = 0;

  std::size_t size() const { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const float> row(std::size_t i) const { return values.subspan(i * dim, dim); }
};

inline std::size_t resolve_workers(std::size_t workers) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  return workers;
}

// Runs fn(i) for i in [0, n), with contiguous chunks handed to each worker.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::min(resolve_workers(workers), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::size_t end = std::min(n, (w + 1) * chunk);
        for (std::size_t i = w * chunk; i < end; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Batched search. Queries are processed in tiles so each support row is
// streamed from memory once per tile rather than once per query. excludes, if
// non-empty, gives one excluded support position per query.
inline std::vector<NeighborList> query_batch(const SupportIndex& index, QueryBlock queries, std::size_t k,
                                             std::size_t workers = 1, std::span<const std::size_t> excludes = {}) {
  constexpr std::size_t kTile = 8;
  const std::size_t n = queries.size();
  if (n > 0 && queries.dim != index.dim()) {
    throw DimError("query dim " + std::to_string(queries.dim) + " != index dim " + std::to_string(index.dim()));
  }
  if (!excludes.empty() && excludes.size() != n) throw AlignmentError("excludes must have one entry per query");
  for (std::size_t q = 0; q < n; ++q) {
    const std::size_t ex = excludes.empty() ? detail::kNoExclusion : excludes[q];
    const std::size_t usable = index.size() - (ex < index.size() ? 1 : 0);
    if (k < 1 || k > usable) {
      throw RangeError("query row " + std::to_string(q) + ": k = " + std::to_string(k) + " outside [1, " +
                       std::to_string(usable) + "]");
    }
  }

  std::vector<NeighborList> out(n);
  const std::size_t tiles = (n + kTile - 1) / kTile;
  parallel_for(tiles, workers, [&](std::size_t t) {
    const std::size_t begin = t * kTile;
    const std::size_t end = std::min(n, begin + kTile);
    std::vector<detail::TopK> tops;
    tops.reserve(end - begin);
    for (std::size_t q = begin; q < end; ++q) tops.emplace_back(k);
    for (std::size_t i = 0; i < index.size(); ++i) {
      const auto support = index.vector(i);
      for (std::size_t q = begin; q < end; ++q) {
        if (!excludes.empty() && excludes[q] == i) continue;
        tops[q - begin].offer(squared_l2(queries.row(q), support), i);
      }
    }
    for (std::size_t q = begin; q < end; ++q) out[q] = tops[q - begin].finish();
  });
  return out;
}

struct VoteResult {
  ClassId predicted_class = 0;
  std::vector<std::pair<ClassId, std::uint32_t>> histogram;  // sorted by class
  double mean_distance = 0.0;

  friend bool operator==(const VoteResult&, const VoteResult&) = default;
};

// Unweighted majority vote. Ties: smaller summed distance, then lower class index.
inline VoteResult vote(const SupportIndex& index, const NeighborList& neighbors) {
  struct Tally {
    ClassId cls;
    std::uint32_t count;
    double dist_sum;
  };
  std::vector<Tally> tallies;
  double total = 0.0;
  for (std::size_t j = 0; j < neighbors.size(); ++j) {
    const ClassId c = index.class_of(neighbors.indices[j]);
    const double d = neighbors.distances[j];
    total += d;
    auto it = std::find_if(tallies.begin(), tallies.end(), [c](const Tally& t) { return t.cls == c; });
    if (it == tallies.end()) {
      tallies.push_back({c, 1, d});
    } else {
      ++it->count;
      it->dist_sum += d;
    }
  }
  std::sort(tallies.begin(), tallies.end(), [](const Tally& a, const Tally& b) { return a.cls < b.cls; });

  VoteResult r;
  const Tally* best = nullptr;
  for (const auto& t : tallies) {
    r.histogram.emplace_back(t.cls, t.count);
    if (!best || t.count > best->count || (t.count == best->count && t.dist_sum < best->dist_sum)) best = &t;
  }
  r.predicted_class = best ? best->cls : 0;
  r.mean_distance = neighbors.size() ? total / static_cast<double>(neighbors.size()) : 0.0;
  return r;
}

inline VoteResult classify(const SupportIndex& index, std::span<const float> vec, std::size_t k) {
  return vote(index, query(index, vec, k));
}

// Element-wise identical to classify; output order follows input order for any worker count.
inline std::vector<VoteResult> classify_batch(const SupportIndex& index, QueryBlock queries, std::size_t k,
                                              std::size_t workers = 1) {
  auto neighbors = query_batch(index, queries, k, workers);
  std::vector<VoteResult> out(neighbors.size());
  for (std::size_t i = 0; i < neighbors.size(); ++i) out[i] = vote(index, neighbors[i]);
  return out;
}

// Hart's condensed nearest neighbour. Presentation order is a seeded shuffle;
// passes repeat until one adds nothing. The returned index keeps the retained
// rows in their original order.
//
// Consistency (1-NN over the result labels every original vector correctly)
// holds unless two identical vectors carry different classes.
inline SupportIndex condense(const SupportIndex& index, std::uint64_t seed) {
  const std::size_t n = index.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Xoshiro256 rng(seed);
  shuffle(order, rng);

  std::vector<bool> kept(n, false);
  std::vector<std::size_t> store;  // kept positions in ascending order
  auto nearest_class = [&](std::size_t i) {
    double best = 0;
    std::size_t best_pos = 0;
    bool any = false;
    const auto v = index.vector(i);
    for (auto p : store) {
      const double d = squared_l2(v, index.vector(p));
      if (!any || d < best) {
        best = d;
        best_pos = p;
        any = true;
      }
    }
    return index.class_of(best_pos);
  };
  auto keep = [&](std::size_t p) {
    kept[p] = true;
    store.insert(std::upper_bound(store.begin(), store.end(), p), p);
  };

  keep(order.front());
  for (bool changed = true; changed;) {
    changed = false;
    for (auto i : order) {
      if (kept[i]) continue;
      if (nearest_class(i) != index.class_of(i)) {
        keep(i);
        changed = true;
      }
    }
  }
  return index.subset(store);
}

}  // namespace srctrace
