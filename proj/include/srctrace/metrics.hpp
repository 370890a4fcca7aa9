#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "srctrace/error.hpp"
#include "srctrace/knn.hpp"

namespace srctrace {

// ---------------------------------------------------------------------------
// Macro F1
// ---------------------------------------------------------------------------

struct ClassScore {
  ClassId cls = 0;
  std::size_t support = 0;  // occurrences in truth
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct F1Report {
  std::vector<ClassScore> per_class;  // reporting set = truth ∪ predicted, ascending class
  double macro_f1 = 0.0;
  std::size_t samples = 0;

  const ClassScore* find(ClassId c) const {
    auto it = std::lower_bound(per_class.begin(), per_class.end(), c,
                               [](const ClassScore& s, ClassId v) { return s.cls < v; });
    return it != per_class.end() && it->cls == c ? &*it : nullptr;
  }
};

// One-vs-rest F1 per class, unweighted mean over classes seen in either
// input. A class with P + R = 0 scores 0.
inline F1Report macro_f1(std::span<const ClassId> truth, std::span<const ClassId> predicted) {
  if (truth.size() != predicted.size()) {
    throw AlignmentError("truth has " + std::to_string(truth.size()) + " labels, predictions " +
                         std::to_string(predicted.size()));
  }
  if (truth.empty()) throw AlignmentError("macro F1 of an empty sample");
  std::map<ClassId, ClassScore> scores;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto& t = scores[truth[i]];
    auto& p = scores[predicted[i]];
    t.cls = truth[i];
    p.cls = predicted[i];
    ++t.support;
    if (truth[i] == predicted[i]) {
      ++t.true_positives;
    } else {
      ++t.false_negatives;
      ++p.false_positives;
    }
  }
  F1Report r;
  r.samples = truth.size();
  double sum = 0.0;
  for (auto& [c, s] : scores) {
    const auto tp = static_cast<double>(s.true_positives);
    const double pp = tp + static_cast<double>(s.false_positives);
    const double ap = tp + static_cast<double>(s.false_negatives);
    s.precision = pp > 0 ? tp / pp : 0.0;
    s.recall = ap > 0 ? tp / ap : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    sum += s.f1;
    r.per_class.push_back(s);
  }
  r.macro_f1 = sum / static_cast<double>(r.per_class.size());
  return r;
}

// F1 of the positive class of a binary decision.
inline double binary_f1(std::span<const std::uint8_t> truth, std::span<const std::uint8_t> predicted) {
  if (truth.size() != predicted.size()) throw AlignmentError("binary F1 inputs differ in length");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool t = truth[i] != 0, p = predicted[i] != 0;
    tp += t && p;
    fp += !t && p;
    fn += t && !p;
  }
  const double denom = 2.0 * static_cast<double>(tp) + static_cast<double>(fp) + static_cast<double>(fn);
  return denom > 0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
}

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::size_t num_classes = 0;
  std::vector<std::uint64_t> counts;

  std::uint64_t at(ClassId truth, ClassId predicted) const { return counts[truth * num_classes + predicted]; }
};

inline ConfusionMatrix confusion_matrix(std::span<const ClassId> truth, std::span<const ClassId> predicted,
                                        std::size_t num_classes) {
  if (truth.size() != predicted.size()) throw AlignmentError("confusion inputs differ in length");
  ConfusionMatrix m{num_classes, std::vector<std::uint64_t>(num_classes * num_classes, 0)};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= num_classes || predicted[i] >= num_classes) throw RangeError("class index out of range");
    ++m.counts[truth[i] * num_classes + predicted[i]];
  }
  return m;
}

// ---------------------------------------------------------------------------
// Neighbour purity
// ---------------------------------------------------------------------------

struct NeighborPurityMatrix {
  std::vector<std::string> classes;
  std::size_t k = 0;
  std::vector<std::uint64_t> samples;  // per source class
  std::vector<std::uint64_t> counts;   // C x C neighbour counts, row = source class
  std::vector<double> fraction;        // counts / (k * samples[row])

  std::size_t size() const { return classes.size(); }
  double at(std::size_t from, std::size_t to) const { return fraction[from * classes.size() + to]; }
  std::uint64_t count(std::size_t from, std::size_t to) const { return counts[from * classes.size() + to]; }
};

inline NeighborPurityMatrix purity_from_counts(std::vector<std::string> classes, std::size_t k,
                                               std::vector<std::uint64_t> samples, std::vector<std::uint64_t> counts) {
  const std::size_t c = classes.size();
  if (c == 0) throw RangeError("purity matrix needs at least one class");
  if (samples.size() != c || counts.size() != c * c) throw AlignmentError("purity counts have the wrong shape");
  NeighborPurityMatrix m{std::move(classes), k, std::move(samples), std::move(counts), {}};
  m.fraction.assign(c * c, 0.0);
  for (std::size_t a = 0; a < c; ++a) {
    if (m.samples[a] == 0) throw LabelError("class " + m.classes[a] + " has no samples");
    const double denom = static_cast<double>(k) * static_cast<double>(m.samples[a]);
    for (std::size_t b = 0; b < c; ++b) m.fraction[a * c + b] = static_cast<double>(m.counts[a * c + b]) / denom;
  }
  return m;
}

// For every support sample, its k nearest other samples (self excluded),
// tallied by (own class, neighbour class). Integer counts make the result
// independent of worker count.
inline NeighborPurityMatrix neighbor_purity(const SupportIndex& index, std::size_t k = kDefaultK,
                                            std::size_t workers = 1) {
  const std::size_t c = index.num_classes();
  std::vector<std::uint64_t> samples(c, 0);
  for (auto cls : index.classes()) ++samples[cls];
  std::vector<std::size_t> self(index.size());
  std::iota(self.begin(), self.end(), std::size_t{0});
  const auto lists = query_batch(index, QueryBlock{index.vectors(), index.dim()}, k, workers, self);
  std::vector<std::uint64_t> counts(c * c, 0);
  for (std::size_t i = 0; i < lists.size(); ++i) {
    const auto from = index.class_of(i);
    for (auto j : lists[i].indices) ++counts[from * c + index.class_of(j)];
  }
  std::vector<std::string> names(index.class_names().begin(), index.class_names().end());
  return purity_from_counts(std::move(names), k, std::move(samples), std::move(counts));
}

// Collapses a class-level matrix onto coarser groups (e.g. datasets).
// group_of[c] names the group of class c; groups come out sorted.
inline NeighborPurityMatrix group_purity(const NeighborPurityMatrix& m, std::span<const std::string> group_of) {
  if (group_of.size() != m.size()) throw AlignmentError("group_of must name one group per class");
  std::set<std::string> distinct(group_of.begin(), group_of.end());
  std::vector<std::string> groups(distinct.begin(), distinct.end());
  auto gi = [&](const std::string& g) {
    return static_cast<std::size_t>(std::lower_bound(groups.begin(), groups.end(), g) - groups.begin());
  };
  const std::size_t g = groups.size();
  std::vector<std::uint64_t> samples(g, 0), counts(g * g, 0);
  for (std::size_t a = 0; a < m.size(); ++a) {
    samples[gi(group_of[a])] += m.samples[a];
    for (std::size_t b = 0; b < m.size(); ++b) counts[gi(group_of[a]) * g + gi(group_of[b])] += m.count(a, b);
  }
  return purity_from_counts(std::move(groups), m.k, std::move(samples), std::move(counts));
}

// ---------------------------------------------------------------------------
// Layer x support-size sweeps
// ---------------------------------------------------------------------------

// Support setting of one sweep row: n samples per class, or a ratio of each class.
struct SupportSetting {
  bool is_ratio = false;
  std::size_t per_class = 0;
  double ratio = 0.0;

  static SupportSetting count(std::size_t n) { return {false, n, 0.0}; }
  static SupportSetting fraction(double r) { return {true, 0, r}; }

  // "10" for per-class counts, "0.8" for ratios.
  std::string label() const;

  friend bool operator==(const SupportSetting&, const SupportSetting&) = default;
  // Per-class counts ascending, then ratios ascending.
  friend bool operator<(const SupportSetting& a, const SupportSetting& b) {
    if (a.is_ratio != b.is_ratio) return !a.is_ratio;
    return a.is_ratio ? a.ratio < b.ratio : a.per_class < b.per_class;
  }
};

// Shortest %g representation that parses back to exactly v.
inline std::string format_number(double v) {
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string SupportSetting::label() const {
  return is_ratio ? format_number(ratio) : std::to_string(per_class);
}

// Integers >= 1 are per-class counts; values in (0, 1) are ratios.
inline SupportSetting parse_support_setting(const std::string& text) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw RangeError("bad support setting \"" + text + "\"");
  }
  if (used != text.size() || !std::isfinite(v) || v <= 0) throw RangeError("bad support setting \"" + text + "\"");
  if (v < 1) return SupportSetting::fraction(v);
  if (v != std::floor(v)) throw RangeError("per-class support must be an integer: \"" + text + "\"");
  return SupportSetting::count(static_cast<std::size_t>(v));
}

struct SweepResult {
  std::uint32_t layer = 0;
  SupportSetting setting;
  std::uint64_t seed = 0;
  double macro_f1 = 0.0;
};

struct SweepCell {
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::size_t n = 0;
};

struct SweepTable {
  std::vector<std::uint32_t> layers;     // columns, ascending
  std::vector<SupportSetting> settings;  // rows, ascending
  std::vector<std::uint64_t> seeds;      // per-cell seed multiset, ascending
  std::vector<SweepCell> cells;          // settings x layers, row-major
  std::vector<double> column_mean;       // per layer, mean of the row means

  const SweepCell& cell(std::size_t row, std::size_t col) const { return cells[row * layers.size() + col]; }
};

inline SweepCell summarize(std::span<const double> values) {
  SweepCell c;
  c.n = values.size();
  if (values.empty()) return c;
  double sum = 0;
  for (double v : values) sum += v;
  const auto n = static_cast<double>(values.size());
  c.mean = sum / n;
  // second pass corrects the rounding of the first, so constant input gives an exact mean
  double residual = 0;
  for (double v : values) residual += v - c.mean;
  c.mean += residual / n;
  double sq = 0;
  for (double v : values) sq += (v - c.mean) * (v - c.mean);
  c.stddev = std::sqrt(sq / n);
  return c;
}

// Mean and population standard deviation per (setting, layer) cell. Every
// cell must hold the same seed multiset and every combination must be present.
inline SweepTable aggregate_sweep(std::span<const SweepResult> results) {
  if (results.empty()) throw CoverageError("no sweep results");
  std::set<std::uint32_t> layer_set;
  std::set<SupportSetting> setting_set;
  for (const auto& r : results) {
    layer_set.insert(r.layer);
    setting_set.insert(r.setting);
  }
  SweepTable t;
  t.layers.assign(layer_set.begin(), layer_set.end());
  t.settings.assign(setting_set.begin(), setting_set.end());

  // (seed, f1) pairs per cell, sorted so the sums do not depend on input order.
  std::vector<std::vector<std::pair<std::uint64_t, double>>> bins(t.layers.size() * t.settings.size());
  for (const auto& r : results) {
    const auto row = static_cast<std::size_t>(std::lower_bound(t.settings.begin(), t.settings.end(), r.setting) - t.settings.begin());
    const auto col = static_cast<std::size_t>(std::lower_bound(t.layers.begin(), t.layers.end(), r.layer) - t.layers.begin());
    bins[row * t.layers.size() + col].emplace_back(r.seed, r.macro_f1);
  }
  for (auto& b : bins) std::sort(b.begin(), b.end());

  auto seeds_of = [](const std::vector<std::pair<std::uint64_t, double>>& b) {
    std::vector<std::uint64_t> s;
    for (const auto& [seed, f1] : b) s.push_back(seed);
    return s;
  };
  t.seeds = seeds_of(bins.front());
  for (std::size_t row = 0; row < t.settings.size(); ++row) {
    for (std::size_t col = 0; col < t.layers.size(); ++col) {
      const auto& b = bins[row * t.layers.size() + col];
      const std::string where = "layer " + std::to_string(t.layers[col]) + ", setting " + t.settings[row].label();
      if (b.empty()) throw CoverageError("no results for " + where);
      if (seeds_of(b) != t.seeds) throw CoverageError("seed coverage of " + where + " differs from other cells");
      std::vector<double> values;
      for (const auto& [seed, f1] : b) values.push_back(f1);
      t.cells.push_back(summarize(values));
    }
  }
  t.column_mean.assign(t.layers.size(), 0.0);
  for (std::size_t col = 0; col < t.layers.size(); ++col) {
    double sum = 0;
    for (std::size_t row = 0; row < t.settings.size(); ++row) sum += t.cell(row, col).mean;
    t.column_mean[col] = sum / static_cast<double>(t.settings.size());
  }
  return t;
}

}  // namespace srctrace
