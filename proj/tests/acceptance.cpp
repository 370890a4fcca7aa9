// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>

#include "oracles.hpp"
#include "srctrace/srctrace.hpp"
#include "srctrace/synthetic.hpp"

using namespace srctrace;

namespace {

int failures = 0;

void verdict(int id, bool ok, const std::string& title, const std::string& detail) {
  std::printf("criterion %d %s  %s: %s\n", id, ok ? "PASS" : "FAIL", title.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += ok ? 0 : 1;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<float> rows_of(const Corpus& c, std::span<const std::size_t> rows) {
  std::vector<float> out;
  for (auto r : rows) {
    auto v = c.row(r);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

Corpus fixture_corpus(const synthetic::ClusterSpec& spec) {
  auto fx = synthetic::make_clusters(spec);
  return build_corpus(fx.records, fx.embeddings, LabelField::checkpoint);
}

double min_centroid_gap(const synthetic::ClusterFixture& fx) {
  double best = INFINITY;
  for (std::size_t a = 0; a < fx.centroids.size(); ++a) {
    for (std::size_t b = a + 1; b < fx.centroids.size(); ++b) best = std::min(best, synthetic::distance(fx.centroids[a], fx.centroids[b]));
  }
  return best;
}

// 1 --------------------------------------------------------------------------
void knn_oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  Xoshiro256 rng(20240601);
  const int instances = 60;
  std::size_t queries_checked = 0, mismatches = 0;
  for (int inst = 0; inst < instances; ++inst) {
    const auto n = static_cast<std::size_t>(21 + rng.below(2000 - 21 + 1));
    const auto dim = static_cast<std::uint32_t>(1 + rng.below(64));
    const bool coarse = inst % 3 == 0;  // small integer grid: many exact distance ties
    oracle::Points pts{dim, std::vector<float>(n * dim)};
    for (auto& x : pts.values) x = coarse ? static_cast<float>(rng.below(4)) : static_cast<float>(rng.normal());
    std::vector<ClassId> cls(n);
    for (auto& c : cls) c = static_cast<ClassId>(rng.below(10));
    std::vector<std::string> ids(n, "x");
    std::vector<std::string> names(10, "c");
    SupportIndex index(dim, pts.values, cls, ids, names);

    const std::size_t nq = 20;
    std::vector<float> qs(nq * dim);
    for (auto& x : qs) x = coarse ? static_cast<float>(rng.below(4)) : static_cast<float>(rng.normal());
    for (std::size_t k : {1u, 5u, 21u}) {
      const auto batch = query_batch(index, {qs, dim}, k, 4);
      for (std::size_t q = 0; q < nq; ++q) {
        ++queries_checked;
        if (batch[q].indices != oracle::knn(pts, qs.data() + q * dim, k)) ++mismatches;
      }
    }
  }
  const double secs = seconds_since(t0);
  verdict(1, mismatches == 0 && secs < 30.0, "kNN oracle equivalence",
          std::to_string(instances) + " instances (seed 20240601, N<=2000, dim<=64), " + std::to_string(queries_checked) +
              " queries x k in {1,5,21}, " + std::to_string(mismatches) + " mismatches, " + fmt("%.2f s", secs));
}

// 2 --------------------------------------------------------------------------
struct AttributionOutcome {
  double gap = 0;  // closest centroid pair, in units of sigma
  double f1 = 0;
};

AttributionOutcome attribute_80_20(const synthetic::ClusterSpec& spec) {
  const auto fx = synthetic::make_clusters(spec);
  const auto corpus = build_corpus(fx.records, fx.embeddings, LabelField::checkpoint);
  const std::vector<double> ratios{0.8, 0.2};
  const auto split = ratio_split(corpus, ratios, 0);
  const auto support = split.rows_with(Role::support);
  const auto test = split.rows_with(Role::test);
  const auto index = build_index(corpus, std::span<const std::size_t>(support));
  const auto q = rows_of(corpus, test);
  const auto votes = classify_batch(index, {q, corpus.embeddings.dim}, 21, 0);
  std::vector<ClassId> truth, pred;
  for (std::size_t i = 0; i < test.size(); ++i) {
    truth.push_back(corpus.labels[test[i]]);
    pred.push_back(votes[i].predicted_class);
  }
  return {min_centroid_gap(fx) / spec.sigma, macro_f1(truth, pred).macro_f1};
}

void attribution_fixture() {
  const auto t0 = std::chrono::steady_clock::now();
  synthetic::ClusterSpec spec;  // 40 x 200, dim 32, separation >= 8 sigma
  const auto wide = attribute_80_20(spec);
  spec.centroid_scale = 1.0;  // centroids packed so the closest pair sits near the 8 sigma floor
  const auto tight = attribute_80_20(spec);
  const double secs = seconds_since(t0);
  const bool ok = wide.gap >= 8.0 && tight.gap >= 8.0 && wide.f1 >= 0.95 && tight.f1 >= 0.95 && secs < 10.0;
  verdict(2, ok, "synthetic attribution fixture",
          "40 classes x 200, dim 32, 80:20, k=21: macro F1 " + fmt("%.4f", wide.f1) + " (min gap " + fmt("%.2f", wide.gap) +
              " sigma), " + fmt("%.4f", tight.f1) + " (min gap " + fmt("%.2f", tight.gap) + " sigma), " +
              fmt("%.2f s", secs));
}

// 3 --------------------------------------------------------------------------
struct OodOutcome {
  double f1 = 0;
  double eer = 0;
  std::size_t held_out = 0;
};

OodOutcome run_ood(const Corpus& corpus, std::size_t k) {
  const auto split = ood_holdout(corpus, 1, 0);
  const auto support = split.rows_with(Role::support);
  const auto val = split.rows_with(Role::validation);
  const auto test = split.rows_with(Role::test);
  const auto index = build_index(corpus, std::span<const std::size_t>(support));
  const auto dim = corpus.embeddings.dim;
  const auto vq = rows_of(corpus, val);
  const auto vs = score_batch(index, {vq, dim}, k, 0);
  std::vector<double> id_scores, ood_scores;
  for (std::size_t i = 0; i < val.size(); ++i) (split.is_ood(val[i]) ? ood_scores : id_scores).push_back(vs[i]);
  const auto cal = calibrate(id_scores, ood_scores, k);
  const auto tq = rows_of(corpus, test);
  const auto ts = score_batch(index, {tq, dim}, k, 0);
  std::vector<std::uint8_t> truth, pred;
  for (std::size_t i = 0; i < test.size(); ++i) {
    truth.push_back(split.is_ood(test[i]) ? 1 : 0);
    pred.push_back(decide(cal, {"", ts[i]}).is_ood ? 1 : 0);
  }
  return {binary_f1(truth, pred), cal.eer, split.ood_checkpoints.size()};
}

void ood_fixture() {
  synthetic::ClusterSpec spec;
  spec.classes = 44;  // 40 in-domain + 4 held out (one per dataset)
  const auto fx = synthetic::make_clusters(spec);
  const double gap = min_centroid_gap(fx) / spec.sigma;
  const auto good = run_ood(build_corpus(fx.records, fx.embeddings, LabelField::checkpoint), 21);
  auto packed = spec;
  packed.centroid_scale = 1.0;  // closest pair near the 8 sigma floor
  const auto packed_fx = synthetic::make_clusters(packed);
  const double packed_gap = min_centroid_gap(packed_fx) / spec.sigma;
  const auto tight = run_ood(build_corpus(packed_fx.records, packed_fx.embeddings, LabelField::checkpoint), 21);

  auto flat = spec;
  flat.min_separation = 0;  // every cluster at the origin: OOD and in-domain identical
  flat.centroid_scale = 0;
  const auto degenerate = run_ood(fixture_corpus(flat), 21);

  const bool ok = good.held_out == 4 && gap >= 8.0 && good.f1 >= 0.9 && good.eer <= 0.05 && packed_gap >= 8.0 &&
                  tight.f1 >= 0.9 && tight.eer <= 0.05 && std::abs(degenerate.eer - 0.5) <= 0.05;
  verdict(3, ok, "synthetic OOD fixture",
          std::to_string(good.held_out) + " held-out clusters, min gap " + fmt("%.2f", gap) + " sigma, k=21: OOD F1 " +
              fmt("%.4f", good.f1) + ", EER " + fmt("%.4f", good.eer) + "; min gap " + fmt("%.2f", packed_gap) +
              " sigma: OOD F1 " + fmt("%.4f", tight.f1) + ", EER " + fmt("%.4f", tight.eer) + "; identical distributions: EER " +
              fmt("%.4f", degenerate.eer));
}

// 4 --------------------------------------------------------------------------
void eer_optimality() {
  Xoshiro256 rng(77);
  int bad = 0;
  const int sets = 100;
  for (int t = 0; t < sets; ++t) {
    std::vector<double> in(1 + rng.below(40)), ood(1 + rng.below(40));
    const bool coarse = t % 2 == 0;
    for (auto& x : in) x = coarse ? static_cast<double>(rng.below(8)) : rng.normal() + 1.0;
    for (auto& x : ood) x = coarse ? static_cast<double>(rng.below(8) + rng.below(3)) : rng.normal() + 2.0;
    const auto want = oracle::eer(in, ood);
    const auto got = calibrate(in, ood);
    const double got_gap = std::abs(got.far - got.frr);
    bool ok = std::abs(got_gap - want.gap) <= 1e-12 && std::abs(got.eer - want.eer) <= 1e-12;
    for (double g : want.gaps) ok = ok && got_gap <= g + 1e-12;
    ok = ok && (std::isinf(want.threshold) ? got.threshold == want.threshold
                                           : std::abs(got.threshold - want.threshold) <= 1e-12 * std::max(1.0, std::abs(want.threshold)));
    bad += ok ? 0 : 1;
  }
  verdict(4, bad == 0, "EER calibration optimality",
          std::to_string(sets) + " random score sets (seed 77) against an exhaustive candidate scan, " + std::to_string(bad) +
              " disagreements");
}

// 5 --------------------------------------------------------------------------
void macro_f1_cases() {
  const std::vector<ClassId> t{0, 0, 1, 1}, p{0, 1, 1, 1}, a(5, 0), b(5, 1);
  const double hand = macro_f1(t, p).macro_f1;
  const double ident = macro_f1(t, t).macro_f1;
  const double disjoint = macro_f1(a, b).macro_f1;
  const bool ok = std::abs(hand - 0.7333333333333333) <= 1e-9 && ident == 1.0 && disjoint == 0.0;
  verdict(5, ok, "macro F1 hand cases",
          "[A,A,B,B]/[A,B,B,B] -> " + fmt("%.10f", hand) + ", identity -> " + fmt("%.1f", ident) + ", disjoint -> " +
              fmt("%.1f", disjoint));
}

// 6 --------------------------------------------------------------------------
void condensed_consistency() {
  struct Case {
    std::string name;
    SupportIndex index;
  };
  std::vector<Case> cases;
  {
    auto c = fixture_corpus(synthetic::ClusterSpec{});
    const std::vector<double> ratios{0.8, 0.2};
    const auto support = ratio_split(c, ratios, 0).rows_with(Role::support);
    cases.push_back({"attribution support", build_index(c, std::span<const std::size_t>(support))});
  }
  {
    synthetic::ClusterSpec s;
    s.classes = 12;
    s.per_class = 60;
    s.dim = 6;
    s.min_separation = 1.5;  // overlapping clusters
    s.centroid_scale = 1.0;
    cases.push_back({"overlapping clusters", build_index(fixture_corpus(s))});
  }
  {
    synthetic::ClusterSpec s;
    s.classes = 1;
    s.per_class = 100;
    s.dim = 4;
    cases.push_back({"single class", build_index(fixture_corpus(s))});
  }
  bool ok = true;
  std::string detail;
  for (const auto& [name, index] : cases) {
    const auto reduced = condense(index, 0);
    oracle::Points pts{index.dim(), std::vector<float>(index.vectors().begin(), index.vectors().end())};
    std::vector<std::uint32_t> cls(index.classes().begin(), index.classes().end());
    // source rows of the reduced set index the corpus; map them to positions in `index`
    std::vector<std::size_t> pos;
    for (auto src : reduced.source_rows()) {
      auto it = std::find(index.source_rows().begin(), index.source_rows().end(), src);
      pos.push_back(static_cast<std::size_t>(it - index.source_rows().begin()));
    }
    const double consistency = oracle::one_nn_consistency(pts, cls, pos);
    ok = ok && consistency == 1.0 && reduced.size() < index.size();
    detail += (detail.empty() ? "" : "; ") + name + " " + std::to_string(index.size()) + " -> " +
              std::to_string(reduced.size()) + " at " + fmt("%.4f", consistency);
  }
  verdict(6, ok, "condensed NN consistency", detail);
}

// 7 --------------------------------------------------------------------------
void determinism() {
  synthetic::ClusterSpec s;
  s.classes = 12;
  s.per_class = 50;
  s.dim = 8;
  s.min_separation = 2.0;
  s.centroid_scale = 1.5;
  const auto corpus = fixture_corpus(s);
  bool ok = true;

  std::vector<SplitSpec> specs(4);
  specs[0].kind = SplitKind::ratio_split;
  specs[0].ratios = {0.8, 0.1, 0.1};
  specs[1].kind = SplitKind::per_class_count;
  specs[1].per_class = 10;
  specs[2].kind = SplitKind::ood_holdout;
  specs[2].per_dataset = 1;
  specs[2].ratios = {0.8, 0.1, 0.1};
  specs[3].kind = SplitKind::leave_n_out;
  specs[3].leave = {1, false};
  for (auto& spec : specs) {
    spec.seed = 3;
    ok = ok && serialize_split(corpus, make_split(corpus, spec)) == serialize_split(corpus, make_split(corpus, spec));
  }

  const auto index = build_index(corpus);
  const std::vector<float> q(corpus.embeddings.matrix);
  const auto serial = classify_batch(index, {q, corpus.embeddings.dim}, 21, 1);
  const auto parallel = classify_batch(index, {q, corpus.embeddings.dim}, 21, 8);
  ok = ok && serial == parallel;

  const auto p1 = neighbor_purity(index, 21, 1);
  const auto p8 = neighbor_purity(index, 21, 8);
  ok = ok && purity_json(p1).dump() == purity_json(p8).dump() && purity_csv(p1) == purity_csv(p8);

  std::vector<SweepResult> results;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    results.push_back({4, SupportSetting::count(10), seed, 0.5 + 0.1 * static_cast<double>(seed)});
  }
  ok = ok && sweep_csv(aggregate_sweep(results)) == sweep_csv(aggregate_sweep(results));
  verdict(7, ok, "determinism and portability",
          "4 split kinds serialized twice, classify_batch 1 vs 8 workers over " + std::to_string(q.size() / corpus.embeddings.dim) +
              " queries, purity and sweep reports 1 vs 8 workers: " + (ok ? "byte-identical" : "differences found"));
}

}  // namespace

int main() {
  knn_oracle_equivalence();
  attribution_fixture();
  ood_fixture();
  eer_optimality();
  macro_f1_cases();
  condensed_consistency();
  determinism();
  std::printf("criterion 8 SKIP  protocol fidelity on real datasets: manual, needs the mounted corpora and extracted embeddings\n");
  std::printf("%s: %d failing criteria\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
  return failures == 0 ? 0 : 1;
}
