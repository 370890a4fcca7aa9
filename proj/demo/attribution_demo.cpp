// Walks through the library on synthetic clusters: split, classify, score
// unseen checkpoints, condense the support set.

#include <cstdio>
#include <vector>

#include "srctrace/srctrace.hpp"
#include "srctrace/synthetic.hpp"

using namespace srctrace;

namespace {

std::vector<float> gather(const Corpus& c, const std::vector<std::size_t>& rows) {
  std::vector<float> out;
  for (auto r : rows) {
    auto v = c.row(r);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

}  // namespace

int main() {
  synthetic::ClusterSpec spec;
  spec.classes = 12;
  spec.per_class = 100;
  spec.dim = 16;
  const auto fx = synthetic::make_clusters(spec);
  const auto corpus = build_corpus(fx.records, fx.embeddings, LabelField::checkpoint);
  std::printf("%zu samples, %zu checkpoints, dim %u\n", corpus.size(), corpus.num_classes(), corpus.embeddings.dim);

  // closed-set attribution on an 80:20 split
  const std::vector<double> ratios{0.8, 0.2};
  const auto split = ratio_split(corpus, ratios, /*seed=*/0);
  const auto support = split.rows_with(Role::support);
  const auto test = split.rows_with(Role::test);
  const auto index = build_index(corpus, std::span<const std::size_t>(support));
  const auto queries = gather(corpus, test);
  const auto votes = classify_batch(index, {queries, corpus.embeddings.dim}, kDefaultK, /*workers=*/0);
  std::vector<ClassId> truth, pred;
  for (std::size_t i = 0; i < test.size(); ++i) {
    truth.push_back(corpus.labels[test[i]]);
    pred.push_back(votes[i].predicted_class);
  }
  std::printf("attribution: macro F1 %.4f on %zu test samples\n", macro_f1(truth, pred).macro_f1, test.size());

  // unseen checkpoints: hold one per dataset out, calibrate on validation
  const auto ood_split = ood_holdout(corpus, /*per_dataset=*/1, /*seed=*/0);
  const auto ood_index = build_index(corpus, std::span<const std::size_t>(ood_split.rows_with(Role::support)));
  const auto val = ood_split.rows_with(Role::validation);
  const auto val_q = gather(corpus, val);
  const auto val_scores = score_batch(ood_index, {val_q, corpus.embeddings.dim}, kDefaultK);
  std::vector<double> in_domain, unseen;
  for (std::size_t i = 0; i < val.size(); ++i) (ood_split.is_ood(val[i]) ? unseen : in_domain).push_back(val_scores[i]);
  const auto cal = calibrate(in_domain, unseen);
  std::printf("OOD: threshold %.3f at EER %.4f (%zu in-domain, %zu unseen validation samples)\n", cal.threshold, cal.eer,
              cal.n_in_domain, cal.n_ood);

  const auto ood_test = ood_split.rows_with(Role::test);
  const auto test_q = gather(corpus, ood_test);
  const auto test_scores = score_batch(ood_index, {test_q, corpus.embeddings.dim}, kDefaultK);
  std::vector<std::uint8_t> is_ood, flagged;
  for (std::size_t i = 0; i < ood_test.size(); ++i) {
    is_ood.push_back(ood_split.is_ood(ood_test[i]));
    flagged.push_back(decide(cal, {corpus.records[ood_test[i]].sample_id, test_scores[i]}).is_ood);
  }
  std::printf("OOD: F1 %.4f on %zu test samples\n", binary_f1(is_ood, flagged), ood_test.size());

  // prototype selection
  const auto reduced = condense(index, /*seed=*/0);
  std::printf("condensed support: %zu -> %zu vectors\n", index.size(), reduced.size());
  return 0;
}
