#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "srctrace/srctrace.hpp"

namespace srctrace::cli {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::vector<std::string> split_on(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, sep);) out.push_back(tok);
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw RangeError("bad " + what + ": \"" + s + "\"");
  return v;
}

// 1 - 0.8 prints as 0.19999999999999996 in split headers
double complement(double r) { return std::round((1.0 - r) * 1e12) / 1e12; }

std::size_t parse_count(const std::string& s, const std::string& what) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw RangeError("bad " + what + ": \"" + s + "\"");
  }
  return std::stoul(s);
}

void ensure_out(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::string seed_tag(std::uint64_t seed) { return "seed" + std::to_string(seed); }

// The embedding file for one layer: via the template, or the listed file whose header carries that layer.
fs::path layer_path(const RunConfig& cfg, std::uint32_t layer) {
  if (!cfg.embeddings_template.empty()) {
    auto t = cfg.embeddings_template;
    const auto pos = t.find("{layer}");
    if (pos == std::string::npos) throw RangeError("embeddings template lacks {layer}");
    t.replace(pos, 7, std::to_string(layer));
    if (!fs::exists(t)) throw CoverageError("missing embedding file for layer " + std::to_string(layer) + ": " + t);
    return t;
  }
  for (const auto& p : cfg.embeddings) {
    if (load_embeddings(p).layer_index == layer) return p;
  }
  throw CoverageError("no embedding file for layer " + std::to_string(layer));
}

// The single embedding file a non-sweep command works on.
fs::path primary_embeddings(const RunConfig& cfg) {
  if (!cfg.layers.empty()) {
    if (cfg.layers.size() != 1) throw RangeError("this command takes exactly one --layer");
    return layer_path(cfg, cfg.layers.front());
  }
  if (cfg.embeddings.size() != 1) throw RangeError("pass exactly one --embeddings file, or select one with --layer");
  return cfg.embeddings.front();
}

Corpus load_corpus(const RunConfig& cfg, const fs::path& embeddings) {
  auto records = load_manifest(cfg.manifest);
  auto set = load_embeddings(embeddings);
  return build_corpus(std::move(records), std::move(set), parse_target(cfg.target));
}

std::vector<float> gather_rows(const Corpus& corpus, std::span<const std::size_t> rows) {
  std::vector<float> out;
  out.reserve(rows.size() * corpus.embeddings.dim);
  for (auto r : rows) {
    auto v = corpus.row(r);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

struct Evaluation {
  F1Report report;
  std::size_t support = 0;
  std::size_t test = 0;
};

// Fits on support rows, classifies test rows, scores macro F1.
Evaluation evaluate_split(const Corpus& corpus, const SplitAssignment& split, std::size_t k, std::size_t threads,
                          bool condense_support, std::uint64_t seed) {
  const auto support = split.rows_with(Role::support);
  const auto test = split.rows_with(Role::test);
  if (support.empty()) throw EmptySupportError("split leaves no support samples");
  if (test.empty()) throw CoverageError("split leaves no test samples");
  auto index = build_index(corpus, std::span<const std::size_t>(support));
  if (condense_support) index = condense(index, seed);
  const auto queries = gather_rows(corpus, test);
  const auto votes = classify_batch(index, QueryBlock{queries, corpus.embeddings.dim}, k, threads);
  std::vector<ClassId> truth, predicted;
  for (std::size_t i = 0; i < test.size(); ++i) {
    truth.push_back(corpus.labels[test[i]]);
    predicted.push_back(votes[i].predicted_class);
  }
  return {macro_f1(truth, predicted), index.size(), test.size()};
}

}  // namespace

LabelTarget parse_target(const std::string& text) {
  if (text.rfind("relabel:", 0) == 0) return load_relabel_map(text.substr(8));
  if (auto f = parse_label_field(text)) return *f;
  throw RangeError("unknown target \"" + text + "\" (checkpoint, acoustic_model, vocoder, dataset, speaker, language, relabel:<path>)");
}

SplitSpec parse_split(const std::string& text, std::uint64_t seed, const std::string& group_by) {
  const auto parts = split_on(text, ':');
  if (parts.size() < 2) throw RangeError("bad split \"" + text + "\"");
  SplitSpec s;
  s.seed = seed;
  if (parts[0] == "ratio") {
    s.kind = SplitKind::ratio_split;
    for (std::size_t i = 1; i < parts.size(); ++i) s.ratios.push_back(parse_double(parts[i], "ratio"));
    if (s.ratios.size() == 1) s.ratios.push_back(complement(s.ratios[0]));
  } else if (parts[0] == "per-class" && parts.size() == 2) {
    s.kind = SplitKind::per_class_count;
    s.per_class = parse_count(parts[1], "per-class count");
  } else if (parts[0] == "leave-n-out" && parts.size() == 2) {
    s.kind = SplitKind::leave_n_out;
    s.leave = parts[1] == "half" ? LeaveCount::half_of_group() : LeaveCount{parse_count(parts[1], "N"), false};
    auto g = parse_label_field(group_by);
    if (!g) throw RangeError("unknown --group-by \"" + group_by + "\"");
    s.group_by = *g;
  } else {
    throw RangeError("bad split \"" + text + "\" (ratio:a[:b[:c]], per-class:n, leave-n-out:n|half)");
  }
  return s;
}

// ---------------------------------------------------------------------------

int cmd_ingest(const RunConfig& cfg, std::ostream& log) {
  if (cfg.embeddings.empty() && cfg.layers.empty()) throw RangeError("ingest needs at least one --embeddings file");
  const auto records = load_manifest(cfg.manifest);
  std::vector<fs::path> files = cfg.embeddings;
  for (auto l : cfg.layers) files.push_back(layer_path(cfg, l));

  ojson summary;
  summary["manifest"] = cfg.manifest.string();
  summary["samples"] = records.size();
  for (const auto& p : files) {
    const auto set = load_embeddings(p);
    if (set.count != records.size()) {
      throw AlignmentError(p.string() + " has " + std::to_string(set.count) + " rows, manifest has " +
                           std::to_string(records.size()) + " records");
    }
    summary["embeddings"].push_back(
        {{"path", p.string()}, {"extractor_id", set.extractor_id}, {"layer", set.layer_index}, {"dim", set.dim}});
    log << p.string() << ": " << set.extractor_id << " layer " << set.layer_index << ", dim " << set.dim << ", "
        << set.count << " rows\n";
  }

  struct DatasetStats {
    std::map<std::string, std::size_t> checkpoints;
    std::set<std::string> speakers, languages;
    std::size_t utts = 0;
  };
  std::map<std::string, DatasetStats> stats;
  for (const auto& r : records) {
    auto& s = stats[r.dataset];
    ++s.checkpoints[r.checkpoint];
    if (r.speaker) s.speakers.insert(*r.speaker);
    if (r.language) s.languages.insert(*r.language);
    ++s.utts;
  }
  log << "dataset\tcheckpoints\tspeakers\tlanguages\tutts\n";
  std::set<std::string> all_ckpts;
  for (const auto& [ds, s] : stats) {
    log << ds << "\t" << s.checkpoints.size() << "\t" << s.speakers.size() << "\t" << s.languages.size() << "\t"
        << s.utts << "\n";
    ojson d{{"dataset", ds},
            {"checkpoints", s.checkpoints.size()},
            {"speakers", s.speakers.size()},
            {"languages", s.languages.size()},
            {"utts", s.utts}};
    for (const auto& [c, n] : s.checkpoints) {
      d["per_checkpoint"][c] = n;
      all_ckpts.insert(c);
    }
    summary["datasets"].push_back(d);
  }
  log << "total\t" << all_ckpts.size() << "\t\t\t" << records.size() << "\n";
  if (!cfg.out.empty() && cfg.out != ".") {
    ensure_out(cfg.out);
    write_text(cfg.out / "ingest_summary.json", summary.dump(2) + "\n");
  }
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_attribute(const RunConfig& cfg, std::ostream& log) {
  if (cfg.seeds.empty()) throw RangeError("seeds must be non-empty");
  if (cfg.ks.size() != 1 || cfg.ks.front() < 1) throw RangeError("attribute takes a single k >= 1");
  const std::size_t k = cfg.ks.front();
  const auto corpus = load_corpus(cfg, primary_embeddings(cfg));
  ensure_out(cfg.out);

  std::string summary_csv = "run,macro_f1,support,test,classes\n";
  ojson runs = ojson::array();
  std::vector<double> f1s;
  auto run_one = [&](const std::string& tag, const SplitAssignment& split, std::uint64_t seed) {
    const auto ev = evaluate_split(corpus, split, k, cfg.threads, cfg.condense, seed);
    write_text(cfg.out / ("f1_" + tag + ".csv"), f1_csv(ev.report, corpus.class_names));
    summary_csv += tag + "," + format_number(ev.report.macro_f1) + "," + std::to_string(ev.support) + "," +
                   std::to_string(ev.test) + "," + std::to_string(ev.report.per_class.size()) + "\n";
    runs.push_back({{"run", tag},
                    {"macro_f1", ev.report.macro_f1},
                    {"support", ev.support},
                    {"test", ev.test},
                    {"split", to_json(split.spec)}});
    f1s.push_back(ev.report.macro_f1);
    log << tag << ": macro F1 " << fixed(ev.report.macro_f1) << " (" << ev.support << " support, " << ev.test
        << " test)\n";
  };

  if (!cfg.protocol.empty()) {
    run_one("protocol", load_split(cfg.protocol, corpus), cfg.seeds.front());
  } else {
    for (auto seed : cfg.seeds) {
      const auto split = make_split(corpus, parse_split(cfg.split, seed, cfg.group_by));
      write_split(corpus, split, cfg.out / ("split_" + seed_tag(seed) + ".jsonl"));
      run_one(seed_tag(seed), split, seed);
    }
  }
  const auto agg = summarize(f1s);
  write_text(cfg.out / "attribute_summary.csv", summary_csv);
  ojson doc;
  doc["target"] = corpus.target;
  doc["k"] = k;
  doc["classes"] = corpus.num_classes();
  doc["condensed"] = cfg.condense;
  doc["runs"] = runs;
  doc["macro_f1_mean"] = agg.mean;
  doc["macro_f1_std"] = agg.stddev;
  write_text(cfg.out / "attribute.json", doc.dump(2) + "\n");
  log << "mean macro F1 " << fixed(agg.mean) << " ± " << fixed(agg.stddev) << " over " << f1s.size() << " run(s)\n";
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_sweep(const RunConfig& cfg, std::ostream& log) {
  if (cfg.seeds.empty()) throw RangeError("seeds must be non-empty");
  if (cfg.ks.size() != 1) throw RangeError("sweep takes a single k");
  if (cfg.grid.empty()) throw RangeError("support grid is empty");
  std::vector<SupportSetting> grid;
  for (const auto& g : cfg.grid) grid.push_back(parse_support_setting(g));

  // Layer -> file. Explicit layers need a template or matching headers; otherwise every listed file is a column.
  std::vector<std::pair<std::uint32_t, fs::path>> files;
  if (!cfg.layers.empty()) {
    for (auto l : cfg.layers) files.emplace_back(l, layer_path(cfg, l));
  } else {
    for (const auto& p : cfg.embeddings) files.emplace_back(load_embeddings(p).layer_index, p);
  }
  if (files.empty()) throw CoverageError("sweep needs --embeddings files or --layer with --embeddings-template");
  ensure_out(cfg.out);

  const auto records = load_manifest(cfg.manifest);
  const auto target = parse_target(cfg.target);
  std::vector<SweepResult> results;
  std::string runs_csv = "layer,setting,seed,macro_f1\n";
  for (const auto& [layer, path] : files) {
    auto corpus = build_corpus(records, load_embeddings(path), target);
    for (const auto& setting : grid) {
      for (auto seed : cfg.seeds) {
        SplitAssignment split;
        if (setting.is_ratio) {
          const std::vector<double> ratios{setting.ratio, complement(setting.ratio)};
          split = ratio_split(corpus, ratios, seed);
        } else {
          split = per_class_support(corpus, setting.per_class, seed);
        }
        const auto ev = evaluate_split(corpus, split, cfg.ks.front(), cfg.threads, false, seed);
        results.push_back({layer, setting, seed, ev.report.macro_f1});
        runs_csv += std::to_string(layer) + "," + setting.label() + "," + std::to_string(seed) + "," +
                    format_number(ev.report.macro_f1) + "\n";
        log << "layer " << layer << ", support " << setting.label() << ", seed " << seed << ": macro F1 "
            << fixed(ev.report.macro_f1) << "\n";
      }
    }
  }
  const auto table = aggregate_sweep(results);
  write_text(cfg.out / "sweep_runs.csv", runs_csv);
  write_text(cfg.out / "sweep.csv", sweep_csv(table));
  write_text(cfg.out / "sweep.txt", sweep_text(table));
  log << sweep_text(table);
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_ood(const RunConfig& cfg, std::ostream& log) {
  if (cfg.seeds.empty()) throw RangeError("seeds must be non-empty");
  if (cfg.ks.empty()) throw RangeError("k list is empty");
  const auto corpus = load_corpus(cfg, primary_embeddings(cfg));
  const auto dim = corpus.embeddings.dim;
  ensure_out(cfg.out);

  std::vector<OodF1Row> f1_rows;
  std::size_t calibrations = 0;
  auto run_one = [&](const std::string& tag, const SplitAssignment& split, std::uint64_t seed) {
    const auto support = split.rows_with(Role::support);
    const auto validation = split.rows_with(Role::validation);
    const auto test = split.rows_with(Role::test);
    if (support.empty()) throw EmptySupportError("OOD split leaves no support samples");
    const bool any_ood = std::any_of(validation.begin(), validation.end(), [&](auto r) { return split.is_ood(r); });
    if (!any_ood) {
      log << tag << ": no OOD checkpoints held out, nothing to calibrate\n";
      return;
    }
    const auto index = build_index(corpus, std::span<const std::size_t>(support));
    const auto val_q = gather_rows(corpus, validation);
    const auto test_q = gather_rows(corpus, test);
    for (auto k : cfg.ks) {
      const auto val_scores = score_batch(index, QueryBlock{val_q, dim}, k, cfg.threads);
      std::vector<double> id_scores, ood_scores;
      for (std::size_t i = 0; i < validation.size(); ++i) {
        (split.is_ood(validation[i]) ? ood_scores : id_scores).push_back(val_scores[i]);
      }
      const auto cal = calibrate(id_scores, ood_scores, k);
      ++calibrations;
      ojson prov;
      prov["run"] = tag;
      prov["split"] = to_json(split.spec);
      prov["ood_validation_checkpoints"] = split.ood_validation_checkpoints;
      prov["target"] = corpus.target;
      const std::string ktag = "k" + std::to_string(k) + "_" + tag;
      write_text(cfg.out / ("ood_calibration_" + ktag + ".json"), to_json(cal, prov).dump(2) + "\n");

      const auto test_scores = score_batch(index, QueryBlock{test_q, dim}, k, cfg.threads);
      std::string dec_csv = "sample_id,dataset,checkpoint,truth_ood,is_ood,mean_distance,margin\n";
      std::vector<std::uint8_t> truth, pred;
      std::map<std::string, std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>>> per_ds;
      std::vector<std::size_t> id_rows;  // positions in test of in-domain samples
      for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& rec = corpus.records[test[i]];
        const auto d = decide(cal, OodScore{rec.sample_id, test_scores[i]});
        const std::uint8_t t = split.is_ood(test[i]) ? 1 : 0;
        truth.push_back(t);
        pred.push_back(d.is_ood ? 1 : 0);
        dec_csv += csv_field(rec.sample_id) + "," + csv_field(rec.dataset) + "," + csv_field(rec.checkpoint) + "," +
                   std::to_string(t) + "," + (d.is_ood ? "1" : "0") + "," + format_number(d.mean_distance) + "," +
                   format_number(d.margin) + "\n";
        if (!t) id_rows.push_back(i);
      }
      write_text(cfg.out / ("ood_decisions_" + ktag + ".csv"), dec_csv);

      // Per dataset: that dataset's OOD test samples against every in-domain test sample.
      std::set<std::string> ood_datasets;
      for (auto r : test) {
        if (split.is_ood(r)) ood_datasets.insert(corpus.records[r].dataset);
      }
      for (const auto& ds : ood_datasets) {
        std::vector<std::uint8_t> t, p;
        for (std::size_t i = 0; i < test.size(); ++i) {
          if (truth[i] && corpus.records[test[i]].dataset != ds) continue;
          t.push_back(truth[i]);
          p.push_back(pred[i]);
        }
        f1_rows.push_back({k, seed, ds, binary_f1(t, p)});
      }
      const double all = binary_f1(truth, pred);
      f1_rows.push_back({k, seed, kAllDatasets, all});
      log << tag << ", k=" << k << ": threshold " << fixed(cal.threshold) << ", EER " << fixed(cal.eer) << ", OOD F1 "
          << fixed(all) << "\n";
    }
  };

  if (!cfg.protocol.empty()) {
    run_one("protocol", load_split(cfg.protocol, corpus), cfg.seeds.front());
  } else {
    for (auto seed : cfg.seeds) {
      const auto split = ood_holdout(corpus, cfg.per_dataset, seed);
      write_split(corpus, split, cfg.out / ("split_" + seed_tag(seed) + ".jsonl"));
      run_one(seed_tag(seed), split, seed);
    }
  }
  write_text(cfg.out / "ood_f1.csv", ood_f1_csv(f1_rows));
  if (calibrations > 0) {
    const auto table = ood_table_text(f1_rows);
    write_text(cfg.out / "ood_table.txt", table);
    log << table;
  }
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_analyze_neighbors(const RunConfig& cfg, std::ostream& log) {
  if (cfg.ks.size() != 1) throw RangeError("analyze-neighbors takes a single k");
  const auto corpus = load_corpus(cfg, primary_embeddings(cfg));
  ensure_out(cfg.out);
  const auto index = build_index(corpus);
  const auto purity = neighbor_purity(index, cfg.ks.front(), cfg.threads);
  write_text(cfg.out / "purity.csv", purity_csv(purity));
  write_text(cfg.out / "purity.json", purity_json(purity).dump() + "\n");
  write_text(cfg.out / "purity.txt", purity_text(purity));

  // Dataset-level view, when every class lives in a single dataset.
  std::vector<std::set<std::string>> datasets(corpus.num_classes());
  for (std::size_t i = 0; i < corpus.size(); ++i) datasets[corpus.labels[i]].insert(corpus.records[i].dataset);
  const bool unique = std::all_of(datasets.begin(), datasets.end(), [](const auto& s) { return s.size() == 1; });
  if (unique) {
    std::vector<std::string> group_of;
    for (const auto& s : datasets) group_of.push_back(*s.begin());
    const auto by_ds = group_purity(purity, group_of);
    write_text(cfg.out / "purity_by_dataset.csv", purity_csv(by_ds));
    write_text(cfg.out / "purity_by_dataset.json", purity_json(by_ds).dump() + "\n");
    write_text(cfg.out / "purity_by_dataset.txt", purity_text(by_ds));
    log << purity_text(by_ds);
  } else {
    log << "classes span several datasets; skipping the dataset-level matrix\n";
    log << purity_text(purity);
  }
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_condense(const RunConfig& cfg, std::ostream& log) {
  if (cfg.seeds.size() != 1) throw RangeError("condense takes a single seed");
  const auto seed = cfg.seeds.front();
  const auto corpus = load_corpus(cfg, primary_embeddings(cfg));
  ensure_out(cfg.out);

  std::vector<std::size_t> rows;
  std::string source = "corpus";
  if (!cfg.protocol.empty()) {
    rows = load_split(cfg.protocol, corpus).rows_with(Role::support);
    source = "protocol support";
  } else {
    rows.resize(corpus.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  }
  const auto full = build_index(corpus, std::span<const std::size_t>(rows));
  const auto reduced = condense(full, seed);

  std::size_t consistent = 0;
  for (std::size_t i = 0; i < full.size(); ++i) {
    const auto nn = query(reduced, full.vector(i), 1);
    consistent += reduced.class_of(nn.indices.front()) == full.class_of(i);
  }

  EmbeddingSet set;
  set.extractor_id = corpus.embeddings.extractor_id;
  set.layer_index = corpus.embeddings.layer_index;
  save_index_snapshot(reduced, cfg.out / "condensed.emb", set.extractor_id, set.layer_index);
  std::vector<SampleRecord> kept;
  for (auto r : reduced.source_rows()) kept.push_back(corpus.records[r]);
  write_manifest(kept, cfg.out / "condensed.jsonl");

  ojson doc;
  doc["seed"] = seed;
  doc["source"] = source;
  doc["target"] = corpus.target;
  doc["original_size"] = full.size();
  doc["condensed_size"] = reduced.size();
  doc["consistency"] = static_cast<double>(consistent) / static_cast<double>(full.size());
  std::map<std::string, std::pair<std::size_t, std::size_t>> per_class;
  for (auto c : full.classes()) ++per_class[corpus.class_names[c]].first;
  for (auto c : reduced.classes()) ++per_class[corpus.class_names[c]].second;
  for (const auto& [name, n] : per_class) doc["per_class"][name] = {{"original", n.first}, {"condensed", n.second}};
  write_text(cfg.out / "condense.json", doc.dump(2) + "\n");
  log << "condensed " << full.size() << " -> " << reduced.size() << " support samples (seed " << seed
      << "), 1-NN consistency " << fixed(doc["consistency"].get<double>()) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_report(const RunConfig& cfg, std::ostream& log) {
  const auto dir = cfg.out;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::size_t rendered = 0;
  auto open = [](const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot open " + p.string());
    return in;
  };
  if (fs::exists(dir / "sweep.csv")) {
    auto in = open(dir / "sweep.csv");
    const auto text = sweep_text(parse_sweep_csv(in));
    write_text(dir / "sweep.txt", text);
    log << text;
    ++rendered;
  }
  for (const char* stem : {"purity", "purity_by_dataset"}) {
    const auto p = dir / (std::string(stem) + ".json");
    if (!fs::exists(p)) continue;
    auto in = open(p);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
      std::vector<std::uint64_t> counts;
      for (const auto& row : j.at("counts")) {
        for (const auto& v : row) counts.push_back(v.get<std::uint64_t>());
      }
      const auto m = purity_from_counts(j.at("classes").get<std::vector<std::string>>(), j.at("k").get<std::size_t>(),
                                        j.at("samples").get<std::vector<std::uint64_t>>(), std::move(counts));
      const auto text = purity_text(m);
      write_text(dir / (std::string(stem) + ".txt"), text);
      log << text;
      ++rendered;
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(1, p.string() + ": " + e.what());
    }
  }
  if (fs::exists(dir / "ood_f1.csv")) {
    auto in = open(dir / "ood_f1.csv");
    const auto rows = parse_ood_f1_csv(in);
    if (!rows.empty()) {
      const auto text = ood_table_text(rows);
      write_text(dir / "ood_table.txt", text);
      log << text;
      ++rendered;
    }
  }
  if (fs::exists(dir / "attribute_summary.csv")) {
    auto in = open(dir / "attribute_summary.csv");
    std::string line;
    std::getline(in, line);
    std::vector<double> f1s;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto f = parse_csv_line(line);
      if (f.size() != 5) throw SchemaError(lineno, "attribute_summary.csv: expected 5 columns");
      f1s.push_back(parse_double(f[1], "macro_f1"));
    }
    if (!f1s.empty()) {
      const auto s = summarize(f1s);
      log << "attribution macro F1 " << fixed(s.mean) << " ± " << fixed(s.stddev) << " over " << f1s.size()
          << " run(s)\n";
      ++rendered;
    }
  }
  if (rendered == 0) throw CoverageError("no report inputs found in " + dir.string());
  return 0;
}

}  // namespace srctrace::cli
