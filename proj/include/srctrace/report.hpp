#pragma once

// Deterministic text / CSV / JSON renderings of the evaluation outputs, and
// loaders for the CSV forms. Column layouts are documented in docs/reports.md.
// CSV numbers use the shortest representation that parses back exactly.

#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "srctrace/embedding_store.hpp"
#include "srctrace/error.hpp"
#include "srctrace/metrics.hpp"

namespace srctrace {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  detail::write_file_bytes(path, text);
}

// ---------------------------------------------------------------------------
// F1 reports
// ---------------------------------------------------------------------------

inline std::string f1_csv(const F1Report& r, std::span<const std::string> class_names) {
  std::string out = "class,support,true_positives,false_positives,false_negatives,precision,recall,f1\n";
  for (const auto& s : r.per_class) {
    out += csv_field(class_names[s.cls]) + "," + std::to_string(s.support) + "," + std::to_string(s.true_positives) +
           "," + std::to_string(s.false_positives) + "," + std::to_string(s.false_negatives) + "," +
           format_number(s.precision) + "," + format_number(s.recall) + "," + format_number(s.f1) + "\n";
  }
  return out;
}

inline std::string f1_text(const F1Report& r, std::span<const std::string> class_names) {
  std::ostringstream out;
  out << "macro F1 " << fixed(r.macro_f1) << " over " << r.per_class.size() << " classes, " << r.samples
      << " samples\n";
  for (const auto& s : r.per_class) {
    out << "  " << fixed(s.f1) << "  " << class_names[s.cls] << " (support " << s.support << ")\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Sweep tables
// ---------------------------------------------------------------------------

inline std::string join_seeds(std::span<const std::uint64_t> seeds) {
  std::string out;
  for (std::size_t i = 0; i < seeds.size(); ++i) out += (i ? ";" : "") + std::to_string(seeds[i]);
  return out;
}

// Long form: one line per (setting, layer) cell, then one "mean" line per
// layer. The seeds column lists the seeds averaged in that cell, ';'-separated.
inline std::string sweep_csv(const SweepTable& t) {
  const auto seeds = join_seeds(t.seeds);
  std::string out = "setting,layer,mean,std,seeds\n";
  for (std::size_t r = 0; r < t.settings.size(); ++r) {
    for (std::size_t c = 0; c < t.layers.size(); ++c) {
      const auto& cell = t.cell(r, c);
      out += t.settings[r].label() + "," + std::to_string(t.layers[c]) + "," + format_number(cell.mean) + "," +
             format_number(cell.stddev) + "," + seeds + "\n";
    }
  }
  for (std::size_t c = 0; c < t.layers.size(); ++c) {
    out += "mean," + std::to_string(t.layers[c]) + "," + format_number(t.column_mean[c]) + ",,\n";
  }
  return out;
}

inline std::string sweep_text(const SweepTable& t) {
  std::ostringstream out;
  out << "macro F1, mean ± population std over seeds {";
  for (std::size_t i = 0; i < t.seeds.size(); ++i) out << (i ? "," : "") << t.seeds[i];
  out << "}\n";
  out << "support";
  for (auto l : t.layers) out << "\tL" << l;
  out << "\n";
  for (std::size_t r = 0; r < t.settings.size(); ++r) {
    out << t.settings[r].label();
    for (std::size_t c = 0; c < t.layers.size(); ++c) {
      out << "\t" << fixed(t.cell(r, c).mean, 2) << "±" << fixed(t.cell(r, c).stddev, 2);
    }
    out << "\n";
  }
  out << "mean";
  for (double m : t.column_mean) out << "\t" << fixed(m, 2);
  out << "\n";
  return out.str();
}

inline SweepTable parse_sweep_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw SchemaError(1, "empty sweep CSV");
  ++lineno;
  if (parse_csv_line(line) != std::vector<std::string>{"setting", "layer", "mean", "std", "seeds"}) {
    throw SchemaError(1, "unexpected sweep CSV header");
  }
  struct Row {
    SupportSetting setting;
    std::uint32_t layer;
    SweepCell cell;
  };
  std::vector<Row> rows;
  std::map<std::uint32_t, double> means;
  std::optional<std::string> seed_text;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = parse_csv_line(line);
    if (f.size() != 5) throw SchemaError(lineno, "expected 5 columns");
    try {
      const auto layer = static_cast<std::uint32_t>(std::stoul(f[1]));
      if (f[0] == "mean") {
        means[layer] = std::stod(f[2]);
        continue;
      }
      if (seed_text && *seed_text != f[4]) throw SchemaError(lineno, "seed list differs between cells");
      seed_text = f[4];
      const auto n = static_cast<std::size_t>(std::count(f[4].begin(), f[4].end(), ';')) + 1;
      rows.push_back({parse_support_setting(f[0]), layer, {std::stod(f[2]), std::stod(f[3]), n}});
    } catch (const std::logic_error&) {
      throw SchemaError(lineno, "bad number");
    } catch (const RangeError& e) {
      throw SchemaError(lineno, e.what());
    }
  }
  SweepTable t;
  if (seed_text) {
    std::stringstream ss(*seed_text);
    for (std::string tok; std::getline(ss, tok, ';');) {
      try {
        t.seeds.push_back(std::stoull(tok));
      } catch (const std::logic_error&) {
        throw SchemaError(lineno, "bad seed list");
      }
    }
  }
  std::set<std::uint32_t> layers;
  std::set<SupportSetting> settings;
  for (const auto& r : rows) {
    layers.insert(r.layer);
    settings.insert(r.setting);
  }
  t.layers.assign(layers.begin(), layers.end());
  t.settings.assign(settings.begin(), settings.end());
  if (rows.size() != t.layers.size() * t.settings.size()) throw CoverageError("sweep CSV is missing cells");
  t.cells.resize(rows.size());
  for (const auto& r : rows) {
    const auto ri = std::lower_bound(t.settings.begin(), t.settings.end(), r.setting) - t.settings.begin();
    const auto ci = std::lower_bound(t.layers.begin(), t.layers.end(), r.layer) - t.layers.begin();
    t.cells[static_cast<std::size_t>(ri) * t.layers.size() + static_cast<std::size_t>(ci)] = r.cell;
  }
  for (auto l : t.layers) {
    auto it = means.find(l);
    if (it == means.end()) throw CoverageError("sweep CSV lacks the mean row for layer " + std::to_string(l));
    t.column_mean.push_back(it->second);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Neighbour purity
// ---------------------------------------------------------------------------

// Wide matrix of fractions, rows = source class, columns = neighbour class.
inline std::string purity_csv(const NeighborPurityMatrix& m) {
  if (m.size() == 0) throw RangeError("empty purity matrix");
  std::string out = "source";
  for (const auto& c : m.classes) out += "," + csv_field(c);
  out += "\n";
  for (std::size_t a = 0; a < m.size(); ++a) {
    out += csv_field(m.classes[a]);
    for (std::size_t b = 0; b < m.size(); ++b) out += "," + format_number(m.at(a, b));
    out += "\n";
  }
  return out;
}

inline nlohmann::ordered_json purity_json(const NeighborPurityMatrix& m) {
  if (m.size() == 0) throw RangeError("empty purity matrix");
  nlohmann::ordered_json j;
  j["k"] = m.k;
  j["classes"] = m.classes;
  j["samples"] = m.samples;
  std::vector<std::vector<std::uint64_t>> counts(m.size());
  std::vector<std::vector<double>> fraction(m.size());
  for (std::size_t a = 0; a < m.size(); ++a) {
    for (std::size_t b = 0; b < m.size(); ++b) {
      counts[a].push_back(m.count(a, b));
      fraction[a].push_back(m.at(a, b));
    }
  }
  j["counts"] = counts;
  j["fraction"] = fraction;
  return j;
}

// Per source class: share of non-target neighbours and the strongest off-diagonal neighbour class.
inline std::string purity_text(const NeighborPurityMatrix& m) {
  if (m.size() == 0) throw RangeError("empty purity matrix");
  std::ostringstream out;
  out << "k=" << m.k << " neighbours per sample, self excluded\n";
  out << "source\tsamples\tnon_target\ttop_confusion\n";
  for (std::size_t a = 0; a < m.size(); ++a) {
    std::size_t best = a;
    for (std::size_t b = 0; b < m.size(); ++b) {
      if (b != a && (best == a || m.at(a, b) > m.at(a, best))) best = b;
    }
    out << m.classes[a] << "\t" << m.samples[a] << "\t" << fixed(1.0 - m.at(a, a));
    if (best != a && m.at(a, best) > 0) out << "\t" << m.classes[best] << " " << fixed(m.at(a, best));
    out << "\n";
  }
  return out.str();
}

struct PurityTable {
  std::vector<std::string> classes;
  std::vector<double> fraction;
};

inline PurityTable parse_purity_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(1, "empty purity CSV");
  auto header = parse_csv_line(line);
  if (header.empty() || header[0] != "source") throw SchemaError(1, "purity CSV must start with \"source\"");
  PurityTable t;
  t.classes.assign(header.begin() + 1, header.end());
  if (t.classes.empty()) throw RangeError("empty purity matrix");
  std::size_t lineno = 1;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = parse_csv_line(line);
    if (f.size() != t.classes.size() + 1) throw SchemaError(lineno, "wrong column count");
    if (row >= t.classes.size() || f[0] != t.classes[row]) throw SchemaError(lineno, "row class does not match header");
    for (std::size_t b = 1; b < f.size(); ++b) {
      try {
        t.fraction.push_back(std::stod(f[b]));
      } catch (const std::logic_error&) {
        throw SchemaError(lineno, "bad number");
      }
    }
    ++row;
  }
  if (row != t.classes.size()) throw SchemaError(lineno, "purity CSV has " + std::to_string(row) + " rows");
  return t;
}


// ---------------------------------------------------------------------------
// OOD F1 tables (rows = k, columns = datasets then "All")
// ---------------------------------------------------------------------------

inline constexpr const char* kAllDatasets = "All";

struct OodF1Row {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::string dataset;
  double f1 = 0.0;
};

inline std::string ood_f1_csv(std::span<const OodF1Row> rows) {
  std::string out = "k,seed,dataset,f1\n";
  for (const auto& r : rows) {
    out += std::to_string(r.k) + "," + std::to_string(r.seed) + "," + csv_field(r.dataset) + "," + format_number(r.f1) + "\n";
  }
  return out;
}

inline std::vector<OodF1Row> parse_ood_f1_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || parse_csv_line(line) != std::vector<std::string>{"k", "seed", "dataset", "f1"}) {
    throw SchemaError(1, "unexpected OOD F1 CSV header");
  }
  std::vector<OodF1Row> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = parse_csv_line(line);
    if (f.size() != 4) throw SchemaError(lineno, "expected 4 columns");
    try {
      rows.push_back({std::stoul(f[0]), std::stoull(f[1]), f[2], std::stod(f[3])});
    } catch (const std::logic_error&) {
      throw SchemaError(lineno, "bad number");
    }
  }
  return rows;
}

// Mean ± population std over seeds for every (k, dataset) pair.
inline std::string ood_table_text(std::span<const OodF1Row> rows) {
  std::set<std::size_t> ks;
  std::set<std::string> datasets;
  std::map<std::pair<std::size_t, std::string>, std::vector<std::pair<std::uint64_t, double>>> cells;
  for (const auto& r : rows) {
    ks.insert(r.k);
    if (r.dataset != kAllDatasets) datasets.insert(r.dataset);
    cells[{r.k, r.dataset}].emplace_back(r.seed, r.f1);
  }
  std::vector<std::string> cols(datasets.begin(), datasets.end());
  cols.push_back(kAllDatasets);
  std::ostringstream out;
  out << "OOD F1 (OOD = positive class), mean ± population std over seeds\n";
  out << "k";
  for (const auto& c : cols) out << "\t" << c;
  out << "\n";
  for (auto k : ks) {
    out << k;
    for (const auto& c : cols) {
      auto it = cells.find({k, c});
      if (it == cells.end()) {
        out << "\t-";
        continue;
      }
      auto v = it->second;
      std::sort(v.begin(), v.end());
      std::vector<double> f1s;
      for (const auto& [seed, f1] : v) f1s.push_back(f1);
      const auto s = summarize(f1s);
      out << "\t" << fixed(s.mean, 2) << "±" << fixed(s.stddev, 2);
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace srctrace
