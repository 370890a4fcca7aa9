#pragma once

// Seeded, stratified data splits: ratio splits, per-class support sampling,
// checkpoint-level OOD holdouts and leave-N-out architecture splits.
// Outputs depend only on (corpus, spec); see rng.hpp for the generator.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "srctrace/embedding_store.hpp"
#include "srctrace/error.hpp"
#include "srctrace/rng.hpp"

namespace srctrace {

enum class Role : std::uint8_t { support, validation, test, excluded };

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::support: return "support";
    case Role::validation: return "validation";
    case Role::test: return "test";
    case Role::excluded: return "excluded";
  }
  return "?";
}

inline std::optional<Role> parse_role(std::string_view s) {
  for (auto r : {Role::support, Role::validation, Role::test, Role::excluded}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

// Support / validation / test shares of in-domain data in the OOD protocol.
inline constexpr std::array<double, 3> kInDomainRatios{0.8, 0.1, 0.1};

enum class SplitKind { ratio_split, per_class_count, ood_holdout, leave_n_out };

inline std::string_view to_string(SplitKind k) {
  switch (k) {
    case SplitKind::ratio_split: return "ratio_split";
    case SplitKind::per_class_count: return "per_class_count";
    case SplitKind::ood_holdout: return "ood_holdout";
    case SplitKind::leave_n_out: return "leave_n_out";
  }
  return "?";
}

// Number of checkpoints withheld per group: a fixed count or half the group
// (rounded down, at least one).
struct LeaveCount {
  std::size_t n = 1;
  bool half = false;

  static LeaveCount half_of_group() { return {0, true}; }
  std::size_t resolve(std::size_t group_size) const { return half ? std::max<std::size_t>(1, group_size / 2) : n; }
  std::string str() const { return half ? "half" : std::to_string(n); }
  friend bool operator==(const LeaveCount&, const LeaveCount&) = default;
};

struct SplitSpec {
  SplitKind kind = SplitKind::ratio_split;
  std::vector<double> ratios;                // ratio_split; in-domain part of ood_holdout
  std::optional<LabelField> stratify_by;     // ratio_split; nullopt = corpus classes
  std::size_t per_class = 0;                 // per_class_count
  std::size_t per_dataset = 0;               // ood_holdout
  LabelField group_by = LabelField::acoustic_model;  // leave_n_out
  LeaveCount leave{};                        // leave_n_out
  std::uint64_t seed = 0;

  friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

struct SplitAssignment {
  SplitSpec spec;
  std::vector<Role> roles;               // aligned with corpus rows
  std::vector<std::uint8_t> ood;         // 1 when the row's checkpoint is held out as unseen
  std::vector<std::string> ood_checkpoints;            // sorted
  std::vector<std::string> ood_validation_checkpoints;  // sorted, subset of ood_checkpoints

  std::size_t size() const { return roles.size(); }
  bool is_ood(std::size_t i) const { return !ood.empty() && ood[i] != 0; }

  std::vector<std::size_t> rows_with(Role r) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < roles.size(); ++i) {
      if (roles[i] == r) out.push_back(i);
    }
    return out;
  }

  std::size_t count(Role r) const { return static_cast<std::size_t>(std::count(roles.begin(), roles.end(), r)); }

  friend bool operator==(const SplitAssignment&, const SplitAssignment&) = default;
};

namespace detail {

inline constexpr double kRatioTolerance = 1e-9;

inline void check_ratios(std::span<const double> ratios) {
  if (ratios.empty() || ratios.size() > 3) throw RangeError("expected 1 to 3 ratios");
  double sum = 0;
  for (double r : ratios) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw RangeError("ratios must be finite and non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > kRatioTolerance) throw RangeError("ratios must sum to 1");
}

// Roles for 1, 2 or 3 buckets: {support}, {support, test}, {support, validation, test}.
inline std::vector<Role> bucket_roles(std::size_t buckets) {
  if (buckets == 1) return {Role::support};
  if (buckets == 2) return {Role::support, Role::test};
  return {Role::support, Role::validation, Role::test};
}

}  // namespace detail

// Largest-remainder apportionment of n items over ratios. Remainders that
// differ by less than 1e-9 count as equal and go to the earlier bucket.
inline std::vector<std::size_t> apportion(std::size_t n, std::span<const double> ratios) {
  std::vector<std::size_t> sizes(ratios.size());
  std::vector<double> rem(ratios.size());
  std::size_t used = 0;
  for (std::size_t b = 0; b < ratios.size(); ++b) {
    const double quota = ratios[b] * static_cast<double>(n);
    const double fl = std::floor(quota + detail::kRatioTolerance);
    sizes[b] = static_cast<std::size_t>(fl);
    rem[b] = std::max(0.0, quota - fl);
    used += sizes[b];
  }
  std::vector<std::size_t> order(ratios.size());
  for (std::size_t b = 0; b < order.size(); ++b) order[b] = b;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rem[a] > rem[b] + detail::kRatioTolerance;
  });
  for (std::size_t i = 0; used < n && i < order.size(); ++i, ++used) ++sizes[order[i]];
  // Rounding noise can leave a deficit only when every remainder was ~0.
  for (std::size_t b = 0; used < n; b = (b + 1) % sizes.size(), ++used) ++sizes[b];
  return sizes;
}

namespace detail {

inline std::map<std::string, std::vector<std::size_t>> strata(const Corpus& corpus,
                                                              std::optional<LabelField> by,
                                                              std::span<const std::size_t> rows) {
  std::map<std::string, std::vector<std::size_t>> out;
  std::vector<std::string> missing;
  for (auto i : rows) {
    if (by) {
      auto v = field_value(corpus.records[i], *by);
      if (!v) {
        missing.push_back(corpus.records[i].sample_id);
        continue;
      }
      out[*v].push_back(i);
    } else {
      out[corpus.class_names[corpus.labels[i]]].push_back(i);
    }
  }
  if (!missing.empty()) {
    throw LabelError(std::to_string(missing.size()) + " sample(s) lack the stratification field " +
                     std::string(to_string(*by)) + ", first: " + missing.front());
  }
  return out;
}

inline void split_strata(const std::map<std::string, std::vector<std::size_t>>& groups,
                         std::span<const double> ratios, Xoshiro256& rng, std::vector<Role>& roles) {
  const auto broles = bucket_roles(ratios.size());
  const auto nonzero = static_cast<std::size_t>(std::count_if(ratios.begin(), ratios.end(), [](double r) { return r > 0; }));
  for (const auto& [key, members] : groups) {
    if (members.size() < nonzero) {
      throw StratumError("stratum \"" + key + "\" has " + std::to_string(members.size()) + " sample(s), needs at least " +
                         std::to_string(nonzero));
    }
  }
  for (const auto& [key, members] : groups) {
    auto order = members;
    shuffle(order, rng);
    const auto sizes = apportion(order.size(), ratios);
    std::size_t pos = 0;
    for (std::size_t b = 0; b < sizes.size(); ++b) {
      for (std::size_t j = 0; j < sizes[b]; ++j) roles[order[pos++]] = broles[b];
    }
  }
}

inline std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  return rows;
}

}  // namespace detail

// Stratified ratio split. Two ratios give support/test, three give
// support/validation/test. Strata are visited in lexicographic key order.
inline SplitAssignment ratio_split(const Corpus& corpus, std::span<const double> ratios, std::uint64_t seed,
                                   std::optional<LabelField> stratify_by = std::nullopt) {
  detail::check_ratios(ratios);
  SplitAssignment a;
  a.spec.kind = SplitKind::ratio_split;
  a.spec.ratios.assign(ratios.begin(), ratios.end());
  a.spec.stratify_by = stratify_by;
  a.spec.seed = seed;
  a.roles.assign(corpus.size(), Role::excluded);
  a.ood.assign(corpus.size(), 0);
  Xoshiro256 rng(seed);
  const auto rows = detail::all_rows(corpus.size());
  detail::split_strata(detail::strata(corpus, stratify_by, rows), ratios, rng, a.roles);
  return a;
}

// min(n, class size) samples of each class go to support, the rest to test.
inline SplitAssignment per_class_support(const Corpus& corpus, std::size_t n_per_class, std::uint64_t seed) {
  if (n_per_class < 1) throw RangeError("n_per_class must be >= 1");
  SplitAssignment a;
  a.spec.kind = SplitKind::per_class_count;
  a.spec.per_class = n_per_class;
  a.spec.seed = seed;
  a.roles.assign(corpus.size(), Role::test);
  a.ood.assign(corpus.size(), 0);
  Xoshiro256 rng(seed);
  const auto rows = detail::all_rows(corpus.size());
  for (auto& [cls, members] : detail::strata(corpus, std::nullopt, rows)) {
    shuffle(members, rng);
    const auto take = std::min(n_per_class, members.size());
    for (std::size_t j = 0; j < take; ++j) a.roles[members[j]] = Role::support;
  }
  return a;
}

// Throws when a held-out checkpoint shares support with in-domain rows.
inline void verify_ood_purity(const Corpus& corpus, const SplitAssignment& a) {
  std::set<std::string> support_ckpts;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.roles[i] == Role::support) support_ckpts.insert(corpus.records[i].checkpoint);
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.is_ood(i) && support_ckpts.count(corpus.records[i].checkpoint)) {
      throw StratumError("checkpoint " + corpus.records[i].checkpoint + " is both held out and in support");
    }
    if (a.is_ood(i) && a.roles[i] == Role::support) {
      throw StratumError("held-out sample " + corpus.records[i].sample_id + " assigned to support");
    }
  }
}

// Holds out per_dataset checkpoints of every dataset as unseen. Held-out
// checkpoints alternate between validation and test so the two halves never
// share a checkpoint; an odd one goes to whichever half is currently smaller
// (validation first). Remaining rows get a stratified ratio split by checkpoint.
inline SplitAssignment ood_holdout(const Corpus& corpus, std::size_t per_dataset, std::uint64_t seed,
                                   std::span<const double> in_domain_ratios = kInDomainRatios) {
  detail::check_ratios(in_domain_ratios);
  SplitAssignment a;
  a.spec.kind = SplitKind::ood_holdout;
  a.spec.per_dataset = per_dataset;
  a.spec.ratios.assign(in_domain_ratios.begin(), in_domain_ratios.end());
  a.spec.stratify_by = LabelField::checkpoint;
  a.spec.seed = seed;
  a.roles.assign(corpus.size(), Role::excluded);
  a.ood.assign(corpus.size(), 0);

  std::map<std::string, std::set<std::string>> by_dataset;
  for (const auto& r : corpus.records) by_dataset[r.dataset].insert(r.checkpoint);
  for (const auto& [ds, ckpts] : by_dataset) {
    if (per_dataset > 0 && ckpts.size() <= per_dataset) {
      throw StratumError("dataset \"" + ds + "\" has " + std::to_string(ckpts.size()) +
                         " checkpoint(s), needs more than " + std::to_string(per_dataset));
    }
  }

  Xoshiro256 rng(seed);
  std::map<std::string, Role> held;  // checkpoint -> OOD role
  std::size_t n_val = 0, n_test = 0;
  for (const auto& [ds, ckpts] : by_dataset) {
    if (per_dataset == 0) break;
    std::vector<std::string> order(ckpts.begin(), ckpts.end());
    shuffle(order, rng);
    const std::size_t halves = per_dataset / 2;
    for (std::size_t j = 0; j < per_dataset; ++j) {
      Role role;
      if (j < halves) {
        role = Role::validation;
      } else if (j < 2 * halves) {
        role = Role::test;
      } else {
        role = n_val <= n_test ? Role::validation : Role::test;
      }
      (role == Role::validation ? n_val : n_test) += 1;
      held.emplace(order[j], role);
    }
  }

  std::vector<std::size_t> in_domain;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto it = held.find(corpus.records[i].checkpoint);
    if (it == held.end()) {
      in_domain.push_back(i);
    } else {
      a.roles[i] = it->second;
      a.ood[i] = 1;
    }
  }
  for (const auto& [ckpt, role] : held) {
    a.ood_checkpoints.push_back(ckpt);
    if (role == Role::validation) a.ood_validation_checkpoints.push_back(ckpt);
  }
  detail::split_strata(detail::strata(corpus, LabelField::checkpoint, in_domain), in_domain_ratios, rng, a.roles);
  verify_ood_purity(corpus, a);
  return a;
}

// Within each group_by group (e.g. acoustic model), moves `leave` checkpoints
// wholly to test; everything else is support.
inline SplitAssignment leave_n_out(const Corpus& corpus, LabelField group_by, LeaveCount leave, std::uint64_t seed) {
  if (!leave.half && leave.n == 0) throw RangeError("leave-N-out with N = 0 leaves an empty test set");
  SplitAssignment a;
  a.spec.kind = SplitKind::leave_n_out;
  a.spec.group_by = group_by;
  a.spec.leave = leave;
  a.spec.seed = seed;
  a.roles.assign(corpus.size(), Role::support);
  a.ood.assign(corpus.size(), 0);

  std::map<std::string, std::set<std::string>> groups;
  for (const auto& r : corpus.records) {
    auto g = field_value(r, group_by);
    if (!g) throw LabelError("sample " + r.sample_id + " has no " + std::string(to_string(group_by)) + " label");
    groups[*g].insert(r.checkpoint);
  }

  Xoshiro256 rng(seed);
  std::set<std::string> held;
  for (const auto& [g, ckpts] : groups) {
    const std::size_t m = leave.resolve(ckpts.size());
    if (ckpts.size() <= m) {
      throw StratumError("group \"" + g + "\" has " + std::to_string(ckpts.size()) + " checkpoint(s), needs more than " +
                         std::to_string(m));
    }
    std::vector<std::string> order(ckpts.begin(), ckpts.end());
    shuffle(order, rng);
    held.insert(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
  }
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (held.count(corpus.records[i].checkpoint)) {
      a.roles[i] = Role::test;
      a.ood[i] = 1;
    }
  }
  a.ood_checkpoints.assign(held.begin(), held.end());
  verify_ood_purity(corpus, a);
  return a;
}

inline SplitAssignment make_split(const Corpus& corpus, const SplitSpec& spec) {
  switch (spec.kind) {
    case SplitKind::ratio_split: return ratio_split(corpus, spec.ratios, spec.seed, spec.stratify_by);
    case SplitKind::per_class_count: return per_class_support(corpus, spec.per_class, spec.seed);
    case SplitKind::ood_holdout:
      return spec.ratios.empty() ? ood_holdout(corpus, spec.per_dataset, spec.seed)
                                 : ood_holdout(corpus, spec.per_dataset, spec.seed, spec.ratios);
    case SplitKind::leave_n_out: return leave_n_out(corpus, spec.group_by, spec.leave, spec.seed);
  }
  throw RangeError("unknown split kind");
}

// ---------------------------------------------------------------------------
// JSON-Lines serialization: one header line, then {"sample_id","role"} per
// sample in corpus order ("ood": true on held-out samples).
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json to_json(const SplitSpec& s) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(s.kind);
  j["seed"] = s.seed;
  switch (s.kind) {
    case SplitKind::ratio_split:
      j["ratios"] = s.ratios;
      j["stratify_by"] = s.stratify_by ? std::string(to_string(*s.stratify_by)) : std::string("class");
      break;
    case SplitKind::per_class_count: j["per_class"] = s.per_class; break;
    case SplitKind::ood_holdout:
      j["per_dataset"] = s.per_dataset;
      j["ratios"] = s.ratios;
      break;
    case SplitKind::leave_n_out:
      j["group_by"] = to_string(s.group_by);
      j["leave"] = s.leave.str();
      break;
  }
  return j;
}

inline SplitSpec split_spec_from_json(const nlohmann::json& j) {
  SplitSpec s;
  const auto kind = j.at("kind").get<std::string>();
  bool known = false;
  for (auto k : {SplitKind::ratio_split, SplitKind::per_class_count, SplitKind::ood_holdout, SplitKind::leave_n_out}) {
    if (to_string(k) == kind) {
      s.kind = k;
      known = true;
    }
  }
  if (!known) throw SchemaError(1, "unknown split kind \"" + kind + "\"");
  s.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("ratios")) s.ratios = j.at("ratios").get<std::vector<double>>();
  if (j.contains("stratify_by")) {
    const auto by = j.at("stratify_by").get<std::string>();
    if (by != "class") {
      s.stratify_by = parse_label_field(by);
      if (!s.stratify_by) throw SchemaError(1, "unknown stratify_by \"" + by + "\"");
    }
  }
  if (j.contains("per_class")) s.per_class = j.at("per_class").get<std::size_t>();
  if (j.contains("per_dataset")) s.per_dataset = j.at("per_dataset").get<std::size_t>();
  if (s.kind == SplitKind::ood_holdout) s.stratify_by = LabelField::checkpoint;
  if (j.contains("group_by")) {
    auto g = parse_label_field(j.at("group_by").get<std::string>());
    if (!g) throw SchemaError(1, "unknown group_by");
    s.group_by = *g;
  }
  if (j.contains("leave")) {
    const auto v = j.at("leave").get<std::string>();
    if (v == "half") {
      s.leave = LeaveCount::half_of_group();
    } else {
      s.leave = LeaveCount{std::stoul(v), false};
    }
  }
  return s;
}

inline std::string serialize_split(const Corpus& corpus, const SplitAssignment& a) {
  if (a.size() != corpus.size()) throw AlignmentError("split size does not match corpus");
  nlohmann::ordered_json header;
  header["split"] = to_json(a.spec);
  header["count"] = a.size();
  header["ood_checkpoints"] = a.ood_checkpoints;
  header["ood_validation_checkpoints"] = a.ood_validation_checkpoints;
  std::string out = header.dump() + "\n";
  for (std::size_t i = 0; i < a.size(); ++i) {
    nlohmann::ordered_json line;
    line["sample_id"] = corpus.records[i].sample_id;
    line["role"] = to_string(a.roles[i]);
    if (a.is_ood(i)) line["ood"] = true;
    out += line.dump();
    out += '\n';
  }
  return out;
}

inline void write_split(const Corpus& corpus, const SplitAssignment& a, const std::filesystem::path& path) {
  detail::write_file_bytes(path, serialize_split(corpus, a));
}

// Aligns a serialized split with a corpus by sample_id. Corpus samples not
// listed in the file become Role::excluded; ids unknown to the corpus are an error.
inline SplitAssignment parse_split(std::istream& in, const Corpus& corpus) {
  std::string text;
  std::size_t line = 0;
  SplitAssignment a;
  bool have_header = false;
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < corpus.size(); ++i) row_of.emplace(corpus.records[i].sample_id, i);
  a.roles.assign(corpus.size(), Role::excluded);
  a.ood.assign(corpus.size(), 0);
  std::vector<bool> seen(corpus.size(), false);

  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError(line, std::string("invalid JSON: ") + e.what());
    }
    try {
      if (!have_header) {
        a.spec = split_spec_from_json(j.at("split"));
        a.ood_checkpoints = j.value("ood_checkpoints", std::vector<std::string>{});
        a.ood_validation_checkpoints = j.value("ood_validation_checkpoints", std::vector<std::string>{});
        have_header = true;
        continue;
      }
      const auto id = j.at("sample_id").get<std::string>();
      const auto role = parse_role(j.at("role").get<std::string>());
      if (!role) throw SchemaError(line, "unknown role");
      auto it = row_of.find(id);
      if (it == row_of.end()) throw AlignmentError("line " + std::to_string(line) + ": sample " + id + " not in corpus");
      if (seen[it->second]) throw DuplicateError(line, "sample " + id + " listed twice");
      seen[it->second] = true;
      a.roles[it->second] = *role;
      a.ood[it->second] = j.value("ood", false) ? 1 : 0;
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(line, e.what());
    }
  }
  if (!have_header) throw SchemaError(line + 1, "split file has no header line");
  return a;
}

inline SplitAssignment load_split(const std::filesystem::path& path, const Corpus& corpus) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_split(in, corpus);
}

}  // namespace srctrace
