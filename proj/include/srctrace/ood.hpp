#pragma once

// Distance-based detection of samples from unseen generators: a sample's
// score is its mean Euclidean distance to the k nearest in-domain support
// vectors, and the accept/reject threshold sits at the validation EER.
//
// OOD is the positive class. FRR counts in-domain samples rejected as OOD,
// FAR counts OOD samples accepted as in-domain.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "srctrace/error.hpp"
#include "srctrace/knn.hpp"

namespace srctrace {

struct OodScore {
  std::string sample_id;
  double mean_distance = 0.0;
};

struct OodCalibration {
  double threshold = 0.0;
  std::size_t k = kDefaultK;
  double eer = 0.0;
  double far = 0.0;
  double frr = 0.0;
  std::size_t n_in_domain = 0;
  std::size_t n_ood = 0;
};

struct OodDecision {
  std::string sample_id;
  bool is_ood = false;
  double mean_distance = 0.0;
  double margin = 0.0;  // mean_distance - threshold
};

inline OodScore score(const SupportIndex& index, std::span<const float> vec, std::size_t k, std::string sample_id = {}) {
  const auto nl = query(index, vec, k);
  double sum = 0.0;
  for (double d : nl.distances) sum += d;
  return {std::move(sample_id), sum / static_cast<double>(k)};
}

inline std::vector<double> score_batch(const SupportIndex& index, QueryBlock queries, std::size_t k,
                                       std::size_t workers = 1) {
  const auto lists = query_batch(index, queries, k, workers);
  std::vector<double> out(lists.size());
  for (std::size_t i = 0; i < lists.size(); ++i) {
    double sum = 0.0;
    for (double d : lists[i].distances) sum += d;
    out[i] = sum / static_cast<double>(k);
  }
  return out;
}

// All thresholds the calibration considers: -inf, the midpoints between
// consecutive distinct pooled scores, +inf. Ascending.
inline std::vector<double> candidate_thresholds(std::span<const double> a, std::span<const double> b) {
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::sort(pooled.begin(), pooled.end());
  pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());
  std::vector<double> out;
  out.reserve(pooled.size() + 1);
  out.push_back(-std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i + 1 < pooled.size(); ++i) out.push_back(pooled[i] + (pooled[i + 1] - pooled[i]) / 2);
  out.push_back(std::numeric_limits<double>::infinity());
  return out;
}

// EER calibration. Picks the candidate threshold minimising |FAR - FRR|
// (compared exactly via integer cross-multiplication), ties to the smaller
// threshold. eer = (FAR + FRR) / 2 at that threshold.
inline OodCalibration calibrate(std::span<const double> in_domain, std::span<const double> ood, std::size_t k = kDefaultK) {
  if (in_domain.empty() || ood.empty()) throw CalibrationError("calibration needs in-domain and OOD validation scores");
  for (double s : in_domain) {
    if (!std::isfinite(s)) throw CalibrationError("non-finite in-domain score");
  }
  for (double s : ood) {
    if (!std::isfinite(s)) throw CalibrationError("non-finite OOD score");
  }
  std::vector<double> id(in_domain.begin(), in_domain.end());
  std::vector<double> od(ood.begin(), ood.end());
  std::sort(id.begin(), id.end());
  std::sort(od.begin(), od.end());
  const auto n_id = static_cast<std::int64_t>(id.size());
  const auto n_od = static_cast<std::int64_t>(od.size());

  // Sweep: at threshold t, rejected in-domain = #{id > t}, accepted OOD = #{od <= t}.
  std::size_t pi = 0, po = 0;
  bool have = false;
  std::int64_t best_gap = 0, best_frr = 0, best_far = 0;
  double best_t = 0;
  for (double t : candidate_thresholds(id, od)) {
    while (pi < id.size() && id[pi] <= t) ++pi;
    while (po < od.size() && od[po] <= t) ++po;
    const std::int64_t rejected = n_id - static_cast<std::int64_t>(pi);
    const std::int64_t accepted = static_cast<std::int64_t>(po);
    // |accepted/n_od - rejected/n_id| scaled by n_id * n_od
    const std::int64_t gap = std::llabs(accepted * n_id - rejected * n_od);
    if (!have || gap < best_gap) {
      have = true;
      best_gap = gap;
      best_t = t;
      best_frr = rejected;
      best_far = accepted;
    }
  }

  OodCalibration c;
  c.threshold = best_t;
  c.k = k;
  c.frr = static_cast<double>(best_frr) / static_cast<double>(n_id);
  c.far = static_cast<double>(best_far) / static_cast<double>(n_od);
  c.eer = (c.far + c.frr) / 2;
  c.n_in_domain = id.size();
  c.n_ood = od.size();
  return c;
}

inline OodDecision decide(const OodCalibration& cal, const OodScore& s) {
  return {s.sample_id, s.mean_distance > cal.threshold, s.mean_distance, s.mean_distance - cal.threshold};
}

namespace detail {

inline nlohmann::ordered_json json_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double number_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw SchemaError(1, "expected number, got \"" + s + "\"");
  }
  return j.get<double>();
}

}  // namespace detail

// Infinite thresholds serialize as the strings "inf" / "-inf".
inline nlohmann::ordered_json to_json(const OodCalibration& c, const nlohmann::ordered_json& provenance = {}) {
  nlohmann::ordered_json j;
  j["threshold"] = detail::json_number(c.threshold);
  j["k"] = c.k;
  j["eer"] = c.eer;
  j["far"] = c.far;
  j["frr"] = c.frr;
  j["counts"] = {{"in_domain", c.n_in_domain}, {"ood", c.n_ood}};
  j["spec_provenance"] = provenance.is_null() ? nlohmann::ordered_json::object() : provenance;
  return j;
}

inline OodCalibration calibration_from_json(const nlohmann::json& j) {
  OodCalibration c;
  c.threshold = detail::number_from_json(j.at("threshold"));
  c.k = j.at("k").get<std::size_t>();
  c.eer = j.at("eer").get<double>();
  c.far = j.value("far", 0.0);
  c.frr = j.value("frr", 0.0);
  c.n_in_domain = j.at("counts").at("in_domain").get<std::size_t>();
  c.n_ood = j.at("counts").at("ood").get<std::size_t>();
  return c;
}

}  // namespace srctrace
