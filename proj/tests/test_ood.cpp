#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "srctrace/ood.hpp"
#include "support.hpp"

using namespace srctrace;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

SupportIndex plain_index(std::vector<float> v, std::uint32_t dim) {
  const std::size_t n = v.size() / dim;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("s" + std::to_string(i));
  return SupportIndex(dim, std::move(v), std::vector<ClassId>(n, 0), ids, {"only"});
}

void expect_same_threshold(double got, double want) {
  if (std::isinf(want)) {
    EXPECT_EQ(got, want);
  } else {
    EXPECT_NEAR(got, want, 1e-12 * std::max(1.0, std::abs(want)));
  }
}

}  // namespace

TEST(Score, CopyOfSupportRowScoresZero) {
  auto v = testing_support::gaussian(20, 6, 1);
  auto idx = plain_index(v, 6);
  EXPECT_EQ(score(idx, idx.vector(13), 1).mean_distance, 0.0);
}

TEST(Score, MeanOfTrueDistances) {
  auto idx = plain_index({3, 0, 0, 4, 100, 100}, 2);
  const float origin[2] = {0, 0};
  EXPECT_DOUBLE_EQ(score(idx, origin, 2).mean_distance, 3.5);
  // support order does not matter
  auto rev = plain_index({100, 100, 0, 4, 3, 0}, 2);
  EXPECT_DOUBLE_EQ(score(rev, origin, 2).mean_distance, 3.5);
  const std::vector<float> qs{0, 0, 3, 4};
  auto batch = score_batch(idx, {qs, 2}, 2);
  EXPECT_DOUBLE_EQ(batch[0], 3.5);
  EXPECT_DOUBLE_EQ(batch[1], score(idx, {qs.data() + 2, 2}, 2).mean_distance);
}

TEST(Calibrate, WorkedExamples) {
  {
    const std::vector<double> in{1, 2}, ood{10, 11};
    auto c = calibrate(in, ood);
    EXPECT_DOUBLE_EQ(c.threshold, 6.0);
    EXPECT_EQ(c.eer, 0.0);
    EXPECT_EQ(c.n_in_domain, 2u);
    EXPECT_EQ(c.n_ood, 2u);
  }
  {
    const std::vector<double> in{5}, ood{5};
    auto c = calibrate(in, ood);
    EXPECT_DOUBLE_EQ(c.eer, 0.5);
    EXPECT_EQ(c.threshold, -kInf);  // tie between the two sentinels goes to the smaller one
  }
  {
    const std::vector<double> in{1, 3}, ood{2, 4};
    EXPECT_EQ(candidate_thresholds(in, ood).size(), 5u);
    auto c = calibrate(in, ood);
    EXPECT_DOUBLE_EQ(c.threshold, 2.5);
    EXPECT_DOUBLE_EQ(c.far, 0.5);
    EXPECT_DOUBLE_EQ(c.frr, 0.5);
    EXPECT_DOUBLE_EQ(c.eer, 0.5);
  }
}

TEST(Calibrate, RejectsEmptyAndNonFinite) {
  const std::vector<double> some{1.0}, none, bad{std::nan("")};
  EXPECT_THROW(calibrate(none, some), CalibrationError);
  EXPECT_THROW(calibrate(some, none), CalibrationError);
  EXPECT_THROW(calibrate(bad, some), CalibrationError);
}

TEST(Calibrate, MatchesExhaustiveScan) {
  Xoshiro256 rng(2024);
  for (int t = 0; t < 300; ++t) {
    std::vector<double> in(1 + rng.below(30)), ood(1 + rng.below(30));
    // coarse grid so ties and shared values are common
    const auto levels = 2 + rng.below(20);
    for (auto& x : in) x = static_cast<double>(rng.below(levels)) * 0.5;
    for (auto& x : ood) x = static_cast<double>(rng.below(levels)) * 0.5 + static_cast<double>(rng.below(3));
    const auto want = oracle::eer(in, ood);
    const auto got = calibrate(in, ood);
    expect_same_threshold(got.threshold, want.threshold);
    EXPECT_NEAR(got.eer, want.eer, 1e-12);
    EXPECT_NEAR(std::abs(got.far - got.frr), want.gap, 1e-12);
    for (double g : want.gaps) EXPECT_GE(g + 1e-12, std::abs(got.far - got.frr));
    EXPECT_GE(got.eer, 0.0);
    EXPECT_LE(got.eer, 1.0);
  }
}

TEST(Decide, StrictlyGreaterIsOod) {
  OodCalibration c;
  c.threshold = 2.0;
  EXPECT_FALSE(decide(c, {"a", 2.0}).is_ood);
  EXPECT_TRUE(decide(c, {"b", std::nextafter(2.0, 3.0)}).is_ood);
  EXPECT_FALSE(decide(c, {"c", 1.0}).is_ood);
  EXPECT_DOUBLE_EQ(decide(c, {"d", 3.5}).margin, 1.5);
  EXPECT_EQ(decide(c, {"e", 0.0}).sample_id, "e");
}

TEST(Decide, ScaleCovariance) {
  Xoshiro256 rng(8);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> in(10), ood(10);
    for (auto& x : in) x = rng.uniform() * 4;
    for (auto& x : ood) x = 2 + rng.uniform() * 4;
    const double c = 0.5 + rng.uniform() * 8;
    std::vector<double> in_s(in), ood_s(ood);
    for (auto& x : in_s) x *= c;
    for (auto& x : ood_s) x *= c;
    auto a = calibrate(in, ood);
    auto b = calibrate(in_s, ood_s);
    EXPECT_DOUBLE_EQ(a.eer, b.eer);
    if (std::isfinite(a.threshold)) {
      EXPECT_NEAR(b.threshold, a.threshold * c, 1e-9 * c);
    }
    for (std::size_t i = 0; i < in.size(); ++i) {
      EXPECT_EQ(decide(a, {"", in[i]}).is_ood, decide(b, {"", in_s[i]}).is_ood);
      EXPECT_EQ(decide(a, {"", ood[i]}).is_ood, decide(b, {"", ood_s[i]}).is_ood);
    }
  }
}

TEST(CalibrationFile, RoundTripIncludingInfinity) {
  OodCalibration c;
  c.threshold = -kInf;
  c.k = 5;
  c.eer = 0.25;
  c.far = 0.5;
  c.n_in_domain = 3;
  c.n_ood = 4;
  auto j = to_json(c, {{"seed", 1}});
  EXPECT_EQ(j["threshold"], "-inf");
  EXPECT_EQ(j["spec_provenance"]["seed"], 1);
  auto back = calibration_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.threshold, -kInf);
  EXPECT_EQ(back.k, 5u);
  EXPECT_EQ(back.eer, 0.25);
  EXPECT_EQ(back.n_ood, 4u);
  c.threshold = 1.0 / 3.0;
  EXPECT_EQ(calibration_from_json(nlohmann::json::parse(to_json(c).dump())).threshold, 1.0 / 3.0);
}
