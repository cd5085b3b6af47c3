#include <gtest/gtest.h>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "pfairdp/dataset.hpp"
#include "pfairdp/pipeline.hpp"
#include "pfairdp/privacy.hpp"
#include "pfairdp/rng.hpp"

namespace pf = pfairdp;

namespace {

pf::Splits make_splits(std::size_t n, double bias, std::uint64_t seed, std::size_t d = 4) {
  pf::SyntheticSpec spec;
  spec.n_records = n;
  spec.n_continuous = d;
  spec.group_fraction = 0.5;
  spec.bias_strength = bias;
  spec.seed = seed;
  const pf::Dataset data = pf::generate_synthetic(spec);
  pf::Splits splits = pf::split_dataset(data, {0.6, 0.2, 0.2, seed ^ 1});
  pf::standardize_with_train_stats(splits);
  return splits;
}

bool same_triple(const pf::ObjectiveTriple& a, const pf::ObjectiveTriple& b) {
  return a.accuracy == b.accuracy && a.spd == b.spd && a.epsilon == b.epsilon &&
         a.transformed == b.transformed;
}

}  // namespace

TEST(ObjectiveTransform, MatchesClosedForm) {
  const auto t = pf::objective_transform(0.9, 0.1, 2.0);
  EXPECT_DOUBLE_EQ(t[0], std::log(0.9) - std::log(1.0 - 0.9));
  EXPECT_DOUBLE_EQ(t[1], std::log(1.0 - 0.1) - std::log(0.1));
  EXPECT_DOUBLE_EQ(t[2], -std::log(2.0));

  // Half accuracy and half parity gap sit exactly at the origin of their axes.
  const auto mid = pf::objective_transform(0.5, 0.5, 1e6);
  EXPECT_DOUBLE_EQ(mid[0], 0.0);
  EXPECT_DOUBLE_EQ(mid[1], 0.0);
  EXPECT_DOUBLE_EQ(mid[2], -std::log(1e6));
}

TEST(ObjectiveTransform, ClampsExtremeInputs) {
  // Accuracy and |SPD| clamp to [1e-6, 1 - 1e-6] before the log-odds are
  // taken, so the formulas below are evaluated at the clamp edges.
  constexpr double kEdge = 1.0 - 1e-6;
  const auto lo = pf::objective_transform(0.0, 1.0, 0.0);
  EXPECT_DOUBLE_EQ(lo[0], std::log(1e-6) - std::log(kEdge));
  EXPECT_DOUBLE_EQ(lo[1], std::log(1.0 - kEdge) - std::log(kEdge));
  EXPECT_DOUBLE_EQ(lo[2], -std::log(1e-6));

  // Values outside [0, 1] clamp to the same edge as the edge inputs.
  const auto a = pf::objective_transform(-3.0, 2.0, -1.0);
  EXPECT_EQ(a, lo);
  const auto hi = pf::objective_transform(2.0, -1.0, 1e9);
  EXPECT_DOUBLE_EQ(hi[0], std::log(kEdge) - std::log(1.0 - kEdge));
  EXPECT_DOUBLE_EQ(hi[1], std::log(kEdge) - std::log(1e-6));
  EXPECT_DOUBLE_EQ(hi[2], -std::log(1e9));
}

TEST(ObjectiveTransform, InvertsBackToRawMetrics) {
  const auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  pf::Rng rng(31);
  for (int i = 0; i < 50; ++i) {
    const double acc = rng.uniform(1e-4, 1.0 - 1e-4);
    const double spd = rng.uniform(1e-4, 1.0 - 1e-4);
    const double eps = std::exp(rng.uniform(std::log(1e-3), std::log(1e3)));
    const auto t = pf::objective_transform(acc, spd, eps);
    EXPECT_NEAR(sigmoid(t[0]), acc, 1e-9);
    EXPECT_NEAR(1.0 - sigmoid(t[1]), spd, 1e-9);
    EXPECT_NEAR(std::exp(-t[2]), eps, 1e-9 * eps);
  }
}

TEST(ObjectiveTransform, ReferenceIsTheAntiIdealCorner) {
  const auto ref = pf::transformed_reference();
  EXPECT_EQ(ref, pf::objective_transform(0.0, 1.0, 1.0));
  // The two log-odds axes clamp to mirror-image corners.
  EXPECT_NEAR(ref[0], ref[1], 1e-9);
  EXPECT_EQ(ref[2], 0.0);

  // Any plausibly useful run dominates the reference on the first two axes,
  // and on the privacy axis whenever epsilon stays below 1.
  const auto good = pf::objective_transform(0.7, 0.2, 100.0);
  EXPECT_GT(good[0], ref[0]);
  EXPECT_GT(good[1], ref[1]);
}

TEST(ObjectiveTransform, MonotoneInEachMetric) {
  double prev = -1e18;
  for (const double acc : {0.1, 0.3, 0.5, 0.8, 0.99}) {
    const double cur = pf::objective_transform(acc, 0.5, 1.0)[0];
    EXPECT_GT(cur, prev);
    prev = cur;
  }
  prev = -1e18;
  for (const double spd : {0.9, 0.5, 0.2, 0.05, 0.001}) {
    const double cur = pf::objective_transform(0.5, spd, 1.0)[1];
    EXPECT_GT(cur, prev);
    prev = cur;
  }
  prev = -1e18;
  for (const double eps : {1000.0, 10.0, 1.0, 0.1, 0.01}) {
    const double cur = pf::objective_transform(0.5, 0.5, eps)[2];
    EXPECT_GT(cur, prev);
    prev = cur;
  }
}

TEST(SearchDomains, DecodeHitsEndpointsAndGeometricMidpoints) {
  const pf::Domains d;
  for (const auto& r : d.ranges()) {
    EXPECT_DOUBLE_EQ(pf::Domains::decode(r, 0.0), r.lo);
    EXPECT_DOUBLE_EQ(pf::Domains::decode(r, 1.0), r.hi);
    EXPECT_DOUBLE_EQ(pf::Domains::decode(r, -0.4), r.lo);  // unit coordinates clamp
    EXPECT_DOUBLE_EQ(pf::Domains::decode(r, 1.7), r.hi);
  }
  // Log-scaled knobs interpolate geometrically: the learning-rate midpoint is
  // sqrt(1e-3 * 0.1) = 1e-2.
  EXPECT_NEAR(pf::Domains::decode(d.learning_rate, 0.5), 1e-2, 1e-14);
  EXPECT_NEAR(pf::Domains::decode(d.noise_multiplier, 0.5), std::sqrt(5.0), 1e-12);
  // Integer knobs round to whole values.
  EXPECT_DOUBLE_EQ(pf::Domains::decode(d.epochs, 0.5), 79.0);
  const double b = pf::Domains::decode(d.batch_size, 0.37);
  EXPECT_EQ(b, std::floor(b));
}

TEST(SearchDomains, EncodeDecodeRoundTrip) {
  const pf::Domains d;
  for (const double u : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    for (const auto& r : {d.repair_level, d.noise_multiplier, d.clipping_norm, d.learning_rate}) {
      EXPECT_NEAR(pf::Domains::encode(r, pf::Domains::decode(r, u)), u, 1e-12);
    }
    for (const auto& r : {d.epochs, d.batch_size}) {
      const double v = pf::Domains::decode(r, u);
      EXPECT_DOUBLE_EQ(pf::Domains::decode(r, pf::Domains::encode(r, v)), v);
    }
  }
  // Out-of-range raw values clamp into the unit interval.
  EXPECT_DOUBLE_EQ(pf::Domains::encode(d.repair_level, 4.0), 1.0);
  EXPECT_DOUBLE_EQ(pf::Domains::encode(d.repair_level, -4.0), 0.0);
}

TEST(SearchDomains, FromUnitCarriesBaseFlagsAndStaysInRange) {
  pf::Domains d;
  pf::PipelineConfig base;
  base.use_preprocessing = true;
  base.use_dp = true;
  base.use_postprocessing = true;
  base.dp_target_epsilon = 0.7;
  base.optimizer = pf::OptimizerState::Kind::sgd;
  base.seed = 99;

  pf::Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::array<double, 6> u;
    for (auto& v : u) v = rng.uniform01();
    const pf::PipelineConfig c = d.from_unit(u, base);
    EXPECT_TRUE(c.use_preprocessing);
    EXPECT_TRUE(c.use_dp);
    EXPECT_TRUE(c.use_postprocessing);
    ASSERT_TRUE(c.dp_target_epsilon.has_value());
    EXPECT_DOUBLE_EQ(*c.dp_target_epsilon, 0.7);
    EXPECT_EQ(c.optimizer, pf::OptimizerState::Kind::sgd);
    EXPECT_EQ(c.seed, 99u);

    EXPECT_GE(c.repair_level, 0.0);
    EXPECT_LE(c.repair_level, 1.0);
    EXPECT_GE(c.noise_multiplier, 1.0);
    EXPECT_LE(c.noise_multiplier, 5.0);
    EXPECT_GE(c.clipping_norm, 0.1);
    EXPECT_LE(c.clipping_norm, 2.0);
    EXPECT_GE(c.epochs, 30u);
    EXPECT_LE(c.epochs, 128u);
    EXPECT_GE(c.learning_rate, 1e-3);
    EXPECT_LE(c.learning_rate, 0.1);
    EXPECT_GE(c.batch_size, 16u);
    EXPECT_LE(c.batch_size, 64u);

    // Snapping a config back to the cube and decoding again is idempotent.
    const pf::PipelineConfig snapped = d.from_unit(d.to_unit(c), base);
    EXPECT_DOUBLE_EQ(snapped.repair_level, c.repair_level);
    EXPECT_NEAR(snapped.noise_multiplier, c.noise_multiplier, 1e-12);
    EXPECT_DOUBLE_EQ(snapped.clipping_norm, c.clipping_norm);
    EXPECT_EQ(snapped.epochs, c.epochs);
    EXPECT_NEAR(snapped.learning_rate, c.learning_rate, 1e-15);
    EXPECT_EQ(snapped.batch_size, c.batch_size);
  }
}

TEST(SearchDomains, ValidateRejectsBadRanges) {
  pf::Domains d;
  d.repair_level = {0.5, 0.5, false, false};
  EXPECT_THROW(d.validate(), std::invalid_argument);

  pf::Domains e;
  e.noise_multiplier = {0.0, 5.0, false, true};
  EXPECT_THROW(e.validate(), std::invalid_argument);

  EXPECT_NO_THROW(pf::Domains{}.validate());
}

TEST(PipelineEvaluator, NonPrivateRunsReportSentinelEpsilon) {
  const pf::Evaluator ev(make_splits(400, 0.3, 5), {4});
  pf::PipelineConfig config;
  config.epochs = 4;
  config.batch_size = 32;
  config.learning_rate = 0.01;
  config.seed = 3;

  const auto obj = ev.evaluate(config);
  EXPECT_EQ(obj.epsilon, pf::kNonPrivateEpsilon);
  EXPECT_GE(obj.accuracy, 0.0);
  EXPECT_LE(obj.accuracy, 1.0);
  EXPECT_GE(obj.spd, 0.0);
  EXPECT_LE(obj.spd, 1.0);
  EXPECT_EQ(obj.transformed, pf::objective_transform(obj.accuracy, obj.spd, obj.epsilon));
}

TEST(PipelineEvaluator, DpSpendMatchesAccountant) {
  const pf::Evaluator ev(make_splits(400, 0.3, 5), {4});
  const std::size_t n = ev.splits().train.size();
  pf::PipelineConfig config;
  config.use_dp = true;
  config.noise_multiplier = 1.5;
  config.clipping_norm = 1.0;
  config.epochs = 3;
  config.batch_size = 32;
  config.learning_rate = 0.01;
  config.seed = 4;

  const auto obj = ev.evaluate(config);
  const std::size_t batch = std::min<std::size_t>(32, n);
  const auto steps = static_cast<std::int64_t>(3 * ((n + batch - 1) / batch));
  const double q = static_cast<double>(batch) / static_cast<double>(n);
  EXPECT_DOUBLE_EQ(obj.epsilon, pf::account_dp_sgd(1.5, q, steps, ev.delta()).epsilon);
  EXPECT_LT(obj.epsilon, pf::kNonPrivateEpsilon);
}

TEST(PipelineEvaluator, TargetEpsilonCalibratesTheSpend) {
  const pf::Evaluator ev(make_splits(400, 0.3, 5), {4});
  pf::PipelineConfig config;
  config.use_dp = true;
  config.dp_target_epsilon = 0.5;
  config.noise_multiplier = 99.0;  // ignored when a target is set
  config.epochs = 3;
  config.batch_size = 32;
  config.learning_rate = 0.01;
  config.seed = 4;

  const auto obj = ev.evaluate(config);
  EXPECT_LE(obj.epsilon, 0.5 + 1e-12);
  EXPECT_GE(obj.epsilon, 0.999 * 0.5 - 1e-12);
}

TEST(PipelineEvaluator, DeterministicPerSeedAndSensitiveToIt) {
  const pf::Evaluator ev(make_splits(400, 0.3, 5), {4});
  pf::PipelineConfig config;
  config.epochs = 6;
  config.batch_size = 32;
  config.learning_rate = 0.02;
  config.seed = 3;

  const auto a = ev.evaluate(config);
  const auto b = ev.evaluate(config);
  EXPECT_TRUE(same_triple(a, b));

  config.seed = 4;
  const auto c = ev.evaluate(config);
  EXPECT_FALSE(same_triple(a, c));
}

TEST(PipelineEvaluator, DivergedTrainingCountsAsTotalFailure) {
  const pf::Evaluator ev(make_splits(400, 0.3, 5), {4});
  pf::PipelineConfig config;
  config.epochs = 8;
  config.batch_size = 64;
  config.learning_rate = 1e300;
  config.optimizer = pf::OptimizerState::Kind::sgd;
  config.seed = 1;

  const auto obj = ev.evaluate(config);
  EXPECT_EQ(obj.accuracy, 0.0);
  EXPECT_EQ(obj.spd, 1.0);
  EXPECT_EQ(obj.epsilon, pf::kNonPrivateEpsilon);
  EXPECT_EQ(obj.transformed, pf::objective_transform(0.0, 1.0, pf::kNonPrivateEpsilon));
}

TEST(PipelineEvaluator, ZeroRepairLevelIsIdenticalToNoPreprocessing) {
  const pf::Evaluator ev(make_splits(400, 0.3, 5), {4});
  pf::PipelineConfig plain;
  plain.epochs = 4;
  plain.batch_size = 32;
  plain.learning_rate = 0.01;
  plain.seed = 6;

  pf::PipelineConfig repaired = plain;
  repaired.use_preprocessing = true;
  repaired.repair_level = 0.0;
  EXPECT_TRUE(same_triple(ev.evaluate(plain), ev.evaluate(repaired)));
}

TEST(PipelineEvaluator, FullRepairShrinksParityGapOnBiasedData) {
  const pf::Evaluator ev(make_splits(900, 0.5, 11), {4});
  pf::PipelineConfig plain;
  plain.epochs = 12;
  plain.batch_size = 32;
  plain.learning_rate = 0.05;
  plain.seed = 2;

  pf::PipelineConfig repaired = plain;
  repaired.use_preprocessing = true;
  repaired.repair_level = 1.0;

  const double gap_plain = ev.evaluate(plain).spd;
  const double gap_repaired = ev.evaluate(repaired).spd;
  EXPECT_GT(gap_plain, 0.1);  // the fixture really is biased
  EXPECT_LT(gap_repaired, gap_plain);
}

TEST(PipelineEvaluator, PostprocessingShrinksParityGapOnBiasedData) {
  const pf::Evaluator ev(make_splits(900, 0.5, 11), {4});
  pf::PipelineConfig plain;
  plain.epochs = 12;
  plain.batch_size = 32;
  plain.learning_rate = 0.05;
  plain.seed = 2;

  pf::PipelineConfig adjusted = plain;
  adjusted.use_postprocessing = true;

  const double gap_plain = ev.evaluate(plain).spd;
  const double gap_adjusted = ev.evaluate(adjusted).spd;
  EXPECT_LT(gap_adjusted, gap_plain);
}

TEST(PipelineEvaluator, ValidationErrors) {
  EXPECT_THROW(pf::Evaluator(make_splits(400, 0.3, 5), {}), std::invalid_argument);

  const pf::Evaluator ev(make_splits(400, 0.3, 5), {4});
  pf::PipelineConfig config;
  config.epochs = 0;
  EXPECT_THROW(ev.evaluate(config), std::invalid_argument);
}

TEST(ReplicationPresets, StageWiring) {
  struct Expected {
    const char* name;
    bool pre, dp, post;
    std::size_t epochs;
  };
  const Expected table[] = {
      {"S-NN", false, false, false, 20},  {"F-NN", false, false, true, 20},
      {"DP-NN", false, true, false, 20},  {"DPF-NN", false, true, true, 20},
      {"PrivLR", false, true, false, 100}, {"FairLR", true, false, false, 100},
      {"PFLR", true, true, false, 100},   {"PFLR*", true, true, true, 100},
  };
  for (const auto& row : table) {
    const pf::PipelineConfig c = pf::replication_preset(row.name);
    EXPECT_EQ(c.use_preprocessing, row.pre) << row.name;
    EXPECT_EQ(c.use_dp, row.dp) << row.name;
    EXPECT_EQ(c.use_postprocessing, row.post) << row.name;
    EXPECT_EQ(c.epochs, row.epochs) << row.name;
    EXPECT_EQ(c.batch_size, 20u) << row.name;
    EXPECT_DOUBLE_EQ(c.learning_rate, 1e-3) << row.name;
    EXPECT_EQ(c.optimizer, pf::OptimizerState::Kind::adam) << row.name;
    EXPECT_DOUBLE_EQ(c.clipping_norm, 1.0) << row.name;
    EXPECT_DOUBLE_EQ(c.repair_level, 1.0) << row.name;
    if (row.dp) {
      ASSERT_TRUE(c.dp_target_epsilon.has_value()) << row.name;
      EXPECT_DOUBLE_EQ(*c.dp_target_epsilon, 0.1) << row.name;
    } else {
      EXPECT_FALSE(c.dp_target_epsilon.has_value()) << row.name;
    }
  }

  // Explicit targets override the default on DP presets and are ignored by
  // presets that never touch the privacy engine.
  EXPECT_DOUBLE_EQ(*pf::replication_preset("DP-NN", 2.5).dp_target_epsilon, 2.5);
  EXPECT_FALSE(pf::replication_preset("FairLR", 2.5).dp_target_epsilon.has_value());
  EXPECT_THROW(pf::replication_preset("NN"), std::invalid_argument);
}

TEST(ReplicationRun, AggregatesSeededRepeats) {
  const pf::Evaluator ev(make_splits(300, 0.3, 7), {3});
  const pf::ReplicationRow row = pf::run_replication(ev, "S-NN", std::nullopt, 3, 77);
  EXPECT_EQ(row.preset, "S-NN");
  EXPECT_EQ(row.runs, 3u);
  EXPECT_TRUE(std::isnan(row.target_epsilon));
  EXPECT_TRUE(std::isnan(row.epsilon_mean));

  // Replay the exact seeding scheme and aggregate independently.
  pf::Rng rng(77);
  std::vector<double> accs, risks;
  for (int r = 0; r < 3; ++r) {
    pf::PipelineConfig config = pf::replication_preset("S-NN");
    config.seed = rng.next_u64();
    const auto obj = ev.evaluate(config);
    accs.push_back(obj.accuracy);
    risks.push_back(obj.spd);
  }
  const auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  const auto sample_std = [](const std::vector<double>& v, double mu) {
    double s = 0.0;
    for (double x : v) s += (x - mu) * (x - mu);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
  };
  EXPECT_DOUBLE_EQ(row.accuracy_mean, mean(accs));
  EXPECT_DOUBLE_EQ(row.accuracy_std, sample_std(accs, mean(accs)));
  EXPECT_DOUBLE_EQ(row.risk_mean, mean(risks));
  EXPECT_DOUBLE_EQ(row.risk_std, sample_std(risks, mean(risks)));

  EXPECT_THROW(pf::run_replication(ev, "S-NN", std::nullopt, 0, 1), std::invalid_argument);
}

TEST(ReplicationRun, DpPresetReportsAccountedSpend) {
  const pf::Evaluator ev(make_splits(300, 0.3, 7), {3});
  const pf::ReplicationRow row = pf::run_replication(ev, "DP-NN", 1.0, 2, 5);
  EXPECT_DOUBLE_EQ(row.target_epsilon, 1.0);
  EXPECT_FALSE(std::isnan(row.epsilon_mean));
  EXPECT_LE(row.epsilon_mean, 1.0 + 1e-12);
  EXPECT_GE(row.epsilon_mean, 0.999 - 1e-12);
}
