#pragma once

// Normalize -> fuzzy c-means decision regions -> membership targets ->
// LM-trained network -> scalar decision score.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tacdss/datagen.hpp"
#include "tacdss/errors.hpp"
#include "tacdss/fcm.hpp"
#include "tacdss/lm_opt.hpp"
#include "tacdss/nnet.hpp"
#include "tacdss/random.hpp"

namespace tacdss {

inline constexpr int kRegionCount = 3;
inline constexpr std::array<const char*, kRegionCount> kRegionLabels{"bad", "acceptable", "good"};
inline constexpr std::array<double, kRegionCount> kClassValues{0.0, 0.5, 1.0};
inline constexpr double kOrderingTieTolerance = 1e-9;

using NormalizedEvent = Eigen::Vector4d;

inline NormalizedEvent normalize(const ScenarioEvent& event) {
  const auto v = event.values();
  NormalizedEvent out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    out(static_cast<Eigen::Index>(k)) = (v[k] - kFactorRanges[k].lo) / (kFactorRanges[k].hi - kFactorRanges[k].lo);
  }
  return out;
}

inline ScenarioEvent denormalize(const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != 4) throw InvalidArgument("denormalize expects 4 coordinates");
  std::array<double, 4> v{};
  for (std::size_t k = 0; k < v.size(); ++k) {
    v[k] = kFactorRanges[k].lo + x(static_cast<Eigen::Index>(k)) * (kFactorRanges[k].hi - kFactorRanges[k].lo);
  }
  return ScenarioEvent::from_values(v);
}

/// n x 4 matrix of normalized events.
inline Eigen::MatrixXd normalize_all(const std::vector<ScenarioEvent>& events) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(events.size()), 4);
  for (std::size_t j = 0; j < events.size(); ++j) {
    validate(events[j]);
    out.row(static_cast<Eigen::Index>(j)) = normalize(events[j]).transpose();
  }
  return out;
}

/// Three fuzzy decision regions with their semantic ranking.
struct ClusterModel {
  fcm::ClusterCenters centers;           // normalized space, FCM index order
  std::array<int, kRegionCount> ordering{};  // FCM index -> rank (bad=0, acceptable=1, good=2)
  double m = 2.0;

  /// FCM index holding rank r.
  int cluster_of_rank(int rank) const {
    for (int i = 0; i < kRegionCount; ++i) {
      if (ordering[i] == rank) return i;
    }
    throw InvalidArgument("cluster ordering is not a permutation");
  }

  /// Centers sorted by rank (row r = rank r).
  Eigen::MatrixXd ranked_centers() const {
    Eigen::MatrixXd out(kRegionCount, centers.dims());
    for (int r = 0; r < kRegionCount; ++r) out.row(r) = centers.centers.row(cluster_of_rank(r));
    return out;
  }
};

/// Latent score of a normalized center, clamped into the unit box first.
inline double center_latent_score(const Eigen::Ref<const Eigen::VectorXd>& center) {
  Eigen::VectorXd clamped = center.cwiseMax(0.0).cwiseMin(1.0);
  return latent_score(denormalize(clamped));
}

/// Ranks clusters by ascending latent score of their denormalized centers.
/// `scale` multiplies every score before sorting; the result does not depend on
/// it for any positive value.
inline std::array<int, kRegionCount> rank_clusters(const fcm::ClusterCenters& centers, double scale = 1.0) {
  if (centers.clusters() != kRegionCount || centers.dims() != 4) {
    throw InvalidArgument("rank_clusters expects 3 centers in 4 dimensions");
  }
  if (!(scale > 0.0)) throw InvalidArgument("rank_clusters: scale must be positive");
  std::array<double, kRegionCount> score{};
  for (int i = 0; i < kRegionCount; ++i) score[i] = scale * center_latent_score(centers.centers.row(i).transpose());
  std::array<int, kRegionCount> by_score{0, 1, 2};
  std::sort(by_score.begin(), by_score.end(), [&](int a, int b) { return score[a] < score[b]; });
  for (int r = 0; r + 1 < kRegionCount; ++r) {
    const double gap = score[by_score[r + 1]] - score[by_score[r]];
    if (gap <= kOrderingTieTolerance * scale) {
      throw AmbiguousOrdering("clusters " + std::to_string(by_score[r]) + " and " +
                              std::to_string(by_score[r + 1]) + " have equal latent scores");
    }
  }
  std::array<int, kRegionCount> ordering{};
  for (int r = 0; r < kRegionCount; ++r) ordering[by_score[r]] = r;
  return ordering;
}

/// Memberships of normalized points against frozen centers, n x 3 in rank order.
inline Eigen::MatrixXd region_memberships(const ClusterModel& model, const Eigen::MatrixXd& normalized) {
  const fcm::PartitionMatrix u = fcm::update_memberships(normalized, model.centers, model.m);
  Eigen::MatrixXd out(normalized.rows(), kRegionCount);
  for (int i = 0; i < kRegionCount; ++i) out.col(model.ordering[i]) = u.memberships.row(i).transpose();
  return out;
}

/// One-hot rows at each row's largest membership (first index wins ties).
inline Eigen::MatrixXd harden(const Eigen::MatrixXd& targets) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(targets.rows(), targets.cols());
  for (Eigen::Index j = 0; j < targets.rows(); ++j) {
    Eigen::Index best = 0;
    targets.row(j).maxCoeff(&best);
    out(j, best) = 1.0;
  }
  return out;
}

struct RegionTargets {
  ClusterModel clusters;
  Eigen::MatrixXd targets;  // n x 3, rank order, rows sum to 1
  fcm::FcmResult fit;
};

inline RegionTargets build_targets(const Eigen::MatrixXd& normalized, const fcm::FcmConfig& config) {
  if (config.c != kRegionCount) throw InvalidArgument("build_targets requires c = 3");
  if (normalized.rows() < 30) {
    throw InvalidArgument("build_targets needs at least 30 events, got " + std::to_string(normalized.rows()));
  }
  if (normalized.cols() != 4) throw InvalidArgument("build_targets expects 4 normalized factors");
  if ((normalized.array() < 0.0).any() || (normalized.array() > 1.0).any()) {
    throw InvalidArgument("build_targets: normalized coordinates must lie in [0,1]");
  }
  RegionTargets out;
  out.fit = fcm::fcm_fit(normalized, config);
  out.clusters.centers = out.fit.centers;
  out.clusters.m = config.m;
  out.clusters.ordering = rank_clusters(out.fit.centers);
  out.targets.resize(normalized.rows(), kRegionCount);
  for (int i = 0; i < kRegionCount; ++i) {
    out.targets.col(out.clusters.ordering[i]) =
        out.fit.partition.memberships.row(i).transpose();
  }
  return out;
}

inline RegionTargets build_targets(const std::vector<ScenarioEvent>& events, const fcm::FcmConfig& config) {
  return build_targets(normalize_all(events), config);
}

/// A trained network paired with the regions it was trained on.
struct DecisionModel {
  ClusterModel clusters;
  nnet::Network network;

  bool ready() const { return !network.empty(); }
};

struct ScoreResult {
  double score = 0.0;
  std::array<double, kRegionCount> memberships{};  // bad, acceptable, good

  friend bool operator==(const ScoreResult&, const ScoreResult&) = default;
};

/// Defuzzifies clamped, renormalized network outputs with class values 0, 0.5, 1.
/// Outputs that all clamp to zero fall back to equal memberships.
inline ScoreResult defuzzify(const Eigen::Ref<const Eigen::VectorXd>& outputs) {
  if (outputs.size() != kRegionCount) throw InvalidArgument("defuzzify expects 3 outputs");
  ScoreResult out;
  double total = 0.0;
  for (int r = 0; r < kRegionCount; ++r) {
    const double v = std::clamp(outputs(r), 0.0, 1.0);
    out.memberships[r] = v;
    total += v;
  }
  for (auto& v : out.memberships) v = total > 0.0 ? v / total : 1.0 / kRegionCount;
  for (int r = 0; r < kRegionCount; ++r) {
    out.score += kClassValues[r] * out.memberships[r];
  }
  out.score = std::clamp(out.score, 0.0, 1.0);
  return out;
}

inline ScoreResult decision_score(const DecisionModel& model, const ScenarioEvent& event) {
  if (!model.ready()) throw ModelNotReady("no trained model loaded");
  validate(event);
  const Eigen::VectorXd input = normalize(event);
  return defuzzify(nnet::forward(model.network, input));
}

enum class Split { kA, kB };

inline std::string to_string(Split s) { return s == Split::kA ? "A" : "B"; }

inline Split split_from_string(const std::string& s) {
  if (s == "A" || s == "a") return Split::kA;
  if (s == "B" || s == "b") return Split::kB;
  throw InvalidArgument("split must be A or B, got '" + s + "'");
}

/// Percentage of the master dataset used for training.
inline int train_percent(Split s) { return s == Split::kA ? 90 : 80; }

inline std::size_t train_rows_for(Split s, std::size_t total) {
  return total * static_cast<std::size_t>(train_percent(s)) / 100;
}

struct ExperimentConfig {
  fcm::FcmConfig fcm{};
  lm::LmConfig lm{};
  int hidden = 16;
  bool harden_targets = false;
};

struct RowPair {
  std::array<double, kRegionCount> actual{};
  std::array<double, kRegionCount> predicted{};

  friend bool operator==(const RowPair&, const RowPair&) = default;
};

struct EvalReport {
  std::string split_name;
  double train_mse = 0.0;
  double train_rmse = 0.0;
  double test_mse = 0.0;
  double test_rmse = 0.0;
  std::vector<RowPair> train_rows;
  std::vector<RowPair> test_rows;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

struct ExperimentResult {
  std::uint64_t seed = 0;
  std::uint64_t network_seed = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  EvalReport eval;
  lm::TrainReport training;
  int fcm_iterations = 0;
  std::vector<double> fcm_objective_trace;
  DecisionModel model;
};

/// Independent stream seed for one consumer of an experiment seed (splitmix64).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::vector<int> decision_layer_sizes(int hidden) {
  if (hidden < 1) throw InvalidArgument("hidden layer size must be positive");
  return {4, hidden, kRegionCount};
}

inline nnet::Batch make_batch(const Eigen::MatrixXd& normalized, const Eigen::MatrixXd& targets) {
  nnet::Batch batch;
  batch.reserve(static_cast<std::size_t>(normalized.rows()));
  for (Eigen::Index j = 0; j < normalized.rows(); ++j) {
    batch.push_back({normalized.row(j).transpose(), targets.row(j).transpose()});
  }
  return batch;
}

/// Targets from the frozen centers against raw network outputs.
inline std::vector<RowPair> predict_rows(const DecisionModel& model, const Eigen::MatrixXd& normalized,
                                         const Eigen::MatrixXd& targets) {
  std::vector<RowPair> rows;
  rows.reserve(static_cast<std::size_t>(normalized.rows()));
  for (Eigen::Index j = 0; j < normalized.rows(); ++j) {
    const Eigen::VectorXd out = nnet::forward(model.network, normalized.row(j).transpose());
    RowPair row;
    for (int r = 0; r < kRegionCount; ++r) {
      row.actual[r] = targets(j, r);
      row.predicted[r] = out(r);
    }
    rows.push_back(row);
  }
  return rows;
}

inline double rows_mse(const std::vector<RowPair>& rows) {
  if (rows.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& row : rows) {
    for (int r = 0; r < kRegionCount; ++r) {
      const double diff = row.actual[r] - row.predicted[r];
      sum += diff * diff;
    }
  }
  return sum / static_cast<double>(rows.size() * kRegionCount);
}

/// Scores `events` against a trained model, with targets from its frozen centers.
inline EvalReport evaluate(const DecisionModel& model, const std::vector<ScenarioEvent>& events,
                           std::string name = "eval") {
  if (!model.ready()) throw ModelNotReady("no trained model loaded");
  if (events.empty()) throw InvalidArgument("evaluate: no events");
  const Eigen::MatrixXd x = normalize_all(events);
  EvalReport report;
  report.split_name = std::move(name);
  report.test_rows = predict_rows(model, x, region_memberships(model.clusters, x));
  report.test_mse = rows_mse(report.test_rows);
  report.test_rmse = std::sqrt(report.test_mse);
  return report;
}

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded shuffle of 0..total-1 cut at the split's training percentage.
inline SplitIndices split_indices(std::size_t total, Split split, std::uint64_t seed) {
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0));
  rng.shuffle(order);
  const auto cut = static_cast<std::ptrdiff_t>(train_rows_for(split, total));
  return {{order.begin(), order.begin() + cut}, {order.begin() + cut, order.end()}};
}

/// FCM settings actually used by run_experiment for `seed`.
inline fcm::FcmConfig experiment_fcm_config(const ExperimentConfig& config, std::uint64_t seed) {
  fcm::FcmConfig out = config.fcm;
  out.seed = derive_seed(seed, 1);
  return out;
}

/// Shuffle-split, cluster and train on the training part only, then evaluate
/// both parts. Test targets come from the training centers.
inline ExperimentResult run_experiment(const std::vector<ScenarioEvent>& master, Split split, std::uint64_t seed,
                                       const ExperimentConfig& config = {}) {
  if (master.size() < 100) {
    throw InvalidArgument("run_experiment needs at least 100 events, got " + std::to_string(master.size()));
  }
  const SplitIndices parts = split_indices(master.size(), split, seed);
  ExperimentResult result;
  result.seed = seed;
  result.train_size = parts.train.size();
  result.test_size = parts.test.size();
  std::vector<ScenarioEvent> train_events;
  std::vector<ScenarioEvent> test_events;
  for (auto k : parts.train) train_events.push_back(master[k]);
  for (auto k : parts.test) test_events.push_back(master[k]);

  const fcm::FcmConfig fcm_config = experiment_fcm_config(config, seed);
  const Eigen::MatrixXd x_train = normalize_all(train_events);
  const Eigen::MatrixXd x_test = normalize_all(test_events);
  RegionTargets regions = build_targets(x_train, fcm_config);
  result.fcm_iterations = regions.fit.iterations;
  result.fcm_objective_trace = regions.fit.objective_trace;
  Eigen::MatrixXd y_train = regions.targets;
  Eigen::MatrixXd y_test = region_memberships(regions.clusters, x_test);
  if (config.harden_targets) {
    y_train = harden(y_train);
    y_test = harden(y_test);
  }

  result.network_seed = derive_seed(seed, 2);
  const nnet::Network initial = nnet::Network::random(decision_layer_sizes(config.hidden), result.network_seed, 0.5);
  auto [trained, report] = lm::train(initial, make_batch(x_train, y_train), config.lm);
  result.training = std::move(report);
  result.model = DecisionModel{regions.clusters, std::move(trained)};

  EvalReport& eval = result.eval;
  eval.split_name = to_string(split);
  eval.train_rows = predict_rows(result.model, x_train, y_train);
  eval.test_rows = predict_rows(result.model, x_test, y_test);
  eval.train_mse = rows_mse(eval.train_rows);
  eval.train_rmse = std::sqrt(eval.train_mse);
  eval.test_mse = rows_mse(eval.test_rows);
  eval.test_rmse = std::sqrt(eval.test_mse);
  return result;
}

struct RepeatedResult {
  Split split = Split::kA;
  std::vector<ExperimentResult> runs;
  double mean_train_mse = 0.0;
  double mean_train_rmse = 0.0;
  double mean_test_mse = 0.0;
  double mean_test_rmse = 0.0;
};

/// run_experiment once per seed with averaged errors.
inline RepeatedResult run_repeated(const std::vector<ScenarioEvent>& master, Split split,
                                   const std::vector<std::uint64_t>& seeds, const ExperimentConfig& config = {}) {
  if (seeds.empty()) throw InvalidArgument("run_repeated needs at least one seed");
  RepeatedResult out;
  out.split = split;
  for (auto seed : seeds) out.runs.push_back(run_experiment(master, split, seed, config));
  const auto count = static_cast<double>(out.runs.size());
  for (const auto& run : out.runs) {
    out.mean_train_mse += run.eval.train_mse / count;
    out.mean_train_rmse += run.eval.train_rmse / count;
    out.mean_test_mse += run.eval.test_mse / count;
    out.mean_test_rmse += run.eval.test_rmse / count;
  }
  return out;
}

}  // namespace tacdss
