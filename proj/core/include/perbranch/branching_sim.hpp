// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "perbranch/common.hpp"
#include "perbranch/periodic_media.hpp"
#include "perbranch/random.hpp"

namespace perbranch {

struct SimConfig {
  MediaPtr media;
  Vec x0;
  std::vector<double> sample_times;  // nondecreasing, the last one is the horizon
  double dt = 1e-3;
  long replicas = 10000;
  std::uint64_t seed = 42;
  long cap = 1000000;
  bool cap_override = false;  // accept cap < 10 e^{max r T}
  std::vector<Vec> targets;   // cube corners y (cubes y + [0,1)^d)
  bool frozen = false;        // skip motion (pure branching/killing)
  int field_nodes = 0;        // tabulation nodes per axis; 0 picks 2048 (d=1) or 256 (d=2)
  bool keep_total_samples = false;
  int threads = 0;

  double horizon() const { return sample_times.empty() ? 0.0 : sample_times.back(); }
  /// Throws ConfigError on an inadmissible configuration.
  void validate() const;
};

/// Parses the `sim` block {T | times, dt, replicas, seed, cap, targets, x0, frozen}.
SimConfig sim_config_from_json(const nlohmann::json& block, MediaPtr media);

/// Coefficients tabulated on a periodic grid with (bi)linear interpolation;
/// sigma is the symmetric square root of a.
class FieldTable {
 public:
  FieldTable(const MediaSpec& media, int nodes_per_axis);

  int dim() const { return dim_; }
  struct Local {
    std::array<double, 2> drift{0.0, 0.0};
    std::array<double, 4> sigma{0.0, 0.0, 0.0, 0.0};  // row-major
    double alpha = 0.0;
    double beta = 0.0;
  };
  Local at(const double* x) const;

 private:
  int dim_;
  int n_;
  // per node: b (d), sigma (d*d), alpha, beta
  int stride_;
  std::vector<double> data_;
};

/// One replica: particle positions in R^d (unwrapped, row-major), time and RNG stream.
struct Ensemble {
  std::uint64_t replica = 0;
  int dim = 1;
  std::vector<double> positions;
  double time = 0.0;
  Philox rng{0, 0};
  bool censored = false;

  Ensemble(std::uint64_t seed, std::uint64_t replica_id, const Vec& x0);
  std::size_t size() const { return positions.size() / static_cast<std::size_t>(dim); }
};

/// Euler-Maruyama move, then one uniform draw per particle against the
/// first-event probability 1 - e^{-(alpha + beta) dt}, split into branching
/// (daughter at the parent position) and death in proportion alpha : beta.
/// All coefficients are read at the start-of-step position.
/// Marks the ensemble censored when the population exceeds `cap`.
void step_ensemble(Ensemble& ens, const FieldTable& fields, double dt, long cap, bool frozen = false);

struct MomentEstimate {
  double mean = 0.0;
  double variance = 0.0;
  double se = 0.0;
  long count = 0;
};

struct CountStatistics {
  std::vector<double> times;
  std::vector<Vec> targets;
  long replicas = 0;
  long censored = 0;
  std::uint64_t seed = 0;
  double dt = 0.0;
  std::string media_hash;
  std::vector<std::array<MomentEstimate, 3>> total;               // [time] powers 1..3 of N
  std::vector<std::vector<std::array<MomentEstimate, 3>>> cube;   // [target][time] powers 1..3 of n^y
  std::vector<std::vector<MomentEstimate>> center;                // [time][axis] center of mass, replicas with N > 0
  std::vector<std::vector<MomentEstimate>> center_square;         // [time][axis] squared center-of-mass displacement from x0
  std::vector<std::vector<double>> total_samples;                 // [time][replica] when requested
  bool monotone_total = true;  // N non-decreasing along every path (meaningful when beta = 0)
};

/// Runs the replicas in parallel and reduces them in replica order with
/// compensated sums, so the result does not depend on the thread count.
/// Throws RunError when more than 1% of the replicas are censored.
CountStatistics run_replicas(const SimConfig& config);

struct Prediction {
  enum class Quantity { Total, Cube, Center };
  std::string label;
  Quantity quantity = Quantity::Total;
  int power = 1;          // 1..3 for Total / Cube
  std::size_t target = 0;  // cube index or axis for Center
  std::size_t time = 0;    // index into the sample times
  double value = 0.0;      // predicted value of scale * E[...]
  double scale = 1.0;      // normalization applied to the empirical mean and SE
  std::string media_hash;
};

struct ComparisonRow {
  std::string label;
  double empirical = 0.0;
  double se = 0.0;
  double predicted = 0.0;
  double z = 0.0;
  bool pass = false;
};

/// z-scores (empirical - predicted) / SE, pass at |z| <= 3.
std::vector<ComparisonRow> compare_to_theory(const CountStatistics& stats, std::span<const Prediction> predictions);

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

}  // namespace perbranch
