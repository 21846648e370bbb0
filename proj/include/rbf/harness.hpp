#pragma once

// Seeded instance generation and Monte Carlo power-versus-SINR sweeps.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rbf/core.hpp"
#include "rbf/duality.hpp"
#include "rbf/sdp.hpp"

namespace rbf {

/// Counter-based SplitMix64 stream: the value depends only on the key and the
/// counter, never on call order.
std::uint64_t splitmix64(std::uint64_t x);
double counter_uniform(std::uint64_t seed, std::uint64_t user, std::uint64_t entry,
                       std::uint64_t lane);

/// hbar_i entries i.i.d. circularly-symmetric complex Gaussian with unit
/// variance, keyed by (seed, i, entry). Uniform radius, noise and target.
ProblemInstance generate_instance(int nt, int k, double sigma2, double radius,
                                  double gamma_db, std::uint64_t seed);

/// Channel seed of a sweep trial. Independent of the SINR target, so every
/// point of the grid sees the same channels.
std::uint64_t trial_seed(std::uint64_t sweep_seed, int trial);

struct SweepConfig {
  int nt = 4;
  int k = 4;
  double sigma2 = 0.1;
  double radius = 0.1;
  std::vector<double> gamma_db_grid{0.0, 2.0, 4.0, 6.0, 8.0};
  int trials = 100;
  std::uint64_t seed = 1;
  /// 0 means the available hardware parallelism. RBF_WORKERS overrides.
  int workers = 0;
  bool probe = true;
  sdp::SolverOptions solver;

  /// Throws std::invalid_argument unless trials >= 1, the grid is nonempty
  /// and strictly ascending, and the sizes are positive.
  void validate() const;
};

struct SweepRecord {
  double gamma_db = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  std::string status;
  double power = 0.0;  // sum tr W_i; NaN unless Optimal
  double rel_gap = 0.0;
  double max_rank_ratio = 0.0;
  double min_margin = 0.0;
  std::string condition1;
  double wall_time_ms = 0.0;
  bool passed = false;
  DualityReport report;
};

struct AggregateRow {
  double gamma_db = 0.0;
  int trials = 0;
  int optimal = 0;
  double feasibility_rate = 0.0;
  double mean_power = 0.0;     // linear, over Optimal records
  double mean_power_db = 0.0;  // 10 log10(mean_power)
};

struct SweepResult {
  std::vector<SweepRecord> records;  // ordered by (gamma index, trial)
  std::vector<AggregateRow> aggregate;
};

int effective_workers(const SweepConfig& cfg);

/// Runs verify_proposition1 on every (gamma, trial) pair. Trial failures are
/// recorded, never thrown.
SweepResult run_sweep(const SweepConfig& cfg);

std::vector<AggregateRow> aggregate(const std::vector<SweepRecord>& records);

extern const char* const kAggregatePolicy;

void write_records_csv(std::ostream& out, const std::vector<SweepRecord>& records);
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);

}  // namespace rbf
