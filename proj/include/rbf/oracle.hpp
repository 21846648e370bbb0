#pragma once

// Checks that do not go through the conic solver: the exact worst-case error
// over the uncertainty ball (a trust-region subproblem), a direct S-lemma
// multiplier search, worst-case SINR of concrete beamformers, and rank-one
// extraction from an SDR design.

#include <optional>
#include <vector>

#include "rbf/core.hpp"
#include "rbf/formulations.hpp"

namespace rbf {

struct TrsResult {
  double value = 0.0;      // min over ||e|| <= r of (hbar+e)^H Q (hbar+e)
  CVector argmin;          // e*
  double multiplier = 0.0; // nu >= 0 of the ball constraint
  bool hard_case = false;
};

/// Global minimum of (hbar+e)^H Q (hbar+e) over ||e|| <= r for Hermitian,
/// possibly indefinite Q. With x = hbar + e the stationarity condition is
/// (Q + nu I) x = nu hbar, Q + nu I PSD, nu (r - ||e||) = 0.
///
/// In the hard case the free component is placed along the first bottom
/// eigenvector with a positive real coefficient. r = 0 returns the value
/// at hbar. Throws std::invalid_argument for r < 0 or mismatched sizes.
TrsResult trs_min(const HermMatrix& q, const CVector& hbar, double r);

/// A lambda_i >= 0 with Psi_i(W, lambda_i) PSD, or nullopt if none exists.
/// lambda_min(Psi_i) is concave in lambda_i, so it is maximized by golden
/// section over [0, Lambda] where Lambda bounds every feasible multiplier.
/// Requires r_i > 0.
std::optional<double> slemma_check(const ProblemInstance& inst,
                                   std::span<const HermMatrix> w, std::size_t i);

struct BeamformerSet {
  std::vector<CVector> w;
  double power = 0.0;  // sum ||w_i||^2

  static BeamformerSet from(std::vector<CVector> w);
};

/// Largest gamma for which user i's SINR target holds for every error in its
/// ball. Bisection on log(gamma) over [1e-6, 1e6] (30 steps) with trs_min as
/// the inner check; returns the lower, certified end of the final bracket.
/// Returns 0 when even 1e-6 fails.
double worst_case_sinr(const ProblemInstance& inst, const BeamformerSet& w,
                       std::size_t i);

/// (worst_case_sinr - gamma_i) / gamma_i for every user.
std::vector<double> worst_case_margins(const ProblemInstance& inst,
                                       const BeamformerSet& w);

struct Extraction {
  BeamformerSet beams;
  std::vector<double> rank_profile;  // lambda_2 / lambda_1 per W_i
  bool fallback = false;
  double power_scale = 1.0;
};

inline constexpr double kRankThreshold = 1e-6;

/// w_i = sqrt(lambda_1) u_1 of each W_i. If some W_i has rank ratio above
/// kRankThreshold, every w_i is scaled by a common sqrt(t), t >= 1, found by
/// bisection so that all worst-case SINRs reach their targets. Throws
/// std::runtime_error (message lists the rank profile) if no t <= 1e6 works.
Extraction extract_beamformers(const RobustDesign& design,
                               const ProblemInstance& inst);

}  // namespace rbf
