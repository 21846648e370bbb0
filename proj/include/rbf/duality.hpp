#pragma once

// Numerical certification of the zero-gap relation between the robust SDR
// and its max-min dual: KKT residuals, the certificate <-> (V, mu) map, the
// per-instance verification report, and a uniqueness probe for the inner
// minimizer.

#include <cstdint>
#include <string>
#include <vector>

#include "rbf/core.hpp"
#include "rbf/formulations.hpp"
#include "rbf/oracle.hpp"
#include "rbf/sdp.hpp"

namespace rbf {

/// Residuals of the joint optimality system of the robust SDR and its dual,
/// each the worst value over users. PSD violations are max(0, -lambda_min).
struct KktResidual {
  double primal_cone = 0.0;       // W_i PSD, lambda_i >= 0, A_i PSD
  double psi_psd = 0.0;           // Psi_i(W, lambda_i) PSD
  double y_psd = 0.0;             // Y_i(A) PSD
  double psi_a = 0.0;             // ||Psi_i A_i||_F
  double y_w = 0.0;               // ||Y_i W_i||_F
  double trace = 0.0;             // max(0, tr A_i - (1 + r_i^2)[A_i]_c)
  double trace_slackness = 0.0;   // |(tr A_i - (1 + r_i^2)[A_i]_c) lambda_i|

  double max() const;
  /// max() <= 1e-6 (1 + |objective|).
  bool pass(double objective) const;
};

/// For a zero-radius user lambda_i is not attained; Psi_i is replaced by its
/// scalar limit hbar^H M_i hbar - noise_i and A_i must be a multiple of
/// e e^T, so psi_psd and psi_a use that scalar.
KktResidual check_kkt_15(const ProblemInstance& inst, const RobustDesign& design,
                         const DualCertificate& cert);

/// Residuals of the error-subproblem optimality system for user i at the
/// multipliers (xi, tau).
struct ErrorKktResidual {
  double v_feasibility = 0.0;  // V PSD, tr V <= 1 + r^2, |[V]_c - 1|
  double xi_sign = 0.0;        // max(0, -xi)
  double psi_psd = 0.0;        // PSD violation of Psi~_i(W, xi, tau)
  double psi_v = 0.0;          // ||Psi~_i V||_F
  double slackness = 0.0;      // |xi (tr V - 1 - r^2)| + |tau ([V]_c - 1)|

  double max() const;
};

/// Psi~_i = G^H M_i G + blockdiag(xi I, xi + tau).
HermMatrix build_psi_tilde(const ProblemInstance& inst, std::span<const HermMatrix> w,
                           std::size_t i, double xi, double tau);

ErrorKktResidual check_kkt_21(const ProblemInstance& inst,
                              std::span<const HermMatrix> w, std::size_t i,
                              const HermMatrix& v, double xi, double tau);

/// mu_i = [A_i]_c, V_i = A_i / mu_i. Throws std::invalid_argument
/// ("degenerate certificate") when a corner entry is <= 1e-10.
MaxMinSolution map_certificate_to_maxmin(const DualCertificate& cert);

/// A_i = mu_i V_i, objective sum noise_i mu_i [V_i]_c.
DualCertificate map_maxmin_to_certificate(const ProblemInstance& inst,
                                          std::span<const HermMatrix> v,
                                          std::span<const double> mu);

enum class Condition1 { NotRun, Unique, Ambiguous, Failed };
std::string to_string(Condition1 c);

struct ProbeResult {
  Condition1 verdict = Condition1::NotRun;
  double max_deviation = 0.0;  // largest Frobenius distance to the reference
  double perturbation = 0.0;   // relative size of the objective shifts
};

struct ProbeOptions {
  int trials = 16;
  double relative_size = 1e-7;
  double threshold = 1e-5;
  std::uint64_t seed = 0x5eedULL;
  sdp::SolverOptions solver;
};

/// Re-solves the inner power-minimization SDP with R_i = G_i V_i G_i^H from
/// the certificate, once as is and then under small random Hermitian shifts
/// of the objective. Unique when every perturbed minimizer stays within
/// `threshold` (Frobenius, over all users) of the reference minimizer.
ProbeResult probe_condition1(const ProblemInstance& inst, const DualCertificate& cert,
                             const ProbeOptions& opts = {});

struct DualityReport {
  sdp::Status primal_status = sdp::Status::NumericalFailure;
  sdp::Status dual_status = sdp::Status::NumericalFailure;
  double primal_obj = 0.0;
  double dual_obj = 0.0;
  double rel_gap = 0.0;

  std::vector<double> rank_profile;
  bool fallback = false;
  double beam_power = 0.0;
  std::vector<double> worst_case_margins;

  KktResidual kkt;
  bool kkt_pass = false;

  double fixed_certificate_obj = 0.0;
  bool fixed_certificate_accepts_design = false;
  std::vector<double> activity;  // error-SDR value at W* per user
  double activity_error = 0.0;   // max |activity_i - noise_i|

  ProbeResult condition1;

  /// Violation of the Farkas ray when the robust SDR is infeasible.
  double infeasibility_certificate = 0.0;

  std::string error;
  bool passed = false;

  RobustDesign design;
  DualCertificate certificate;
  BeamformerSet beams;
};

struct VerifyOptions {
  sdp::SolverOptions solver;
  bool probe = true;
  ProbeOptions probe_options;
  double gap_tol = 1e-6;
  double kkt_tol = 1e-6;
  double activity_tol = 1e-6;
};

/// Solves the robust SDR and the independently built dual, then checks gap,
/// KKT residuals, the fixed-certificate inner problem, constraint activity,
/// rank-one extraction with worst-case margins, and optionally probes
/// uniqueness of the inner minimizer.
/// Never throws on solver trouble; statuses and `error` carry the outcome.
DualityReport verify_proposition1(const ProblemInstance& inst,
                                  const VerifyOptions& opts = {});

}  // namespace rbf
