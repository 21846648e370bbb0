#pragma once

// Translation of a ProblemInstance into the conic programs of the robust
// design: the S-lemma SDR over (W, lambda), its hand-built dual over A, the
// inner power-minimization SDP for fixed channel covariances, the inner
// problem at a fixed dual certificate, and the per-user error SDR.
//
// Hermitian variables are passed to the real solver through the real
// embedding; every coefficient is halved so that objective values and
// constraint right-hand sides stay in complex units.

#include <optional>
#include <span>
#include <vector>

#include "rbf/core.hpp"
#include "rbf/sdp.hpp"

namespace rbf {

/// Optimal (W_i, lambda_i) of the robust SDR.
struct RobustDesign {
  std::vector<HermMatrix> W;
  std::vector<double> lambda;
  double objective = 0.0;  // sum_i tr(W_i)
};

/// Dual variables A_i, each of size (N_t+1).
struct DualCertificate {
  std::vector<HermMatrix> A;
  double objective = 0.0;  // sum_i noise_i [A_i]_{N_t+1}
};

/// Outer/inner pair of the max-min SDR: error covariances V_i with unit
/// corner, inner multipliers mu_i and the inner minimizer W.
struct MaxMinSolution {
  std::vector<HermMatrix> V;
  std::vector<double> mu;
  std::vector<HermMatrix> W;
};

/// W_i / gamma_i - sum_{k != i} W_k.
HermMatrix sinr_form(const ProblemInstance& inst, std::span<const HermMatrix> w,
                     std::size_t i);

/// Psi_i(W, lambda_i) = G_i^H M_i G_i + blockdiag(lambda_i I, -noise_i -
/// lambda_i r_i^2), with G_i = [I hbar_i] and M_i the SINR form.
HermMatrix build_psi(const ProblemInstance& inst, std::span<const HermMatrix> w,
                     std::size_t i, double lambda_i);

/// Y_i(A) = I - G_i A_i G_i^H / gamma_i + sum_{k != i} G_k A_k G_k^H.
HermMatrix build_y(const ProblemInstance& inst, std::span<const HermMatrix> a,
                   std::size_t i);

/// Corner entry [A]_{N+1} (real part of the bottom-right element).
double corner(const HermMatrix& a);

// ---------------------------------------------------------------------------
// Modeling layer

/// Accumulates a standard-form program over Hermitian PSD blocks and
/// nonnegative scalar blocks.
class ProgramBuilder {
 public:
  /// Adds an n x n Hermitian PSD variable (a 2n real block); returns its id.
  int add_herm_block(int n);
  int add_nonneg_block(int n);

  void add_objective(int block, const HermMatrix& c);
  void add_objective(int block, int index, double c);

  /// Starts a new equality row <., X> = rhs; returns its index.
  int add_row(double rhs);
  void add_term(int row, int block, const HermMatrix& c);
  void add_term(int row, int block, int index, double c);

  const sdp::ConicProgram& program() const { return prog_; }
  sdp::ConicProgram take() { return std::move(prog_); }

 private:
  sdp::SparseSym& term(int row, int block);

  sdp::ConicProgram prog_;
  std::vector<bool> herm_;
};

/// Hermitian value of an embedded primal block.
HermMatrix primal_herm(const RMatrix& z);
/// Hermitian functional represented by an embedded dual slack block.
HermMatrix dual_herm(const RMatrix& s);

/// Real-linear coordinates of an n x n Hermitian matrix: n^2 functionals
/// E_d with <E_d, X> = Re X_aa, Re X_ab or Im X_ab.
std::vector<HermMatrix> hermitian_coordinates(int n);

// ---------------------------------------------------------------------------
// Programs

struct RobustSdrProgram {
  sdp::ConicProgram program;
  std::vector<int> w_block;
  /// Hermitian block for r_i > 0, scalar block for r_i = 0.
  std::vector<int> psi_block;
  int lambda_block = -1;
  /// Position of lambda_i inside `lambda_block`, -1 for zero radius.
  std::vector<int> lambda_index;
};

/// minimize sum tr(W_i) s.t. Psi_i(W, lambda_i) PSD, W_i PSD, lambda >= 0.
/// Each Psi_i is an explicit PSD block tied to (W, lambda) by equalities.
/// A user with r_i = 0 gets the scalar constraint hbar^H M_i hbar >= noise_i
/// instead, since no finite multiplier attains the optimum there; its
/// lambda_i is reported as 0.
RobustSdrProgram build_wsp_sdr(const ProblemInstance& inst);
RobustDesign decode_design(const RobustSdrProgram& prog,
                           const sdp::ConicSolution& sol);
/// Multipliers of the Psi_i blocks, i.e. the solver's own dual of the SDR.
DualCertificate recover_certificate(const ProblemInstance& inst,
                                    const RobustSdrProgram& prog,
                                    const sdp::ConicSolution& sol);

struct DualSdpProgram {
  sdp::ConicProgram program;  // minimizes the negated dual objective
  /// Hermitian block for r_i > 0; for r_i = 0 a scalar a_i with
  /// A_i = a_i e e^T.
  std::vector<int> a_block;
  std::vector<int> y_block;
  int slack_block = -1;
};

/// maximize sum noise_i [A_i]_{N+1} s.t. Y_i(A) PSD,
/// tr(A_i) <= (1 + r_i^2)[A_i]_{N+1}, A_i PSD. Built directly from the
/// definition of Y_i rather than by dualizing the robust SDR.
DualSdpProgram build_dual_sdp(const ProblemInstance& inst);
DualCertificate decode_certificate(const ProblemInstance& inst,
                                   const DualSdpProgram& prog,
                                   const sdp::ConicSolution& sol);

struct InnerSdpProgram {
  sdp::ConicProgram program;
  std::vector<int> w_block;
  int slack_block = -1;
};

/// minimize sum tr(W_i) (+ <shift_i, W_i>) s.t.
/// <M_i(W), R_i> >= rhs_scale_i * noise_i, W_i PSD.
/// `objective_shift` and `rhs_scale` may be empty.
InnerSdpProgram build_inner_sdp(const ProblemInstance& inst,
                                std::span<const HermMatrix> r,
                                std::span<const HermMatrix> objective_shift = {},
                                std::span<const double> rhs_scale = {});

/// Inner problem at a fixed certificate: R_i = G_i A_i G_i^H with the
/// right-hand side noise_i [A_i]_{N+1}. Throws std::invalid_argument when a
/// corner entry is not positive.
InnerSdpProgram build_fixed_certificate_inner(const ProblemInstance& inst,
                                              const DualCertificate& cert);
std::vector<HermMatrix> decode_inner(const InnerSdpProgram& prog,
                                     const sdp::ConicSolution& sol);

struct ErrorSdrProgram {
  sdp::ConicProgram program;
  int v_block = -1;
  int slack_block = -1;
};

/// minimize <G_i^H M_i(W) G_i, V> over V PSD, tr(V) <= 1 + r_i^2,
/// [V]_{N+1} = 1 (real part pinned to 1, imaginary part to 0).
ErrorSdrProgram build_error_sdr(const ProblemInstance& inst,
                                std::span<const HermMatrix> w, std::size_t i);
HermMatrix decode_error_sdr(const ErrorSdrProgram& prog,
                            const sdp::ConicSolution& sol);

/// Channel covariance R_i = G_i V_i G_i^H for an error covariance V_i.
HermMatrix channel_covariance(const CVector& hbar, const HermMatrix& v);

}  // namespace rbf
