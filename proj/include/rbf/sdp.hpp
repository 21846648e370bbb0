#pragma once

// Dense primal-dual interior-point solver for standard-form conic programs
//
//   minimize    sum_j <C_j, X_j>
//   subject to  sum_j <A_rj, X_j> = b_r,   r = 1..m
//               X_j PSD (symmetric blocks) or X_j >= 0 (nonnegative blocks)
//
// with dual
//
//   maximize    b^T y
//   subject to  S_j = C_j - sum_r y_r A_rj,  S_j PSD / S_j >= 0.
//
// Coefficient matrices are stored sparsely as upper-triangle triplets.

#include <iosfwd>
#include <string>
#include <vector>

#include "rbf/core.hpp"

namespace rbf::sdp {

enum class BlockKind { Psd, Nonneg };

struct BlockSpec {
  BlockKind kind = BlockKind::Psd;
  int size = 0;
};

struct Entry {
  int row = 0;
  int col = 0;
  double value = 0.0;
};

/// Symmetric coefficient matrix given by its upper triangle (row <= col).
/// For nonnegative blocks only diagonal entries are meaningful.
struct SparseSym {
  std::vector<Entry> entries;

  /// Adds `value` at (row, col) of the symmetric matrix; (col, row) is
  /// implied. Entries with row > col are mirrored into the upper triangle.
  void add(int row, int col, double value);
  bool empty() const { return entries.empty(); }
  RMatrix dense(int n) const;
};

struct Term {
  int block = 0;
  SparseSym coeff;
};

struct Constraint {
  std::vector<Term> terms;
  double rhs = 0.0;
};

struct ConicProgram {
  std::vector<BlockSpec> blocks;
  std::vector<SparseSym> objective;  // one per block, may be empty
  std::vector<Constraint> constraints;

  int num_constraints() const { return static_cast<int>(constraints.size()); }
  /// Throws std::invalid_argument on out-of-range blocks or indices,
  /// off-diagonal entries in nonnegative blocks, or non-finite data.
  void validate() const;
};

enum class Status {
  Optimal,
  PrimalInfeasible,
  DualInfeasible,
  MaxIterations,
  NumericalFailure,
};

std::string to_string(Status s);

/// Primal-dual answer. Nonnegative blocks are stored as n x 1 columns.
///
/// On PrimalInfeasible, `dual_y` holds a Farkas ray: b^T y = 1 and
/// -sum_r y_r A_r is PSD / nonnegative up to `certificate_violation`.
/// On DualInfeasible, `primal` holds a ray: X in the cone,
/// <C, X> = -1 and ||A(X)|| = `certificate_violation`.
struct ConicSolution {
  Status status = Status::NumericalFailure;
  std::vector<RMatrix> primal;
  std::vector<double> dual_y;
  std::vector<RMatrix> dual_slack;
  double primal_obj = 0.0;
  double dual_obj = 0.0;
  double gap = 0.0;
  double primal_residual = 0.0;  // ||b - A(X)|| / (1 + ||b||)
  double dual_residual = 0.0;    // ||C - S - A^T y|| / (1 + ||C||)
  double certificate_violation = 0.0;
  int iterations = 0;
};

struct SolverOptions {
  double gap_tol = 1e-9;
  double feas_tol = 1e-9;
  int max_iterations = 200;
  double step_fraction = 0.98;
  /// Lower bound on the Mehrotra centering parameter. Keeps X and S nearly
  /// commuting so complementarity products shrink with the gap.
  double min_centering = 0.1;
  /// Farkas rays are accepted once their sign violation drops below this.
  double infeasibility_tol = 1e-8;
  bool verbose = false;
};

/// Result of dependent-row elimination.
struct Presolved {
  ConicProgram program;
  std::vector<int> kept_rows;  // original index of every surviving row
  int original_rows = 0;
  bool inconsistent = false;
  int inconsistent_row = -1;
  /// When inconsistent: y over the original rows with A^T y ~ 0, b^T y = 1.
  std::vector<double> infeasibility_ray;

  /// Lifts a dual vector of the reduced program to the original rows
  /// (removed rows get multiplier zero, which leaves A^T y unchanged).
  std::vector<double> lift_dual(const std::vector<double>& y) const;
};

/// Removes linearly dependent equality rows (Gram-Schmidt with pivot
/// tolerance 1e-10 relative to the row norm) and flags inconsistent ones.
Presolved presolve(const ConicProgram& prog);

/// Solves the program. Throws std::invalid_argument on malformed input.
ConicSolution solve(const ConicProgram& prog, const SolverOptions& opts = {});

/// <A_row, X> summed over blocks.
double apply_row(const ConicProgram& prog, int row, const std::vector<RMatrix>& x);
double apply_objective(const ConicProgram& prog, const std::vector<RMatrix>& x);

/// sum_r y_r A_r per block, nonnegative blocks as columns.
std::vector<RMatrix> adjoint(const ConicProgram& prog,
                             const std::vector<double>& y);

/// Writes one line per nonzero (constraint, block, row, col, value) with
/// 1-based indices; constraint 0 is the objective. Preceded by block and
/// right-hand-side records.
void dump_text(const ConicProgram& prog, std::ostream& out);

}  // namespace rbf::sdp
