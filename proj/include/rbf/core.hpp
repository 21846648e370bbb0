#pragma once

// Complex linear algebra primitives shared by every other module: Hermitian
// matrices, a Jacobi eigensolver, the real-symmetric embedding of Hermitian
// matrices, and the problem instance of the robust downlink design.

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace rbf {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

/// Returns true when `m` is square and Hermitian to 1e-12 relative to its
/// largest entry (diagonal imaginary parts included).
bool is_hermitian(const CMatrix& m, double tol = 1e-12);

/// A square complex matrix equal to its conjugate transpose.
///
/// Construction symmetrizes its argument as (M + M^H)/2. Builds with
/// RBF_STRICT_HERMITIAN defined additionally reject inputs that are
/// not Hermitian before averaging.
class HermMatrix {
 public:
  HermMatrix() = default;
  explicit HermMatrix(const CMatrix& m);

  /// Throws std::invalid_argument when `m` violates the Hermitian invariant.
  static HermMatrix checked(const CMatrix& m);
  static HermMatrix zero(Eigen::Index n);
  static HermMatrix identity(Eigen::Index n);

  Eigen::Index dim() const { return m_.rows(); }
  const CMatrix& mat() const { return m_; }
  operator const CMatrix&() const { return m_; }  // NOLINT
  cplx operator()(Eigen::Index r, Eigen::Index c) const { return m_(r, c); }

  double trace() const { return m_.diagonal().real().sum(); }
  double norm() const { return m_.norm(); }

  HermMatrix& operator+=(const HermMatrix& o);
  HermMatrix& operator-=(const HermMatrix& o);
  HermMatrix& operator*=(double s);

 private:
  CMatrix m_;
};

HermMatrix operator+(HermMatrix a, const HermMatrix& b);
HermMatrix operator-(HermMatrix a, const HermMatrix& b);
HermMatrix operator*(double s, HermMatrix a);
HermMatrix operator*(HermMatrix a, double s);

/// Real inner product <A, B> = Re tr(A^H B).
double inner(const HermMatrix& a, const HermMatrix& b);

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending and eigenvectors
/// as the columns of a unitary matrix.
struct EigDecomp {
  RVector values;
  CMatrix vectors;
};

/// Cyclic Jacobi eigensolver for real symmetric matrices (ascending order).
/// Throws std::invalid_argument on non-square or non-symmetric input.
struct RealEig {
  RVector values;
  RMatrix vectors;
};
RealEig jacobi_eig(const RMatrix& a);

/// Eigendecomposition of H through Jacobi on its real embedding; each
/// eigenvalue of the embedding appears twice and the pairs are collapsed.
EigDecomp herm_eig(const HermMatrix& h);
/// Overload for raw input; throws std::invalid_argument if not Hermitian.
EigDecomp herm_eig(const CMatrix& h);

double lambda_min(const HermMatrix& h);
double lambda_max(const HermMatrix& h);

/// [[Re H, -Im H], [Im H, Re H]].
RMatrix real_embed(const HermMatrix& h);

/// Inverse of the embedding on arbitrary symmetric Z: the Hermitian X(Z)
/// with <real_embed(C), Z> = 2 <C, X(Z)> for every Hermitian C.
HermMatrix real_unembed(const RMatrix& z);

/// |h^H w_i|^2 / (sum_{k != i} |h^H w_k|^2 + noise). Throws
/// std::out_of_range on a bad user index.
double evaluate_sinr(std::span<const CVector> w, const CVector& h,
                     std::size_t i, double noise);

/// [I  hbar] as an N x (N+1) matrix.
CMatrix lift_matrix(const CVector& hbar);

/// Full input of the robust design: per-user channel estimates, error-ball
/// radii, noise powers, and linear-scale SINR targets.
struct ProblemInstance {
  int nt = 0;
  int k = 0;
  std::vector<CVector> hbar;
  std::vector<double> radius;
  std::vector<double> noise;
  std::vector<double> sinr_target;

  /// Throws std::invalid_argument when counts, dimensions or signs are off.
  /// Radii may be zero (perfect CSI); everything else must be positive.
  void validate() const;
};

double db_to_linear(double db);
double linear_to_db(double x);

}  // namespace rbf
