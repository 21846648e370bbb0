#include "rbf/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>

namespace rbf::sdp {

void SparseSym::add(int row, int col, double value) {
  if (value == 0.0) return;
  if (row > col) std::swap(row, col);
  for (auto& e : entries) {
    if (e.row == row && e.col == col) {
      e.value += value;
      return;
    }
  }
  entries.push_back({row, col, value});
}

RMatrix SparseSym::dense(int n) const {
  RMatrix out = RMatrix::Zero(n, n);
  for (const auto& e : entries) {
    out(e.row, e.col) += e.value;
    if (e.row != e.col) out(e.col, e.row) += e.value;
  }
  return out;
}

namespace {

void check_sym(const SparseSym& s, const BlockSpec& b, const std::string& where) {
  for (const auto& e : s.entries) {
    if (e.row < 0 || e.col < 0 || e.row >= b.size || e.col >= b.size) {
      throw std::invalid_argument(where + ": entry index outside its block");
    }
    if (b.kind == BlockKind::Nonneg && e.row != e.col) {
      throw std::invalid_argument(where + ": off-diagonal entry in nonnegative block");
    }
    if (!std::isfinite(e.value)) {
      throw std::invalid_argument(where + ": non-finite coefficient");
    }
  }
}

}  // namespace

void ConicProgram::validate() const {
  for (const auto& b : blocks) {
    if (b.size < 1) throw std::invalid_argument("program: block size must be >= 1");
  }
  if (objective.size() != blocks.size()) {
    throw std::invalid_argument("program: objective must have one entry per block");
  }
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    check_sym(objective[j], blocks[j], "objective");
  }
  for (std::size_t r = 0; r < constraints.size(); ++r) {
    const auto& c = constraints[r];
    if (!std::isfinite(c.rhs)) {
      throw std::invalid_argument("program: non-finite right-hand side");
    }
    for (const auto& t : c.terms) {
      if (t.block < 0 || t.block >= static_cast<int>(blocks.size())) {
        throw std::invalid_argument("program: constraint " + std::to_string(r) +
                                    " references a missing block");
      }
      check_sym(t.coeff, blocks[t.block], "constraint " + std::to_string(r));
    }
  }
}

std::string to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "Optimal";
    case Status::PrimalInfeasible: return "PrimalInfeasible";
    case Status::DualInfeasible: return "DualInfeasible";
    case Status::MaxIterations: return "MaxIterations";
    case Status::NumericalFailure: return "NumericalFailure";
  }
  return "Unknown";
}

namespace {

double sym_inner(const SparseSym& a, const RMatrix& x, BlockKind kind) {
  double s = 0.0;
  for (const auto& e : a.entries) {
    if (kind == BlockKind::Nonneg) {
      s += e.value * x(e.row, 0);
    } else {
      s += e.value * (e.row == e.col ? x(e.row, e.col)
                                     : x(e.row, e.col) + x(e.col, e.row));
    }
  }
  return s;
}

void add_scaled(RMatrix& out, const SparseSym& a, double scale, BlockKind kind) {
  for (const auto& e : a.entries) {
    if (kind == BlockKind::Nonneg) {
      out(e.row, 0) += scale * e.value;
    } else {
      out(e.row, e.col) += scale * e.value;
      if (e.row != e.col) out(e.col, e.row) += scale * e.value;
    }
  }
}

RMatrix zero_block(const BlockSpec& b) {
  return b.kind == BlockKind::Psd ? RMatrix::Zero(b.size, b.size)
                                  : RMatrix::Zero(b.size, 1);
}

std::vector<RMatrix> zero_blocks(const ConicProgram& p) {
  std::vector<RMatrix> out;
  out.reserve(p.blocks.size());
  for (const auto& b : p.blocks) out.push_back(zero_block(b));
  return out;
}

double block_inner(const RMatrix& a, const RMatrix& b) {
  return a.cwiseProduct(b).sum();
}

double blocks_inner(const std::vector<RMatrix>& a, const std::vector<RMatrix>& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += block_inner(a[j], b[j]);
  return s;
}

double blocks_norm(const std::vector<RMatrix>& a) {
  return std::sqrt(blocks_inner(a, a));
}

double block_max_eig(const RMatrix& x, BlockKind kind) {
  if (kind == BlockKind::Nonneg) return x.maxCoeff();
  Eigen::SelfAdjointEigenSolver<RMatrix> es(x, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

// Largest step keeping x + alpha dx in the cone (infinity if unbounded).
double max_step(const RMatrix& x, const RMatrix& dx, BlockKind kind) {
  double alpha = std::numeric_limits<double>::infinity();
  if (kind == BlockKind::Nonneg) {
    for (Eigen::Index d = 0; d < x.rows(); ++d) {
      if (dx(d, 0) < 0.0) alpha = std::min(alpha, -x(d, 0) / dx(d, 0));
    }
    return alpha;
  }
  RMatrix t;
  Eigen::LLT<RMatrix> llt(x);
  if (llt.info() == Eigen::Success) {
    const RMatrix linv_dx = llt.matrixL().solve(dx);
    t = llt.matrixL().solve(linv_dx.transpose());
  } else {
    Eigen::SelfAdjointEigenSolver<RMatrix> ex(x);
    if (ex.eigenvalues()(0) <= 0.0) return 0.0;
    const RMatrix half = ex.eigenvectors() * ex.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal();
    t = half.transpose() * dx * half;
  }
  t = 0.5 * (t + t.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<RMatrix> es(t, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  if (lmin < 0.0) alpha = -1.0 / lmin;
  return alpha;
}

// Constraint data reorganized per block, with symmetric entries expanded.
struct FullEntry {
  int a;
  int b;
  double v;
};

struct BlockRows {
  std::vector<int> rows;
  std::vector<std::vector<FullEntry>> entries;  // parallel to rows
};

std::vector<BlockRows> index_rows(const ConicProgram& p) {
  std::vector<BlockRows> out(p.blocks.size());
  for (int r = 0; r < p.num_constraints(); ++r) {
    for (const auto& t : p.constraints[r].terms) {
      if (t.coeff.empty()) continue;
      auto& br = out[t.block];
      std::vector<FullEntry> full;
      for (const auto& e : t.coeff.entries) {
        full.push_back({e.row, e.col, e.value});
        if (e.row != e.col) full.push_back({e.col, e.row, e.value});
      }
      if (!br.rows.empty() && br.rows.back() == r) {
        auto& last = br.entries.back();
        last.insert(last.end(), full.begin(), full.end());
      } else {
        br.rows.push_back(r);
        br.entries.push_back(std::move(full));
      }
    }
  }
  return out;
}

constexpr std::pair<double, double> kRetryLadder[] = {{0.3, 0.9}, {0.3, 0.8}};
// Once progress stalls, an iterate this accurate is still reported optimal.
constexpr double kInvariantGap = 1e-7;
constexpr double kAcceptFeas = 1e-8;
constexpr int kStallIterations = 6;
constexpr int kPolishIterations = 8;

class Solver {
 public:
  Solver(const ConicProgram& p, const SolverOptions& o)
      : p_(p), o_(o), m_(p.num_constraints()), rows_(index_rows(p)) {
    b_ = RVector(m_);
    for (int r = 0; r < m_; ++r) b_(r) = p.constraints[r].rhs;
    c_ = zero_blocks(p);
    for (std::size_t j = 0; j < p.blocks.size(); ++j) {
      add_scaled(c_[j], p.objective[j], 1.0, p.blocks[j].kind);
    }
    for (const auto& b : p.blocks) {
      cone_dim_ += b.size;
    }
    RMatrix aat(m_, m_);
    for (int r = 0; r < m_; ++r) aat.col(r) = apply_a(apply_at(RVector::Unit(m_, r)));
    aat_.compute(aat);
  }

  ConicSolution run();

 private:
  RVector apply_a(const std::vector<RMatrix>& x) const {
    RVector out = RVector::Zero(m_);
    for (int r = 0; r < m_; ++r) {
      for (const auto& t : p_.constraints[r].terms) {
        out(r) += sym_inner(t.coeff, x[t.block], p_.blocks[t.block].kind);
      }
    }
    return out;
  }

  std::vector<RMatrix> apply_at(const RVector& y) const {
    auto out = zero_blocks(p_);
    for (int r = 0; r < m_; ++r) {
      if (y(r) == 0.0) continue;
      for (const auto& t : p_.constraints[r].terms) {
        add_scaled(out[t.block], t.coeff, y(r), p_.blocks[t.block].kind);
      }
    }
    return out;
  }

  // X D S^{-1} per block (x d / s for nonnegative blocks), unsymmetrized.
  std::vector<RMatrix> apply_h(const std::vector<RMatrix>& d) const {
    std::vector<RMatrix> out(d.size());
    for (std::size_t j = 0; j < d.size(); ++j) {
      if (p_.blocks[j].kind == BlockKind::Nonneg) {
        out[j] = x_[j].cwiseProduct(d[j]).cwiseQuotient(s_[j]);
      } else {
        out[j] = x_[j] * d[j] * sinv_[j];
      }
    }
    return out;
  }

  static RMatrix sym(const RMatrix& a) { return 0.5 * (a + a.transpose()); }

  bool build_schur();
  void direction(const std::vector<RMatrix>& rd, const RVector& rp,
                 const std::vector<RMatrix>& rc, RVector& dy,
                 std::vector<RMatrix>& dx, std::vector<RMatrix>& ds) const;
  double step_length(const std::vector<RMatrix>& v,
                     const std::vector<RMatrix>& dv) const;
  bool check_primal_infeasible(ConicSolution& sol) const;
  bool check_dual_infeasible(ConicSolution& sol) const;
  void fill(ConicSolution& sol) const;
  bool factor();
  double off_center() const;
  void polish();

  const ConicProgram& p_;
  const SolverOptions& o_;
  int m_;
  std::vector<BlockRows> rows_;
  RVector b_;
  std::vector<RMatrix> c_;
  int cone_dim_ = 0;

  std::vector<RMatrix> x_, s_, sinv_;
  RVector y_;
  RMatrix schur_;
  Eigen::LDLT<RMatrix> ldlt_;
  Eigen::LLT<RMatrix> llt_;
  Eigen::LLT<RMatrix> aat_;
  bool use_llt_ = true;
};

bool Solver::build_schur() {
  schur_ = RMatrix::Zero(m_, m_);
  for (std::size_t j = 0; j < p_.blocks.size(); ++j) {
    const auto& br = rows_[j];
    if (br.rows.empty()) continue;
    if (p_.blocks[j].kind == BlockKind::Nonneg) {
      const RVector ratio = x_[j].col(0).cwiseQuotient(s_[j].col(0));
      for (std::size_t q = 0; q < br.rows.size(); ++q) {
        for (std::size_t pi = q; pi < br.rows.size(); ++pi) {
          double v = 0.0;
          for (const auto& eq : br.entries[q]) {
            for (const auto& ep : br.entries[pi]) {
              if (ep.a == eq.a) v += ep.v * eq.v * ratio(eq.a);
            }
          }
          schur_(br.rows[pi], br.rows[q]) += v;
          if (pi != q) schur_(br.rows[q], br.rows[pi]) += v;
        }
      }
      continue;
    }
    const RMatrix& x = x_[j];
    const RMatrix& si = sinv_[j];
    const int n = p_.blocks[j].size;
    RMatrix g(n, n);
    for (std::size_t q = 0; q < br.rows.size(); ++q) {
      g.setZero();
      for (const auto& e : br.entries[q]) {
        g.noalias() += e.v * x.col(e.a) * si.row(e.b);
      }
      for (std::size_t pi = q; pi < br.rows.size(); ++pi) {
        double v = 0.0;
        for (const auto& e : br.entries[pi]) v += e.v * g(e.a, e.b);
        schur_(br.rows[pi], br.rows[q]) += v;
        if (pi != q) schur_(br.rows[q], br.rows[pi]) += v;
      }
    }
  }
  llt_.compute(schur_);
  use_llt_ = llt_.info() == Eigen::Success;
  if (!use_llt_) {
    ldlt_.compute(schur_);
    if (ldlt_.info() != Eigen::Success) return false;
  }
  return true;
}

void Solver::direction(const std::vector<RMatrix>& rd, const RVector& rp,
                       const std::vector<RMatrix>& rc, RVector& dy,
                       std::vector<RMatrix>& dx,
                       std::vector<RMatrix>& ds) const {
  const RVector rhs = rp - apply_a(rc) + apply_a(apply_h(rd));
  auto schur_solve = [&](const RVector& v) {
    return use_llt_ ? RVector(llt_.solve(v)) : RVector(ldlt_.solve(v));
  };
  auto recover = [&]() {
    const auto aty = apply_at(dy);
    ds.resize(rd.size());
    for (std::size_t j = 0; j < rd.size(); ++j) ds[j] = rd[j] - aty[j];
    const auto hds = apply_h(ds);
    dx.resize(rd.size());
    for (std::size_t j = 0; j < rd.size(); ++j) {
      dx[j] = p_.blocks[j].kind == BlockKind::Nonneg ? RMatrix(rc[j] - hds[j])
                                                     : RMatrix(rc[j] - sym(hds[j]));
    }
  };
  dy = schur_solve(rhs);
  recover();
  // Iterative refinement against the unassembled operator: the Schur matrix
  // loses accuracy near the optimum and the primal residual stalls otherwise.
  for (int pass = 0; pass < 2; ++pass) {
    const RVector res = rp - apply_a(dx);
    if (res.norm() <= 1e-15 * (1.0 + rp.norm())) break;
    dy += schur_solve(res);
    recover();
  }
  // Cancellation in rc - H ds leaves a primal residual in dx; remove it with
  // the least-norm correction.
  if (aat_.info() == Eigen::Success) {
    const auto fix = apply_at(aat_.solve(RVector(rp - apply_a(dx))));
    for (std::size_t j = 0; j < dx.size(); ++j) dx[j] += fix[j];
  }
}

double Solver::step_length(const std::vector<RMatrix>& v,
                           const std::vector<RMatrix>& dv) const {
  double alpha = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < v.size(); ++j) {
    alpha = std::min(alpha, max_step(v[j], dv[j], p_.blocks[j].kind));
  }
  return std::min(1.0, o_.step_fraction * alpha);
}

bool Solver::check_primal_infeasible(ConicSolution& sol) const {
  const double by = b_.dot(y_);
  if (!(by > 0.0)) return false;
  const RVector ray = y_ / by;
  const auto aty = apply_at(ray);
  double viol = 0.0;
  for (std::size_t j = 0; j < aty.size(); ++j) {
    viol = std::max(viol, block_max_eig(aty[j], p_.blocks[j].kind));
  }
  if (viol > o_.infeasibility_tol) return false;
  sol.status = Status::PrimalInfeasible;
  sol.dual_y.assign(ray.data(), ray.data() + ray.size());
  sol.certificate_violation = viol;
  return true;
}

bool Solver::check_dual_infeasible(ConicSolution& sol) const {
  const double cx = blocks_inner(c_, x_);
  if (!(cx < 0.0)) return false;
  std::vector<RMatrix> ray = x_;
  for (auto& r : ray) r /= -cx;
  const double viol = apply_a(ray).norm();
  if (viol > o_.infeasibility_tol) return false;
  sol.status = Status::DualInfeasible;
  sol.primal = std::move(ray);
  sol.certificate_violation = viol;
  return true;
}

void Solver::fill(ConicSolution& sol) const {
  sol.primal = x_;
  sol.dual_slack = s_;
  sol.dual_y.assign(y_.data(), y_.data() + y_.size());
  sol.primal_obj = blocks_inner(c_, x_);
  sol.dual_obj = b_.dot(y_);
  sol.gap = sol.primal_obj - sol.dual_obj;
  sol.primal_residual = (b_ - apply_a(x_)).norm() / (1.0 + b_.norm());
  auto rd = apply_at(y_);
  for (std::size_t j = 0; j < rd.size(); ++j) rd[j] = c_[j] - s_[j] - rd[j];
  sol.dual_residual = blocks_norm(rd) / (1.0 + blocks_norm(c_));
}

bool Solver::factor() {
  for (std::size_t j = 0; j < p_.blocks.size(); ++j) {
    if (p_.blocks[j].kind == BlockKind::Nonneg) {
      sinv_[j] = s_[j].cwiseInverse();
    } else {
      Eigen::LLT<RMatrix> llt(s_[j]);
      if (llt.info() != Eigen::Success) return false;
      sinv_[j] = sym(llt.solve(RMatrix::Identity(s_[j].rows(), s_[j].cols())));
    }
  }
  return build_schur();
}

// Largest ||X S||_F over PSD blocks.
double Solver::off_center() const {
  double out = 0.0;
  for (std::size_t j = 0; j < x_.size(); ++j) {
    if (p_.blocks[j].kind == BlockKind::Psd) out = std::max(out, (x_[j] * s_[j]).norm());
  }
  return out;
}

// Pure centering steps at the final mu. Near the optimum the predictor-corrector
// leaves X and S nearly commuting only up to sqrt(<X, S>), so products stay large.
// A step is kept only if the optimality invariants of ConicSolution still hold.
void Solver::polish() {
  auto valid = [&] {
    ConicSolution c;
    fill(c);
    const double gap = std::abs(c.gap) / (1.0 + std::abs(c.primal_obj));
    return gap <= kInvariantGap && c.primal_residual <= kAcceptFeas &&
           c.dual_residual <= kAcceptFeas;
  };
  double best = off_center();
  auto bx = x_;
  auto bs = s_;
  RVector by = y_;
  for (int k = 0; k < kPolishIterations; ++k) {
    if (!factor()) break;
    const RVector rp = b_ - apply_a(x_);
    auto rd = apply_at(y_);
    for (std::size_t j = 0; j < rd.size(); ++j) rd[j] = c_[j] - s_[j] - rd[j];
    const double mu = blocks_inner(x_, s_) / cone_dim_;
    std::vector<RMatrix> rc(x_.size());
    for (std::size_t j = 0; j < x_.size(); ++j) rc[j] = mu * sinv_[j] - x_[j];
    RVector dy;
    std::vector<RMatrix> dx, ds;
    direction(rd, rp, rc, dy, dx, ds);
    const double ap = step_length(x_, dx);
    const double ad = step_length(s_, ds);
    if (!std::isfinite(ap) || !std::isfinite(ad) || !dy.allFinite()) break;
    for (std::size_t j = 0; j < x_.size(); ++j) {
      x_[j] += ap * dx[j];
      s_[j] += ad * ds[j];
      if (p_.blocks[j].kind == BlockKind::Psd) {
        x_[j] = sym(x_[j]);
        s_[j] = sym(s_[j]);
      }
    }
    y_ += ad * dy;
    const double now = off_center();
    if (now < best && valid()) {
      best = now;
      bx = x_;
      bs = s_;
      by = y_;
    }
    if (now <= 10.0 * mu * std::sqrt(static_cast<double>(cone_dim_))) break;
  }
  x_ = std::move(bx);
  s_ = std::move(bs);
  y_ = std::move(by);
}

ConicSolution Solver::run() {
  const double bmax = m_ ? b_.cwiseAbs().maxCoeff() : 0.0;
  const double rho = 1.0 + std::max(bmax, blocks_norm(c_));
  x_.clear();
  s_.clear();
  for (const auto& b : p_.blocks) {
    RMatrix init = b.kind == BlockKind::Psd ? RMatrix(rho * RMatrix::Identity(b.size, b.size))
                                            : RMatrix(RMatrix::Constant(b.size, 1, rho));
    x_.push_back(init);
    s_.push_back(init);
  }
  y_ = RVector::Zero(m_);
  sinv_.resize(p_.blocks.size());

  const double bnorm = 1.0 + b_.norm();
  const double cnorm = 1.0 + blocks_norm(c_);

  ConicSolution best;
  double best_merit = std::numeric_limits<double>::infinity();
  int since_improvement = 0;
  ConicSolution sol;

  for (int it = 0; it < o_.max_iterations; ++it) {
    sol.iterations = it;
    // Residuals.
    const RVector rp = b_ - apply_a(x_);
    auto rd = apply_at(y_);
    for (std::size_t j = 0; j < rd.size(); ++j) rd[j] = c_[j] - s_[j] - rd[j];
    const double pobj = blocks_inner(c_, x_);
    const double dobj = b_.dot(y_);
    const double comp = blocks_inner(x_, s_);
    const double pres = rp.norm() / bnorm;
    const double dres = blocks_norm(rd) / cnorm;
    const double rel_gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj));
    const double rel_comp = comp / (1.0 + std::abs(pobj));

    if (o_.verbose) {
      std::fprintf(stderr, "%3d pobj %+.10e dobj %+.10e pres %.2e dres %.2e gap %.2e\n",
                   it, pobj, dobj, pres, dres, rel_gap);
    }

    const double merit = std::max({rel_gap, rel_comp, pres, dres});
    if (merit < 0.5 * best_merit) {
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
    if (merit < best_merit) {
      best_merit = merit;
      fill(best);
      best.iterations = it;
    }

    if (rel_gap <= o_.gap_tol && rel_comp <= o_.gap_tol && pres <= o_.feas_tol &&
        dres <= o_.feas_tol) {
      polish();
      fill(sol);
      sol.status = Status::Optimal;
      return sol;
    }
    if (check_primal_infeasible(sol) || check_dual_infeasible(sol)) {
      sol.iterations = it;
      return sol;
    }
    if (best_merit < 1e-6 && since_improvement >= kStallIterations) break;

    for (std::size_t j = 0; j < p_.blocks.size(); ++j) {
      if (p_.blocks[j].kind == BlockKind::Nonneg) {
        sinv_[j] = s_[j].cwiseInverse();
      } else {
        Eigen::LLT<RMatrix> llt(s_[j]);
        if (llt.info() != Eigen::Success) {
          best.status = Status::NumericalFailure;
          return best;
        }
        sinv_[j] = llt.solve(RMatrix::Identity(s_[j].rows(), s_[j].cols()));
        sinv_[j] = sym(sinv_[j]);
      }
    }
    if (!build_schur()) {
      best.status = Status::NumericalFailure;
      return best;
    }

    const double mu = comp / cone_dim_;

    // Predictor (affine scaling).
    std::vector<RMatrix> rc(x_.size());
    for (std::size_t j = 0; j < x_.size(); ++j) rc[j] = -x_[j];
    RVector dy_a;
    std::vector<RMatrix> dx_a, ds_a;
    direction(rd, rp, rc, dy_a, dx_a, ds_a);
    const double ap_a = step_length(x_, dx_a);
    const double ad_a = step_length(s_, ds_a);
    double comp_a = 0.0;
    for (std::size_t j = 0; j < x_.size(); ++j) {
      comp_a += block_inner(x_[j] + ap_a * dx_a[j], s_[j] + ad_a * ds_a[j]);
    }
    const double mu_a = comp_a / cone_dim_;
    double sigma = std::pow(std::max(0.0, mu_a) / mu, 3.0);
    sigma = std::clamp(sigma, o_.min_centering, 1.0);

    // Corrector.
    for (std::size_t j = 0; j < x_.size(); ++j) {
      if (p_.blocks[j].kind == BlockKind::Nonneg) {
        rc[j] = sigma * mu * sinv_[j] - x_[j] -
                dx_a[j].cwiseProduct(ds_a[j]).cwiseProduct(sinv_[j]);
      } else {
        rc[j] = sigma * mu * sinv_[j] - x_[j] - sym(dx_a[j] * ds_a[j] * sinv_[j]);
      }
    }
    RVector dy;
    std::vector<RMatrix> dx, ds;
    direction(rd, rp, rc, dy, dx, ds);
    const double ap = step_length(x_, dx);
    const double ad = step_length(s_, ds);

    if (!std::isfinite(ap) || !std::isfinite(ad) || !dy.allFinite()) {
      best.status = Status::NumericalFailure;
      return best;
    }
    for (std::size_t j = 0; j < x_.size(); ++j) {
      x_[j] += ap * dx[j];
      s_[j] += ad * ds[j];
      if (p_.blocks[j].kind == BlockKind::Psd) {
        x_[j] = sym(x_[j]);
        s_[j] = sym(s_[j]);
      }
    }
    y_ += ad * dy;

    if (ap < 1e-10 && ad < 1e-10) break;
  }

  // Out of iterations or stalled: hand back the best iterate seen, accepted
  // as optimal when it meets the looser certified accuracy.
  const bool stalled = sol.iterations + 1 < o_.max_iterations;
  const double best_rel_gap = std::abs(best.gap) / (1.0 + std::abs(best.primal_obj));
  if (best_rel_gap <= kInvariantGap && best.primal_residual <= kAcceptFeas &&
      best.dual_residual <= kAcceptFeas) {
    x_ = best.primal;
    s_ = best.dual_slack;
    y_ = Eigen::Map<const RVector>(best.dual_y.data(), m_);
    polish();
    const int iterations = best.iterations;
    fill(best);
    best.iterations = iterations;
    best.status = Status::Optimal;
    return best;
  }
  best.status = stalled ? Status::NumericalFailure : Status::MaxIterations;
  return best;
}

}  // namespace

std::vector<double> Presolved::lift_dual(const std::vector<double>& y) const {
  std::vector<double> out(static_cast<std::size_t>(original_rows), 0.0);
  for (std::size_t t = 0; t < kept_rows.size() && t < y.size(); ++t) {
    out[static_cast<std::size_t>(kept_rows[t])] = y[t];
  }
  return out;
}

namespace {

// Isometric vectorization of one constraint row across all blocks.
RVector svec_row(const ConicProgram& p, const Constraint& c,
                 const std::vector<int>& offsets, int total) {
  RVector v = RVector::Zero(total);
  for (const auto& t : c.terms) {
    const auto& b = p.blocks[t.block];
    for (const auto& e : t.coeff.entries) {
      int idx;
      double scale = 1.0;
      if (b.kind == BlockKind::Nonneg) {
        idx = offsets[t.block] + e.row;
      } else {
        // Upper-triangle packed index, row-major.
        idx = offsets[t.block] + e.row * b.size - e.row * (e.row - 1) / 2 +
              (e.col - e.row);
        if (e.row != e.col) scale = std::sqrt(2.0);
      }
      v(idx) += scale * e.value;
    }
  }
  return v;
}

}  // namespace

Presolved presolve(const ConicProgram& prog) {
  prog.validate();
  Presolved out;
  out.original_rows = prog.num_constraints();
  out.program.blocks = prog.blocks;
  out.program.objective = prog.objective;

  std::vector<int> offsets;
  int total = 0;
  for (const auto& b : prog.blocks) {
    offsets.push_back(total);
    total += b.kind == BlockKind::Psd ? b.size * (b.size + 1) / 2 : b.size;
  }

  const int m = prog.num_constraints();
  double bscale = 0.0;
  for (const auto& c : prog.constraints) bscale = std::max(bscale, std::abs(c.rhs));

  // Orthonormal basis of kept rows, each with its right-hand side and its
  // expansion in terms of the original rows.
  std::vector<RVector> basis;
  std::vector<double> basis_rhs;
  std::vector<RVector> basis_coef;
  for (int r = 0; r < m; ++r) {
    const auto& c = prog.constraints[r];
    const RVector v = svec_row(prog, c, offsets, total);
    RVector res = v;
    RVector coef = RVector::Zero(m);
    coef(r) = 1.0;
    double predicted = 0.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t t = 0; t < basis.size(); ++t) {
        const double proj = basis[t].dot(res);
        res -= proj * basis[t];
        coef -= proj * basis_coef[t];
        predicted += proj * basis_rhs[t];
      }
    }
    const double vn = v.norm();
    const double rn = res.norm();
    if (vn == 0.0 || rn <= 1e-10 * vn) {
      const double mismatch = c.rhs - predicted;
      if (std::abs(mismatch) > 1e-9 * (1.0 + bscale)) {
        out.inconsistent = true;
        out.inconsistent_row = r;
        // coef combines the rows into (numerically) zero; scale to b^T y = 1.
        out.infeasibility_ray.resize(static_cast<std::size_t>(m));
        for (int q = 0; q < m; ++q) out.infeasibility_ray[q] = coef(q) / mismatch;
        return out;
      }
      continue;
    }
    basis.push_back(res / rn);
    basis_rhs.push_back((c.rhs - predicted) / rn);
    basis_coef.push_back(coef / rn);
    out.kept_rows.push_back(r);
    out.program.constraints.push_back(c);
  }
  return out;
}

ConicSolution solve(const ConicProgram& prog, const SolverOptions& opts) {
  const Presolved pre = presolve(prog);
  if (pre.inconsistent) {
    ConicSolution sol;
    sol.status = Status::PrimalInfeasible;
    sol.dual_y = pre.infeasibility_ray;
    const auto aty = adjoint(prog, sol.dual_y);
    double viol = 0.0;
    for (std::size_t j = 0; j < aty.size(); ++j) {
      viol = std::max(viol, block_max_eig(aty[j], prog.blocks[j].kind));
    }
    sol.certificate_violation = viol;
    return sol;
  }
  ConicSolution sol = Solver(pre.program, opts).run();
  // Near the feasibility boundary the default path can stall on the primal
  // residual; more centered, shorter steps keep the Newton system usable.
  for (const auto& [centering, fraction] : kRetryLadder) {
    if (sol.status != Status::NumericalFailure && sol.status != Status::MaxIterations) break;
    SolverOptions retry = opts;
    retry.min_centering = std::max(opts.min_centering, centering);
    retry.step_fraction = std::min(opts.step_fraction, fraction);
    ConicSolution again = Solver(pre.program, retry).run();
    again.iterations += sol.iterations;
    sol = std::move(again);
  }
  if (!sol.dual_y.empty() || pre.program.num_constraints() == 0) {
    sol.dual_y = pre.lift_dual(sol.dual_y);
  }
  return sol;
}

double apply_row(const ConicProgram& prog, int row,
                 const std::vector<RMatrix>& x) {
  double s = 0.0;
  for (const auto& t : prog.constraints[row].terms) {
    s += sym_inner(t.coeff, x[t.block], prog.blocks[t.block].kind);
  }
  return s;
}

double apply_objective(const ConicProgram& prog, const std::vector<RMatrix>& x) {
  double s = 0.0;
  for (std::size_t j = 0; j < prog.blocks.size(); ++j) {
    s += sym_inner(prog.objective[j], x[j], prog.blocks[j].kind);
  }
  return s;
}

std::vector<RMatrix> adjoint(const ConicProgram& prog,
                             const std::vector<double>& y) {
  auto out = zero_blocks(prog);
  for (int r = 0; r < prog.num_constraints() && r < static_cast<int>(y.size()); ++r) {
    for (const auto& t : prog.constraints[r].terms) {
      add_scaled(out[t.block], t.coeff, y[r], prog.blocks[t.block].kind);
    }
  }
  return out;
}

void dump_text(const ConicProgram& prog, std::ostream& out) {
  out << "# conic program: minimize <C,X> s.t. <A_r,X> = b_r\n";
  out << "# block <j> <psd|nonneg> <size>; rhs <r> <b_r>;"
         " entries: <constraint> <block> <row> <col> <value>\n";
  out << "# indices are 1-based; constraint 0 is the objective\n";
  char buf[128];
  for (std::size_t j = 0; j < prog.blocks.size(); ++j) {
    out << "block " << j + 1 << ' '
        << (prog.blocks[j].kind == BlockKind::Psd ? "psd" : "nonneg") << ' '
        << prog.blocks[j].size << '\n';
  }
  for (int r = 0; r < prog.num_constraints(); ++r) {
    std::snprintf(buf, sizeof buf, "rhs %d %.17g\n", r + 1, prog.constraints[r].rhs);
    out << buf;
  }
  auto emit = [&](int r, int block, const SparseSym& s) {
    for (const auto& e : s.entries) {
      std::snprintf(buf, sizeof buf, "%d %d %d %d %.17g\n", r, block + 1,
                    e.row + 1, e.col + 1, e.value);
      out << buf;
    }
  };
  for (std::size_t j = 0; j < prog.blocks.size(); ++j) {
    emit(0, static_cast<int>(j), prog.objective[j]);
  }
  for (int r = 0; r < prog.num_constraints(); ++r) {
    for (const auto& t : prog.constraints[r].terms) emit(r + 1, t.block, t.coeff);
  }
}

}  // namespace rbf::sdp
