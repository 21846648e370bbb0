#include "rbf/formulations.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rbf {

namespace {

void check_tuple(const ProblemInstance& inst, std::span<const HermMatrix> mats,
                 Eigen::Index n, const char* what) {
  if (mats.size() != static_cast<std::size_t>(inst.k)) {
    throw std::invalid_argument(std::string(what) + ": expected k matrices");
  }
  for (const auto& m : mats) {
    if (m.dim() != n) {
      throw std::invalid_argument(std::string(what) + ": matrix dimension mismatch");
    }
  }
}

void check_user(const ProblemInstance& inst, std::size_t i) {
  if (i >= static_cast<std::size_t>(inst.k)) {
    throw std::out_of_range("user index out of range");
  }
}

}  // namespace

HermMatrix sinr_form(const ProblemInstance& inst, std::span<const HermMatrix> w,
                     std::size_t i) {
  check_user(inst, i);
  check_tuple(inst, w, inst.nt, "sinr_form");
  CMatrix m = w[i].mat() / inst.sinr_target[i];
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (k != i) m -= w[k].mat();
  }
  return HermMatrix(m);
}

HermMatrix build_psi(const ProblemInstance& inst, std::span<const HermMatrix> w,
                     std::size_t i, double lambda_i) {
  const HermMatrix m = sinr_form(inst, w, i);
  const CMatrix g = lift_matrix(inst.hbar[i]);
  CMatrix psi = g.adjoint() * m.mat() * g;
  const int n = inst.nt;
  for (int d = 0; d < n; ++d) psi(d, d) += lambda_i;
  psi(n, n) += -inst.noise[i] - lambda_i * inst.radius[i] * inst.radius[i];
  return HermMatrix(psi);
}

HermMatrix build_y(const ProblemInstance& inst, std::span<const HermMatrix> a,
                   std::size_t i) {
  check_user(inst, i);
  check_tuple(inst, a, inst.nt + 1, "build_y");
  CMatrix y = CMatrix::Identity(inst.nt, inst.nt);
  for (std::size_t k = 0; k < a.size(); ++k) {
    const CMatrix g = lift_matrix(inst.hbar[k]);
    const CMatrix term = g * a[k].mat() * g.adjoint();
    if (k == i) {
      y -= term / inst.sinr_target[i];
    } else {
      y += term;
    }
  }
  return HermMatrix(y);
}

double corner(const HermMatrix& a) {
  return a(a.dim() - 1, a.dim() - 1).real();
}

HermMatrix channel_covariance(const CVector& hbar, const HermMatrix& v) {
  const CMatrix g = lift_matrix(hbar);
  return HermMatrix(g * v.mat() * g.adjoint());
}

// ---------------------------------------------------------------------------

int ProgramBuilder::add_herm_block(int n) {
  prog_.blocks.push_back({sdp::BlockKind::Psd, 2 * n});
  prog_.objective.emplace_back();
  herm_.push_back(true);
  return static_cast<int>(prog_.blocks.size()) - 1;
}

int ProgramBuilder::add_nonneg_block(int n) {
  prog_.blocks.push_back({sdp::BlockKind::Nonneg, n});
  prog_.objective.emplace_back();
  herm_.push_back(false);
  return static_cast<int>(prog_.blocks.size()) - 1;
}

namespace {

void add_embedded(sdp::SparseSym& out, const HermMatrix& c) {
  const RMatrix z = real_embed(c);
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    for (Eigen::Index s = r; s < z.cols(); ++s) {
      const double v = 0.5 * z(r, s);
      if (v != 0.0) out.add(static_cast<int>(r), static_cast<int>(s), v);
    }
  }
}

}  // namespace

void ProgramBuilder::add_objective(int block, const HermMatrix& c) {
  if (!herm_.at(block) || prog_.blocks[block].size != 2 * c.dim()) {
    throw std::invalid_argument("ProgramBuilder: Hermitian term on wrong block");
  }
  add_embedded(prog_.objective[block], c);
}

void ProgramBuilder::add_objective(int block, int index, double c) {
  if (herm_.at(block)) {
    throw std::invalid_argument("ProgramBuilder: scalar term on Hermitian block");
  }
  prog_.objective[block].add(index, index, c);
}

int ProgramBuilder::add_row(double rhs) {
  prog_.constraints.push_back({{}, rhs});
  return prog_.num_constraints() - 1;
}

sdp::SparseSym& ProgramBuilder::term(int row, int block) {
  auto& terms = prog_.constraints.at(row).terms;
  for (auto& t : terms) {
    if (t.block == block) return t.coeff;
  }
  terms.push_back({block, {}});
  return terms.back().coeff;
}

void ProgramBuilder::add_term(int row, int block, const HermMatrix& c) {
  if (!herm_.at(block) || prog_.blocks[block].size != 2 * c.dim()) {
    throw std::invalid_argument("ProgramBuilder: Hermitian term on wrong block");
  }
  add_embedded(term(row, block), c);
}

void ProgramBuilder::add_term(int row, int block, int index, double c) {
  if (herm_.at(block)) {
    throw std::invalid_argument("ProgramBuilder: scalar term on Hermitian block");
  }
  term(row, block).add(index, index, c);
}

HermMatrix primal_herm(const RMatrix& z) { return real_unembed(z); }

HermMatrix dual_herm(const RMatrix& s) { return 2.0 * real_unembed(s); }

std::vector<HermMatrix> hermitian_coordinates(int n) {
  std::vector<HermMatrix> out;
  out.reserve(static_cast<std::size_t>(n) * n);
  for (int a = 0; a < n; ++a) {
    CMatrix e = CMatrix::Zero(n, n);
    e(a, a) = 1.0;
    out.emplace_back(e);
  }
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      CMatrix re = CMatrix::Zero(n, n);
      re(a, b) = re(b, a) = 0.5;
      out.emplace_back(re);
      CMatrix im = CMatrix::Zero(n, n);
      im(a, b) = cplx(0.0, 0.5);
      im(b, a) = cplx(0.0, -0.5);
      out.emplace_back(im);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

RobustSdrProgram build_wsp_sdr(const ProblemInstance& inst) {
  inst.validate();
  const int n = inst.nt;
  const int k = inst.k;
  ProgramBuilder b;
  RobustSdrProgram out;
  for (int i = 0; i < k; ++i) {
    out.w_block.push_back(b.add_herm_block(n));
    b.add_objective(out.w_block.back(), HermMatrix::identity(n));
  }
  int robust_users = 0;
  for (int i = 0; i < k; ++i) {
    if (inst.radius[i] > 0.0) {
      out.psi_block.push_back(b.add_herm_block(n + 1));
      out.lambda_index.push_back(robust_users++);
    } else {
      out.psi_block.push_back(b.add_nonneg_block(1));
      out.lambda_index.push_back(-1);
    }
  }
  if (robust_users > 0) out.lambda_block = b.add_nonneg_block(robust_users);

  const auto coords = hermitian_coordinates(n + 1);
  for (int i = 0; i < k; ++i) {
    const CMatrix g = lift_matrix(inst.hbar[i]);
    const double r2 = inst.radius[i] * inst.radius[i];
    if (out.lambda_index[i] < 0) {
      // hbar^H M_i hbar - p_i = noise_i
      const CVector& h = inst.hbar[i];
      const HermMatrix hh(h * h.adjoint());
      const int row = b.add_row(-inst.noise[i]);
      b.add_term(row, out.psi_block[i], 0, 1.0);
      for (int kk = 0; kk < k; ++kk) {
        const double scale = kk == i ? -1.0 / inst.sinr_target[i] : 1.0;
        b.add_term(row, out.w_block[kk], scale * hh);
      }
      continue;
    }
    for (const auto& e : coords) {
      // <E, P_i> - <E, G^H M_i G> - lambda_i <E, diag(I, -r^2)> = <E, diag(0, -noise)>
      const HermMatrix on_m(g * e.mat() * g.adjoint());
      double on_lambda = 0.0;
      for (int d = 0; d < n; ++d) on_lambda += e(d, d).real();
      on_lambda -= r2 * e(n, n).real();
      const double rhs = -inst.noise[i] * e(n, n).real();

      const int row = b.add_row(rhs);
      b.add_term(row, out.psi_block[i], e);
      for (int kk = 0; kk < k; ++kk) {
        const double scale = kk == i ? -1.0 / inst.sinr_target[i] : 1.0;
        b.add_term(row, out.w_block[kk], scale * on_m);
      }
      b.add_term(row, out.lambda_block, out.lambda_index[i], -on_lambda);
    }
  }
  out.program = b.take();
  return out;
}

RobustDesign decode_design(const RobustSdrProgram& prog,
                           const sdp::ConicSolution& sol) {
  RobustDesign d;
  for (int blk : prog.w_block) {
    d.W.push_back(primal_herm(sol.primal.at(blk)));
    d.objective += d.W.back().trace();
  }
  for (int idx : prog.lambda_index) {
    d.lambda.push_back(idx < 0 ? 0.0 : sol.primal.at(prog.lambda_block)(idx, 0));
  }
  return d;
}

namespace {

HermMatrix corner_matrix(int n, double value) {
  CMatrix a = CMatrix::Zero(n + 1, n + 1);
  a(n, n) = value;
  return HermMatrix(a);
}

}  // namespace

DualCertificate recover_certificate(const ProblemInstance& inst,
                                    const RobustSdrProgram& prog,
                                    const sdp::ConicSolution& sol) {
  DualCertificate c;
  for (std::size_t i = 0; i < prog.psi_block.size(); ++i) {
    const RMatrix& s = sol.dual_slack.at(prog.psi_block[i]);
    c.A.push_back(prog.lambda_index[i] < 0 ? corner_matrix(inst.nt, s(0, 0))
                                           : dual_herm(s));
    c.objective += inst.noise[i] * corner(c.A.back());
  }
  return c;
}

DualSdpProgram build_dual_sdp(const ProblemInstance& inst) {
  inst.validate();
  const int n = inst.nt;
  const int k = inst.k;
  ProgramBuilder b;
  DualSdpProgram out;
  for (int i = 0; i < k; ++i) {
    if (inst.radius[i] > 0.0) {
      out.a_block.push_back(b.add_herm_block(n + 1));
      b.add_objective(out.a_block.back(), corner_matrix(n, -inst.noise[i]));
    } else {
      // tr(A) <= [A]_{N+1} with A PSD leaves only the corner entry.
      out.a_block.push_back(b.add_nonneg_block(1));
      b.add_objective(out.a_block.back(), 0, -inst.noise[i]);
    }
  }
  for (int i = 0; i < k; ++i) out.y_block.push_back(b.add_herm_block(n));
  int robust_users = 0;
  for (int i = 0; i < k; ++i) robust_users += inst.radius[i] > 0.0 ? 1 : 0;
  if (robust_users > 0) out.slack_block = b.add_nonneg_block(robust_users);

  std::vector<CMatrix> lifts;
  for (int i = 0; i < k; ++i) lifts.push_back(lift_matrix(inst.hbar[i]));

  const auto coords = hermitian_coordinates(n);
  for (int i = 0; i < k; ++i) {
    for (const auto& e : coords) {
      // <E, Q_i> + <E, G_i A_i G_i^H>/gamma_i - sum_{k!=i} <E, G_k A_k G_k^H> = <E, I>
      double rhs = 0.0;
      for (int d = 0; d < n; ++d) rhs += e(d, d).real();
      const int row = b.add_row(rhs);
      b.add_term(row, out.y_block[i], e);
      for (int kk = 0; kk < k; ++kk) {
        const double scale = kk == i ? 1.0 / inst.sinr_target[i] : -1.0;
        if (inst.radius[kk] > 0.0) {
          const HermMatrix on_a(lifts[kk].adjoint() * e.mat() * lifts[kk]);
          b.add_term(row, out.a_block[kk], scale * on_a);
        } else {
          const CVector& h = inst.hbar[kk];
          const double on_a = (h.adjoint() * e.mat() * h)(0, 0).real();
          if (on_a != 0.0) b.add_term(row, out.a_block[kk], 0, scale * on_a);
        }
      }
    }
  }
  int slot = 0;
  for (int i = 0; i < k; ++i) {
    if (!(inst.radius[i] > 0.0)) continue;
    // tr(A_i) - (1 + r_i^2)[A_i]_{N+1} + s_i = 0
    CMatrix t = CMatrix::Identity(n + 1, n + 1);
    t(n, n) -= 1.0 + inst.radius[i] * inst.radius[i];
    const int row = b.add_row(0.0);
    b.add_term(row, out.a_block[i], HermMatrix(t));
    b.add_term(row, out.slack_block, slot++, 1.0);
  }
  out.program = b.take();
  return out;
}

DualCertificate decode_certificate(const ProblemInstance& inst,
                                   const DualSdpProgram& prog,
                                   const sdp::ConicSolution& sol) {
  DualCertificate c;
  for (std::size_t i = 0; i < prog.a_block.size(); ++i) {
    const RMatrix& x = sol.primal.at(prog.a_block[i]);
    c.A.push_back(inst.radius[i] > 0.0 ? primal_herm(x)
                                       : corner_matrix(inst.nt, x(0, 0)));
    c.objective += inst.noise[i] * corner(c.A.back());
  }
  return c;
}

InnerSdpProgram build_inner_sdp(const ProblemInstance& inst,
                                std::span<const HermMatrix> r,
                                std::span<const HermMatrix> objective_shift,
                                std::span<const double> rhs_scale) {
  inst.validate();
  const int n = inst.nt;
  const int k = inst.k;
  check_tuple(inst, r, n, "build_inner_sdp");
  if (!objective_shift.empty()) check_tuple(inst, objective_shift, n, "objective_shift");
  if (!rhs_scale.empty() && rhs_scale.size() != static_cast<std::size_t>(k)) {
    throw std::invalid_argument("build_inner_sdp: rhs_scale needs k entries");
  }
  ProgramBuilder b;
  InnerSdpProgram out;
  for (int i = 0; i < k; ++i) {
    out.w_block.push_back(b.add_herm_block(n));
    HermMatrix c = HermMatrix::identity(n);
    if (!objective_shift.empty()) c += objective_shift[i];
    b.add_objective(out.w_block.back(), c);
  }
  out.slack_block = b.add_nonneg_block(k);
  for (int i = 0; i < k; ++i) {
    const double scale = rhs_scale.empty() ? 1.0 : rhs_scale[i];
    const int row = b.add_row(scale * inst.noise[i]);
    for (int kk = 0; kk < k; ++kk) {
      const double coef = kk == i ? 1.0 / inst.sinr_target[i] : -1.0;
      b.add_term(row, out.w_block[kk], coef * r[i]);
    }
    b.add_term(row, out.slack_block, i, -1.0);
  }
  out.program = b.take();
  return out;
}

InnerSdpProgram build_fixed_certificate_inner(const ProblemInstance& inst,
                                              const DualCertificate& cert) {
  check_tuple(inst, cert.A, inst.nt + 1, "build_fixed_certificate_inner");
  std::vector<HermMatrix> r;
  std::vector<double> scale;
  for (int i = 0; i < inst.k; ++i) {
    const double c = corner(cert.A[i]);
    if (!(c > 0.0)) {
      throw std::invalid_argument(
          "build_fixed_certificate_inner: certificate corner entry must be positive");
    }
    r.push_back(channel_covariance(inst.hbar[i], cert.A[i]));
    scale.push_back(c);
  }
  return build_inner_sdp(inst, r, {}, scale);
}

std::vector<HermMatrix> decode_inner(const InnerSdpProgram& prog,
                                     const sdp::ConicSolution& sol) {
  std::vector<HermMatrix> w;
  for (int blk : prog.w_block) w.push_back(primal_herm(sol.primal.at(blk)));
  return w;
}

ErrorSdrProgram build_error_sdr(const ProblemInstance& inst,
                                std::span<const HermMatrix> w, std::size_t i) {
  inst.validate();
  const int n = inst.nt;
  const HermMatrix m = sinr_form(inst, w, i);
  const CMatrix g = lift_matrix(inst.hbar[i]);
  ProgramBuilder b;
  ErrorSdrProgram out;
  out.v_block = b.add_herm_block(n + 1);
  out.slack_block = b.add_nonneg_block(1);
  b.add_objective(out.v_block, HermMatrix(g.adjoint() * m.mat() * g));

  const double r2 = inst.radius[i] * inst.radius[i];
  int row = b.add_row(1.0 + r2);
  b.add_term(row, out.v_block, HermMatrix::identity(n + 1));
  b.add_term(row, out.slack_block, 0, 1.0);

  CMatrix e = CMatrix::Zero(n + 1, n + 1);
  e(n, n) = 1.0;
  row = b.add_row(1.0);
  b.add_term(row, out.v_block, HermMatrix(e));

  // The imaginary part of a Hermitian diagonal entry is identically zero in
  // the embedding, so this row is empty and presolve drops it.
  b.add_row(0.0);

  out.program = b.take();
  return out;
}

HermMatrix decode_error_sdr(const ErrorSdrProgram& prog,
                            const sdp::ConicSolution& sol) {
  return primal_herm(sol.primal.at(prog.v_block));
}

}  // namespace rbf
