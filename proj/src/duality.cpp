#include "rbf/duality.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace rbf {

namespace {

double psd_violation(const HermMatrix& m) { return std::max(0.0, -lambda_min(m)); }

double quad(const HermMatrix& m, const CVector& x) {
  return (x.adjoint() * m.mat() * x)(0, 0).real();
}

}  // namespace

double KktResidual::max() const {
  return std::max({primal_cone, psi_psd, y_psd, psi_a, y_w, trace, trace_slackness});
}

bool KktResidual::pass(double objective) const {
  return max() <= 1e-6 * (1.0 + std::abs(objective));
}

KktResidual check_kkt_15(const ProblemInstance& inst, const RobustDesign& design,
                         const DualCertificate& cert) {
  inst.validate();
  if (design.W.size() != static_cast<std::size_t>(inst.k) ||
      design.lambda.size() != design.W.size() || cert.A.size() != design.W.size()) {
    throw std::invalid_argument("check_kkt_15: expected k matrices and multipliers");
  }
  KktResidual out;
  for (std::size_t i = 0; i < design.W.size(); ++i) {
    const HermMatrix& a = cert.A[i];
    const double lam = design.lambda[i];
    out.primal_cone = std::max({out.primal_cone, psd_violation(design.W[i]),
                                std::max(0.0, -lam), psd_violation(a)});
    if (inst.radius[i] > 0.0) {
      const HermMatrix psi = build_psi(inst, design.W, i, lam);
      out.psi_psd = std::max(out.psi_psd, psd_violation(psi));
      out.psi_a = std::max(out.psi_a, (psi.mat() * a.mat()).norm());
    } else {
      const double s =
          quad(sinr_form(inst, design.W, i), inst.hbar[i]) - inst.noise[i];
      out.psi_psd = std::max(out.psi_psd, std::max(0.0, -s));
      out.psi_a = std::max(out.psi_a, std::abs(s * corner(a)));
    }
    const HermMatrix y = build_y(inst, cert.A, i);
    out.y_psd = std::max(out.y_psd, psd_violation(y));
    out.y_w = std::max(out.y_w, (y.mat() * design.W[i].mat()).norm());
    const double r2 = inst.radius[i] * inst.radius[i];
    const double t = a.trace() - (1.0 + r2) * corner(a);
    out.trace = std::max(out.trace, std::max(0.0, t));
    out.trace_slackness = std::max(out.trace_slackness, std::abs(t * lam));
  }
  return out;
}

double ErrorKktResidual::max() const {
  return std::max({v_feasibility, xi_sign, psi_psd, psi_v, slackness});
}

HermMatrix build_psi_tilde(const ProblemInstance& inst, std::span<const HermMatrix> w,
                           std::size_t i, double xi, double tau) {
  const HermMatrix m = sinr_form(inst, w, i);
  const CMatrix g = lift_matrix(inst.hbar[i]);
  CMatrix out = g.adjoint() * m.mat() * g;
  const int n = inst.nt;
  for (int d = 0; d < n; ++d) out(d, d) += xi;
  out(n, n) += xi + tau;
  return HermMatrix(out);
}

ErrorKktResidual check_kkt_21(const ProblemInstance& inst,
                              std::span<const HermMatrix> w, std::size_t i,
                              const HermMatrix& v, double xi, double tau) {
  if (v.dim() != inst.nt + 1) throw std::invalid_argument("check_kkt_21: V has wrong size");
  const double r2 = inst.radius.at(i) * inst.radius.at(i);
  const double excess = v.trace() - (1.0 + r2);
  const double corner_err = corner(v) - 1.0;
  ErrorKktResidual out;
  out.v_feasibility =
      std::max({psd_violation(v), std::max(0.0, excess), std::abs(corner_err)});
  out.xi_sign = std::max(0.0, -xi);
  const HermMatrix pt = build_psi_tilde(inst, w, i, xi, tau);
  out.psi_psd = psd_violation(pt);
  out.psi_v = (pt.mat() * v.mat()).norm();
  out.slackness = std::abs(xi * excess) + std::abs(tau * corner_err);
  return out;
}

MaxMinSolution map_certificate_to_maxmin(const DualCertificate& cert) {
  MaxMinSolution out;
  for (const auto& a : cert.A) {
    const double mu = corner(a);
    if (!(mu > 1e-10)) throw std::invalid_argument("degenerate certificate");
    out.mu.push_back(mu);
    out.V.push_back((1.0 / mu) * a);
  }
  return out;
}

DualCertificate map_maxmin_to_certificate(const ProblemInstance& inst,
                                          std::span<const HermMatrix> v,
                                          std::span<const double> mu) {
  if (v.size() != static_cast<std::size_t>(inst.k) || mu.size() != v.size()) {
    throw std::invalid_argument("map_maxmin_to_certificate: expected k entries");
  }
  DualCertificate out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.A.push_back(mu[i] * v[i]);
    out.objective += inst.noise[i] * mu[i] * corner(v[i]);
  }
  return out;
}

std::string to_string(Condition1 c) {
  switch (c) {
    case Condition1::NotRun: return "NotRun";
    case Condition1::Unique: return "Unique";
    case Condition1::Ambiguous: return "Ambiguous";
    case Condition1::Failed: return "Failed";
  }
  return "?";
}

ProbeResult probe_condition1(const ProblemInstance& inst, const DualCertificate& cert,
                             const ProbeOptions& opts) {
  ProbeResult out;
  out.perturbation = opts.relative_size;
  std::vector<HermMatrix> r;
  try {
    const MaxMinSolution mm = map_certificate_to_maxmin(cert);
    for (int i = 0; i < inst.k; ++i) r.push_back(channel_covariance(inst.hbar[i], mm.V[i]));
  } catch (const std::invalid_argument&) {
    out.verdict = Condition1::Failed;
    return out;
  }

  const InnerSdpProgram base = build_inner_sdp(inst, r);
  const auto ref_sol = sdp::solve(base.program, opts.solver);
  if (ref_sol.status != sdp::Status::Optimal) {
    out.verdict = Condition1::Failed;
    return out;
  }
  const auto ref = decode_inner(base, ref_sol);

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> g(0.0, 1.0);
  const double size = opts.relative_size * std::sqrt(static_cast<double>(inst.nt));
  for (int t = 0; t < opts.trials; ++t) {
    std::vector<HermMatrix> shift;
    for (int i = 0; i < inst.k; ++i) {
      CMatrix m(inst.nt, inst.nt);
      for (int a = 0; a < inst.nt; ++a) {
        for (int b = 0; b < inst.nt; ++b) m(a, b) = cplx(g(rng), g(rng));
      }
      HermMatrix h(m);
      shift.push_back((size / h.norm()) * h);
    }
    const InnerSdpProgram p = build_inner_sdp(inst, r, shift);
    const auto sol = sdp::solve(p.program, opts.solver);
    if (sol.status != sdp::Status::Optimal) {
      out.verdict = Condition1::Failed;
      return out;
    }
    const auto w = decode_inner(p, sol);
    double dev = 0.0;
    for (int i = 0; i < inst.k; ++i) dev += (w[i].mat() - ref[i].mat()).squaredNorm();
    out.max_deviation = std::max(out.max_deviation, std::sqrt(dev));
  }
  out.verdict = out.max_deviation <= opts.threshold ? Condition1::Unique
                                                    : Condition1::Ambiguous;
  return out;
}

DualityReport verify_proposition1(const ProblemInstance& inst, const VerifyOptions& opts) {
  inst.validate();
  DualityReport rep;

  const RobustSdrProgram primal = build_wsp_sdr(inst);
  const auto ps = sdp::solve(primal.program, opts.solver);
  rep.primal_status = ps.status;
  const DualSdpProgram dual = build_dual_sdp(inst);
  const auto ds = sdp::solve(dual.program, opts.solver);
  rep.dual_status = ds.status;

  if (ps.status == sdp::Status::PrimalInfeasible) {
    rep.infeasibility_certificate = ps.certificate_violation;
    rep.error = "robust SDR is infeasible";
    return rep;
  }
  if (ps.status != sdp::Status::Optimal || ds.status != sdp::Status::Optimal) {
    rep.error = "solver returned " + sdp::to_string(ps.status) + " / " +
                sdp::to_string(ds.status);
    return rep;
  }

  rep.design = decode_design(primal, ps);
  rep.certificate = decode_certificate(inst, dual, ds);
  rep.primal_obj = rep.design.objective;
  rep.dual_obj = rep.certificate.objective;
  rep.rel_gap = std::abs(rep.primal_obj - rep.dual_obj) / (1.0 + std::abs(rep.primal_obj));

  rep.kkt = check_kkt_15(inst, rep.design, rep.certificate);
  rep.kkt_pass = rep.kkt.max() <= opts.kkt_tol * (1.0 + std::abs(rep.primal_obj));

  const double obj_tol = opts.gap_tol * (1.0 + std::abs(rep.primal_obj));
  bool fixed_ok = false;
  try {
    const InnerSdpProgram fixed = build_fixed_certificate_inner(inst, rep.certificate);
    const auto fs = sdp::solve(fixed.program, opts.solver);
    if (fs.status == sdp::Status::Optimal) {
      rep.fixed_certificate_obj = fs.primal_obj;
      bool feasible = true;
      for (int i = 0; i < inst.k; ++i) {
        const HermMatrix ri = channel_covariance(inst.hbar[i], rep.certificate.A[i]);
        const double lhs = inner(sinr_form(inst, rep.design.W, i), ri);
        const double rhs = inst.noise[i] * corner(rep.certificate.A[i]);
        if (lhs < rhs - opts.gap_tol * (1.0 + std::abs(rhs))) feasible = false;
      }
      rep.fixed_certificate_accepts_design =
          feasible && std::abs(rep.primal_obj - fs.primal_obj) <= obj_tol;
      fixed_ok = std::abs(rep.primal_obj - fs.primal_obj) <= obj_tol;
    }
  } catch (const std::invalid_argument& e) {
    rep.error = e.what();
  }

  for (int i = 0; i < inst.k; ++i) {
    double v = 0.0;
    if (inst.radius[i] > 0.0) {
      const ErrorSdrProgram ep = build_error_sdr(inst, rep.design.W, i);
      const auto es = sdp::solve(ep.program, opts.solver);
      v = es.status == sdp::Status::Optimal ? es.primal_obj
                                            : std::numeric_limits<double>::quiet_NaN();
    } else {
      v = quad(sinr_form(inst, rep.design.W, i), inst.hbar[i]);
    }
    rep.activity.push_back(v);
    const double err = std::isfinite(v) ? std::abs(v - inst.noise[i])
                                        : std::numeric_limits<double>::infinity();
    rep.activity_error = std::max(rep.activity_error, err);
  }

  double min_margin = std::numeric_limits<double>::infinity();
  try {
    const Extraction ex = extract_beamformers(rep.design, inst);
    rep.rank_profile = ex.rank_profile;
    rep.fallback = ex.fallback;
    rep.beams = ex.beams;
    rep.beam_power = ex.beams.power;
    rep.worst_case_margins = worst_case_margins(inst, ex.beams);
    for (double m : rep.worst_case_margins) min_margin = std::min(min_margin, m);
  } catch (const std::runtime_error& e) {
    rep.fallback = true;
    rep.error = e.what();
  }

  if (opts.probe) {
    rep.condition1 = probe_condition1(inst, rep.certificate, opts.probe_options);
  }

  rep.passed = rep.error.empty() && rep.rel_gap <= opts.gap_tol && rep.kkt_pass &&
               fixed_ok && rep.fixed_certificate_accepts_design &&
               rep.activity_error <= opts.activity_tol && !rep.fallback &&
               min_margin >= -1e-6;
  return rep;
}

}  // namespace rbf
