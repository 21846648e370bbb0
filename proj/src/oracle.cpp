#include "rbf/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rbf {

namespace {

// Rotates v so that its largest-magnitude entry is real and positive.
CVector canonical_phase(CVector v) {
  Eigen::Index at = 0;
  v.cwiseAbs().maxCoeff(&at);
  const double mag = std::abs(v(at));
  if (mag > 0.0) v *= std::conj(v(at)) / mag;
  return v;
}

double quad(const HermMatrix& q, const CVector& x) {
  return (x.adjoint() * q.mat() * x)(0, 0).real();
}

}  // namespace

TrsResult trs_min(const HermMatrix& q, const CVector& hbar, double r) {
  const Eigen::Index n = q.dim();
  if (hbar.size() != n) throw std::invalid_argument("trs_min: dimension mismatch");
  if (!(r >= 0.0) || !std::isfinite(r)) {
    throw std::invalid_argument("trs_min: radius must be nonnegative");
  }
  TrsResult out;
  out.argmin = CVector::Zero(n);
  if (r == 0.0) {
    out.value = quad(q, hbar);
    return out;
  }

  const EigDecomp eig = herm_eig(q);
  const RVector& lam = eig.values;
  const CVector c = eig.vectors.adjoint() * hbar;
  const double lmin = lam(0);
  const double scale = 1.0 + lam.cwiseAbs().maxCoeff() * (1.0 + hbar.norm());
  const double zero_tol = 1e-14 * scale;

  auto step = [&](double nu, bool skip_bottom) {
    CVector d = CVector::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (skip_bottom && lam(j) - lmin <= zero_tol) continue;
      const double den = lam(j) + nu;
      if (std::abs(lam(j)) <= zero_tol) continue;
      d(j) = -lam(j) * c(j) / den;
    }
    return d;
  };
  auto finish = [&](const CVector& d, double nu) {
    out.argmin = eig.vectors * d;
    out.multiplier = nu;
    out.value = quad(q, hbar + out.argmin);
  };

  const double nu_low = std::max(0.0, -lmin);

  // Interior solution: Q PSD and a null-space point of Q inside the ball.
  if (lmin >= -zero_tol) {
    const CVector d0 = step(0.0, false);
    if (d0.norm() <= r) {
      finish(d0, 0.0);
      return out;
    }
  }

  double bottom_grad = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (lam(j) - lmin <= zero_tol) bottom_grad += std::norm(lmin * c(j));
  }
  bottom_grad = std::sqrt(bottom_grad);

  if (lmin < -zero_tol && bottom_grad <= 1e-10 * scale) {
    const CVector d_rest = step(nu_low, true);
    if (d_rest.norm() <= r) {
      const double tau = std::sqrt(std::max(0.0, r * r - d_rest.squaredNorm()));
      const CVector u = canonical_phase(eig.vectors.col(0));
      out.hard_case = true;
      out.argmin = eig.vectors * d_rest + tau * u;
      out.multiplier = nu_low;
      out.value = quad(q, hbar + out.argmin);
      return out;
    }
  }

  // Secular equation 1/r - 1/||d(nu)|| = 0 on (nu_low, inf), Newton with a
  // bisection safeguard. ||d(nu)|| is decreasing there.
  auto norm_and_slope = [&](double nu, double& nd, double& dnd) {
    double s = 0.0, ds = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (std::abs(lam(j)) <= zero_tol) continue;
      const double den = lam(j) + nu;
      const double a = lam(j) * lam(j) * std::norm(c(j));
      s += a / (den * den);
      ds += -2.0 * a / (den * den * den);
    }
    nd = std::sqrt(s);
    dnd = nd > 0.0 ? 0.5 * ds / nd : 0.0;
  };

  double lo = nu_low;
  double hi = nu_low + 1.0;
  double nd = 0.0, dnd = 0.0;
  for (int it = 0; it < 200; ++it) {
    norm_and_slope(hi, nd, dnd);
    if (nd <= r) break;
    lo = hi;
    hi = nu_low + 2.0 * (hi - nu_low);
  }
  double nu = hi;
  for (int it = 0; it < 200; ++it) {
    norm_and_slope(nu, nd, dnd);
    if (std::abs(nd - r) <= 1e-12 * r) break;
    if (nd > r) {
      lo = nu;
    } else {
      hi = nu;
    }
    // psi(nu) = 1/r - 1/nd, psi' = dnd / nd^2
    double next = nd > 0.0 && dnd != 0.0 ? nu - (1.0 / r - 1.0 / nd) * nd * nd / dnd
                                         : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo <= 1e-15 * (1.0 + hi)) break;
    nu = next;
  }
  finish(step(nu, false), nu);
  return out;
}

std::optional<double> slemma_check(const ProblemInstance& inst,
                                   std::span<const HermMatrix> w, std::size_t i) {
  const HermMatrix m = sinr_form(inst, w, i);
  const double r = inst.radius.at(i);
  if (!(r > 0.0)) throw std::invalid_argument("slemma_check: radius must be positive");

  auto g = [&](double lam) { return lambda_min(build_psi(inst, w, i, lam)); };

  // lambda_min(Psi) is at most the corner entry, which turns negative once
  // lambda r^2 exceeds hbar^H M hbar - noise.
  const double corner0 = quad(m, inst.hbar[i]) - inst.noise[i];
  if (corner0 < 0.0) return std::nullopt;
  double a = 0.0;
  double b = corner0 / (r * r) + 1e-12;

  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - phi * (b - a);
  double x2 = a + phi * (b - a);
  double f1 = g(x1), f2 = g(x2);
  for (int it = 0; it < 200 && b - a > 1e-14 * (1.0 + b); ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = g(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = g(x1);
    }
  }
  double best = f1 >= f2 ? x1 : x2;
  double fbest = std::max(f1, f2);
  const double f0 = g(0.0);
  if (f0 >= fbest) {
    best = 0.0;
    fbest = f0;
  }
  if (fbest >= 0.0) return best;
  return std::nullopt;
}

BeamformerSet BeamformerSet::from(std::vector<CVector> w) {
  BeamformerSet out;
  out.w = std::move(w);
  for (const auto& v : out.w) out.power += v.squaredNorm();
  return out;
}

namespace {

bool robust_ok(const ProblemInstance& inst, const BeamformerSet& w, std::size_t i,
               double gamma) {
  CMatrix q = w.w[i] * w.w[i].adjoint() / gamma;
  for (std::size_t k = 0; k < w.w.size(); ++k) {
    if (k != i) q -= w.w[k] * w.w[k].adjoint();
  }
  return trs_min(HermMatrix(q), inst.hbar[i], inst.radius[i]).value >= inst.noise[i];
}

}  // namespace

double worst_case_sinr(const ProblemInstance& inst, const BeamformerSet& w,
                       std::size_t i) {
  if (w.w.size() != static_cast<std::size_t>(inst.k) || i >= w.w.size()) {
    throw std::invalid_argument("worst_case_sinr: beamformer count or index mismatch");
  }
  double lo = std::log(1e-6);
  double hi = std::log(1e6);
  if (!robust_ok(inst, w, i, std::exp(lo))) return 0.0;
  if (robust_ok(inst, w, i, std::exp(hi))) return std::exp(hi);
  for (int it = 0; it < 30; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (robust_ok(inst, w, i, std::exp(mid))) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::exp(lo);
}

std::vector<double> worst_case_margins(const ProblemInstance& inst,
                                       const BeamformerSet& w) {
  std::vector<double> out;
  for (std::size_t i = 0; i < w.w.size(); ++i) {
    const double g = inst.sinr_target[i];
    out.push_back((worst_case_sinr(inst, w, i) - g) / g);
  }
  return out;
}

Extraction extract_beamformers(const RobustDesign& design,
                               const ProblemInstance& inst) {
  if (design.W.size() != static_cast<std::size_t>(inst.k)) {
    throw std::invalid_argument("extract_beamformers: design has wrong user count");
  }
  Extraction out;
  std::vector<CVector> w;
  bool any_high_rank = false;
  for (const auto& wi : design.W) {
    const EigDecomp e = herm_eig(wi);
    const Eigen::Index n = wi.dim();
    const double top = e.values(n - 1);
    const double second = n > 1 ? e.values(n - 2) : 0.0;
    const double ratio = top > 0.0 ? std::max(0.0, second) / top : 0.0;
    out.rank_profile.push_back(ratio);
    if (ratio > kRankThreshold) any_high_rank = true;
    w.push_back(std::sqrt(std::max(0.0, top)) * canonical_phase(e.vectors.col(n - 1)));
  }
  out.beams = BeamformerSet::from(std::move(w));
  if (!any_high_rank) return out;

  out.fallback = true;
  auto scaled = [&](double t) {
    BeamformerSet s = out.beams;
    for (auto& v : s.w) v *= std::sqrt(t);
    s.power *= t;
    return s;
  };
  auto all_ok = [&](double t) {
    const BeamformerSet s = scaled(t);
    for (std::size_t i = 0; i < s.w.size(); ++i) {
      if (!robust_ok(inst, s, i, inst.sinr_target[i])) return false;
    }
    return true;
  };
  if (all_ok(1.0)) return out;
  if (!all_ok(1e6)) {
    std::ostringstream msg;
    msg << "extract_beamformers: rank-one repair failed; rank profile";
    for (double r : out.rank_profile) msg << ' ' << r;
    throw std::runtime_error(msg.str());
  }
  double lo = 0.0, hi = std::log(1e6);
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (all_ok(std::exp(mid))) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  out.power_scale = std::exp(hi);
  out.beams = scaled(out.power_scale);
  return out;
}

}  // namespace rbf
