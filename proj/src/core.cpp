#include "rbf/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace rbf {

bool is_hermitian(const CMatrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = 1.0 + (m.size() ? m.cwiseAbs().maxCoeff() : 0.0);
  for (Eigen::Index j = 0; j < m.rows(); ++j) {
    if (std::abs(m(j, j).imag()) > tol * scale) return false;
    for (Eigen::Index c = j + 1; c < m.cols(); ++c) {
      if (std::abs(m(j, c) - std::conj(m(c, j))) > tol * scale) return false;
    }
  }
  return true;
}

HermMatrix::HermMatrix(const CMatrix& m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("HermMatrix: matrix is not square");
  }
#ifdef RBF_STRICT_HERMITIAN
  if (!is_hermitian(m)) {
    throw std::invalid_argument("HermMatrix: input is not Hermitian");
  }
#endif
  m_ = 0.5 * (m + m.adjoint());
}

HermMatrix HermMatrix::checked(const CMatrix& m) {
  if (!is_hermitian(m)) {
    throw std::invalid_argument("HermMatrix: input is not Hermitian");
  }
  return HermMatrix(m);
}

HermMatrix HermMatrix::zero(Eigen::Index n) {
  return HermMatrix(CMatrix::Zero(n, n));
}

HermMatrix HermMatrix::identity(Eigen::Index n) {
  return HermMatrix(CMatrix::Identity(n, n));
}

HermMatrix& HermMatrix::operator+=(const HermMatrix& o) {
  m_ += o.m_;
  return *this;
}

HermMatrix& HermMatrix::operator-=(const HermMatrix& o) {
  m_ -= o.m_;
  return *this;
}

HermMatrix& HermMatrix::operator*=(double s) {
  m_ *= s;
  return *this;
}

HermMatrix operator+(HermMatrix a, const HermMatrix& b) { return a += b; }
HermMatrix operator-(HermMatrix a, const HermMatrix& b) { return a -= b; }
HermMatrix operator*(double s, HermMatrix a) { return a *= s; }
HermMatrix operator*(HermMatrix a, double s) { return a *= s; }

double inner(const HermMatrix& a, const HermMatrix& b) {
  return (a.mat().conjugate().cwiseProduct(b.mat())).sum().real();
}

RealEig jacobi_eig(const RMatrix& input) {
  const Eigen::Index n = input.rows();
  if (input.cols() != n) {
    throw std::invalid_argument("jacobi_eig: matrix is not square");
  }
  const double scale = 1.0 + (n ? input.cwiseAbs().maxCoeff() : 0.0);
  if ((input - input.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("jacobi_eig: matrix is not symmetric");
  }
  RMatrix a = 0.5 * (input + input.transpose());
  RMatrix v = RMatrix::Identity(n, n);
  const double total = a.norm();

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (std::sqrt(2.0 * off) <= 1e-16 * total || off == 0.0) break;

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](auto x, auto y) { return a(x, x) < a(y, y); });
  RealEig out{RVector(n), RMatrix(n, n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    out.values(j) = a(order[j], order[j]);
    out.vectors.col(j) = v.col(order[j]);
  }
  return out;
}

EigDecomp herm_eig(const HermMatrix& h) {
  const Eigen::Index n = h.dim();
  const RealEig re = jacobi_eig(real_embed(h));

  // Eigenvector [x; y] of the embedding maps to x + i y of H; its partner
  // [-y; x] maps to i(x + i y). Walk the 2n real vectors in ascending order
  // and keep the ones that are new in the complex span.
  std::vector<CVector> kept;
  std::vector<double> vals;
  auto collect = [&](double threshold) {
    for (Eigen::Index j = 0;
         j < 2 * n && static_cast<Eigen::Index>(kept.size()) < n; ++j) {
      CVector z(n);
      for (Eigen::Index r = 0; r < n; ++r) {
        z(r) = cplx(re.vectors(r, j), re.vectors(n + r, j));
      }
      for (int pass = 0; pass < 2; ++pass) {
        for (const auto& u : kept) z -= u.dot(z) * u;
      }
      const double nz = z.norm();
      if (nz < threshold) continue;
      z /= nz;
      kept.push_back(z);
      vals.push_back((z.adjoint() * h.mat() * z)(0, 0).real());
    }
  };
  collect(0.5);
  // Mixed bases inside a degenerate cluster can leave every candidate only
  // partly new; finish with a permissive pass.
  if (static_cast<Eigen::Index>(kept.size()) < n) collect(1e-8);

  std::vector<std::size_t> order(kept.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](auto x, auto y) { return vals[x] < vals[y]; });
  EigDecomp out{RVector(n), CMatrix(n, n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    out.values(j) = vals[order[j]];
    out.vectors.col(j) = kept[order[j]];
  }
  return out;
}

EigDecomp herm_eig(const CMatrix& h) { return herm_eig(HermMatrix::checked(h)); }

double lambda_min(const HermMatrix& h) { return herm_eig(h).values(0); }

double lambda_max(const HermMatrix& h) {
  const auto e = herm_eig(h);
  return e.values(e.values.size() - 1);
}

RMatrix real_embed(const HermMatrix& h) {
  const Eigen::Index n = h.dim();
  RMatrix out(2 * n, 2 * n);
  const RMatrix re = h.mat().real();
  const RMatrix im = h.mat().imag();
  out.topLeftCorner(n, n) = re;
  out.topRightCorner(n, n) = -im;
  out.bottomLeftCorner(n, n) = im;
  out.bottomRightCorner(n, n) = re;
  return out;
}

HermMatrix real_unembed(const RMatrix& z) {
  if (z.rows() != z.cols() || z.rows() % 2 != 0) {
    throw std::invalid_argument("real_unembed: expected an even square matrix");
  }
  const Eigen::Index n = z.rows() / 2;
  CMatrix x(n, n);
  x.real() = 0.5 * (z.topLeftCorner(n, n) + z.bottomRightCorner(n, n));
  x.imag() = 0.5 * (z.bottomLeftCorner(n, n) - z.topRightCorner(n, n));
  return HermMatrix(x);
}

double evaluate_sinr(std::span<const CVector> w, const CVector& h,
                     std::size_t i, double noise) {
  if (i >= w.size()) {
    throw std::out_of_range("evaluate_sinr: user index " + std::to_string(i) +
                            " out of range");
  }
  double interference = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (k != i) interference += std::norm(h.dot(w[k]));
  }
  return std::norm(h.dot(w[i])) / (interference + noise);
}

CMatrix lift_matrix(const CVector& hbar) {
  const Eigen::Index n = hbar.size();
  CMatrix g(n, n + 1);
  g.leftCols(n).setIdentity();
  g.col(n) = hbar;
  return g;
}

void ProblemInstance::validate() const {
  if (nt < 1) throw std::invalid_argument("instance: nt must be >= 1");
  if (k < 1) throw std::invalid_argument("instance: k must be >= 1");
  const auto ku = static_cast<std::size_t>(k);
  if (hbar.size() != ku || radius.size() != ku || noise.size() != ku ||
      sinr_target.size() != ku) {
    throw std::invalid_argument("instance: per-user arrays must have k entries");
  }
  for (std::size_t i = 0; i < ku; ++i) {
    if (hbar[i].size() != nt) {
      throw std::invalid_argument("instance: channel " + std::to_string(i) +
                                  " has wrong dimension");
    }
    if (!(radius[i] >= 0.0) || !std::isfinite(radius[i])) {
      throw std::invalid_argument("instance: radius must be nonnegative");
    }
    if (!(noise[i] > 0.0) || !std::isfinite(noise[i])) {
      throw std::invalid_argument("instance: noise power must be positive");
    }
    if (!(sinr_target[i] > 0.0) || !std::isfinite(sinr_target[i])) {
      throw std::invalid_argument("instance: SINR target must be positive");
    }
  }
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double linear_to_db(double x) { return 10.0 * std::log10(x); }

}  // namespace rbf
