#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rbf/oracle.hpp"

using namespace rbf;

namespace {

HermMatrix diag2(double a, double b) {
  CMatrix m = CMatrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return HermMatrix(m);
}

CVector vec2(cplx a, cplx b) {
  CVector v(2);
  v << a, b;
  return v;
}

double f(const HermMatrix& q, const CVector& hbar, const CVector& e) {
  const CVector x = hbar + e;
  return (x.adjoint() * q.mat() * x)(0, 0).real();
}

HermMatrix random_herm(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  CMatrix m(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) m(a, b) = cplx(g(rng), g(rng)) * scale;
  }
  return HermMatrix(m);
}

CVector random_vec(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  CVector v(n);
  for (int a = 0; a < n; ++a) v(a) = cplx(g(rng), g(rng));
  return v;
}

// Uniform point in the complex n-ball of radius r.
CVector random_in_ball(int n, double r, std::mt19937_64& rng) {
  CVector v = random_vec(n, rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return v / v.norm() * r * std::pow(u(rng), 1.0 / (2.0 * n));
}

// Brute force over the real 4-dimensional ball for n = 2, then a shrinking
// random-perturbation polish from the best grid point.
double grid_min(const HermMatrix& q, const CVector& hbar, double r) {
  const int steps = 30;
  double best = std::numeric_limits<double>::infinity();
  CVector arg = CVector::Zero(2);
  for (int a = -steps; a <= steps; ++a) {
    for (int b = -steps; b <= steps; ++b) {
      for (int c = -steps; c <= steps; ++c) {
        for (int d = -steps; d <= steps; ++d) {
          const double s = r / steps;
          const CVector e = vec2(cplx(a * s, b * s), cplx(c * s, d * s));
          if (e.norm() > r) continue;
          const double v = f(q, hbar, e);
          if (v < best) {
            best = v;
            arg = e;
          }
        }
      }
    }
  }
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  for (double step = r / steps; step > 1e-10; step *= 0.7) {
    for (int t = 0; t < 200; ++t) {
      CVector e = arg + step * vec2(cplx(g(rng), g(rng)), cplx(g(rng), g(rng)));
      if (e.norm() > r) e *= r / e.norm();
      const double v = f(q, hbar, e);
      if (v < best) {
        best = v;
        arg = e;
      }
    }
  }
  return best;
}

ProblemInstance scalar_instance(double r = 0.1) {
  ProblemInstance inst;
  inst.nt = 1;
  inst.k = 1;
  CVector h(1);
  h(0) = 1.0;
  inst.hbar = {h};
  inst.radius = {r};
  inst.noise = {0.1};
  inst.sinr_target = {1.0};
  return inst;
}

HermMatrix scalar(double p) {
  CMatrix m(1, 1);
  m(0, 0) = p;
  return HermMatrix(m);
}

}  // namespace

TEST(Trs, IsotropicQuadratic) {
  const CVector h = vec2(cplx(0.6, 0.8), cplx(0.0, 1.0));
  const double r = 0.3;
  const auto res = trs_min(HermMatrix::identity(2), h, r);
  EXPECT_NEAR(res.value, std::pow(h.norm() - r, 2), 1e-12);
  EXPECT_LE((res.argmin + r * h / h.norm()).norm(), 1e-10);
  EXPECT_FALSE(res.hard_case);
}

TEST(Trs, IndefiniteEasyCase) {
  const auto res = trs_min(diag2(1.0, -1.0), vec2(1.0, 0.0), 0.5);
  EXPECT_NEAR(res.value, 0.25, 1e-12);
  EXPECT_LE((res.argmin - vec2(-0.5, 0.0)).norm(), 1e-9);
  EXPECT_NEAR(grid_min(diag2(1.0, -1.0), vec2(1.0, 0.0), 0.5), 0.25, 1e-6);
}

TEST(Trs, HardCase) {
  const auto res = trs_min(diag2(0.0, -1.0), vec2(1.0, 0.0), 0.5);
  EXPECT_TRUE(res.hard_case);
  // x = hbar + e gives -|e_2|^2, so the full budget goes to the second axis.
  EXPECT_NEAR(res.value, -0.25, 1e-12);
  EXPECT_LE((res.argmin - vec2(0.0, 0.5)).norm(), 1e-12);
  EXPECT_NEAR(res.multiplier, 1.0, 1e-12);
  EXPECT_NEAR(grid_min(diag2(0.0, -1.0), vec2(1.0, 0.0), 0.5), -0.25, 1e-6);
}

TEST(Trs, ZeroRadius) {
  const CVector h = vec2(1.0, cplx(0.0, 2.0));
  const auto res = trs_min(diag2(2.0, -1.0), h, 0.0);
  EXPECT_DOUBLE_EQ(res.value, 2.0 - 4.0);
  EXPECT_EQ(res.argmin.norm(), 0.0);
}

TEST(Trs, RejectsNegativeRadius) {
  EXPECT_THROW(trs_min(diag2(1, 1), vec2(1, 0), -0.1), std::invalid_argument);
  EXPECT_THROW(trs_min(diag2(1, 1), CVector::Zero(3), 0.1), std::invalid_argument);
}

TEST(Trs, MatchesGridSearch) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ur(0.1, 1.0);
  for (int t = 0; t < 12; ++t) {
    const HermMatrix q = random_herm(2, rng);
    const CVector h = random_vec(2, rng);
    const double r = ur(rng);
    EXPECT_NEAR(trs_min(q, h, r).value, grid_min(q, h, r), 1e-6) << "case " << t;
  }
}

TEST(Trs, OptimalityConditionsAndSampling) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ur(0.05, 2.0);
  for (int t = 0; t < 60; ++t) {
    const int n = 1 + t % 4;
    const HermMatrix q = random_herm(n, rng);
    const CVector h = random_vec(n, rng);
    const double r = ur(rng);
    const auto res = trs_min(q, h, r);
    const double scale = 1.0 + q.norm() * (1.0 + h.norm()) * (1.0 + h.norm());

    EXPECT_LE(res.argmin.norm(), r + 1e-9);
    EXPECT_GE(res.multiplier, 0.0);
    EXPECT_LE(res.multiplier * (r - res.argmin.norm()), 1e-7);
    const CVector x = h + res.argmin;
    const CVector stat = q.mat() * x + res.multiplier * res.argmin;
    EXPECT_LE(stat.norm(), 1e-7 * scale);
    const HermMatrix shifted = q + res.multiplier * HermMatrix::identity(n);
    EXPECT_GE(lambda_min(shifted), -1e-9 * scale);
    EXPECT_NEAR(res.value, f(q, h, res.argmin), 1e-12 * scale);

    for (int s = 0; s < 1000; ++s) {
      const CVector e = random_in_ball(n, r, rng);
      ASSERT_LE(res.value, f(q, h, e) + 1e-12 * scale);
    }
  }
}

TEST(Trs, NonincreasingInRadius) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const HermMatrix q = random_herm(3, rng);
    const CVector h = random_vec(3, rng);
    double prev = trs_min(q, h, 0.0).value;
    for (double r = 0.1; r <= 1.5; r += 0.1) {
      const double v = trs_min(q, h, r).value;
      EXPECT_LE(v, prev + 1e-10);
      prev = v;
    }
  }
}

TEST(Slemma, ScalarInstanceBoundary) {
  const auto inst = scalar_instance();
  const std::vector<HermMatrix> above{scalar(0.1235)};
  const auto lam = slemma_check(inst, above, 0);
  ASSERT_TRUE(lam.has_value());
  EXPECT_GE(*lam, 0.0);
  EXPECT_GE(lambda_min(build_psi(inst, above, 0, *lam)), 0.0);

  const std::vector<HermMatrix> below{scalar(0.12)};
  EXPECT_FALSE(slemma_check(inst, below, 0).has_value());
  const CMatrix q = below[0].mat() / inst.sinr_target[0];
  EXPECT_NEAR(trs_min(HermMatrix(q), inst.hbar[0], 0.1).value, 0.81 * 0.12, 1e-12);
}

TEST(Slemma, ZeroDesignHasNoMultiplier) {
  const auto inst = scalar_instance();
  const std::vector<HermMatrix> zero{scalar(0.0)};
  EXPECT_FALSE(slemma_check(inst, zero, 0).has_value());
}

TEST(Slemma, RequiresPositiveRadius) {
  const auto inst = scalar_instance(0.0);
  const std::vector<HermMatrix> w{scalar(1.0)};
  EXPECT_THROW(slemma_check(inst, w, 0), std::invalid_argument);
}

TEST(Slemma, AgreesWithTrs) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> ur(0.05, 0.8);
  int feasible = 0;
  for (int t = 0; t < 150; ++t) {
    ProblemInstance inst;
    inst.nt = 1 + t % 3;
    inst.k = 1 + t % 2;
    for (int i = 0; i < inst.k; ++i) {
      inst.hbar.push_back(random_vec(inst.nt, rng));
      inst.radius.push_back(ur(rng));
      inst.noise.push_back(0.1);
      inst.sinr_target.push_back(ur(rng) * 2.0);
    }
    std::vector<HermMatrix> w;
    for (int i = 0; i < inst.k; ++i) {
      const CVector v = random_vec(inst.nt, rng);
      const double p = i == 0 ? 1.0 : 0.1;
      w.emplace_back(p * v * v.adjoint());
    }
    const CMatrix q = sinr_form(inst, w, 0).mat();
    const double trs = trs_min(HermMatrix(q), inst.hbar[0], inst.radius[0]).value;
    const bool trs_ok = trs >= inst.noise[0] - 1e-9;
    EXPECT_EQ(slemma_check(inst, w, 0).has_value(), trs_ok) << "case " << t << " trs " << trs;
    feasible += trs_ok;
  }
  // Both outcomes must be exercised for the agreement to mean anything.
  EXPECT_GT(feasible, 10);
  EXPECT_LT(feasible, 140);
}

TEST(WorstCaseSinr, SingleUserClosedForm) {
  ProblemInstance inst;
  inst.nt = 2;
  inst.k = 1;
  inst.hbar = {vec2(1.0, 0.0)};
  inst.radius = {0.1};
  inst.noise = {0.1};
  inst.sinr_target = {1.0};
  for (double t : {0.2, 0.5, 1.0, 3.0}) {
    const auto w = BeamformerSet::from({vec2(t, 0.0)});
    EXPECT_NEAR(worst_case_sinr(inst, w, 0) / (0.81 * t * t / 0.1), 1.0, 1e-7);
  }
}

TEST(WorstCaseSinr, ZeroRadiusMatchesNominal) {
  std::mt19937_64 rng(9);
  ProblemInstance inst;
  inst.nt = 3;
  inst.k = 3;
  std::vector<CVector> w;
  for (int i = 0; i < 3; ++i) {
    inst.hbar.push_back(random_vec(3, rng));
    inst.radius.push_back(0.0);
    inst.noise.push_back(0.1);
    inst.sinr_target.push_back(1.0);
    w.push_back(random_vec(3, rng));
  }
  const auto set = BeamformerSet::from(w);
  for (std::size_t i = 0; i < 3; ++i) {
    const double nominal = evaluate_sinr(w, inst.hbar[i], i, 0.1);
    EXPECT_NEAR(worst_case_sinr(inst, set, i) / nominal, 1.0, 1e-7);
  }
}

TEST(WorstCaseSinr, ZeroBeamformer) {
  ProblemInstance inst = scalar_instance();
  const auto w = BeamformerSet::from({CVector::Zero(1)});
  EXPECT_EQ(worst_case_sinr(inst, w, 0), 0.0);
}

TEST(Extract, RankOneDesignReturnsGenerator) {
  ProblemInstance inst;
  inst.nt = 2;
  inst.k = 1;
  inst.hbar = {vec2(1.0, 0.0)};
  inst.radius = {0.1};
  inst.noise = {0.1};
  inst.sinr_target = {1.0};
  const CVector v = vec2(cplx(0.3, -0.4), cplx(0.1, 0.2));
  RobustDesign d;
  d.W = {HermMatrix(v * v.adjoint())};
  const auto ex = extract_beamformers(d, inst);
  EXPECT_FALSE(ex.fallback);
  EXPECT_LE(ex.rank_profile[0], 1e-12);
  const cplx phase = ex.beams.w[0].dot(v);
  EXPECT_NEAR(std::abs(phase), v.squaredNorm(), 1e-12);
  EXPECT_LE((ex.beams.w[0] * (phase / std::abs(phase)) - v).norm(), 1e-10);
  EXPECT_NEAR(ex.beams.power, v.squaredNorm(), 1e-12);
}

TEST(Extract, FallbackRescalesUniformly) {
  ProblemInstance inst;
  inst.nt = 2;
  inst.k = 1;
  inst.hbar = {vec2(1.0, 0.0)};
  inst.radius = {0.1};
  inst.noise = {0.1};
  inst.sinr_target = {1.0};
  RobustDesign d;
  d.W = {diag2(0.05, 0.04)};
  const auto ex = extract_beamformers(d, inst);
  EXPECT_TRUE(ex.fallback);
  EXPECT_NEAR(ex.rank_profile[0], 0.8, 1e-12);
  // sqrt(0.05 t) e_1 meets the target once 0.81 * 0.05 t / 0.1 = 1.
  EXPECT_NEAR(ex.power_scale, 1.0 / 0.405, 1e-8);
  EXPECT_GE(worst_case_margins(inst, ex.beams)[0], -1e-7);
}

TEST(Extract, FallbackFailureReportsRank) {
  ProblemInstance inst;
  inst.nt = 2;
  inst.k = 2;
  inst.hbar = {vec2(1.0, 0.0), vec2(1.0, 0.0)};
  inst.radius = {0.1, 0.1};
  inst.noise = {0.1, 0.1};
  inst.sinr_target = {4.0, 4.0};
  RobustDesign d;
  d.W = {diag2(1.0, 0.5), diag2(1.0, 0.5)};
  try {
    extract_beamformers(d, inst);
    FAIL() << "expected a repair failure";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("rank profile"), std::string::npos);
  }
}
