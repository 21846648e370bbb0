#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rbf/formulations.hpp"
#include "rbf/oracle.hpp"

using namespace rbf;

namespace {

ProblemInstance scalar_instance(double r = 0.1, double gamma = 1.0) {
  ProblemInstance inst;
  inst.nt = 1;
  inst.k = 1;
  CVector h(1);
  h(0) = 1.0;
  inst.hbar = {h};
  inst.radius = {r};
  inst.noise = {0.1};
  inst.sinr_target = {gamma};
  return inst;
}

ProblemInstance random_instance(int nt, int k, double r, double gamma_db,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  ProblemInstance inst;
  inst.nt = nt;
  inst.k = k;
  for (int i = 0; i < k; ++i) {
    CVector h(nt);
    for (int j = 0; j < nt; ++j) h(j) = cplx(g(rng), g(rng));
    inst.hbar.push_back(h);
    inst.radius.push_back(r);
    inst.noise.push_back(0.1);
    inst.sinr_target.push_back(db_to_linear(gamma_db));
  }
  return inst;
}

HermMatrix scalar(double p) {
  CMatrix m(1, 1);
  m(0, 0) = p;
  return HermMatrix(m);
}

HermMatrix random_herm(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  CMatrix m(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) m(a, b) = cplx(g(rng), g(rng));
  }
  return HermMatrix(m);
}

HermMatrix random_psd(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  CMatrix m(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) m(a, b) = cplx(g(rng), g(rng));
  }
  return HermMatrix(m * m.adjoint() / n);
}

sdp::ConicSolution solve_ok(const sdp::ConicProgram& p) {
  auto s = sdp::solve(p);
  EXPECT_EQ(s.status, sdp::Status::Optimal) << sdp::to_string(s.status);
  return s;
}

}  // namespace

TEST(Psi, ScalarExpansion) {
  const auto inst = scalar_instance();
  const double p = 0.7, lam = 0.3;
  const std::vector<HermMatrix> w{scalar(p)};
  const HermMatrix psi = build_psi(inst, w, 0, lam);
  EXPECT_NEAR(psi(0, 0).real(), p + lam, 1e-15);
  EXPECT_NEAR(psi(0, 1).real(), p, 1e-15);
  EXPECT_NEAR(psi(1, 1).real(), p - 0.1 - 0.01 * lam, 1e-15);
}

TEST(Psi, ZeroDesignIsInfeasible) {
  const auto inst = random_instance(3, 2, 0.1, 4.0, 1);
  const std::vector<HermMatrix> w(2, HermMatrix::zero(3));
  const HermMatrix psi = build_psi(inst, w, 1, 0.0);
  EXPECT_NEAR(psi(3, 3).real(), -0.1, 1e-15);
  EXPECT_NEAR(lambda_min(psi), -0.1, 1e-12);
}

TEST(Psi, AffineAndHermitian) {
  std::mt19937_64 rng(4);
  const auto inst = random_instance(3, 3, 0.2, 2.0, 2);
  std::vector<HermMatrix> w0, w1, wt;
  const double t = 0.37;
  for (int i = 0; i < 3; ++i) {
    w0.push_back(random_herm(3, rng));
    w1.push_back(random_herm(3, rng));
    wt.push_back((1 - t) * w0.back() + t * w1.back());
  }
  const HermMatrix mix = (1 - t) * build_psi(inst, w0, 2, 0.4) + t * build_psi(inst, w1, 2, 1.3);
  const HermMatrix direct = build_psi(inst, wt, 2, (1 - t) * 0.4 + t * 1.3);
  EXPECT_LE((mix.mat() - direct.mat()).norm(), 1e-12);
  EXPECT_TRUE(is_hermitian(direct.mat()));
}

TEST(Y, Examples) {
  const auto inst = scalar_instance();
  CMatrix a(2, 2);
  a << 0.3, cplx(0.1, 0.2), cplx(0.1, -0.2), 0.5;
  const std::vector<HermMatrix> as{HermMatrix(a)};
  EXPECT_NEAR(build_y(inst, as, 0)(0, 0).real(), 1.0 - (0.3 + 0.2 + 0.5), 1e-15);

  const auto big = random_instance(3, 3, 0.1, 0.0, 3);
  const std::vector<HermMatrix> zeros(3, HermMatrix::zero(4));
  EXPECT_LE((build_y(big, zeros, 1).mat() - CMatrix::Identity(3, 3)).norm(), 0.0);

  std::mt19937_64 rng(8);
  std::vector<HermMatrix> rand;
  for (int i = 0; i < 3; ++i) rand.push_back(random_herm(4, rng));
  EXPECT_TRUE(is_hermitian(build_y(big, rand, 0).mat()));
  EXPECT_THROW(build_y(big, zeros, 3), std::out_of_range);
  const std::vector<HermMatrix> wrong(3, HermMatrix::zero(3));
  EXPECT_THROW(build_y(big, wrong, 0), std::invalid_argument);
}

TEST(HermitianCoordinates, ReadEveryRealParameter) {
  const auto coords = hermitian_coordinates(3);
  ASSERT_EQ(coords.size(), 9u);
  std::mt19937_64 rng(1);
  const HermMatrix x = random_herm(3, rng);
  // Reassemble X from its coordinates.
  CMatrix back = CMatrix::Zero(3, 3);
  std::size_t c = 0;
  for (int a = 0; a < 3; ++a) back(a, a) = inner(coords[c++], x);
  for (int a = 0; a < 3; ++a) {
    for (int b = a + 1; b < 3; ++b) {
      const double re = inner(coords[c++], x);
      const double im = inner(coords[c++], x);
      back(a, b) = cplx(re, im);
      back(b, a) = cplx(re, -im);
    }
  }
  EXPECT_LE((back - x.mat()).norm(), 1e-12);
}

TEST(RobustSdr, ScalarClosedForm) {
  const auto inst = scalar_instance();
  const auto prog = build_wsp_sdr(inst);
  const auto sol = solve_ok(prog.program);
  const auto design = decode_design(prog, sol);
  EXPECT_NEAR(design.objective, 0.1 / 0.81, 1e-8);
  EXPECT_NEAR(sol.primal_obj, 0.1 / 0.81, 1e-8);
  EXPECT_GE(lambda_min(build_psi(inst, design.W, 0, design.lambda[0])), -1e-7);
}

TEST(RobustSdr, ZeroRadiusIsNominal) {
  const auto inst = scalar_instance(0.0);
  const auto prog = build_wsp_sdr(inst);
  const auto sol = solve_ok(prog.program);
  EXPECT_NEAR(sol.primal_obj, 0.1, 1e-8);
  EXPECT_EQ(decode_design(prog, sol).lambda[0], 0.0);
}

TEST(RobustSdr, MonotoneInTarget) {
  double prev = 0.0;
  for (double gdb : {-2.0, 0.0, 2.0, 4.0}) {
    const auto inst = random_instance(3, 3, 0.1, gdb, 3);
    const auto sol = solve_ok(build_wsp_sdr(inst).program);
    EXPECT_GE(sol.primal_obj, prev - 1e-9);
    prev = sol.primal_obj;
  }
}

TEST(RobustSdr, DesignInvariants) {
  const auto inst = random_instance(4, 4, 0.1, 4.0, 0);
  const auto prog = build_wsp_sdr(inst);
  const auto sol = solve_ok(prog.program);
  const auto d = decode_design(prog, sol);
  for (int i = 0; i < 4; ++i) {
    EXPECT_GE(lambda_min(d.W[i]), -1e-7);
    EXPECT_GE(d.lambda[i], -1e-9);
    EXPECT_GE(lambda_min(build_psi(inst, d.W, i, d.lambda[i])), -1e-7);
  }
}

TEST(RobustSdr, RecoveredCertificateIsDualFeasible) {
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const auto inst = random_instance(4, 4, 0.1, 4.0, seed);
    const auto prog = build_wsp_sdr(inst);
    const auto sol = solve_ok(prog.program);
    const auto cert = recover_certificate(inst, prog, sol);
    for (int i = 0; i < 4; ++i) {
      const double c = corner(cert.A[i]);
      EXPECT_GT(c, 0.0);
      EXPECT_GE(lambda_min(cert.A[i]), -1e-7);
      EXPECT_LE(cert.A[i].trace(), 1.01 * c + 1e-7);
      EXPECT_GE(lambda_min(build_y(inst, cert.A, i)), -1e-7);
    }
    EXPECT_NEAR(cert.objective, sol.primal_obj, 1e-6 * (1 + sol.primal_obj));
  }
}

TEST(DualSdp, ScalarClosedForm) {
  const auto inst = scalar_instance();
  const auto prog = build_dual_sdp(inst);
  const auto sol = solve_ok(prog.program);
  const auto cert = decode_certificate(inst, prog, sol);
  EXPECT_NEAR(cert.objective, 0.1 / 0.81, 1e-8);
  EXPECT_NEAR(-sol.primal_obj, 0.1 / 0.81, 1e-8);
}

TEST(DualSdp, ZeroRadius) {
  const auto inst = scalar_instance(0.0);
  const auto prog = build_dual_sdp(inst);
  const auto sol = solve_ok(prog.program);
  EXPECT_NEAR(decode_certificate(inst, prog, sol).objective, 0.1, 1e-8);
}

TEST(DualSdp, ZeroCertificateIsFeasible) {
  const auto inst = random_instance(3, 3, 0.1, 4.0, 5);
  const auto prog = build_dual_sdp(inst);
  // A = 0, Q_i = I, s = 0.
  std::vector<RMatrix> x;
  for (const auto& b : prog.program.blocks) {
    x.push_back(b.kind == sdp::BlockKind::Psd ? RMatrix::Zero(b.size, b.size)
                                              : RMatrix::Zero(b.size, 1));
  }
  for (int blk : prog.y_block) x[blk] = RMatrix::Identity(6, 6);
  for (int r = 0; r < prog.program.num_constraints(); ++r) {
    EXPECT_NEAR(sdp::apply_row(prog.program, r, x), prog.program.constraints[r].rhs, 1e-12);
  }
  EXPECT_EQ(sdp::apply_objective(prog.program, x), 0.0);
}

TEST(DualSdp, MatchesPrimalOnMixedRadii) {
  auto inst = random_instance(3, 3, 0.15, 3.0, 9);
  inst.radius[1] = 0.0;
  const auto p = solve_ok(build_wsp_sdr(inst).program);
  const auto d = solve_ok(build_dual_sdp(inst).program);
  EXPECT_NEAR(p.primal_obj, -d.primal_obj, 1e-7 * (1 + p.primal_obj));
}

TEST(InnerSdp, SingleRankOneChannel) {
  ProblemInstance inst = scalar_instance();
  inst.nt = 2;
  CVector h(2);
  h << 1.0, 0.0;
  inst.hbar = {h};
  const std::vector<HermMatrix> r{HermMatrix(h * h.adjoint())};
  const auto prog = build_inner_sdp(inst, r);
  const auto sol = solve_ok(prog.program);
  EXPECT_NEAR(sol.primal_obj, 0.1, 1e-8);
  const auto w = decode_inner(prog, sol);
  EXPECT_LE((w[0].mat() - 0.1 * h * h.adjoint()).norm(), 1e-7);
}

TEST(InnerSdp, ZeroErrorReproducesPerfectCsi) {
  auto inst = random_instance(3, 3, 0.0, 2.0, 6);
  std::vector<HermMatrix> r;
  CMatrix v = CMatrix::Zero(4, 4);
  v(3, 3) = 1.0;
  for (int i = 0; i < 3; ++i) r.push_back(channel_covariance(inst.hbar[i], HermMatrix(v)));
  const auto inner = solve_ok(build_inner_sdp(inst, r).program);
  const auto sdr = solve_ok(build_wsp_sdr(inst).program);
  EXPECT_NEAR(inner.primal_obj, sdr.primal_obj, 1e-7 * (1 + sdr.primal_obj));
}

TEST(InnerSdp, SameDirectionUsersBecomeInfeasible) {
  // q1/g - q2 >= s, q2/g - q1 >= s has a solution iff g < 1.
  ProblemInstance inst;
  inst.nt = 2;
  inst.k = 2;
  CVector h(2);
  h << 1.0, cplx(0.0, 1.0);
  inst.hbar = {h, h};
  inst.radius = {0.0, 0.0};
  inst.noise = {0.1, 0.1};
  const std::vector<HermMatrix> r(2, HermMatrix(h * h.adjoint()));
  for (double g : {0.5, 0.9}) {
    inst.sinr_target = {g, g};
    EXPECT_EQ(sdp::solve(build_inner_sdp(inst, r).program).status, sdp::Status::Optimal);
  }
  for (double g : {1.1, 4.0}) {
    inst.sinr_target = {g, g};
    const auto prog = build_inner_sdp(inst, r).program;
    const auto sol = sdp::solve(prog);
    ASSERT_EQ(sol.status, sdp::Status::PrimalInfeasible);
    double by = 0.0;
    for (int k = 0; k < prog.num_constraints(); ++k) by += sol.dual_y[k] * prog.constraints[k].rhs;
    EXPECT_NEAR(by, 1.0, 1e-12);
  }
}

TEST(FixedCertificate, EqualsRowScaledInner) {
  const auto inst = random_instance(3, 3, 0.1, 3.0, 7);
  const auto dual = build_dual_sdp(inst);
  const auto cert = decode_certificate(inst, dual, solve_ok(dual.program));
  const auto fixed = solve_ok(build_fixed_certificate_inner(inst, cert).program);
  std::vector<HermMatrix> r;
  for (int i = 0; i < 3; ++i) {
    r.push_back(channel_covariance(inst.hbar[i], (1.0 / corner(cert.A[i])) * cert.A[i]));
  }
  const auto scaled = solve_ok(build_inner_sdp(inst, r).program);
  EXPECT_NEAR(fixed.primal_obj, scaled.primal_obj, 1e-7 * (1 + scaled.primal_obj));
  const auto primal = solve_ok(build_wsp_sdr(inst).program);
  EXPECT_NEAR(fixed.primal_obj, primal.primal_obj, 1e-6 * (1 + primal.primal_obj));
}

TEST(FixedCertificate, ScalarMatchesRobustOptimum) {
  const auto inst = scalar_instance();
  const auto dual = build_dual_sdp(inst);
  const auto cert = decode_certificate(inst, dual, solve_ok(dual.program));
  const auto fixed = solve_ok(build_fixed_certificate_inner(inst, cert).program);
  EXPECT_NEAR(fixed.primal_obj, 0.1 / 0.81, 1e-7);
}

TEST(FixedCertificate, RejectsZeroCorner) {
  const auto inst = scalar_instance();
  DualCertificate cert;
  cert.A = {HermMatrix::zero(2)};
  EXPECT_THROW(build_fixed_certificate_inner(inst, cert), std::invalid_argument);
}

TEST(ErrorSdr, ZeroDesign) {
  const auto inst = random_instance(2, 2, 0.1, 0.0, 3);
  const std::vector<HermMatrix> w(2, HermMatrix::zero(2));
  const auto sol = solve_ok(build_error_sdr(inst, w, 0).program);
  EXPECT_NEAR(sol.primal_obj, 0.0, 1e-8);
}

TEST(ErrorSdr, ScalarWorstError) {
  const auto inst = scalar_instance();
  for (double p : {0.05, 0.2, 1.0}) {
    const std::vector<HermMatrix> w{scalar(p)};
    const auto prog = build_error_sdr(inst, w, 0);
    const auto sol = solve_ok(prog.program);
    EXPECT_NEAR(sol.primal_obj, p * 0.81, 1e-8 * (1 + p));
    const HermMatrix v = decode_error_sdr(prog, sol);
    // V = [1, e]^T [1, e] with e = -r.
    EXPECT_NEAR(v(0, 1).real(), -0.1, 1e-5);
    EXPECT_NEAR(corner(v), 1.0, 1e-9);
  }
}

TEST(ErrorSdr, MatchesTrustRegionOracle) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> ur(0.05, 0.6);
  for (int t = 0; t < 50; ++t) {
    const int nt = 1 + t % 3;
    const int k = 1 + t % 3;
    auto inst = random_instance(nt, k, 0.1, 0.0, 100 + t);
    const std::size_t i = t % k;
    inst.radius[i] = ur(rng);
    inst.sinr_target[i] = 2.0 * ur(rng);
    std::vector<HermMatrix> w;
    for (int u = 0; u < k; ++u) w.push_back(random_psd(nt, rng));
    const auto sol = solve_ok(build_error_sdr(inst, w, i).program);
    const double trs = trs_min(sinr_form(inst, w, i), inst.hbar[i], inst.radius[i]).value;
    EXPECT_NEAR(sol.primal_obj, trs, 1e-7 * (1 + std::abs(trs))) << "case " << t;
  }
}

TEST(ErrorSdr, NonincreasingInRadius) {
  std::mt19937_64 rng(2);
  auto inst = random_instance(3, 2, 0.1, 0.0, 44);
  const std::vector<HermMatrix> w{random_psd(3, rng), random_psd(3, rng)};
  double prev = std::numeric_limits<double>::infinity();
  for (double r : {0.05, 0.1, 0.2, 0.4}) {
    inst.radius[0] = r;
    const double v = solve_ok(build_error_sdr(inst, w, 0).program).primal_obj;
    EXPECT_LE(v, prev + 1e-8);
    prev = v;
  }
}
