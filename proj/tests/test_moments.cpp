#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <pottslab/moments.hpp>

#include "oracles.hpp"

using namespace pottslab;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector r(v.size());
  int i = 0;
  for (double x : v) r[i++] = x;
  return r;
}

oracle::Dense dense(const InteractionMatrix& M) {
  oracle::Dense d(M.q(), std::vector<double>(M.q()));
  for (int i = 0; i < M.q(); ++i)
    for (int j = 0; j < M.q(); ++j) d[i][j] = M(i, j);
  return d;
}

InteractionMatrix colorings(int q) {
  return InteractionMatrix::from_entries(Matrix::Ones(q, q) - Matrix::Identity(q, q));
}

Vector random_alpha(std::mt19937_64& g, int q) {
  auto v = oracle::random_simplex(g, q);
  return Eigen::Map<Vector>(v.data(), q);
}

}  // namespace

TEST(InnerEdgeMax, ProductMeasureForAllOnes) {
  auto M = InteractionMatrix::from_entries(Matrix::Ones(3, 3));
  Vector a = vec({0.5, 0.3, 0.2});
  auto r = inner_edge_max(M, a);
  ASSERT_TRUE(r.feasible);
  EXPECT_LT((r.dist.x - a * a.transpose()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(InnerEdgeMax, PottsUniform) {
  auto r = inner_edge_max(build_potts_matrix(3, 2), uniform_phase(3));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(r.dist.x(i, j), i == j ? 2.0 / 12 : 1.0 / 12, 1e-13);
}

TEST(InnerEdgeMax, ForcedMatching) {
  Matrix W(2, 2);
  W << 0, 1, 1, 0;
  auto r = inner_edge_max_w(W, vec({0.5, 0.5}));
  ASSERT_TRUE(r.feasible);
  EXPECT_EQ(r.dist.x(0, 0), 0);
  EXPECT_NEAR(r.dist.x(0, 1), 0.5, 1e-13);
  EXPECT_NEAR(r.g1, 0.5 * std::log(2.0), 1e-13);
}

TEST(InnerEdgeMax, InfeasibleSupport) {
  Matrix W(3, 3);
  W << 1, 0, 0, 0, 0, 1, 0, 1, 0;
  auto r = inner_edge_max_w(W, vec({0.2, 0.5, 0.3}));
  EXPECT_FALSE(r.feasible);
  EXPECT_EQ(r.g1, kNegInf);
  EXPECT_EQ(psi1_w(W, 3, vec({0.2, 0.5, 0.3})), kNegInf);
  EXPECT_TRUE(inner_edge_max_w(W, vec({0.2, 0.4, 0.4})).feasible);
}

TEST(InnerEdgeMax, MarginalsAndFirstOrderConditions) {
  std::mt19937_64 g(8);
  for (int trial = 0; trial < 100; ++trial) {
    int q = 2 + trial % 4;
    auto d = oracle::random_symmetric(g, q, 0.1, 4);
    Matrix W(q, q);
    for (int i = 0; i < q; ++i)
      for (int j = 0; j < q; ++j) W(i, j) = d[i][j];
    Vector a = random_alpha(g, q);
    auto r = inner_edge_max_w(W, a);
    ASSERT_TRUE(r.feasible);
    const Matrix& x = r.dist.x;
    EXPECT_LT((x.rowwise().sum() - a).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((x - x.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    for (int i = 0; i < q; ++i)
      for (int j = 0; j < q; ++j)
        for (int k = 0; k < q; ++k)
          for (int l = 0; l < q; ++l) {
            double lhs = x(i, j) * x(k, l) * W(i, l) * W(k, j);
            double rhs = x(i, l) * x(k, j) * W(i, j) * W(k, l);
            EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(lhs)));
          }
  }
}

TEST(Psi1, ClosedForms) {
  double v = psi1(build_potts_matrix(3, 2), 3, uniform_phase(3));
  EXPECT_NEAR(v, 1.5 * std::log(12.0) - 2 * std::log(3.0), 1e-12);
  EXPECT_NEAR(v, oracle::potts_uniform_psi1(3, 3, 2), 1e-12);
  EXPECT_NEAR(psi1(colorings(3), 10, uniform_phase(3)), 5 * std::log(2.0) - 4 * std::log(3.0), 1e-10);
  auto ones = InteractionMatrix::from_entries(Matrix::Ones(4, 4));
  EXPECT_NEAR(psi1(ones, 3, Vector::Unit(4, 0)), 0, 1e-14);
  for (int q = 2; q <= 6; ++q)
    for (double B : {0.5, 1.5, 3.0})
      EXPECT_NEAR(psi1(build_potts_matrix(q, B), 4, uniform_phase(q)), oracle::potts_uniform_psi1(q, 4, B), 1e-12);
}

TEST(Psi1, MatchesPhi1AtFixpoints) {
  for (int q : {3, 4})
    for (double B : {2.0, 3.9, 4.5, 6.0}) {
      auto M = build_potts_matrix(q, B);
      for (const auto& f : potts_fixpoints(q, 3, B)) EXPECT_NEAR(phi1(M, 3, f.R), psi1(M, 3, f.alpha), 1e-9);
    }
}

TEST(Norm, IdentityAndPsi1Relation) {
  NormResult id = matrix_norm_p2(Matrix::Identity(3, 3), 1.5);
  EXPECT_NEAR(id.value, 1, 1e-10);
  auto M = build_potts_matrix(3, 2);
  auto rep = moment_report(M, 3);
  ASSERT_TRUE(rep.normValue);
  EXPECT_NEAR(3 * std::log(*rep.normValue), rep.psi1Max, 1e-8);
}

TEST(Norm, TensorProduct) {
  for (double B : {2.0, 5.0}) {
    Matrix U = cholesky_factor(build_potts_matrix(3, B));
    double n1 = matrix_norm_p2(U, 1.5).value;
    double n2 = matrix_norm_p2(kron(U, U), 1.5).value;
    EXPECT_NEAR(n2, n1 * n1, 1e-8);
  }
}

TEST(Psi2, IsingDominantPhase) {
  auto M = build_potts_matrix(2, 2);
  auto a = uniform_phase(2);
  EXPECT_NEAR(psi2(M, 3, a), 2 * psi1(M, 3, a), 1e-7);
}

TEST(Psi2, TensorPointLowerBound) {
  std::mt19937_64 g(4);
  Psi2Options opt;
  opt.randomStarts = 3;
  for (int trial = 0; trial < 10; ++trial) {
    int q = 2 + trial % 2;
    std::uniform_real_distribution<double> ub(1.2, 5);
    auto M = build_potts_matrix(q, ub(g));
    Vector a = random_alpha(g, q);
    EXPECT_GE(psi2(M, 3, a, opt), 2 * psi1(M, 3, a) - 1e-9);
  }
}

TEST(Psi2, ColoringsSecondMomentFails) {
  auto M = colorings(3);
  auto a = uniform_phase(3);
  double p1 = psi1(M, 10, a);
  double p2 = psi2(M, 10, a);
  EXPECT_GE(p2, p1 - 1e-9);
  EXPECT_GT(p2, 2 * p1 + 0.1);
}

TEST(ExactMoments, HandValues) {
  auto ones = InteractionMatrix::from_entries(Matrix::Ones(2, 2));
  EXPECT_NEAR(first_moment_exact(4, 3, ones, uniform_phase(2)), 6, 1e-12);
  EXPECT_NEAR(second_moment_exact(4, 3, ones, uniform_phase(2)), 36, 1e-11);
  auto ising = build_potts_matrix(2, 2);
  EXPECT_NEAR(first_moment_exact(2, 3, ising, uniform_phase(2)), 28.0 / 5.0, 1e-13);
  EXPECT_THROW(first_moment_exact(3, 3, ising, uniform_phase(2)), ValidationError);
  EXPECT_THROW(first_moment_exact(3, 2, ising, vec({0.5, 0.5})), ValidationError);
}

TEST(ExactMoments, AgreeWithPairingEnumeration) {
  for (int n : {2, 4})
    for (int q : {2, 3})
      for (double B : {0.5, 1.0, 2.0}) {
        auto M = build_potts_matrix(q, B);
        auto d = dense(M);
        std::vector<int> c(q, 0);
        std::function<void(int, int)> rec = [&](int i, int left) {
          if (i == q - 1) {
            c[i] = left;
            Vector a(q);
            for (int k = 0; k < q; ++k) a[k] = double(c[k]) / n;
            auto [m1, m2] = oracle::pairing_moments(n, 3, d, c);
            double e1 = first_moment_exact(n, 3, M, a);
            EXPECT_NEAR(e1, m1, 1e-12 * m1);
            if (n == 2) {
              double e2 = second_moment_exact(n, 3, M, a);
              EXPECT_NEAR(e2, m2, 1e-12 * m2);
              EXPECT_GE(e2, e1 * e1 * (1 - 1e-12));
            }
            return;
          }
          for (int v = 0; v <= left; ++v) {
            c[i] = v;
            rec(i + 1, left - v);
          }
        };
        rec(0, n);
      }
}

TEST(ExactMoments, GrowthRateApproachesPsi1) {
  auto M = build_potts_matrix(3, 2);
  double target = psi1(M, 3, uniform_phase(3));
  double prev = 1e300;
  for (int n : {48, 96, 198}) {
    double rate = log_first_moment_exact(n, 3, M, uniform_phase(3)) / n;
    double gap = std::abs(rate - target);
    EXPECT_LT(gap, prev);
    prev = gap;
  }
  EXPECT_LT(prev, 0.05);
}

TEST(ExactMoments, LatticeGuard) {
  auto M = build_potts_matrix(3, 2);
  EXPECT_THROW(log_second_moment_exact(6, 3, M, uniform_phase(3), 10), GuardViolation);
}

TEST(PhaseDiagram, Regimes) {
  auto th = potts_thresholds(3, 3);
  EXPECT_EQ(potts_phase_diagram(3, 3, 2).regime, Regime::disorderedOnly);
  auto co = potts_phase_diagram(3, 3, th.Bo);
  EXPECT_EQ(co.regime, Regime::coexistence);
  ASSERT_TRUE(co.dif);
  EXPECT_NEAR(*co.dif, 0, 1e-9);
  EXPECT_EQ(potts_phase_diagram(3, 3, 3.9).regime, Regime::orderedDominant);
  EXPECT_EQ(potts_phase_diagram(3, 3, 3.835).regime, Regime::disorderedDominant);
  EXPECT_EQ(potts_phase_diagram(3, 3, 4.5).regime, Regime::orderedOnly);
  EXPECT_EQ(potts_phase_diagram(3, 3, 3.835).localMaxima.size(), 4u);
}

TEST(PhaseDiagram, DifIncreasesInB) {
  for (int q : {3, 4, 6})
    for (int delta : {3, 4, 5}) {
      auto th = potts_thresholds(q, delta);
      double prev = -1e300;
      for (int k = 1; k <= 50; ++k) {
        double B = th.Bu + (th.Brc - th.Bu) * k / 51;
        auto p = potts_phase_diagram(q, delta, B);
        ASSERT_TRUE(p.dif);
        EXPECT_GT(*p.dif, prev);
        EXPECT_EQ(*p.dif > 0, B > th.Bo);
        prev = *p.dif;
      }
    }
}

TEST(SmallGraph, IsingConstants) {
  auto M = build_potts_matrix(2, 2);
  auto fps = potts_fixpoints(2, 3, 2);
  ASSERT_FALSE(fps.empty());
  auto c = small_graph_constants(M, 3, fps[0], 60);
  ASSERT_EQ(c.mu.size(), 1u);
  EXPECT_NEAR(c.mu[0], 1.0 / 3, 1e-12);
  EXPECT_NEAR(c.ratioLimit, 3 / std::sqrt(7.0), 1e-12);
  EXPECT_NEAR(c.seriesValue, c.ratioLimit, 1e-10);
  EXPECT_DOUBLE_EQ(c.lambda[0], 1);
  EXPECT_DOUBLE_EQ(c.lambda[1], 1);
  EXPECT_DOUBLE_EQ(c.lambda[2], 4.0 / 3);
}

TEST(SmallGraph, RejectsNonDominant) {
  auto M = build_potts_matrix(3, 4.5);
  for (const auto& f : potts_fixpoints(3, 3, 4.5))
    if (f.stability == Stability::unstable) {
      EXPECT_THROW(small_graph_constants(M, 3, f, 60), ValidationError);
    }
}

TEST(MomentReport, InvariantsOnFerromagneticGrid) {
  for (int q : {2, 3})
    for (double B : {1.5, 3.0, 5.0}) {
      auto M = build_potts_matrix(q, B);
      MomentOptions opt;
      opt.psi2.randomStarts = 5;
      auto rep = moment_report(M, 3, opt);
      ASSERT_TRUE(rep.normValue);
      EXPECT_NEAR(rep.psi1Max, 3 * std::log(*rep.normValue), 1e-8);
      EXPECT_NEAR(rep.psi2Max, 2 * rep.psi1Max, 1e-7);
      EXPECT_FALSE(rep.gridExceeded);
      if (rep.smallGraph) {
        EXPECT_GE(rep.smallGraph->ratioLimit, 1);
      }
      for (const auto& ph : rep.phases) {
        EXPECT_NEAR(ph.alpha.sum(), 1, 1e-12);
        if (ph.hessianDominant) {
          for (double h : ph.hessianEigen) EXPECT_LT(h, 0);
        }
      }
    }
}
