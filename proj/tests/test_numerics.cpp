#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "wcps/numerics.hpp"

namespace wcps::numerics {
namespace {

using testing::kronecker_lift_radius;
using testing::random_matrix;

TEST(Matrix, RejectsNonFiniteAndBadShape) {
  EXPECT_THROW(Matrix(2, 2, std::vector<double>{1, 2, 3}), Error);
  EXPECT_THROW(Matrix(1, 1, std::vector<double>{std::nan("")}), Error);
  EXPECT_THROW((Matrix{{1, 2}, {3}}), Error);
  EXPECT_THROW(Matrix(2, 2) * Matrix(3, 1), Error);
}

TEST(Matrix, Arithmetic) {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{0, 1}, {1, 0}};
  EXPECT_EQ(a * b, (Matrix{{2, 1}, {4, 3}}));
  EXPECT_EQ(a.transpose(), (Matrix{{1, 3}, {2, 4}}));
  EXPECT_DOUBLE_EQ(dot(a, a), 30.0);
  EXPECT_DOUBLE_EQ(a.norm_inf(), 7.0);
  EXPECT_EQ((a * Vector{1, 1}), (Vector{3, 7}));
}

TEST(Linalg, SolveAndInverse) {
  const Matrix a{{4, 1, 0}, {1, 3, 1}, {0, 1, 2}};
  const Matrix inv = inverse(a);
  EXPECT_LT((a * inv - Matrix::identity(3)).max_abs(), 1e-14);
  EXPECT_THROW(inverse(Matrix{{1, 2}, {2, 4}}), Error);
}

TEST(Linalg, PsdFactorAcceptsSingularRejectsIndefinite) {
  const Matrix psd{{1, 1}, {1, 1}};
  auto l = psd_factor(psd);
  ASSERT_TRUE(l.has_value());
  EXPECT_LT((*l * l->transpose() - psd).max_abs(), 1e-14);
  EXPECT_TRUE(psd_factor(Matrix::zeros(3, 3)).has_value());
  EXPECT_FALSE(psd_factor(Matrix{{1, 2}, {2, 1}}).has_value());
  EXPECT_FALSE(psd_factor(Matrix{{0, 1}, {1, 0}}).has_value());
}

TEST(Linalg, ExpmOfDiagonalAndNilpotent) {
  const Matrix d{{1.0, 0.0}, {0.0, -2.0}};
  const Matrix e = expm(d);
  EXPECT_NEAR(e(0, 0), std::exp(1.0), 1e-12);
  EXPECT_NEAR(e(1, 1), std::exp(-2.0), 1e-12);
  const Matrix n{{0.0, 3.0}, {0.0, 0.0}};
  EXPECT_EQ(expm(n), (Matrix{{1.0, 3.0}, {0.0, 1.0}}));
}

// ---- eig ---------------------------------------------------------------

TEST(Eig, Diagonal) {
  const auto v = eig(Matrix{{2, 0}, {0, 3}});
  ASSERT_EQ(v.size(), 2u);
  EXPECT_NEAR(v[0].real(), 3.0, 1e-12);
  EXPECT_NEAR(v[1].real(), 2.0, 1e-12);
}

TEST(Eig, Rotation) {
  const auto v = eig(Matrix{{0, 1}, {-1, 0}});
  ASSERT_EQ(v.size(), 2u);
  for (const auto& z : v) {
    EXPECT_NEAR(z.real(), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(z.imag()), 1.0, 1e-12);
  }
  EXPECT_NEAR(v[0].imag() + v[1].imag(), 0.0, 1e-12);
}

TEST(Eig, CompanionOfGoldenQuadratic) {
  // z² − z − 1: companion [[1, 1], [1, 0]].
  const auto v = eig(Matrix{{1, 1}, {1, 0}});
  EXPECT_NEAR(v[0].real(), (1 + std::sqrt(5.0)) / 2, 1e-12);
  EXPECT_NEAR(v[1].real(), (1 - std::sqrt(5.0)) / 2, 1e-12);
}

TEST(Eig, RejectsOversize) {
  EXPECT_THROW(eig(Matrix(kEigMaxDimension + 1, kEigMaxDimension + 1)), Error);
  EXPECT_THROW(eig(Matrix(2, 3)), Error);
}

// ---- dare_solve ----------------------------------------------------------

TEST(Dare, ScalarGoldenRatio) {
  // P² − P − 1 = 0 for a = b = q = r = 1.
  const auto sol = dare_solve(Matrix{{1}}, Matrix{{1}}, Matrix{{1}}, Matrix{{1}});
  const double golden = (1 + std::sqrt(5.0)) / 2;
  EXPECT_NEAR(sol.P(0, 0), golden, 1e-9);
  EXPECT_NEAR(sol.F(0, 0), -(golden - 1.0), 1e-9);
}

TEST(Dare, ScalarZeroDynamics) {
  const auto sol = dare_solve(Matrix{{0}}, Matrix{{1}}, Matrix{{1}}, Matrix{{1}});
  EXPECT_DOUBLE_EQ(sol.P(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(sol.F(0, 0), 0.0);
}

TEST(Dare, RejectsBadWeights) {
  const Matrix A{{1}}, B{{1}};
  EXPECT_THROW(dare_solve(A, B, Matrix{{-1}}, Matrix{{1}}), Error);
  EXPECT_THROW(dare_solve(A, B, Matrix{{1}}, Matrix{{0}}), Error);
}

TEST(Dare, DivergesWhenNotStabilizable) {
  // Unstable mode with no input authority.
  try {
    dare_solve(Matrix{{2}}, Matrix{{0}}, Matrix{{1}}, Matrix{{1}}, {1e-10, 500});
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDiverged);
  }
}

TEST(Dare, RandomSystemsStabilizedAndResidualSmall) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 3, m = 1 + trial % 2;
    const Matrix A = random_matrix(gen, n, n, 1.2);
    const Matrix B = random_matrix(gen, n, m);
    const Matrix Q = Matrix::identity(n);
    const Matrix R = Matrix::identity(m) * 0.5;
    const auto sol = dare_solve(A, B, Q, R);
    EXPECT_LT(spectral_radius(A + B * sol.F), 1.0);
    const double tol = 1e-10;
    EXPECT_LT(dare_residual(A, B, Q, R, sol.P).max_abs(), 10 * tol * std::max(1.0, sol.P.max_abs()));
  }
}

// ---- ackermann_place ---------------------------------------------------

TEST(Ackermann, DoubleIntegratorDeadbeat) {
  const Matrix A{{1, 1}, {0, 1}};
  const Matrix b{{0}, {1}};
  const Matrix F = ackermann_place(A, b, {0.0, 0.0});
  EXPECT_NEAR(F(0, 0), -1.0, 1e-12);
  EXPECT_NEAR(F(0, 1), -2.0, 1e-12);
  const Matrix closed = A + b * F;
  // Characteristic polynomial z² ⇔ zero trace and determinant.
  EXPECT_NEAR(closed.trace(), 0.0, 1e-12);
  EXPECT_NEAR(closed(0, 0) * closed(1, 1) - closed(0, 1) * closed(1, 0), 0.0, 1e-12);
}

TEST(Ackermann, ScalarPole) {
  const Matrix F = ackermann_place(Matrix{{0.5}}, Matrix{{1}}, {0.2});
  EXPECT_NEAR(F(0, 0), -0.3, 1e-15);
}

TEST(Ackermann, OpenLoopPolesGiveZeroGain) {
  const Matrix A{{1.1, 0.3, 0.0}, {0.0, 0.7, 0.2}, {0.1, 0.0, 0.4}};
  const Matrix b{{0}, {0}, {1}};
  const Matrix F = ackermann_place(A, b, eig(A));
  EXPECT_LT(F.max_abs(), 1e-10);
}

TEST(Ackermann, ComplexPolesAndErrors) {
  const Matrix A{{1, 1}, {0, 1}};
  const Matrix b{{0}, {1}};
  const std::vector<Complex> poles{{0.5, 0.3}, {0.5, -0.3}};
  const Matrix F = ackermann_place(A, b, poles);
  EXPECT_LT(testing::multiset_distance(eig(A + b * F), poles), 1e-10);
  EXPECT_THROW(ackermann_place(A, b, {{0.5, 0.3}, {0.5, 0.3}}), Error);
  try {
    ackermann_place(Matrix{{1, 0}, {0, 2}}, Matrix{{1}, {0}}, {0.1, 0.2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUncontrollable);
  }
}

TEST(Ackermann, RoundTripThroughEigOnRandomSystems) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> pole(-0.9, 0.9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + trial % 4;
    const Matrix A = random_matrix(gen, n, n);
    const Matrix b = random_matrix(gen, n, 1);
    std::vector<Complex> poles;
    while (poles.size() < n) {
      if (n - poles.size() >= 2 && trial % 3 == 0) {
        const Complex p(pole(gen), 0.5 * pole(gen));
        poles.push_back(p);
        poles.push_back(std::conj(p));
      } else {
        poles.emplace_back(pole(gen), 0.0);
      }
    }
    const Matrix F = ackermann_place(A, b, poles);
    EXPECT_LT(testing::multiset_distance(eig(A + b * F), poles), 1e-6) << "trial " << trial;
  }
}

// ---- CP map spectral radius and Lyapunov certificate ---------------------

TEST(CpMap, ScalarAndIdentity) {
  EXPECT_NEAR(cp_map_spectral_radius(CpMap({{1.0, Matrix{{0.7}}}})), 0.49, 1e-14);
  EXPECT_NEAR(cp_map_spectral_radius(CpMap({{1.0, Matrix::identity(3)}})), 1.0, 1e-14);
  EXPECT_EQ(cp_map_spectral_radius(CpMap({{0.0, Matrix::identity(2)}})), 0.0);
}

TEST(CpMap, RejectsBadTerms) {
  EXPECT_THROW(CpMap({}), Error);
  EXPECT_THROW(CpMap({{-1.0, Matrix{{1}}}}), Error);
  EXPECT_THROW(CpMap({{1.0, Matrix{{1}}}, {1.0, Matrix::identity(2)}}), Error);
}

TEST(CpMap, ComplexDominantPairDoesNotCycle) {
  // Non-normal rotation-like matrix: plain power iteration from I oscillates.
  const Matrix M{{0.6, -0.9}, {0.5, 0.3}};
  const CpMap map({{1.0, M}});
  const double expected = std::pow(spectral_radius(M), 2);
  EXPECT_NEAR(cp_map_spectral_radius(map), expected, 1e-10);
}

TEST(CpMap, MatchesKroneckerLiftOnRandomInstances) {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> w(0.0, 1.5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + trial % 3;
    std::vector<CpTerm> terms{{1.0, random_matrix(gen, d, d)}, {w(gen), random_matrix(gen, d, d)}};
    const double oracle = kronecker_lift_radius(terms);
    const double rho = cp_map_spectral_radius(CpMap(terms));
    EXPECT_NEAR(rho, oracle, 1e-9 * std::max(1.0, oracle)) << "trial " << trial;
  }
}

TEST(Lyapunov, ScalarGeometricSeries) {
  // T(x) = 0.25 x: p = 1 / (1 − 0.25).
  const Matrix P = solve_cp_lyapunov(CpMap({{0.25, Matrix{{1}}}}), Matrix{{1}});
  EXPECT_NEAR(P(0, 0), 4.0 / 3.0, 1e-13);
}

TEST(Lyapunov, ZeroMapReturnsQ) {
  const Matrix P = solve_cp_lyapunov(CpMap({{0.0, Matrix::identity(2)}}), Matrix::identity(2));
  EXPECT_EQ(P, Matrix::identity(2));
}

TEST(Lyapunov, InfeasibleWhenRadiusAtLeastOne) {
  try {
    solve_cp_lyapunov(CpMap({{1.0, Matrix{{1.01}}}}), Matrix{{1}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInfeasible);
  }
}

TEST(Lyapunov, RandomStableMapsSatisfyFixedPoint) {
  std::mt19937_64 gen(99);
  int solved = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t d = 1 + trial % 4;
    std::vector<CpTerm> terms{{1.0, random_matrix(gen, d, d, 0.6)},
                              {0.5, random_matrix(gen, d, d, 0.6)}};
    const CpMap map(terms);
    if (cp_map_spectral_radius(map) >= 0.98) continue;
    const Matrix Q = Matrix::identity(d);
    const Matrix P = solve_cp_lyapunov(map, Q);
    EXPECT_EQ(P, P.transpose());
    EXPECT_TRUE(is_positive_definite(P));
    EXPECT_LT((P - map(P) - Q).max_abs(), 1e-9);
    EXPECT_LT((P - testing::kronecker_lyapunov(terms, Q)).max_abs(), 1e-8 * P.max_abs());
    ++solved;
  }
  EXPECT_GT(solved, 30);
}

}  // namespace
}  // namespace wcps::numerics
