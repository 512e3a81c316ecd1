#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "swap/ewr.hpp"

using namespace swapkit;
using namespace swapkit::ewr;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

GradientMatrix random_matrix(std::mt19937_64& rng, int n, int p, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  GradientMatrix G(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) G(i, j) = nd(rng);
  return G;
}

Vector random_vector(std::mt19937_64& rng, int p) {
  std::normal_distribution<double> nd;
  Vector v(p);
  for (int j = 0; j < p; ++j) v(j) = nd(rng);
  return v;
}

// Random feasible plan with uniform marginals: a mixture of permutation
// matrices scaled by 1/n (Birkhoff).
ot::TransportPlan random_plan(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> ud;
  Matrix P = Matrix::Zero(n, n);
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double total = 0.0;
  for (int k = 0; k < 4; ++k) {
    std::shuffle(perm.begin(), perm.end(), rng);
    const double a = ud(rng) + 0.05;
    total += a;
    for (int i = 0; i < n; ++i) P(i, perm[static_cast<std::size_t>(i)]) += a;
  }
  P /= total * n;
  return {P, ot::uniform_marginal(static_cast<std::size_t>(n)), ot::uniform_marginal(static_cast<std::size_t>(n))};
}

// Pi-fixed part of the objective, halved: the function ewr_gradient differentiates.
double half_objective(const GradientMatrix& G, const Vector& w, const Vector& wbar, const ot::TransportPlan& P,
                      double lambda) {
  const Vector x = G * w, y = G * wbar;
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    for (Eigen::Index j = 0; j < y.size(); ++j) s += P.values(i, j) * (x(i) - y(j)) * (x(i) - y(j));
  return 0.5 * s + 0.5 * lambda * (w - wbar).squaredNorm();
}

}  // namespace

TEST(LrObjective, Examples) {
  const GradientMatrix I = GradientMatrix::Identity(2, 2);
  EXPECT_EQ(lr_objective(I, vec({1, 1}), vec({1, 1}), 0.3), 0.0);
  EXPECT_DOUBLE_EQ(lr_objective(I, vec({0, 1}), vec({1, 1}), 0.0), 1.0);
  EXPECT_DOUBLE_EQ(lr_objective(I, vec({0, 1}), vec({1, 1}), 0.01), 1.02);
  EXPECT_THROW(lr_objective(I, vec({0, 1, 2}), vec({1, 1}), 0.0), DimensionError);
}

TEST(EwrObjective, Examples) {
  const GradientMatrix I = GradientMatrix::Identity(2, 2);
  const auto D = ot::fixed_plan(ot::FixedPlanKind::diagonal, 2);
  EXPECT_EQ(ewr_objective(I, vec({1, 1}), vec({1, 1}), D, 0.01, 0.0), 0.0);
  EXPECT_NEAR(ewr_objective(I, vec({0, 1}), vec({1, 1}), D, 0.01, 0.0), 0.51, 1e-15);
}

TEST(EwrObjective, ReducesToLrWithDiagonalPlan) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    const int n = 3 + t % 7, p = 2 + t % 5;
    const auto G = random_matrix(rng, n, p);
    const Vector w = random_vector(rng, p), wbar = random_vector(rng, p);
    const double lambda = 0.05;
    const auto D = ot::fixed_plan(ot::FixedPlanKind::diagonal, static_cast<std::size_t>(n));
    const double lhs = ewr_objective(G, w, wbar, D, lambda, 0.0);
    const double rhs = lr_objective(G, w, wbar, lambda) / n;
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::abs(rhs));
  }
}

TEST(EwrObjective, RejectsInfeasiblePlan) {
  auto P = ot::fixed_plan(ot::FixedPlanKind::diagonal, 2);
  P.values(0, 0) = 0.9;
  EXPECT_THROW(ewr_objective(GradientMatrix::Identity(2, 2), vec({0, 1}), vec({1, 1}), P, 0.0, 0.0), DomainError);
}

TEST(EwrGradient, Examples) {
  const GradientMatrix I = GradientMatrix::Identity(2, 2);
  const auto D = ot::fixed_plan(ot::FixedPlanKind::diagonal, 2);
  EXPECT_EQ(ewr_gradient(I, vec({1, 1}), vec({1, 1}), D, 0.01), Vector::Zero(2));
  const Vector g = ewr_gradient(I, vec({0, 1}), vec({1, 1}), D, 0.01);
  EXPECT_NEAR(g(0), -0.51, 1e-15);
  EXPECT_NEAR(g(1), 0.0, 1e-15);
}

TEST(EwrGradient, FormsAgreeForDiagonalPlan) {
  std::mt19937_64 rng(6);
  const auto G = random_matrix(rng, 6, 4);
  const Vector w = random_vector(rng, 4), wbar = random_vector(rng, 4);
  const auto D = ot::fixed_plan(ot::FixedPlanKind::diagonal, 6);
  const Vector a = ewr_gradient(G, w, wbar, D, 0.1, GradientForm::exact);
  const Vector b = ewr_gradient(G, w, wbar, D, 0.1, GradientForm::printed);
  EXPECT_LE((a - b).norm(), 1e-14 * a.norm());
}

TEST(EwrGradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  const double h = 1e-6;
  for (int t = 0; t < 100; ++t) {
    const int n = 2 + t % 19, p = 1 + (t * 7) % 20;
    const auto G = random_matrix(rng, n, p);
    const Vector w = random_vector(rng, p), wbar = random_vector(rng, p);
    const auto P = random_plan(rng, n);
    const double lambda = 0.01 * (1 + t % 3);
    const Vector g = ewr_gradient(G, w, wbar, P, lambda);
    Vector fd(p);
    for (int j = 0; j < p; ++j) {
      Vector a = w, b = w;
      a(j) += h;
      b(j) -= h;
      fd(j) = (half_objective(G, a, wbar, P, lambda) - half_objective(G, b, wbar, P, lambda)) / (2 * h);
    }
    EXPECT_LE((g - fd).norm(), 1e-5 * std::max(1.0, fd.norm())) << "instance " << t;
  }
}

TEST(EwrGradient, LipschitzBound) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 50; ++t) {
    const int n = 2 + t % 10, p = 1 + t % 8;
    const auto G = random_matrix(rng, n, p);
    const Vector wbar = random_vector(rng, p), w1 = random_vector(rng, p), w2 = random_vector(rng, p);
    const auto P = random_plan(rng, n);
    const double lambda = 0.01;
    // The full-objective derivative is twice ewr_gradient.
    const Vector d = 2.0 * (ewr_gradient(G, w1, wbar, P, lambda) - ewr_gradient(G, w2, wbar, P, lambda));
    const double s = op_norm(G);
    EXPECT_LE(d.norm(), (n * lambda + s * s) * (w1 - w2).norm() + 1e-8);
  }
}

TEST(OpNorm, Examples) {
  EXPECT_NEAR(op_norm(GradientMatrix::Identity(2, 2)), 1.0, 1e-12);
  GradientMatrix D = GradientMatrix::Zero(2, 2);
  D(0, 0) = 3;
  D(1, 1) = 1;
  EXPECT_NEAR(op_norm(D), 3.0, 1e-9);
  EXPECT_EQ(op_norm(GradientMatrix::Zero(3, 2)), 0.0);
}

TEST(OpNorm, MatchesSvd) {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 20; ++t) {
    const auto G = random_matrix(rng, 6, 4);
    const double s = Eigen::JacobiSVD<Matrix>(Matrix(G)).singularValues()(0);
    EXPECT_NEAR(op_norm(G), s, 1e-7 * s);
  }
}

TEST(StepSize, Examples) {
  EXPECT_NEAR(step_size(GradientMatrix::Identity(2, 2), 2, 0.01), 1.0 / 1.02, 1e-12);
  EXPECT_NEAR(step_size(GradientMatrix::Identity(2, 2), 2, 0.0), 1.0, 1e-12);
  GradientMatrix D = GradientMatrix::Zero(2, 2);
  D(0, 0) = 3;
  D(1, 1) = 1;
  EXPECT_NEAR(step_size(D, 2, 0.5), 0.1, 1e-10);
  EXPECT_THROW(step_size(GradientMatrix::Zero(2, 2), 2, 0.0), DomainError);
}

TEST(Iht, Examples) {
  EXPECT_EQ(iht_project(vec({3, -5, 1}), 2), vec({3, -5, 0}));
  EXPECT_EQ(iht_project(vec({-2, 2, 0}), 1), vec({-2, 0, 0}));
  const Vector w = vec({0.1, -0.4, 7});
  EXPECT_EQ(iht_project(w, 3), w);
  EXPECT_THROW(iht_project(w, 4), DimensionError);
}

TEST(Iht, Idempotent) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 30; ++t) {
    const Vector w = random_vector(rng, 15);
    const Vector a = iht_project(w, static_cast<std::size_t>(t % 16));
    EXPECT_EQ(iht_project(a, static_cast<std::size_t>(t % 16)), a);
  }
}

TEST(Iht, BruteForceOptimal) {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> small(-3, 3);
  for (int t = 0; t < 50; ++t) {
    const int p = 1 + t % 8;
    Vector w(p);
    for (int j = 0; j < p; ++j) w(j) = small(rng);  // integer values force ties
    const auto k = static_cast<std::size_t>(t % (p + 1));
    const Vector a = iht_project(w, k);
    EXPECT_LE(nonzero_count(a), k);
    const double err = (w - a).squaredNorm();
    for (int mask = 0; mask < (1 << p); ++mask) {
      if (static_cast<std::size_t>(__builtin_popcount(static_cast<unsigned>(mask))) > k) continue;
      double e = 0.0;
      for (int j = 0; j < p; ++j)
        if (!(mask >> j & 1)) e += w(j) * w(j);
      EXPECT_LE(err, e + 1e-15);
    }
  }
}

TEST(Iht, MaskedLeavesOthersAlone) {
  const Vector w = vec({5, 0.1, -3, 0.2});
  const std::vector<bool> mask{true, false, true, false};
  EXPECT_EQ(iht_project_masked(w, 1, mask), vec({5, 0.1, 0, 0.2}));
}

TEST(NeighborhoodAverage, ExtremePlans) {
  std::mt19937_64 rng(14);
  const auto G = random_matrix(rng, 5, 3);
  EXPECT_LE((neighborhood_average(G, ot::fixed_plan(ot::FixedPlanKind::diagonal, 5)) - G).norm(), 1e-15);
  const GradientMatrix U = neighborhood_average(G, ot::fixed_plan(ot::FixedPlanKind::uniform, 5));
  const Eigen::RowVectorXd mean = G.colwise().mean();
  for (int i = 0; i < 5; ++i) EXPECT_LE((U.row(i) - mean).norm(), 1e-14);
}

TEST(NeighborhoodAverage, TraceReduction) {
  std::mt19937_64 rng(15);
  auto trace_cov = [](const GradientMatrix& M) {
    const GradientMatrix c = M.rowwise() - M.colwise().mean();
    return c.squaredNorm() / static_cast<double>(M.rows() - 1);
  };
  for (int t = 0; t < 50; ++t) {
    const auto G = random_matrix(rng, 50, 3);
    const auto P = random_plan(rng, 50);
    EXPECT_LE(trace_cov(neighborhood_average(G, P)), trace_cov(G) + 1e-9);
  }
}

TEST(NeighborhoodAverage, RejectsZeroRow) {
  ot::TransportPlan P{Matrix::Zero(2, 2), ot::uniform_marginal(2), ot::uniform_marginal(2)};
  P.values(1, 1) = 1.0;
  EXPECT_THROW(neighborhood_average(GradientMatrix::Identity(2, 2), P), DomainError);
}

TEST(EwrConfig, Validation) {
  EwrConfig c;
  EXPECT_NO_THROW(c.validate());
  c.lambda = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.epsilon = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.planSolver = PlanSolver::diagonal;
  EXPECT_NO_THROW(c.validate());
}
