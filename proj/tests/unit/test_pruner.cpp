#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "swap/compare.hpp"

using namespace swapkit;
using namespace swapkit::pruner;

namespace {

GradientMatrix random_matrix(std::mt19937_64& rng, int n, int p) {
  std::normal_distribution<double> nd;
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

// Sort-based top-k with the lower-index tie rule, written independently of
// iht_project.
Vector topk(const Vector& v, std::size_t k) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(v.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return std::abs(v(a)) > std::abs(v(b)); });
  Vector out = Vector::Zero(v.size());
  for (std::size_t i = 0; i < k; ++i) out(idx[i]) = v(idx[i]);
  return out;
}

// Projected gradient on 1/2 |G(w - wbar)|^2 + n lambda/2 |w - wbar|^2 with
// tau = 1 / (n lambda + |G|^2), one fixed G per stage.
struct PgTrace {
  std::vector<Vector> iterates;
};

PgTrace reference_pg(const std::vector<GradientMatrix>& Gs, const Vector& wbar0, const SparsitySchedule& s,
                     double lambda, std::size_t inner, bool freeze) {
  PgTrace tr;
  Vector w = wbar0, ref = wbar0;
  for (std::size_t t = 0; t < s.stages(); ++t) {
    const GradientMatrix& G = Gs[t];
    const double n = static_cast<double>(G.rows());
    const double tau = ewr::step_size(G, G.rows(), lambda);
    for (std::size_t k = 0; k < inner; ++k) {
      const Vector d = w - ref;
      const Vector grad = G.transpose() * (G * d) + n * lambda * d;
      w = topk(w - tau * grad, s.counts[t]);
      tr.iterates.push_back(w);
    }
    if (!freeze) ref = w;
  }
  return tr;
}

CompareTask tiny_task() {
  CompareTask task;
  task.data = model::synth_dataset(3, 240, 6, 3, 0.3);
  auto mlp = model::TinyMlp::random({6, 8, 3}, model::Activation::relu, 1);
  task.trained = model::train(mlp, task.data, 20, 0.05, 2);
  task.fisherSamples = 20;
  return task;
}

ewr::EwrConfig diag_config() {
  ewr::EwrConfig c;
  c.planSolver = ewr::PlanSolver::diagonal;
  return c;
}

}  // namespace

class LoopEquivalence : public ::testing::TestWithParam<std::tuple<std::size_t, bool>> {};

TEST_P(LoopEquivalence, DiagonalPlanTracksProjectedGradient) {
  const auto [inner, freeze] = GetParam();
  std::mt19937_64 rng(20);
  const int n = 20, p = 50;
  const auto sched = exponential_schedule(0.0, 0.9, 6, p);
  std::vector<GradientMatrix> Gs;
  for (std::size_t t = 0; t < sched.stages(); ++t) Gs.push_back(random_matrix(rng, n, p));
  const Vector wbar0 = random_vector(rng, p);
  const auto cfg = diag_config();

  std::vector<Vector> seen;
  GradientSource src = [&](std::size_t t, const WeightVector&) { return Gs[t]; };
  PruneOptions po;
  po.innerSteps = inner;
  po.freezeReference = freeze;
  // The evaluator sees the weights at the end of every stage.
  StageEvaluator ev = [&](const WeightVector& w) {
    seen.push_back(w);
    return StageMetrics{};
  };
  const auto res = swap_prune(src, wbar0, sched, cfg, po, ev);
  const auto ref = reference_pg(Gs, wbar0, sched, cfg.lambda, inner, freeze);
  ASSERT_EQ(seen.size(), sched.stages());
  for (std::size_t t = 0; t < sched.stages(); ++t)
    EXPECT_LE((seen[t] - ref.iterates[(t + 1) * inner - 1]).cwiseAbs().maxCoeff(), 1e-12) << "stage " << t;
  EXPECT_LE((res.finalWeights - ref.iterates.back()).cwiseAbs().maxCoeff(), 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Variants, LoopEquivalence,
                         ::testing::Values(std::make_tuple(std::size_t{1}, false), std::make_tuple(std::size_t{5}, false),
                                           std::make_tuple(std::size_t{5}, true), std::make_tuple(std::size_t{1}, true)));

TEST(SwapPrune, ZeroGradientPrunesSmallestMagnitude) {
  Vector w(4);
  w << 0.5, -0.1, 2.0, -1.0;
  const auto sched = explicit_schedule({3}, 4);
  GradientSource src = [](std::size_t, const WeightVector&) { return GradientMatrix::Zero(3, 4); };
  const auto res = swap_prune(src, w, sched, diag_config());
  Vector expected(4);
  expected << 0.5, 0.0, 2.0, -1.0;
  EXPECT_EQ(res.finalWeights, expected);
}

TEST(SwapPrune, FullBudgetIsFixedPointWhenGradientVanishes) {
  std::mt19937_64 rng(4);
  const Vector w = random_vector(rng, 12);
  const GradientMatrix G = random_matrix(rng, 8, 12);
  const auto sched = explicit_schedule({12}, 12);
  GradientSource src = [&](std::size_t, const WeightVector&) { return G; };
  // Diagonal plan and the printed form under Sinkhorn both vanish at w = wbar.
  EXPECT_EQ(swap_prune(src, w, sched, diag_config()).finalWeights, w);
  ewr::EwrConfig printed;
  printed.gradientForm = ewr::GradientForm::printed;
  EXPECT_LE((swap_prune(src, w, sched, printed).finalWeights - w).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(SwapPrune, SparsityContractAndRecords) {
  std::mt19937_64 rng(5);
  const int p = 40;
  const GradientMatrix G = random_matrix(rng, 10, p);
  const auto sched = exponential_schedule(0.0, 0.95, 10, p);
  GradientSource src = [&](std::size_t, const WeightVector&) { return G; };
  const auto res = swap_prune(src, random_vector(rng, p), sched, ewr::EwrConfig{});
  ASSERT_EQ(res.perStage.size(), sched.stages());
  for (std::size_t t = 0; t < sched.stages(); ++t) {
    EXPECT_EQ(res.perStage[t].stage, t);
    EXPECT_EQ(res.perStage[t].nonzeroBudget, sched.counts[t]);
    EXPECT_GT(res.perStage[t].planIterations, 0u);
    EXPECT_LE(res.perStage[t].planResidual, 1e-9);
  }
  EXPECT_LE(ewr::nonzero_count(res.finalWeights), sched.final_count());
}

TEST(SwapPrune, MaskedEntriesAreNeverPruned) {
  std::mt19937_64 rng(6);
  const int p = 10;
  const GradientMatrix G = random_matrix(rng, 6, p);
  std::vector<bool> mask(p, true);
  mask[0] = mask[3] = false;
  const Vector w = random_vector(rng, p);
  const auto sched = explicit_schedule({2}, 8);
  PruneOptions po;
  po.prunableMask = mask;
  GradientSource src = [&](std::size_t, const WeightVector&) { return G; };
  const auto res = swap_prune(src, w, sched, diag_config(), po);
  std::size_t kept = 0;
  for (int i = 0; i < p; ++i)
    if (mask[static_cast<std::size_t>(i)] && res.finalWeights(i) != 0.0) ++kept;
  EXPECT_LE(kept, 2u);
  EXPECT_NE(res.finalWeights(0), 0.0);
  EXPECT_NE(res.finalWeights(3), 0.0);
}

TEST(SwapPrune, GradientStepDescendsAtFixedPlan) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 12, p = 15;
    const GradientMatrix G = random_matrix(rng, n, p);
    const Vector wbar = random_vector(rng, p);
    const Vector w = wbar + 0.3 * random_vector(rng, p);
    ewr::EwrConfig cfg;
    const auto plan = ewr::compute_plan(G * w, G * wbar, cfg);
    const double tau = n * ewr::step_size(G, n, cfg.lambda);
    const Vector next = w - tau * ewr::ewr_gradient(G, w, wbar, plan, cfg.lambda);
    // With the plan held fixed only the quadratic part moves.
    EXPECT_LE(ewr::ewr_objective(G, next, wbar, plan, cfg.lambda, cfg.epsilon),
              ewr::ewr_objective(G, w, wbar, plan, cfg.lambda, cfg.epsilon) + 1e-12);
  }
}

TEST(SwapPrune, Errors) {
  const Vector w = Vector::Ones(5);
  GradientSource ok = [](std::size_t, const WeightVector&) { return GradientMatrix::Ones(3, 5); };
  EXPECT_THROW(swap_prune(ok, w, explicit_schedule({3}, 6), diag_config()), DimensionError);
  GradientSource wrong = [](std::size_t, const WeightVector&) { return GradientMatrix::Ones(3, 4); };
  EXPECT_THROW(swap_prune(wrong, w, explicit_schedule({3}, 5), diag_config()), Error);
  PruneOptions zero;
  zero.innerSteps = 0;
  EXPECT_THROW(swap_prune(ok, w, explicit_schedule({3}, 5), diag_config(), zero), DomainError);
  GradientSource failing = [](std::size_t t, const WeightVector&) -> GradientMatrix {
    if (t == 1) throw DomainError("boom");
    return GradientMatrix::Ones(3, 5);
  };
  try {
    swap_prune(failing, w, explicit_schedule({4, 3}, 5), diag_config());
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("stage 1"), std::string::npos);
  }
}

TEST(Compare, DiffPercentFormula) {
  EXPECT_NEAR(diff_percent(2.86, 2.74), 4.195804195804196, 1e-12);
  EXPECT_EQ(diff_percent(0.0, 0.0), 0.0);
  EXPECT_TRUE(std::isnan(diff_percent(0.0, 1.0)));
}

TEST(Compare, ConfidenceHalfWidth) {
  EXPECT_EQ(confidence_half_width({1.0}, 0.9), 0.0);
  // t_{0.95, 3} = 2.353363434801823; sd of {1,2,3,4} = 1.2909944487358056
  EXPECT_NEAR(confidence_half_width({1, 2, 3, 4}, 0.9), 2.353363434801823 * 1.2909944487358056 / 2.0, 1e-9);
}

TEST(Compare, IdenticalConfigsGiveZeroDifference) {
  const auto task = tiny_task();
  const auto sched = exponential_schedule(0.0, 0.9, 4, task.prunable_count());
  const model::NoiseSpec noise{0.25, 2.0, 11};
  const auto rep = compare_lr_ewr(task, sched, diag_config(), diag_config(), {0, 1, 2}, noise);
  ASSERT_EQ(rep.rows.size(), 15u);
  for (const auto& r : rep.rows) EXPECT_EQ(r.diffPercent, 0.0);
  for (const auto& a : rep.aggregate) EXPECT_EQ(a.lrLoss, a.ewrLoss);
}

TEST(Compare, ThreadCountDoesNotChangeResults) {
  const auto task = tiny_task();
  const auto sched = exponential_schedule(0.0, 0.9, 3, task.prunable_count());
  const model::NoiseSpec noise{0.25, 2.0, 11};
  CompareOptions one, three;
  three.threads = 3;
  one.innerSteps = three.innerSteps = 3;
  const auto a = compare_lr_ewr(task, sched, diag_config(), ewr::EwrConfig{}, {0, 1, 2, 3}, noise, one);
  const auto b = compare_lr_ewr(task, sched, diag_config(), ewr::EwrConfig{}, {0, 1, 2, 3}, noise, three);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].seed, b.rows[i].seed);
    EXPECT_EQ(a.rows[i].lrLoss, b.rows[i].lrLoss);
    EXPECT_EQ(a.rows[i].ewrLoss, b.rows[i].ewrLoss);
  }
}

TEST(Compare, BiasesStayWhenExcluded) {
  auto task = tiny_task();
  task.pruneBiases = false;
  const auto sched = exponential_schedule(0.0, 0.9, 3, task.prunable_count());
  PruneOptions po;
  po.prunableMask = task.prunable_mask();
  const auto res = swap_prune(make_gradient_source(task, 0, {}), task.trained.weights(), sched, diag_config(), po);
  const auto mask = task.trained.weight_mask();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const auto j = static_cast<Eigen::Index>(i);
    if (!mask[i]) {
      EXPECT_EQ(res.finalWeights(j), task.trained.weights()(j));
    }
  }
}

TEST(Compare, Errors) {
  const auto task = tiny_task();
  const auto sched = exponential_schedule(0.0, 0.5, 2, task.prunable_count());
  EXPECT_THROW(compare_lr_ewr(task, sched, diag_config(), diag_config(), {}, {}), ConfigError);
  EXPECT_THROW(compare_lr_ewr(task, sched, ewr::EwrConfig{}, diag_config(), {0}, {}), ConfigError);
  const auto bad = exponential_schedule(0.0, 0.5, 2, task.prunable_count() + 1);
  const auto rep = compare_lr_ewr(task, bad, diag_config(), diag_config(), {0, 1}, {});
  EXPECT_EQ(rep.failures.size(), 2u);
  EXPECT_TRUE(rep.rows.empty());
}

TEST(Sweep, EpsilonMapping) {
  ewr::EwrConfig base;
  EXPECT_EQ(config_for_epsilon(base, std::numeric_limits<double>::infinity()).planSolver, ewr::PlanSolver::uniform);
  EXPECT_EQ(config_for_epsilon(base, 0.0).planSolver, ewr::PlanSolver::diagonal);
  const auto c = config_for_epsilon(base, 2.5);
  EXPECT_EQ(c.planSolver, ewr::PlanSolver::sinkhorn);
  EXPECT_EQ(c.epsilon, 2.5);
}
