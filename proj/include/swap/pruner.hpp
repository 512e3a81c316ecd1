#pragma once

// Gradual-sparsity pruning loop: per stage, a fresh gradient matrix at the
// reference weights, an OT plan between x = G w and y = G wbar, a gradient
// step with tau = 1 / (n lambda + |G|_op^2), hard thresholding to the stage's
// nonzero budget, and the reference update wbar <- w.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "swap/common.hpp"
#include "swap/ewr.hpp"
#include "swap/schedule.hpp"

namespace swapkit::pruner {

using ewr::GradientMatrix;
using ewr::WeightVector;

// Supplies the stage-t gradient matrix evaluated at the reference weights.
using GradientSource = std::function<GradientMatrix(std::size_t stage, const WeightVector& reference)>;

struct StageMetrics {
  double trainLoss = std::numeric_limits<double>::quiet_NaN();
  double testLoss = std::numeric_limits<double>::quiet_NaN();
  double accuracy = std::numeric_limits<double>::quiet_NaN();
};

// Called after each stage with the pruned weights.
using StageEvaluator = std::function<StageMetrics(const WeightVector&)>;

struct PruneOptions {
  // Gradient/IHT steps per stage; the plan is recomputed before each one.
  std::size_t innerSteps = 1;
  // Keep the original wbar as the reference instead of updating it per stage.
  bool freezeReference = false;
  // When set, only entries with mask[i] == true are subject to thresholding
  // and the schedule counts refer to those entries.
  std::optional<std::vector<bool>> prunableMask;
};

struct StageRecord {
  std::size_t stage = 0;
  std::size_t nonzeroBudget = 0;
  double sparsity = 0.0;
  StageMetrics metrics;
  std::size_t planIterations = 0;
  double planResidual = 0.0;
  bool planLogDomain = false;
  double seconds = 0.0;
};

struct PruneResult {
  WeightVector finalWeights;
  std::vector<StageRecord> perStage;
};

inline PruneResult swap_prune(const GradientSource& source, const WeightVector& wbar0,
                              const SparsitySchedule& schedule, const ewr::EwrConfig& cfg,
                              const PruneOptions& options = {}, const StageEvaluator& evaluate = {}) {
  cfg.validate();
  const auto p = static_cast<std::size_t>(wbar0.size());
  const std::size_t prunable =
      options.prunableMask ? static_cast<std::size_t>(std::count(options.prunableMask->begin(),
                                                                  options.prunableMask->end(), true))
                           : p;
  if (options.prunableMask && options.prunableMask->size() != p)
    throw DimensionError("swap_prune: prunable mask length differs from the weight count");
  if (schedule.parameters != prunable)
    throw DimensionError("swap_prune: schedule was built for " + std::to_string(schedule.parameters) +
                         " parameters, model has " + std::to_string(prunable) + " prunable");
  if (schedule.stages() == 0) throw DomainError("swap_prune: empty schedule");
  if (options.innerSteps == 0) throw DomainError("swap_prune: innerSteps must be >= 1");

  auto project = [&](const WeightVector& v, std::size_t k) {
    return options.prunableMask ? ewr::iht_project_masked(v, k, *options.prunableMask) : ewr::iht_project(v, k);
  };

  PruneResult result;
  WeightVector w = wbar0;
  WeightVector reference = wbar0;
  for (std::size_t t = 0; t < schedule.stages(); ++t) {
    const auto start = std::chrono::steady_clock::now();
    StageRecord rec;
    rec.stage = t;
    rec.nonzeroBudget = schedule.counts[t];
    rec.sparsity = schedule.fractions[t];
    try {
      const GradientMatrix G = source(t, reference);
      if (static_cast<std::size_t>(G.cols()) != p)
        throw DimensionError("gradient matrix has " + std::to_string(G.cols()) + " columns, expected " +
                             std::to_string(p));
      const auto n = static_cast<std::size_t>(G.rows());
      // tau = 1/L is the step for the sum-form LR objective; the plan-weighted
      // objective carries a 1/n mass factor, so the loop scales it back by n.
      const double tau = static_cast<double>(n) * ewr::step_size(G, n, cfg.lambda);
      const Vector y = G * reference;
      for (std::size_t s = 0; s < options.innerSteps; ++s) {
        const Vector x = G * w;
        ot::SinkhornStats stats;
        const ot::TransportPlan plan = ewr::compute_plan(x, y, cfg, &stats);
        rec.planIterations += stats.iterations;
        rec.planResidual = std::max(rec.planResidual, stats.residual);
        rec.planLogDomain = rec.planLogDomain || stats.logDomain;
        const WeightVector grad = ewr::ewr_gradient(G, w, reference, plan, cfg.lambda, cfg.gradientForm);
        w = project(w - tau * grad, rec.nonzeroBudget);
      }
    } catch (const Error& e) {
      throw Error("swap_prune: stage " + std::to_string(t) + ": " + e.what());
    }
    if (!options.freezeReference) reference = w;
    if (evaluate) rec.metrics = evaluate(w);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.perStage.push_back(rec);
  }
  result.finalWeights = w;
  return result;
}

}  // namespace swapkit::pruner
