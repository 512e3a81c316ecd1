#pragma once

// LR-vs-EWR comparison runs on a trained model: both pipelines see the same
// Fisher batches and the same injected noise draws per seed and stage, and
// test loss/accuracy are recorded after every pruning stage.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "swap/common.hpp"
#include "swap/model.hpp"
#include "swap/pruner.hpp"

namespace swapkit::pruner {

struct CompareTask {
  model::TinyMlp trained;
  model::Dataset data;
  std::size_t fisherSamples = 100;
  bool pruneBiases = true;

  std::vector<bool> prunable_mask() const {
    return pruneBiases ? std::vector<bool>(trained.parameter_count(), true) : trained.weight_mask();
  }
  std::size_t prunable_count() const {
    const auto m = prunable_mask();
    return static_cast<std::size_t>(std::count(m.begin(), m.end(), true));
  }
};

struct CompareOptions {
  std::size_t innerSteps = 1;
  bool freezeReference = false;
  double confidence = 0.9;
  std::size_t threads = 1;
};

struct CompareRow {
  std::uint64_t seed = 0;
  std::size_t stage = 0;
  double sparsity = 0.0;
  double lrLoss = 0.0;
  double ewrLoss = 0.0;
  double diffPercent = 0.0;
  double lrAccuracy = 0.0;
  double ewrAccuracy = 0.0;
};

struct CompareAggregate {
  double sparsity = 0.0;
  double lrLoss = 0.0;
  double lrCi = 0.0;
  double ewrLoss = 0.0;
  double ewrCi = 0.0;
  double diffPercent = 0.0;
  double lrAccuracy = 0.0;
  double ewrAccuracy = 0.0;
  std::size_t seeds = 0;
};

struct SeedFailure {
  std::uint64_t seed = 0;
  std::string message;
};

struct CompareReport {
  double confidence = 0.9;
  std::vector<CompareRow> rows;            // seed-major, stage-minor
  std::vector<CompareAggregate> aggregate;  // one per stage
  std::vector<SeedFailure> failures;
};

// 100 (LR - EWR) / LR
inline double diff_percent(double lrLoss, double ewrLoss) {
  if (lrLoss > 0.0) return 100.0 * (lrLoss - ewrLoss) / lrLoss;
  return lrLoss == ewrLoss ? 0.0 : std::numeric_limits<double>::quiet_NaN();
}

// Student-t half-width of the mean's confidence interval.
inline double confidence_half_width(const std::vector<double>& values, double level) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  const boost::math::students_t dist(static_cast<double>(n - 1));
  const double q = boost::math::quantile(dist, 0.5 + 0.5 * level);
  return q * sd / std::sqrt(static_cast<double>(n));
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// splitmix64 finalizer, used to derive independent sub-seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stage-t gradient source for one seed: n training samples drawn with
// replacement, per-sample gradients at the reference weights, then noise.
// Batch draws depend only on (seed, stage); noise draws only on
// (noise.calSeed, seed, stage).
inline GradientSource make_gradient_source(const CompareTask& task, std::uint64_t seed, const model::NoiseSpec& noise) {
  return [&task, seed, noise](std::size_t stage, const WeightVector& reference) {
    std::mt19937_64 rng(mix_seed(mix_seed(seed, 0xba7c4), stage));
    const std::size_t N = task.data.train.size();
    std::uniform_int_distribution<std::size_t> pick(0, N - 1);
    const auto d = static_cast<Eigen::Index>(task.data.dim());
    RowMatrix X(static_cast<Eigen::Index>(task.fisherSamples), d);
    std::vector<std::size_t> y(task.fisherSamples);
    for (std::size_t i = 0; i < task.fisherSamples; ++i) {
      const std::size_t r = pick(rng);
      X.row(static_cast<Eigen::Index>(i)) = task.data.train.features.row(static_cast<Eigen::Index>(r));
      y[i] = task.data.train.labels[r];
    }
    model::TinyMlp mlp = task.trained;
    mlp.set_weights(reference);
    GradientMatrix G = model::per_sample_gradients(mlp, X, y);
    if (noise.fraction > 0.0) {
      model::NoiseSpec ns = noise;
      ns.calSeed = mix_seed(mix_seed(noise.calSeed, seed), stage);
      G = model::inject_noise(G, ns);
    }
    return G;
  };
}

inline StageEvaluator make_test_evaluator(const CompareTask& task) {
  return [&task](const WeightVector& w) {
    model::TinyMlp mlp = task.trained;
    mlp.set_weights(w);
    const auto test = model::evaluate(mlp, task.data.test);
    StageMetrics m;
    m.testLoss = test.loss;
    m.accuracy = test.accuracy;
    return m;
  };
}

// Runs one pruning pipeline for one seed and returns per-stage test metrics.
inline std::vector<StageMetrics> run_pipeline(const CompareTask& task, const SparsitySchedule& schedule,
                                              const ewr::EwrConfig& cfg, std::uint64_t seed,
                                              const model::NoiseSpec& noise, const CompareOptions& options) {
  PruneOptions po;
  po.innerSteps = options.innerSteps;
  po.freezeReference = options.freezeReference;
  if (!task.pruneBiases) po.prunableMask = task.prunable_mask();
  const auto result = swap_prune(make_gradient_source(task, seed, noise), task.trained.weights(), schedule, cfg, po,
                                 make_test_evaluator(task));
  std::vector<StageMetrics> out;
  for (const auto& r : result.perStage) out.push_back(r.metrics);
  return out;
}

namespace detail {

inline void check_compare_inputs(const std::vector<std::uint64_t>& seeds, const CompareOptions& options) {
  if (seeds.empty()) throw ConfigError("compare: empty seed list");
  if (!(options.confidence > 0.0 && options.confidence < 1.0)) throw ConfigError("compare: confidence must lie in (0, 1)");
}

}  // namespace detail

inline CompareReport compare_lr_ewr(const CompareTask& task, const SparsitySchedule& schedule,
                                    const ewr::EwrConfig& cfgLR, const ewr::EwrConfig& cfgEWR,
                                    const std::vector<std::uint64_t>& seeds, const model::NoiseSpec& noise,
                                    const CompareOptions& options = {}) {
  detail::check_compare_inputs(seeds, options);
  if (cfgLR.planSolver != ewr::PlanSolver::diagonal) throw ConfigError("compare: the LR pipeline needs the diagonal plan");
  cfgLR.validate();
  cfgEWR.validate();
  noise.validate();

  struct SeedResult {
    std::vector<StageMetrics> lr, ewr;
    std::string error;
  };
  std::vector<SeedResult> results(seeds.size());
  parallel_for(seeds.size(), options.threads, [&](std::size_t i) {
    try {
      results[i].lr = run_pipeline(task, schedule, cfgLR, seeds[i], noise, options);
      results[i].ewr = run_pipeline(task, schedule, cfgEWR, seeds[i], noise, options);
    } catch (const std::exception& e) {
      results[i].error = e.what();
    }
  });

  CompareReport report;
  report.confidence = options.confidence;
  const std::size_t stages = schedule.stages();
  std::vector<std::vector<double>> lrL(stages), ewrL(stages), lrA(stages), ewrA(stages);
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto& r = results[i];
    if (!r.error.empty()) {
      report.failures.push_back({seeds[i], r.error});
      continue;
    }
    if (r.lr.size() != stages || r.ewr.size() != stages) throw Error("compare: mismatched schedule lengths");
    for (std::size_t t = 0; t < stages; ++t) {
      CompareRow row;
      row.seed = seeds[i];
      row.stage = t;
      row.sparsity = schedule.fractions[t];
      row.lrLoss = r.lr[t].testLoss;
      row.ewrLoss = r.ewr[t].testLoss;
      row.diffPercent = diff_percent(row.lrLoss, row.ewrLoss);
      row.lrAccuracy = r.lr[t].accuracy;
      row.ewrAccuracy = r.ewr[t].accuracy;
      report.rows.push_back(row);
      lrL[t].push_back(row.lrLoss);
      ewrL[t].push_back(row.ewrLoss);
      lrA[t].push_back(row.lrAccuracy);
      ewrA[t].push_back(row.ewrAccuracy);
    }
  }
  for (std::size_t t = 0; t < stages; ++t) {
    CompareAggregate a;
    a.sparsity = schedule.fractions[t];
    a.seeds = lrL[t].size();
    a.lrLoss = mean_of(lrL[t]);
    a.ewrLoss = mean_of(ewrL[t]);
    a.lrCi = confidence_half_width(lrL[t], options.confidence);
    a.ewrCi = confidence_half_width(ewrL[t], options.confidence);
    a.diffPercent = diff_percent(a.lrLoss, a.ewrLoss);
    a.lrAccuracy = mean_of(lrA[t]);
    a.ewrAccuracy = mean_of(ewrA[t]);
    report.aggregate.push_back(a);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Epsilon sweep

struct SweepRow {
  double epsilon = 0.0;  // +inf for the uniform plan
  double sparsity = 0.0;
  double ewrLoss = 0.0;
  double ci = 0.0;
};

struct SweepReport {
  std::vector<double> epsilons;
  std::vector<SweepRow> rows;  // epsilon-major, stage-minor
  // perSeed[e][s][t] = test loss at epsilon e, seed s, stage t
  std::vector<std::vector<std::vector<double>>> perSeed;
  CompareReport lr;  // LR reference (diagonal plan) on the same seeds
  std::vector<SeedFailure> failures;
};

// Maps a sweep epsilon onto a concrete EWR configuration: 0 -> diagonal
// plan, +inf -> uniform plan, otherwise the base solver at that epsilon.
inline ewr::EwrConfig config_for_epsilon(const ewr::EwrConfig& base, double eps) {
  ewr::EwrConfig c = base;
  if (std::isinf(eps) && eps > 0.0) {
    c.planSolver = ewr::PlanSolver::uniform;
  } else if (eps == 0.0) {
    c.planSolver = ewr::PlanSolver::diagonal;
    c.epsilon = 0.0;
  } else {
    c.epsilon = eps;
    if (c.planSolver == ewr::PlanSolver::diagonal || c.planSolver == ewr::PlanSolver::uniform)
      c.planSolver = ewr::PlanSolver::sinkhorn;
  }
  return c;
}

inline SweepReport sweep_epsilon(const CompareTask& task, const SparsitySchedule& schedule, const ewr::EwrConfig& cfgLR,
                                 const ewr::EwrConfig& cfgEWR, const std::vector<std::uint64_t>& seeds,
                                 const model::NoiseSpec& noise, const std::vector<double>& epsilons,
                                 const CompareOptions& options = {}) {
  detail::check_compare_inputs(seeds, options);
  if (epsilons.empty()) throw ConfigError("sweep: empty epsilon list");
  for (double e : epsilons)
    if (!(e >= 0.0)) throw ConfigError("sweep: epsilon values must be >= 0 or inf");
  noise.validate();

  SweepReport rep;
  rep.epsilons = epsilons;
  rep.lr = compare_lr_ewr(task, schedule, cfgLR, cfgLR, seeds, noise, options);
  rep.failures = rep.lr.failures;

  const std::size_t E = epsilons.size(), S = seeds.size(), T = schedule.stages();
  std::vector<std::vector<std::vector<StageMetrics>>> runs(E, std::vector<std::vector<StageMetrics>>(S));
  std::vector<std::string> errors(E * S);
  parallel_for(E * S, options.threads, [&](std::size_t job) {
    const std::size_t e = job / S, s = job % S;
    try {
      runs[e][s] = run_pipeline(task, schedule, config_for_epsilon(cfgEWR, epsilons[e]), seeds[s], noise, options);
    } catch (const std::exception& ex) {
      errors[job] = ex.what();
    }
  });
  rep.perSeed.assign(E, std::vector<std::vector<double>>(S));
  for (std::size_t e = 0; e < E; ++e) {
    std::vector<std::vector<double>> byStage(T);
    for (std::size_t s = 0; s < S; ++s) {
      if (!errors[e * S + s].empty()) {
        rep.failures.push_back({seeds[s], "epsilon " + std::to_string(epsilons[e]) + ": " + errors[e * S + s]});
        continue;
      }
      for (std::size_t t = 0; t < T; ++t) {
        rep.perSeed[e][s].push_back(runs[e][s][t].testLoss);
        byStage[t].push_back(runs[e][s][t].testLoss);
      }
    }
    for (std::size_t t = 0; t < T; ++t)
      rep.rows.push_back({epsilons[e], schedule.fractions[t], mean_of(byStage[t]),
                          confidence_half_width(byStage[t], options.confidence)});
  }
  return rep;
}

}  // namespace swapkit::pruner
