#pragma once

// Sparse entropic Wasserstein regression: objectives, gradient, step size,
// hard-thresholding projection and plan-weighted gradient averaging.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "swap/common.hpp"
#include "swap/ot.hpp"

namespace swapkit::ewr {

// Rows are per-sample loss gradients at the reference weights.
using GradientMatrix = RowMatrix;
using WeightVector = Vector;

inline std::size_t nonzero_count(const WeightVector& w) {
  return static_cast<std::size_t>((w.array() != 0.0).count());
}

enum class PlanSolver { sinkhorn, closed_form, diagonal, uniform };

// Which form of the weight gradient the pruning step uses.
//   exact:   G^T (diag(rowsum Pi) G w - Pi G wbar) + lambda (w - wbar)
//   printed: G^T (Pi (G w - G wbar)) + lambda (w - wbar)
// Both are half the derivative of the Pi-fixed objective when Pi is
// diagonal; only `exact` is the derivative for a general plan.
enum class GradientForm { exact, printed };

struct EwrConfig {
  double lambda = 0.01;
  double epsilon = 1.0;
  PlanSolver planSolver = PlanSolver::sinkhorn;
  double sinkhornTol = 1e-9;
  std::size_t maxIter = 10000;
  std::uint64_t seed = 0;
  GradientForm gradientForm = GradientForm::exact;
  ot::CrossCovariance crossCovariance = ot::CrossCovariance::shifted;

  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
    if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
    if ((planSolver == PlanSolver::sinkhorn || planSolver == PlanSolver::closed_form) && !(epsilon > 0.0))
      throw ConfigError("epsilon must be > 0 for the sinkhorn and closed-form plan solvers");
    if (!(sinkhornTol > 0.0)) throw ConfigError("sinkhornTol must be > 0");
    if (maxIter == 0) throw ConfigError("maxIter must be >= 1");
  }
};

namespace detail {
inline void check_dims(const GradientMatrix& G, const WeightVector& w, const WeightVector& wbar, const char* who) {
  swapkit::detail::require(G.rows() >= 1 && G.cols() >= 1, std::string(who) + ": empty gradient matrix");
  swapkit::detail::require(w.size() == G.cols() && wbar.size() == G.cols(),
                        std::string(who) + ": weight length differs from gradient columns");
}

inline constexpr double kFeasibilityTol = 1e-6;

inline void check_feasible(const ot::TransportPlan& plan, Eigen::Index n, const char* who) {
  ot::validate_plan(plan, n, who);
  if (plan.marginal_residual() > kFeasibilityTol)
    throw DomainError(std::string(who) + ": transport plan violates its marginals");
}
}  // namespace detail

// sum_i (g_i^T w - g_i^T wbar)^2 + n lambda |w - wbar|^2
inline double lr_objective(const GradientMatrix& G, const WeightVector& w, const WeightVector& wbar,
                           double lambda) {
  detail::check_dims(G, w, wbar, "lr_objective");
  const Vector delta = w - wbar;
  const Vector r = G * delta;
  return r.squaredNorm() + static_cast<double>(G.rows()) * lambda * delta.squaredNorm();
}

// sum_ij (x_i - y_j)^2 pi_ij + eps KL(Pi | mu nu^T) + lambda |w - wbar|^2,
// with x = G w and y = G wbar.
inline double ewr_objective(const GradientMatrix& G, const WeightVector& w, const WeightVector& wbar,
                            const ot::TransportPlan& plan, double lambda, double eps) {
  detail::check_dims(G, w, wbar, "ewr_objective");
  detail::check_feasible(plan, G.rows(), "ewr_objective");
  const Vector x = G * w;
  const Vector y = G * wbar;
  const ot::CostMatrix C = ot::build_cost_matrix(x, y);
  return ot::ot_objective(C, plan, eps) + lambda * (w - wbar).squaredNorm();
}

inline WeightVector ewr_gradient(const GradientMatrix& G, const WeightVector& w, const WeightVector& wbar,
                                 const ot::TransportPlan& plan, double lambda,
                                 GradientForm form = GradientForm::exact) {
  detail::check_dims(G, w, wbar, "ewr_gradient");
  detail::check_feasible(plan, G.rows(), "ewr_gradient");
  const Vector x = G * w;
  const Vector y = G * wbar;
  Vector r;
  if (form == GradientForm::exact)
    r = plan.values.rowwise().sum().cwiseProduct(x) - plan.values * y;
  else
    r = plan.values * (x - y);
  return G.transpose() * r + lambda * (w - wbar);
}

// Largest singular value by power iteration on G^T G.
inline double op_norm(const GradientMatrix& G, double relTol = 1e-9, std::size_t maxIter = 10000) {
  if (G.size() == 0 || G.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> nd;
  Vector v(G.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = nd(rng);
  v.normalize();
  double prev = 0.0;
  for (std::size_t it = 0; it < maxIter; ++it) {
    const Vector Gv = G * v;
    const double rayleigh = Gv.squaredNorm();
    Vector next = G.transpose() * Gv;
    const double norm = next.norm();
    if (norm == 0.0) return 0.0;
    v = next / norm;
    if (it > 0 && std::abs(rayleigh - prev) <= relTol * rayleigh) return std::sqrt(rayleigh);
    prev = rayleigh;
  }
  return std::sqrt((G * v).squaredNorm());
}

// tau = 1 / (n lambda + |G|_op^2)
inline double step_size(const GradientMatrix& G, std::size_t n, double lambda) {
  const double s = op_norm(G);
  const double L = static_cast<double>(n) * lambda + s * s;
  if (!(L > 0.0)) throw DomainError("step_size: Lipschitz constant is zero (zero G and lambda)");
  return 1.0 / L;
}

// Keeps the k largest-magnitude entries; ties go to the lower index.
inline WeightVector iht_project(const WeightVector& w, std::size_t k) {
  const auto p = static_cast<std::size_t>(w.size());
  if (k > p) throw DimensionError("iht_project: k exceeds the parameter count");
  if (k == p) return w;
  std::vector<Eigen::Index> idx(p);
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                   [&](Eigen::Index a, Eigen::Index b) {
                     const double fa = std::abs(w(a)), fb = std::abs(w(b));
                     return fa != fb ? fa > fb : a < b;
                   });
  WeightVector out = WeightVector::Zero(w.size());
  for (std::size_t i = 0; i < k; ++i) out(idx[i]) = w(idx[i]);
  return out;
}

// As iht_project, restricted to entries where mask is true; the rest pass
// through untouched. k counts retained entries among the masked ones.
inline WeightVector iht_project_masked(const WeightVector& w, std::size_t k, const std::vector<bool>& mask) {
  swapkit::detail::require(mask.size() == static_cast<std::size_t>(w.size()), "iht_project_masked: mask length");
  std::vector<Eigen::Index> sel;
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (mask[static_cast<std::size_t>(i)]) sel.push_back(i);
  Vector sub(static_cast<Eigen::Index>(sel.size()));
  for (std::size_t i = 0; i < sel.size(); ++i) sub(static_cast<Eigen::Index>(i)) = w(sel[i]);
  const Vector kept = iht_project(sub, k);
  WeightVector out = w;
  for (std::size_t i = 0; i < sel.size(); ++i) out(sel[i]) = kept(static_cast<Eigen::Index>(i));
  return out;
}

// Row i of the result is sum_j (pi_ij / sum_j pi_ij) G_j.
inline GradientMatrix neighborhood_average(const GradientMatrix& G, const ot::TransportPlan& plan) {
  swapkit::detail::require(plan.values.rows() == G.rows() && plan.values.cols() == G.rows(),
                        "neighborhood_average: plan size differs from sample count");
  const Vector mass = plan.values.rowwise().sum();
  if ((mass.array() <= 0.0).any()) throw DomainError("neighborhood_average: plan has a zero-mass row");
  const Matrix weights = mass.cwiseInverse().asDiagonal() * plan.values;
  return weights * G;
}

// Plan between x = G w and y = G wbar for the configured solver.
inline ot::TransportPlan compute_plan(const Vector& x, const Vector& y, const EwrConfig& cfg,
                                      ot::SinkhornStats* stats = nullptr) {
  const auto n = static_cast<std::size_t>(x.size());
  ot::SinkhornOptions opt;
  opt.tol = cfg.sinkhornTol;
  opt.maxIter = cfg.maxIter;
  switch (cfg.planSolver) {
    case PlanSolver::diagonal:
      return ot::fixed_plan(ot::FixedPlanKind::diagonal, n);
    case PlanSolver::uniform:
      return ot::fixed_plan(ot::FixedPlanKind::uniform, n);
    case PlanSolver::sinkhorn: {
      const Vector m = ot::uniform_marginal(n);
      return ot::sinkhorn_plan(ot::build_cost_matrix(x, y), m, m, cfg.epsilon, opt, stats);
    }
    case PlanSolver::closed_form:
      return ot::closed_form_plan(x, y, cfg.epsilon, cfg.crossCovariance, opt, stats);
  }
  throw ConfigError("unknown plan solver");
}

}  // namespace swapkit::ewr
