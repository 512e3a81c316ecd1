#pragma once

// Entropic optimal transport between two 1-D empirical distributions:
// squared-distance cost matrices, Sinkhorn-Knopp plans (with a log-domain
// path for small regularization), fixed extreme plans, the closed-form
// Gaussian plan, and the convex-hull distance witness.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "swap/common.hpp"

namespace swapkit::ot {

struct CostMatrix {
  Matrix values;
  std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
};

struct TransportPlan {
  Matrix values;
  Vector rowMarginal;
  Vector colMarginal;

  std::size_t size() const { return static_cast<std::size_t>(values.rows()); }

  // max(|rowsums - mu|_inf, |colsums - nu|_inf)
  double marginal_residual() const {
    const double r = (values.rowwise().sum() - rowMarginal).cwiseAbs().maxCoeff();
    const double c = (values.colwise().sum().transpose() - colMarginal).cwiseAbs().maxCoeff();
    return std::max(r, c);
  }
};

inline Vector uniform_marginal(std::size_t n) {
  return Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
}

// C_ij = (x_i - y_j)^2
inline CostMatrix build_cost_matrix(const Vector& x, const Vector& y) {
  detail::require(x.size() == y.size(), "build_cost_matrix: x and y differ in length");
  detail::require(x.size() >= 1, "build_cost_matrix: empty input");
  if (!x.allFinite() || !y.allFinite()) throw DomainError("build_cost_matrix: non-finite input");
  const Eigen::Index n = x.size();
  CostMatrix c{Matrix(n, n)};
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = x(i) - y(j);
      c.values(i, j) = d * d;
    }
  return c;
}

struct SinkhornOptions {
  double tol = 1e-9;
  std::size_t maxIter = 10000;
  // Switch to log-domain updates when exp(-C/eps) underflows.
  bool logDomainFallback = true;
  // After plainIterations Sinkhorn sweeps without convergence, continue with
  // Newton steps on the semi-dual (same fixed point, same stopping rule).
  bool newtonAcceleration = true;
  std::size_t plainIterations = 100;
};

struct SinkhornStats {
  std::size_t iterations = 0;
  double residual = 0.0;
  bool logDomain = false;
};

namespace detail {

// exp(-C/eps) entries below exp(-kUnderflowExponent) leave the scaling
// vectors without dynamic range; such kernels go to the log domain.
inline constexpr double kUnderflowExponent = 200.0;

inline void check_marginal(const Vector& m, Eigen::Index n, const char* name) {
  swapkit::detail::require(m.size() == n, std::string("sinkhorn: ") + name + " has wrong length");
  if (!m.allFinite() || (m.array() < 0.0).any())
    throw DomainError(std::string("sinkhorn: ") + name + " must be finite and nonnegative");
  if (std::abs(m.sum() - 1.0) > 1e-9)
    throw DomainError(std::string("sinkhorn: ") + name + " must sum to 1");
}

inline std::string convergence_message(std::size_t it, double res, double eps) {
  std::ostringstream os;
  os << "sinkhorn: no convergence after " << it << " iterations (residual " << res
     << ", epsilon " << eps << ")";
  return os.str();
}

inline double safe_log(double v) {
  return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
}

// Log-domain Sinkhorn on the kernel log K_ij = -C_ij / eps. Dual potentials
// alpha, beta give Pi_ij = exp(logK_ij + alpha_i + beta_j). Returns false if
// the iteration budget ran out; alpha/beta hold the last iterate either way.
inline bool sinkhorn_log_core(const Matrix& logK, const Vector& mu, const Vector& nu, double tol,
                              std::size_t maxIter, Vector& alpha, Vector& beta,
                              std::size_t& iterations, double& residual) {
  const Eigen::Index n = logK.rows();
  const double ninf = -std::numeric_limits<double>::infinity();
  Vector logMu(n), logNu(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    logMu(i) = safe_log(mu(i));
    logNu(i) = safe_log(nu(i));
  }
  // Row log-sums for the current beta.
  auto row_lse = [&](Vector& out) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double m = ninf;
      for (Eigen::Index j = 0; j < n; ++j) m = std::max(m, logK(i, j) + beta(j));
      if (m == ninf) {
        out(i) = ninf;
        continue;
      }
      double s = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) s += std::exp(logK(i, j) + beta(j) - m);
      out(i) = m + std::log(s);
    }
  };
  auto col_lse = [&](Vector& out) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double m = ninf;
      for (Eigen::Index i = 0; i < n; ++i) m = std::max(m, logK(i, j) + alpha(i));
      if (m == ninf) {
        out(j) = ninf;
        continue;
      }
      double s = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) s += std::exp(logK(i, j) + alpha(i) - m);
      out(j) = m + std::log(s);
    }
  };
  Vector rowL(n), colL(n);
  row_lse(rowL);
  for (std::size_t it = 1; it <= maxIter; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) alpha(i) = mu(i) > 0.0 ? logMu(i) - rowL(i) : ninf;
    col_lse(colL);
    for (Eigen::Index j = 0; j < n; ++j) beta(j) = nu(j) > 0.0 ? logNu(j) - colL(j) : ninf;
    row_lse(rowL);
    double res = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mass = alpha(i) == ninf ? 0.0 : std::exp(alpha(i) + rowL(i));
      res = std::max(res, std::abs(mass - mu(i)));
    }
    // Column sums are exact after the beta update up to rounding; measure them
    // against the potentials actually returned.
    for (Eigen::Index j = 0; j < n; ++j) {
      const double mass = beta(j) == ninf ? 0.0 : std::exp(beta(j) + colL(j));
      res = std::max(res, std::abs(mass - nu(j)));
    }
    iterations = it;
    residual = res;
    if (!std::isfinite(res)) return false;
    if (res < tol) return true;
  }
  return false;
}

// Damped Newton on the convex dual D(alpha, beta) = sum_ij Pi_ij -
// <mu, alpha> - <nu, beta>, Pi_ij = exp(logK_ij + alpha_i + beta_j). The
// Hessian [diag(r) Pi; Pi^T diag(c)] is assembled directly (the Schur
// complement cancels badly once Pi is nearly sparse). A Levenberg-Marquardt
// shift keeps the system positive definite when weakly coupled blocks of
// the plan make it nearly singular; it shrinks after full steps and grows
// after failed ones. A step is taken once it lowers D (Armijo) or the
// marginal violation. Returns false if the budget runs out or the shift
// grows without progress.
inline bool newton_polish(const Matrix& logK, const Vector& mu, const Vector& nu, double tol, std::size_t budget,
                          Vector& alpha, Vector& beta, std::size_t& iterations, double& residual) {
  const Eigen::Index n = logK.rows();
  if ((mu.array() <= 0.0).any() || (nu.array() <= 0.0).any()) return false;
  if (!alpha.allFinite() || !beta.allFinite()) return false;
  struct State {
    Matrix plan;
    Vector rows, cols;
    double dual = 0.0, res = 0.0;
  };
  auto evaluate = [&](const Vector& a, const Vector& b, State& st) {
    st.plan.resize(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i) st.plan(i, j) = std::exp(logK(i, j) + a(i) + b(j));
    st.rows = st.plan.rowwise().sum();
    st.cols = st.plan.colwise().sum().transpose();
    st.dual = st.plan.sum() - mu.dot(a) - nu.dot(b);
    st.res = std::max((st.rows - mu).cwiseAbs().maxCoeff(), (st.cols - nu).cwiseAbs().maxCoeff());
  };
  State cur, trial;
  evaluate(alpha, beta, cur);
  const double scale = std::max(mu.maxCoeff(), nu.maxCoeff());
  double shift = 1e-12 * scale;
  for (std::size_t it = 1; it <= budget; ++it) {
    if (!std::isfinite(cur.res)) return false;
    if (cur.res < tol) {
      residual = cur.res;
      return true;
    }
    if (shift > 1e3 * scale) return false;
    Matrix H(2 * n, 2 * n);
    H.topLeftCorner(n, n) = cur.rows.asDiagonal();
    H.topRightCorner(n, n) = cur.plan;
    H.bottomLeftCorner(n, n) = cur.plan.transpose();
    H.bottomRightCorner(n, n) = cur.cols.asDiagonal();
    H.diagonal().array() += shift;
    Vector g(2 * n);
    g << cur.rows - mu, cur.cols - nu;
    const Eigen::LLT<Matrix> llt(H);
    const Vector step = llt.info() == Eigen::Success ? Vector(llt.solve(-g)) : Vector();
    const double slope = step.size() ? g.dot(step) : 0.0;
    iterations += 1;
    if (!step.allFinite() || !(slope < 0.0)) {
      shift *= 100.0;
      continue;
    }
    bool accepted = false;
    double t = 1.0;
    for (int k = 0; k < 12; ++k, t *= 0.5) {
      const Vector a2 = alpha + t * step.head(n);
      const Vector b2 = beta + t * step.tail(n);
      evaluate(a2, b2, trial);
      if (!std::isfinite(trial.res)) continue;
      if (trial.dual <= cur.dual + 1e-4 * t * slope || trial.res < cur.res) {
        alpha = a2;
        beta = b2;
        std::swap(cur, trial);
        accepted = true;
        break;
      }
    }
    residual = cur.res;
    if (!accepted)
      shift *= 100.0;
    else if (t == 1.0)
      shift = std::max(1e-12 * scale, shift * 0.1);
  }
  residual = cur.res;
  return cur.res < tol;
}

inline Matrix assemble_log_plan(const Matrix& logK, const Vector& alpha, const Vector& beta) {
  const Eigen::Index n = logK.rows();
  Matrix p(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) {
      const double e = logK(i, j) + alpha(i) + beta(j);
      p(i, j) = std::isfinite(e) ? std::exp(e) : 0.0;
    }
  return p;
}

// Plain log-domain sweeps, then Newton polishing, then plain sweeps again if
// Newton stalls, all within opt.maxIter total iterations (`used` spent already).
inline bool finish_log(const Matrix& logK, const Vector& mu, const Vector& nu, const SinkhornOptions& opt,
                       std::size_t used, Vector& alpha, Vector& beta, SinkhornStats& stats,
                       bool plainFirst = true) {
  auto remaining = [&] { return opt.maxIter > used ? opt.maxIter - used : std::size_t{0}; };
  std::size_t it = 0;
  double res = stats.residual;
  bool ok = false;
  if (plainFirst) {
    const std::size_t plain = opt.newtonAcceleration ? std::min(remaining(), opt.plainIterations) : remaining();
    ok = sinkhorn_log_core(logK, mu, nu, opt.tol, plain, alpha, beta, it, res);
    used += it;
  }
  if (!ok && opt.newtonAcceleration && remaining() > 0) {
    std::size_t nit = 0;
    ok = newton_polish(logK, mu, nu, opt.tol, remaining(), alpha, beta, nit, res);
    used += nit;
    if (!ok && remaining() > 0) {
      it = 0;
      ok = sinkhorn_log_core(logK, mu, nu, opt.tol, remaining(), alpha, beta, it, res);
      used += it;
    }
  }
  if (!ok) {
    // Report the violation of the potentials actually held, even when the
    // budget ran out before any sweep at this eps.
    const Matrix P = assemble_log_plan(logK, alpha, beta);
    res = std::max((P.rowwise().sum() - mu).cwiseAbs().maxCoeff(),
                   (P.colwise().sum().transpose() - nu).cwiseAbs().maxCoeff());
  }
  stats.iterations = used;
  stats.residual = res;
  return ok;
}

// Log-domain solve with epsilon annealing: potentials are warm-started from a
// geometric sequence of larger regularizations ending at eps. The stopping
// rule is applied only at the final eps, so the fixed point is unchanged.
inline TransportPlan sinkhorn_log(const Matrix& cost, const Vector& mu, const Vector& nu, double eps,
                                  const SinkhornOptions& opt, SinkhornStats& stats) {
  const Eigen::Index n = cost.rows();
  const double cmin = cost.minCoeff();
  const Matrix shifted = cost.array() - cmin;
  const double span = shifted.maxCoeff();
  Vector alpha = Vector::Zero(n), beta = Vector::Zero(n);
  std::size_t used = 0;
  double level = std::max(eps, span);
  while (level > eps * 1.0000001 && used < opt.maxIter) {
    std::size_t it = 0;
    double res = 0.0;
    const Matrix logK = -shifted / level;
    // Potentials scale with 1/eps; rescale the warm start accordingly.
    sinkhorn_log_core(logK, mu, nu, 1e-3, std::min<std::size_t>(50, opt.maxIter - used), alpha, beta, it, res);
    used += it;
    const double nextLevel = std::max(eps, level * 0.5);
    alpha *= level / nextLevel;
    beta *= level / nextLevel;
    level = nextLevel;
  }
  const Matrix logK = -shifted / eps;
  stats.logDomain = true;
  const bool ok = finish_log(logK, mu, nu, opt, used, alpha, beta, stats);
  if (!ok) throw ConvergenceError(convergence_message(stats.iterations, stats.residual, eps), stats.iterations,
                                  stats.residual);
  return TransportPlan{assemble_log_plan(logK, alpha, beta), mu, nu};
}

}  // namespace detail

// Sinkhorn-Knopp iteration for the entropic OT plan between mu and nu under
// cost C. Iterates u = mu / (K v), v = nu / (K^T u) until the sup-norm
// marginal violation drops below opt.tol.
inline TransportPlan sinkhorn_plan(const CostMatrix& C, const Vector& mu, const Vector& nu, double eps,
                                   const SinkhornOptions& opt = {}, SinkhornStats* statsOut = nullptr) {
  const Eigen::Index n = C.values.rows();
  swapkit::detail::require(n >= 1 && C.values.cols() == n, "sinkhorn: cost matrix must be square and nonempty");
  if (!(eps > 0.0) || !std::isfinite(eps)) throw DomainError("sinkhorn: epsilon must be positive and finite");
  if (!C.values.allFinite()) throw DomainError("sinkhorn: cost matrix has non-finite entries");
  detail::check_marginal(mu, n, "mu");
  detail::check_marginal(nu, n, "nu");

  SinkhornStats stats;
  const double span = C.values.maxCoeff() - C.values.minCoeff();
  const bool underflows = span / eps > detail::kUnderflowExponent;

  if (underflows && opt.logDomainFallback) {
    TransportPlan plan = detail::sinkhorn_log(C.values, mu, nu, eps, opt, stats);
    if (statsOut) *statsOut = stats;
    return plan;
  }

  // Shifting C by its minimum rescales K by a constant, which u and v absorb.
  // std::exp rather than Eigen's packet exp, which clamps very negative
  // arguments to ~1e-307 instead of underflowing to zero.
  const Matrix K = (-(C.values.array() - C.values.minCoeff()) / eps).unaryExpr([](double v) { return std::exp(v); }).matrix();
  for (Eigen::Index i = 0; i < n; ++i) {
    if ((mu(i) > 0.0 && K.row(i).maxCoeff() == 0.0) || (nu(i) > 0.0 && K.col(i).maxCoeff() == 0.0))
      throw UnderflowError(
          "sinkhorn: exp(-C/eps) underflows to an all-zero row or column; raise epsilon or "
          "enable the log-domain fallback");
  }

  Vector u = uniform_marginal(static_cast<std::size_t>(n));
  Vector v = u;
  Vector Kv = K * v;
  bool ok = false;
  bool broke = false;
  const std::size_t plain = opt.newtonAcceleration ? std::min(opt.maxIter, opt.plainIterations) : opt.maxIter;
  for (std::size_t it = 1; it <= plain; ++it) {
    u = mu.cwiseQuotient(Kv);
    const Vector Ktu = K.transpose() * u;
    v = nu.cwiseQuotient(Ktu);
    Kv = K * v;
    if (!u.allFinite() || !v.allFinite()) {
      broke = true;
      stats.iterations = it;
      break;
    }
    const double rowRes = (u.cwiseProduct(Kv) - mu).cwiseAbs().maxCoeff();
    const double colRes = (v.cwiseProduct(Ktu) - nu).cwiseAbs().maxCoeff();
    stats.iterations = it;
    stats.residual = std::max(rowRes, colRes);
    if (stats.residual < opt.tol) {
      ok = true;
      break;
    }
  }
  if (broke) {
    if (!opt.logDomainFallback)
      throw UnderflowError(
          "sinkhorn: scaling vectors left the floating-point range; raise epsilon or enable the "
          "log-domain fallback");
    TransportPlan plan = detail::sinkhorn_log(C.values, mu, nu, eps, opt, stats);
    if (statsOut) *statsOut = stats;
    return plan;
  }
  if (!ok && opt.newtonAcceleration && stats.iterations < opt.maxIter &&
      (mu.array() > 0.0).all() && (nu.array() > 0.0).all()) {
    // Hand the scalings over as log potentials and polish there.
    const Matrix logK = -(C.values.array() - C.values.minCoeff()) / eps;
    Vector alpha = u.array().log().matrix();
    Vector beta = v.array().log().matrix();
    ok = detail::finish_log(logK, mu, nu, opt, stats.iterations, alpha, beta, stats, false);
    if (statsOut) *statsOut = stats;
    if (!ok)
      throw ConvergenceError(detail::convergence_message(stats.iterations, stats.residual, eps),
                             stats.iterations, stats.residual);
    return TransportPlan{detail::assemble_log_plan(logK, alpha, beta), mu, nu};
  }
  if (statsOut) *statsOut = stats;
  if (!ok)
    throw ConvergenceError(detail::convergence_message(stats.iterations, stats.residual, eps),
                           stats.iterations, stats.residual);
  TransportPlan plan{u.asDiagonal() * K * v.asDiagonal(), mu, nu};
  return plan;
}

enum class FixedPlanKind { diagonal, uniform };

// diagonal: Pi = diag(1/n); uniform: Pi_ij = 1/n^2. Both with uniform marginals.
inline TransportPlan fixed_plan(FixedPlanKind kind, std::size_t n) {
  if (n == 0) throw DomainError("fixed_plan: n must be at least 1");
  const auto m = static_cast<Eigen::Index>(n);
  const double dn = static_cast<double>(n);
  TransportPlan plan;
  plan.rowMarginal = uniform_marginal(n);
  plan.colMarginal = plan.rowMarginal;
  if (kind == FixedPlanKind::diagonal) {
    plan.values = Matrix::Zero(m, m);
    plan.values.diagonal().setConstant(1.0 / dn);
  } else {
    plan.values = Matrix::Constant(m, m, 1.0 / (dn * dn));
  }
  return plan;
}

// sum_ij C_ij pi_ij
inline double transport_cost(const CostMatrix& C, const TransportPlan& plan) {
  swapkit::detail::require(C.values.rows() == plan.values.rows() && C.values.cols() == plan.values.cols(),
                        "transport_cost: cost and plan dimensions differ");
  return C.values.cwiseProduct(plan.values).sum();
}

// sum_ij pi_ij log(pi_ij / (mu_i nu_j)), with 0 log 0 = 0.
inline double plan_kl(const TransportPlan& plan) {
  const Eigen::Index n = plan.values.rows();
  double kl = 0.0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = plan.values(i, j);
      if (p > 0.0) kl += p * std::log(p / (plan.rowMarginal(i) * plan.colMarginal(j)));
    }
  return kl;
}

inline void validate_plan(const TransportPlan& plan, Eigen::Index n, const char* who) {
  swapkit::detail::require(plan.values.rows() == n && plan.values.cols() == n,
                        std::string(who) + ": plan dimensions do not match");
  swapkit::detail::require(plan.rowMarginal.size() == n && plan.colMarginal.size() == n,
                        std::string(who) + ": plan marginals have wrong length");
  if ((plan.values.array() < 0.0).any()) throw DomainError(std::string(who) + ": plan has negative entries");
}

// sum_ij C_ij pi_ij + eps * KL(Pi | mu nu^T)
inline double ot_objective(const CostMatrix& C, const TransportPlan& plan, double eps) {
  validate_plan(plan, C.values.rows(), "ot_objective");
  swapkit::detail::require(C.values.cols() == C.values.rows(), "ot_objective: cost matrix must be square");
  if (!(eps >= 0.0)) throw DomainError("ot_objective: epsilon must be nonnegative");
  const double cost = transport_cost(C, plan);
  return eps > 0.0 ? cost + eps * plan_kl(plan) : cost;
}

// ---------------------------------------------------------------------------
// Closed-form Gaussian plan

// Off-diagonal term of the coupling covariance. `printed` is 1/2 d_psi as
// stated in the original algorithm box; it always exceeds sigma_a sigma_b
// (det = -psi^4/4), so the "covariance" is indefinite. `shifted` is
// 1/2 (d_psi - psi^2), the entropic Gaussian OT coupling.
enum class CrossCovariance { shifted, printed };

struct ClosedFormParams {
  double psi = 0.0;
  double meanX = 0.0;
  double meanY = 0.0;
  double varX = 0.0;
  double varY = 0.0;
  double dPsi = 0.0;

  double cross_covariance(CrossCovariance variant) const {
    return variant == CrossCovariance::printed ? 0.5 * dPsi : 0.5 * (dPsi - psi * psi);
  }
};

namespace detail {
inline double mean(const Vector& v) { return v.mean(); }
// Population variance (1/n).
inline double variance(const Vector& v) {
  const double m = v.mean();
  return (v.array() - m).square().mean();
}
}  // namespace detail

inline ClosedFormParams closed_form_params(const Vector& x, const Vector& y, double eps) {
  swapkit::detail::require(x.size() == y.size(), "closed_form: x and y differ in length");
  swapkit::detail::require(x.size() >= 2, "closed_form: need at least two samples");
  if (!(eps > 0.0) || !std::isfinite(eps)) throw DomainError("closed_form: epsilon must be positive");
  ClosedFormParams p;
  p.psi = std::sqrt(eps / 2.0);
  p.meanX = detail::mean(x);
  p.meanY = detail::mean(y);
  p.varX = detail::variance(x);
  p.varY = detail::variance(y);
  if (!(p.varX > 0.0) || !(p.varY > 0.0))
    throw DomainError("closed_form: degenerate variance (constant x or y)");
  const double psi2 = p.psi * p.psi;
  p.dPsi = std::sqrt(4.0 * p.varX * p.varY + psi2 * psi2);
  return p;
}

// Evaluates the bivariate Gaussian coupling's log-density on the (x_i, y_j)
// grid and projects it onto uniform marginals with Sinkhorn.
inline TransportPlan closed_form_plan(const Vector& x, const Vector& y, double eps,
                                      CrossCovariance variant = CrossCovariance::shifted,
                                      const SinkhornOptions& opt = {}, SinkhornStats* stats = nullptr) {
  const ClosedFormParams p = closed_form_params(x, y, eps);
  const double c = p.cross_covariance(variant);
  const double det = p.varX * p.varY - c * c;
  if (det == 0.0) throw DomainError("closed_form: singular coupling covariance");
  // Inverse covariance entries.
  const double ia = p.varY / det, ib = -c / det, id = p.varX / det;
  const Eigen::Index n = x.size();
  // Negative log-density (up to a constant) acts as the projection cost at eps = 1.
  CostMatrix q{Matrix(n, n)};
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) {
      const double dx = x(i) - p.meanX, dy = y(j) - p.meanY;
      q.values(i, j) = 0.5 * (ia * dx * dx + 2.0 * ib * dx * dy + id * dy * dy);
    }
  q.values.array() -= q.values.minCoeff();
  const Vector m = uniform_marginal(static_cast<std::size_t>(n));
  return sinkhorn_plan(q, m, m, 1.0, opt, stats);
}

// ---------------------------------------------------------------------------
// Convex-hull distance witness

struct ConvexWeights {
  Vector weights;

  void validate() const {
    if (weights.size() == 0) throw DomainError("convex weights: empty");
    if (!weights.allFinite() || (weights.array() < 0.0).any() || (weights.array() > 1.0).any())
      throw DomainError("convex weights: entries must lie in [0, 1]");
    if (std::abs(weights.sum() - 1.0) > 1e-12) throw DomainError("convex weights: must sum to 1");
  }
};

struct WitnessResult {
  ConvexWeights weights;
  Vector point;     // y' = sum_j nu_j y_j
  double target;    // sum_j nuhat_j |x - y_j|^2
  double residual;  // | |x - y'|^2 - target |
};

// Euclidean projection onto the probability simplex.
inline Vector project_simplex(const Vector& v) {
  const Eigen::Index m = v.size();
  std::vector<double> s(v.data(), v.data() + m);
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (Eigen::Index k = 0; k < m; ++k) {
    cum += s[static_cast<std::size_t>(k)];
    const double t = (cum - 1.0) / static_cast<double>(k + 1);
    if (s[static_cast<std::size_t>(k)] - t > 0.0) theta = t;
  }
  return (v.array() - theta).max(0.0).matrix();
}

inline constexpr std::size_t kWitnessProjectionIters = 200;
inline constexpr int kWitnessBisectionDepth = 64;

// Finds convex weights nu over the columns of `points` with
// |x - sum_j nu_j y_j|^2 = sum_j nuhat_j |x - y_j|^2 (within tol).
// The low end of the search segment is the closest point of Conv(S) to x,
// reached by projected gradient started at nuhat; the high end is the
// farthest vertex. The squared distance crosses the target between them.
inline WitnessResult hull_equality_witness(const Vector& x, const Matrix& points, const ConvexWeights& nuhat,
                                           double tol) {
  const Eigen::Index d = x.size();
  const Eigen::Index m = points.cols();
  swapkit::detail::require(m >= 1, "witness: need at least one point");
  swapkit::detail::require(points.rows() == d, "witness: point dimension differs from x");
  swapkit::detail::require(nuhat.weights.size() == m, "witness: weight count differs from point count");
  nuhat.validate();
  if (!(tol > 0.0)) throw DomainError("witness: tol must be positive");

  const Matrix D = points.colwise() - x;  // columns y_j - x
  const Vector sq = D.colwise().squaredNorm().transpose();
  const double target = sq.dot(nuhat.weights);
  auto dist2 = [&](const Vector& w) { return (D * w).squaredNorm(); };

  // Projected gradient on 1/2 |D w|^2; the trace bounds the Lipschitz constant.
  Vector low = nuhat.weights;
  const double trace = sq.sum();
  if (trace > 0.0) {
    const double step = 1.0 / trace;
    for (std::size_t it = 0; it < kWitnessProjectionIters; ++it)
      low = project_simplex(low - step * (D.transpose() * (D * low)));
  }
  Eigen::Index far = 0;
  for (Eigen::Index j = 1; j < m; ++j)
    if (sq(j) > sq(far)) far = j;
  Vector high = Vector::Zero(m);
  high(far) = 1.0;

  auto finish = [&](Vector w) {
    w = w.cwiseMax(0.0);
    w /= w.sum();
    WitnessResult r{ConvexWeights{w}, points * w, target, std::abs(dist2(w) - target)};
    return r;
  };

  const double fLow = dist2(low), fHigh = dist2(high);
  if (std::abs(fLow - target) <= tol) return finish(low);
  if (std::abs(fHigh - target) <= tol) return finish(high);
  if (!(fLow <= target && target <= fHigh))
    throw Error("witness: bisection failed to bracket the target distance");

  double a = 0.0, b = 1.0;
  for (int k = 0; k < kWitnessBisectionDepth; ++k) {
    const double t = 0.5 * (a + b);
    const double f = dist2((1.0 - t) * low + t * high);
    if (f <= target)
      a = t;
    else
      b = t;
  }
  const double t = 0.5 * (a + b);
  WitnessResult r = finish((1.0 - t) * low + t * high);
  if (r.residual > tol) {
    // The bracket endpoints straddle the target; take whichever is closer.
    WitnessResult ra = finish((1.0 - a) * low + a * high);
    WitnessResult rb = finish((1.0 - b) * low + b * high);
    r = ra.residual <= rb.residual ? ra : rb;
    if (r.residual > tol) throw Error("witness: bisection did not reach the requested tolerance");
  }
  return r;
}

}  // namespace swapkit::ot
