#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "netglm/error.hpp"
#include "netglm/hypergraph.hpp"
#include "netglm/mple.hpp"
#include "netglm/mrf.hpp"
#include "netglm/normal.hpp"
#include "netglm/projection.hpp"

namespace netglm {

struct LinearInference {
  Vector c;
  double estimate = 0.0;
  double variance = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double alpha = 0.05;
  double null_value = 0.0;
  double t_stat = 0.0;
  double p_value = 1.0;

  double length() const noexcept { return ci_hi - ci_lo; }
};

struct QuadraticInference {
  Matrix m_matrix;
  double q_tilde = 0.0;  // before truncation
  double q_hat = 0.0;
  double variance = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double alpha = 0.05;
  bool degenerate_target = false;  // M theta_tilde = 0: floor-variance fallback
};

enum class MultipleTestMethod { Bonferroni, BenjaminiHochberg };

struct MultipleTestResult {
  MultipleTestMethod method = MultipleTestMethod::Bonferroni;
  double threshold = 0.0;
  std::vector<int> rejected;
  double alpha = 0.05;
};

namespace detail {

struct S2Terms {
  Vector fitted;  // v~_i
  Vector proj;    // u' X_i
  Vector resid;   // ybar_i - f(v~_i)
};

inline S2Terms s2_terms(const Vector& u, const Vector& theta, const Dataset& data, std::span<const VertexId> s2,
                        const Hypergraph& h) {
  if (s2.empty()) throw InsufficientDataError("inference: empty S2");
  if (u.size() != data.d()) throw ArgumentError("inference: projection vector has wrong length");
  S2Terms t;
  t.fitted = fitted_fields(data, h, s2, theta);
  t.proj.resize(t.fitted.size());
  t.resid.resize(t.fitted.size());
  for (Eigen::Index r = 0; r < t.fitted.size(); ++r) {
    const VertexId i = s2[static_cast<std::size_t>(r)];
    t.proj(r) = data.x.row(i).dot(u);
    t.resid(r) = data.y01(i) - f_sigmoid(t.fitted(r));
  }
  return t;
}

inline double variance_sum(const S2Terms& t) {
  double acc = 0.0;
  for (Eigen::Index r = 0; r < t.fitted.size(); ++r) acc += f_variance(t.fitted(r)) * t.proj(r) * t.proj(r);
  return acc;
}

}  // namespace detail

/// c' theta_tilde + (2/|S2|) sum_{i in S2} (ybar_i - f(v~_i)) u' X_i.
inline double debias_linear(const Vector& c, const MpleFit& fit, const ProjectionResult& proj, const Dataset& data,
                            std::span<const VertexId> s2, const Hypergraph& h) {
  if (c.size() != fit.theta_tilde.size()) throw ArgumentError("debias_linear: c has wrong length");
  const auto t = detail::s2_terms(proj.u_hat, fit.theta_tilde, data, s2, h);
  return c.dot(fit.theta_tilde) + 2.0 * t.resid.dot(t.proj) / static_cast<double>(t.proj.size());
}

/// (1/|S2|^2) sum 4 f(v_i)(1 - f(v_i)) (u' X_i)^2 at the supplied coefficient vector.
inline double variance_at(const Vector& u, const Vector& theta, const Dataset& data, std::span<const VertexId> s2,
                          const Hypergraph& h) {
  const auto t = detail::s2_terms(u, theta, data, s2, h);
  const double m = static_cast<double>(t.proj.size());
  return 4.0 * detail::variance_sum(t) / (m * m);
}

/// Plug-in variance V-hat (evaluated at theta_tilde).
inline double estimate_variance(const ProjectionResult& proj, const MpleFit& fit, const Dataset& data,
                                std::span<const VertexId> s2, const Hypergraph& h) {
  const double v = variance_at(proj.u_hat, fit.theta_tilde, data, s2, h);
  if (!(v > 0.0)) throw DegenerateError("estimate_variance: variance is zero");
  return v;
}

/// Conditional variance V evaluated at the true theta. Only computable in simulation.
inline double oracle_variance(const ProjectionResult& proj, const Vector& theta_true, const Dataset& data,
                              std::span<const VertexId> s2, const Hypergraph& h) {
  return variance_at(proj.u_hat, theta_true, data, s2, h);
}

/// [est - z_{alpha/2} sqrt(V), est + z_{alpha/2} sqrt(V)].
inline std::pair<double, double> conf_interval(double estimate, double variance, double alpha) {
  if (!(variance > 0.0)) throw ArgumentError("conf_interval: variance must be > 0");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("conf_interval: alpha must lie in (0, 1)");
  const double half = upper_quantile(alpha / 2.0) * std::sqrt(variance);
  return {estimate - half, estimate + half};
}

inline double test_statistic(double estimate, double null_value, double variance) {
  if (!(variance > 0.0)) throw ArgumentError("test_statistic: variance must be > 0");
  return (estimate - null_value) / std::sqrt(variance);
}

inline double two_sided_p_value(double t) { return std::erfc(std::abs(t) / M_SQRT2); }

/// One-sided test of H0: c'theta <= 0, rejecting when est >= z_alpha sqrt(V).
inline bool one_sided_reject(double estimate, double variance, double alpha) {
  if (!(variance > 0.0)) throw ArgumentError("one_sided_reject: variance must be > 0");
  return estimate >= upper_quantile(alpha) * std::sqrt(variance);
}

inline LinearInference make_linear_inference(Vector c, double estimate, double variance, double alpha,
                                             double null_value) {
  LinearInference li;
  li.c = std::move(c);
  li.estimate = estimate;
  li.variance = variance;
  li.alpha = alpha;
  li.null_value = null_value;
  std::tie(li.ci_lo, li.ci_hi) = conf_interval(estimate, variance, alpha);
  li.t_stat = test_statistic(estimate, null_value, variance);
  li.p_value = two_sided_p_value(li.t_stat);
  return li;
}

inline void check_spd(const Matrix& m) {
  if (m.rows() != m.cols() || !m.isApprox(m.transpose(), 1e-12))
    throw ArgumentError("quadratic functional: M must be symmetric");
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw ArgumentError("quadratic functional: M is not positive definite");
}

/// Report used when M theta_tilde = 0: Q-hat = 0 with the 1/n floor variance.
inline QuadraticInference quadratic_floor_report(const Matrix& m, long n, double alpha) {
  QuadraticInference qi;
  qi.m_matrix = m;
  qi.alpha = alpha;
  qi.variance = 1.0 / static_cast<double>(n);
  qi.ci_hi = upper_quantile(alpha / 2.0) * std::sqrt(qi.variance);
  qi.degenerate_target = true;
  return qi;
}

/// Debiased quadratic functional theta' M theta with projection targeting M theta_tilde.
inline QuadraticInference debias_quadratic(const Matrix& m, const MpleFit& fit, const ProjectionResult& proj_m,
                                           const Dataset& data, std::span<const VertexId> s2, const Hypergraph& h,
                                           double alpha = 0.05) {
  check_spd(m);
  if (m.rows() != fit.theta_tilde.size()) throw ArgumentError("debias_quadratic: M has wrong size");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("debias_quadratic: alpha must lie in (0, 1)");
  const auto t = detail::s2_terms(proj_m.u_hat, fit.theta_tilde, data, s2, h);
  const double s = static_cast<double>(t.proj.size());
  const double n = static_cast<double>(data.n());

  QuadraticInference qi;
  qi.m_matrix = m;
  qi.alpha = alpha;
  qi.q_tilde = fit.theta_tilde.dot(m * fit.theta_tilde) + 4.0 * t.resid.dot(t.proj) / s;
  qi.q_hat = std::max(qi.q_tilde, 0.0);
  qi.variance = 16.0 * detail::variance_sum(t) / (s * s) + 1.0 / n;
  const double half = upper_quantile(alpha / 2.0) * std::sqrt(qi.variance);
  qi.ci_lo = std::max(qi.q_hat - half, 0.0);
  qi.ci_hi = qi.q_hat + half;
  return qi;
}

/// Two-sided Bonferroni critical value z_{alpha / (2 J)}.
inline double bonferroni_threshold(long j_count, double alpha) {
  if (j_count < 1) throw ArgumentError("bonferroni_threshold: need at least one hypothesis");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("bonferroni_threshold: alpha must lie in (0, 1)");
  return upper_quantile(alpha / (2.0 * static_cast<double>(j_count)));
}

inline MultipleTestResult bonferroni(std::span<const double> t_stats, double alpha) {
  if (t_stats.empty()) throw ArgumentError("bonferroni: no test statistics");
  MultipleTestResult r;
  r.method = MultipleTestMethod::Bonferroni;
  r.alpha = alpha;
  r.threshold = bonferroni_threshold(static_cast<long>(t_stats.size()), alpha);
  for (std::size_t j = 0; j < t_stats.size(); ++j)
    if (std::abs(t_stats[j]) >= r.threshold) r.rejected.push_back(static_cast<int>(j));
  return r;
}

/// J (2 - 2 Phi(kappa)) / max(#{j : |T_j| >= kappa}, 1).
inline double bh_ratio(double kappa, std::span<const double> t_stats) {
  long count = 0;
  for (double t : t_stats) count += std::abs(t) >= kappa;
  return static_cast<double>(t_stats.size()) * std::erfc(kappa / M_SQRT2) / static_cast<double>(std::max(count, 1L));
}

/// Normal-approximation BH cutoff
///   kappa = inf{ 0 <= kappa <= sqrt(2 log J - 2 log log J) : bh_ratio(kappa) <= alpha },
/// falling back to sqrt(2 log J) when the set is empty. Between consecutive
/// |T_j| the rejection count is constant and the tail term decreasing, so the
/// infimum on each piece is either its left end or the point where the tail
/// term meets alpha * count / J.
inline MultipleTestResult bh_cutoff(std::span<const double> t_stats, double alpha) {
  if (t_stats.empty()) throw ArgumentError("bh_cutoff: no test statistics");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("bh_cutoff: alpha must lie in (0, 1)");
  const auto j = static_cast<double>(t_stats.size());
  if (t_stats.size() < 3) return bonferroni(t_stats, alpha);

  const double upper = std::sqrt(2.0 * std::log(j) - 2.0 * std::log(std::log(j)));
  std::vector<double> abs_t(t_stats.size());
  std::transform(t_stats.begin(), t_stats.end(), abs_t.begin(), [](double t) { return std::abs(t); });
  std::sort(abs_t.begin(), abs_t.end());

  double kappa = std::sqrt(2.0 * std::log(j));
  double lo = 0.0;
  for (std::size_t k = 0; k <= abs_t.size() && lo <= upper; ++k) {
    // on (lo, hi] (and at 0 for the first piece) the count of |T| >= kappa is J - k
    const double hi = k < abs_t.size() ? abs_t[k] : std::numeric_limits<double>::infinity();
    if (hi < lo) continue;
    const double count = std::max(static_cast<double>(abs_t.size() - k), 1.0);
    const double tail = alpha * count / (2.0 * j);  // need 1 - Phi(kappa) <= tail
    const double cand = tail >= 0.5 ? lo : std::max(lo, upper_quantile(tail));
    if (cand <= hi && cand <= upper) {
      kappa = cand;
      break;
    }
    lo = hi;
  }

  MultipleTestResult r;
  r.method = MultipleTestMethod::BenjaminiHochberg;
  r.alpha = alpha;
  r.threshold = kappa;
  for (std::size_t i = 0; i < t_stats.size(); ++i)
    if (std::abs(t_stats[i]) >= kappa) r.rejected.push_back(static_cast<int>(i));
  return r;
}

// ---------------------------------------------------------------------------
// End-to-end pipelines

struct PipelineConfig {
  double lambda_c = kDefaultLambdaC;
  ProjectionConstants consts;
  MpleOptions mple;
  ProjectionOptions projection;
  bool random_greedy_order = false;
  double null_value = 0.0;
  bool lambda_on_s1 = false;  // lambda_n from |S1| instead of the full n
};

struct PipelineReport {
  LinearInference inference;
  MpleFit fit;
  ProjectionResult projection;
  VertexSplit split;
};

struct QuadraticReport {
  QuadraticInference inference;
  MpleFit fit;
  std::optional<ProjectionResult> projection;
  VertexSplit split;
};

/// Split and first-step fit shared by every functional computed on one dataset.
struct FirstStep {
  VertexSplit split;
  MpleFit fit;
};

namespace detail {

inline std::string staged_message(const char* stage, const std::exception& e) {
  return std::string(stage) + ": " + e.what();
}

/// Runs `f`, re-throwing library errors with the pipeline stage prefixed.
template <typename F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const InfeasibleError& e) {
    throw InfeasibleError(staged_message(stage, e), e.residual_inf, e.residual_scalar, e.residual_max);
  } catch (const ArgumentError& e) {
    throw ArgumentError(staged_message(stage, e));
  } catch (const InsufficientDataError& e) {
    throw InsufficientDataError(staged_message(stage, e));
  } catch (const NumericError& e) {
    throw NumericError(staged_message(stage, e));
  } catch (const DegenerateError& e) {
    throw DegenerateError(staged_message(stage, e));
  }
}

inline FirstStep first_step(const Dataset& data, const Hypergraph& h, bool use_independent_set,
                            const PipelineConfig& cfg, Rng& rng) {
  data.validate();
  if (data.x.rows() != h.vertex_count()) throw ArgumentError("pipeline: data and graph sizes disagree");
  FirstStep fs;
  fs.split = staged("split", [&] {
    VertexSet s;
    if (use_independent_set) {
      s = cfg.random_greedy_order ? greedy_strong_independent_set(h, random_order(h.vertex_count(), rng))
                                  : greedy_strong_independent_set(h);
    } else {
      s.resize(static_cast<std::size_t>(h.vertex_count()));
      std::iota(s.begin(), s.end(), 0);
    }
    return split_independent_set(s, rng);
  });
  const long lambda_n = cfg.lambda_on_s1 ? static_cast<long>(fs.split.s1.size()) : static_cast<long>(data.n());
  const double lambda = lambda_default(lambda_n, data.d(), cfg.lambda_c);
  fs.fit = staged("fit", [&] { return fit_mple(data, h, fs.split.s1, lambda, cfg.mple); });
  return fs;
}

inline PipelineReport linear_from_first_step(const Dataset& data, const Hypergraph& h, const FirstStep& fs,
                                             const Vector& c, double alpha, const PipelineConfig& cfg) {
  if (c.size() != data.d()) throw ArgumentError("pipeline: functional has wrong length");
  PipelineReport rep;
  rep.split = fs.split;
  rep.fit = fs.fit;
  const auto& s2 = fs.split.s2;
  rep.projection = staged("projection", [&] {
    const ConstraintSpec spec = build_constraint_spec(c, data.n(), data.d(), cfg.consts);
    return solve_projection(spec, data, s2, fs.fit.theta_tilde, h, cfg.projection);
  });
  rep.inference = staged("inference", [&] {
    const double est = debias_linear(c, fs.fit, rep.projection, data, s2, h);
    const double var = estimate_variance(rep.projection, fs.fit, data, s2, h);
    return make_linear_inference(c, est, var, alpha, cfg.null_value);
  });
  return rep;
}

inline QuadraticReport quadratic_from_first_step(const Dataset& data, const Hypergraph& h, const FirstStep& fs,
                                                 const Matrix& m, double alpha, const PipelineConfig& cfg) {
  check_spd(m);
  if (m.rows() != data.d()) throw ArgumentError("pipeline: M has wrong size");
  QuadraticReport rep;
  rep.split = fs.split;
  rep.fit = fs.fit;
  const Vector target = m * fs.fit.theta_tilde;
  if (target.norm() == 0.0) {
    rep.inference = quadratic_floor_report(m, data.n(), alpha);
    return rep;
  }
  rep.projection = staged("projection", [&] {
    const ConstraintSpec spec = build_constraint_spec(target, data.n(), data.d(), cfg.consts);
    return solve_projection(spec, data, fs.split.s2, fs.fit.theta_tilde, h, cfg.projection);
  });
  rep.inference = staged("inference", [&] {
    return debias_quadratic(m, fs.fit, *rep.projection, data, fs.split.s2, h, alpha);
  });
  return rep;
}

}  // namespace detail

/// Greedy strong independent set, random split, and penalized MPLE on S1.
inline FirstStep fit_first_step(const Dataset& data, const Hypergraph& h, const PipelineConfig& cfg, Rng& rng) {
  return detail::first_step(data, h, true, cfg, rng);
}

/// Greedy strong independent set -> split -> penalized MPLE on S1 -> projection on S2
/// -> debiased estimate, variance, interval and test.
inline PipelineReport infer_linear_pipeline(const Dataset& data, const Hypergraph& h, const Vector& c, double alpha,
                                            const PipelineConfig& cfg, Rng& rng) {
  const FirstStep fs = detail::first_step(data, h, true, cfg, rng);
  return detail::linear_from_first_step(data, h, fs, c, alpha, cfg);
}

/// Dependence-blind comparator: same machinery with m_i = 0 and a random halving
/// of all n vertices.
inline PipelineReport baseline_pipeline(const Dataset& data, const Vector& c, double alpha, const PipelineConfig& cfg,
                                        Rng& rng) {
  const Hypergraph empty(static_cast<int>(data.n()));
  const FirstStep fs = detail::first_step(data, empty, false, cfg, rng);
  return detail::linear_from_first_step(data, empty, fs, c, alpha, cfg);
}

inline QuadraticReport infer_quadratic_pipeline(const Dataset& data, const Hypergraph& h, const Matrix& m,
                                                double alpha, const PipelineConfig& cfg, Rng& rng) {
  const FirstStep fs = detail::first_step(data, h, true, cfg, rng);
  return detail::quadratic_from_first_step(data, h, fs, m, alpha, cfg);
}

/// Coordinate-wise inference for every j in `coords`, sharing one split and fit.
inline std::vector<LinearInference> infer_coordinates(const Dataset& data, const Hypergraph& h,
                                                      std::span<const int> coords, double alpha,
                                                      const PipelineConfig& cfg, Rng& rng) {
  const FirstStep fs = detail::first_step(data, h, true, cfg, rng);
  std::vector<LinearInference> out;
  out.reserve(coords.size());
  for (int j : coords) {
    if (j < 0 || j >= data.d()) throw ArgumentError("infer_coordinates: coordinate out of range");
    const Vector c = Vector::Unit(data.d(), j);
    out.push_back(detail::linear_from_first_step(data, h, fs, c, alpha, cfg).inference);
  }
  return out;
}

}  // namespace netglm
