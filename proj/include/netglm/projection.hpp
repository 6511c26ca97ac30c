#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <span>

#include "netglm/error.hpp"
#include "netglm/hypergraph.hpp"
#include "netglm/mrf.hpp"
#include "netglm/qp.hpp"

namespace netglm {

/// f'(x) = 2 f(x) (1 - f(x)) = 1 / (2 cosh^2 x).
inline double weight_fprime(double x) noexcept {
  const double c = std::cosh(x);
  return 0.5 / (c * c);
}

struct ProjectionConstants {
  double c1 = 1.0;
  double c2 = 1.0;
  double c3 = 2.0;
};

/// Target vector t and the three constraint radii of the projection program.
struct ConstraintSpec {
  Vector target;
  ProjectionConstants consts;
  long n = 0;
  long d = 0;
  double r_inf = 0.0;     // c1 |t|_2 sqrt(log d / n)
  double r_scalar = 0.0;  // c2 |t|_2^2 sqrt(log d / n)
  double r_max = 0.0;     // c3 |t|_2 sqrt(log n)
};

inline ConstraintSpec build_constraint_spec(const Vector& t, long n, long d, const ProjectionConstants& consts = {}) {
  if (d < 2) throw DegenerateError("projection: d must be >= 2 (log d = 0 collapses the sup-norm constraint)");
  if (n < 2) throw ArgumentError("projection: n must be >= 2");
  if (t.size() != d) throw ArgumentError("projection: target length differs from d");
  if (!t.allFinite()) throw NumericError("projection: target is not finite");
  const double norm = t.norm();
  if (norm == 0.0) throw ArgumentError("projection: target vector is zero");
  if (!(consts.c1 > 0 && consts.c2 > 0 && consts.c3 > 0)) throw ArgumentError("projection: constants must be positive");
  const double rate = std::sqrt(std::log(static_cast<double>(d)) / static_cast<double>(n));
  ConstraintSpec spec;
  spec.target = t;
  spec.consts = consts;
  spec.n = n;
  spec.d = d;
  spec.r_inf = consts.c1 * norm * rate;
  spec.r_scalar = consts.c2 * norm * norm * rate;
  spec.r_max = consts.c3 * norm * std::sqrt(std::log(static_cast<double>(n)));
  return spec;
}

/// The scalar constraint is implied by the sup-norm one when c1 |t|_1 <= c2 |t|_2,
/// since |t'(Gu - t)| <= |t|_1 |Gu - t|_inf.
inline bool second_constraint_needed(const Vector& t, double c1 = 1.0, double c2 = 1.0) {
  return c1 * t.lpNorm<1>() > c2 * t.norm();
}

/// Rows X_i (i in S2) with weights f'(v~_i) and the weighted Gram matrix
///   G = (2/|S2|) sum_i f'(v~_i) X_i X_i'.
struct ProjectionDesign {
  Matrix x;
  Vector weights;
  Matrix gram;

  static ProjectionDesign from_weights(Matrix x, Vector weights) {
    if (x.rows() == 0) throw InsufficientDataError("projection: empty S2");
    if (weights.size() != x.rows()) throw ArgumentError("projection: weight count differs from row count");
    ProjectionDesign pd{std::move(x), std::move(weights), {}};
    pd.gram = (2.0 / static_cast<double>(pd.x.rows())) * pd.x.transpose() * pd.weights.asDiagonal() * pd.x;
    return pd;
  }
};

/// v~_i = m_i(y) + X_i' theta_tilde for i in `subset`.
inline Vector fitted_fields(const Dataset& data, const Hypergraph& h, std::span<const VertexId> subset,
                            const Vector& theta) {
  if (theta.size() != data.d()) throw ArgumentError("theta length differs from covariate dimension");
  if (data.x.rows() != h.vertex_count()) throw ArgumentError("data and graph sizes disagree");
  Vector v(static_cast<Eigen::Index>(subset.size()));
  for (std::size_t r = 0; r < subset.size(); ++r) {
    const VertexId i = subset[r];
    h.check_vertex(i);
    v(static_cast<Eigen::Index>(r)) = local_field(h, data.y, i) + data.x.row(i).dot(theta);
  }
  return v;
}

inline ProjectionDesign make_projection_design(const Dataset& data, const Hypergraph& h,
                                               std::span<const VertexId> s2, const Vector& theta_tilde) {
  if (s2.empty()) throw InsufficientDataError("projection: empty S2");
  const Vector v = fitted_fields(data, h, s2, theta_tilde);
  Matrix x(v.size(), data.d());
  Vector w(v.size());
  for (Eigen::Index r = 0; r < v.size(); ++r) {
    x.row(r) = data.x.row(s2[static_cast<std::size_t>(r)]);
    w(r) = weight_fprime(v(r));
  }
  if (!w.allFinite() || !x.allFinite()) throw NumericError("projection: non-finite design");
  return ProjectionDesign::from_weights(std::move(x), std::move(w));
}

struct ProjectionResult {
  Vector u_hat;
  double objective = 0.0;        // u' G u
  double residual_inf = 0.0;     // |Gu - t|_inf - r_inf
  double residual_scalar = 0.0;  // |t'Gu - |t|^2| - r_scalar
  double residual_max = 0.0;     // max_i |X_i'u| - r_max
  int inflations = 0;
  int iterations = 0;
  bool scalar_constraint_used = true;
  ConstraintSpec spec;  // radii actually enforced (after inflation)
};

struct ProjectionOptions {
  int max_inflations = 6;
  double feasibility_tol = 1e-10;  // allowed slack, relative to max(1, radius)
  qp::Settings qp;
};

inline void projection_residuals(const ConstraintSpec& spec, const ProjectionDesign& design, ProjectionResult& r) {
  const Vector gu = design.gram * r.u_hat;
  r.objective = r.u_hat.dot(gu);
  r.residual_inf = (gu - spec.target).lpNorm<Eigen::Infinity>() - spec.r_inf;
  r.residual_scalar = std::abs(spec.target.dot(gu) - spec.target.squaredNorm()) - spec.r_scalar;
  r.residual_max = (design.x * r.u_hat).lpNorm<Eigen::Infinity>() - spec.r_max;
}

namespace detail {

inline ConstraintSpec inflate(const ConstraintSpec& base, int times) {
  ConstraintSpec s = base;
  const double f = std::ldexp(1.0, times);
  s.consts = {base.consts.c1 * f, base.consts.c2 * f, base.consts.c3 * f};
  s.r_inf = base.r_inf * f;
  s.r_scalar = base.r_scalar * f;
  s.r_max = base.r_max * f;
  return s;
}

/// QP in u with bounds shrunk by `margin_*` (used to push an almost-feasible point inside).
inline qp::Problem projection_qp(const ConstraintSpec& spec, const ProjectionDesign& design, bool use_scalar,
                                 double margin_inf, double margin_scalar, double margin_max) {
  const Eigen::Index d = design.gram.rows(), m = design.x.rows();
  const Eigen::Index rows = d + (use_scalar ? 1 : 0) + m;
  qp::Problem prob;
  prob.p = 2.0 * design.gram;
  prob.q = Vector::Zero(d);
  prob.a.resize(rows, d);
  prob.lower.resize(rows);
  prob.upper.resize(rows);
  const double ri = std::max(spec.r_inf - margin_inf, 0.0);
  prob.a.topRows(d) = design.gram;
  prob.lower.head(d) = spec.target.array() - ri;
  prob.upper.head(d) = spec.target.array() + ri;
  Eigen::Index row = d;
  if (use_scalar) {
    const double rs = std::max(spec.r_scalar - margin_scalar, 0.0);
    const double tt = spec.target.squaredNorm();
    prob.a.row(row) = (design.gram * spec.target).transpose();
    prob.lower(row) = tt - rs;
    prob.upper(row) = tt + rs;
    ++row;
  }
  const double rm = std::max(spec.r_max - margin_max, 0.0);
  prob.a.bottomRows(m) = design.x;
  prob.lower.tail(m).setConstant(-rm);
  prob.upper.tail(m).setConstant(rm);
  return prob;
}

}  // namespace detail

/// Minimizes u'Gu subject to the sup-norm, scalar, and design-bound constraints.
/// When the program is infeasible the constants are doubled, up to
/// `max_inflations` times.
inline ProjectionResult solve_projection(const ConstraintSpec& spec, const ProjectionDesign& design,
                                         const ProjectionOptions& opts = {}) {
  if (spec.target.size() != design.gram.rows()) throw ArgumentError("projection: target length differs from d");
  const bool use_scalar = second_constraint_needed(spec.target, spec.consts.c1, spec.consts.c2);

  ProjectionResult last;
  std::optional<Vector> warm_x, warm_y;
  for (int k = 0; k <= opts.max_inflations; ++k) {
    const ConstraintSpec cur = detail::inflate(spec, k);
    const auto tol = [&](double radius) { return opts.feasibility_tol * std::max(1.0, radius); };
    double mi = 0.0, ms = 0.0, mm = 0.0;
    for (int attempt = 0; attempt < 4; ++attempt) {
      const qp::Problem prob = detail::projection_qp(cur, design, use_scalar, mi, ms, mm);
      const qp::Result qr = qp::solve(prob, opts.qp, warm_x, warm_y);
      if (!qr.x.allFinite()) throw NumericError("projection: solver produced non-finite iterate");
      ProjectionResult r;
      r.u_hat = qr.x;
      r.inflations = k;
      r.iterations = qr.iterations;
      r.scalar_constraint_used = use_scalar;
      r.spec = cur;
      projection_residuals(cur, design, r);
      last = r;
      if (qr.status == qp::Status::PrimalInfeasible) break;
      if (r.residual_inf <= tol(cur.r_inf) && r.residual_scalar <= tol(cur.r_scalar) && r.residual_max <= tol(cur.r_max))
        return r;
      const double worst = std::max({r.residual_inf / std::max(1.0, cur.r_inf),
                                     r.residual_scalar / std::max(1.0, cur.r_scalar),
                                     r.residual_max / std::max(1.0, cur.r_max)});
      if (worst > 1e-5) break;  // not converging to a feasible point at these radii
      // nearly feasible: tighten the violated bounds and re-solve from here
      warm_x = qr.x;
      warm_y = qr.y;
      mi += std::max(2.0 * r.residual_inf, 0.0);
      ms += std::max(2.0 * r.residual_scalar, 0.0);
      mm += std::max(2.0 * r.residual_max, 0.0);
    }
  }
  throw InfeasibleError("projection program infeasible after " + std::to_string(opts.max_inflations) +
                            " inflations",
                        last.residual_inf, last.residual_scalar, last.residual_max);
}

inline ProjectionResult solve_projection(const ConstraintSpec& spec, const Dataset& data, std::span<const VertexId> s2,
                                         const Vector& theta_tilde, const Hypergraph& h,
                                         const ProjectionOptions& opts = {}) {
  return solve_projection(spec, make_projection_design(data, h, s2, theta_tilde), opts);
}

}  // namespace netglm
