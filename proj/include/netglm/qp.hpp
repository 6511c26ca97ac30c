#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "netglm/error.hpp"

namespace netglm::qp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// minimize 0.5 x'Px + q'x  subject to  lower <= Ax <= upper, P symmetric PSD.
struct Problem {
  Matrix p;
  Vector q;
  Matrix a;
  Vector lower;
  Vector upper;
};

struct Settings {
  double eps_abs = 1e-9;          // residual target of the ADMM iteration
  double eps_polish_start = 1e-6;  // residual level at which polishing is first tried
  double eps_infeasible = 1e-7;
  int max_iter = 20000;
  int check_every = 10;
  int adapt_every = 50;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  int scaling_passes = 10;
  bool polish = true;
};

enum class Status { Solved, MaxIterations, PrimalInfeasible };

struct Result {
  Vector x;
  Vector y;  // multipliers: negative at an active lower bound, positive at an active upper bound
  Status status = Status::MaxIterations;
  int iterations = 0;
  bool polished = false;
  double primal_residual = std::numeric_limits<double>::infinity();
  double dual_residual = std::numeric_limits<double>::infinity();
};

namespace detail {

inline double inf_norm(const Vector& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

struct Scaled {
  Matrix p, a;
  Vector q, lower, upper;
  Vector d, e;  // x = D xs, constraint rows scaled by E
  double c = 1.0;
};

/// Modified Ruiz equilibration of the KKT matrix [P A'; A 0] plus cost scaling.
inline Scaled equilibrate(const Problem& prob, int passes) {
  Scaled s{prob.p, prob.a, prob.q, prob.lower, prob.upper,
           Vector::Ones(prob.p.rows()), Vector::Ones(prob.a.rows()), 1.0};
  const auto safe = [](double v) { return v > 1e-12 ? 1.0 / std::sqrt(v) : 1.0; };
  for (int pass = 0; pass < passes; ++pass) {
    Vector dc(s.p.cols());
    for (Eigen::Index j = 0; j < s.p.cols(); ++j) {
      double m = s.p.col(j).lpNorm<Eigen::Infinity>();
      if (s.a.rows()) m = std::max(m, s.a.col(j).lpNorm<Eigen::Infinity>());
      dc(j) = std::clamp(safe(m), 1e-4, 1e4);
    }
    Vector ec(s.a.rows());
    for (Eigen::Index i = 0; i < s.a.rows(); ++i) ec(i) = std::clamp(safe(s.a.row(i).lpNorm<Eigen::Infinity>()), 1e-4, 1e4);
    s.p = dc.asDiagonal() * s.p * dc.asDiagonal();
    s.a = ec.asDiagonal() * s.a * dc.asDiagonal();
    s.q = s.q.cwiseProduct(dc);
    s.d = s.d.cwiseProduct(dc);
    s.e = s.e.cwiseProduct(ec);
  }
  double pnorm = 0.0;
  for (Eigen::Index j = 0; j < s.p.cols(); ++j) pnorm += s.p.col(j).lpNorm<Eigen::Infinity>();
  if (s.p.cols()) pnorm /= static_cast<double>(s.p.cols());
  const double cost = std::max(pnorm, inf_norm(s.q));
  s.c = cost > 1e-12 ? std::clamp(1.0 / cost, 1e-4, 1e4) : 1.0;
  s.p *= s.c;
  s.q *= s.c;
  for (Eigen::Index i = 0; i < s.a.rows(); ++i) {
    s.lower(i) = std::isfinite(prob.lower(i)) ? prob.lower(i) * s.e(i) : prob.lower(i);
    s.upper(i) = std::isfinite(prob.upper(i)) ? prob.upper(i) * s.e(i) : prob.upper(i);
  }
  return s;
}

inline double primal_residual(const Problem& prob, const Vector& x) {
  const Vector ax = prob.a * x;
  double r = 0.0;
  for (Eigen::Index i = 0; i < ax.size(); ++i)
    r = std::max({r, prob.lower(i) - ax(i), ax(i) - prob.upper(i)});
  return r;
}

inline double dual_residual(const Problem& prob, const Vector& x, const Vector& y) {
  return inf_norm(prob.p * x + prob.q + prob.a.transpose() * y);
}

/// Solves the equality-constrained QP on a guessed active set and checks that
/// the result is primal feasible with correctly signed multipliers.
inline std::optional<Result> polish(const Problem& prob, const Vector& y_admm, const Vector& z_admm) {
  const Eigen::Index n = prob.p.rows(), m = prob.a.rows();
  std::vector<Eigen::Index> rows;
  std::vector<double> rhs_b;
  std::vector<int> side;  // -1 lower, +1 upper
  for (Eigen::Index i = 0; i < m; ++i) {
    const double lo_gap = z_admm(i) - prob.lower(i), up_gap = prob.upper(i) - z_admm(i);
    if (std::isfinite(prob.lower(i)) && lo_gap < -y_admm(i)) {
      rows.push_back(i);
      rhs_b.push_back(prob.lower(i));
      side.push_back(-1);
    } else if (std::isfinite(prob.upper(i)) && up_gap < y_admm(i)) {
      rows.push_back(i);
      rhs_b.push_back(prob.upper(i));
      side.push_back(+1);
    }
  }
  const auto k = static_cast<Eigen::Index>(rows.size());
  Matrix kkt = Matrix::Zero(n + k, n + k);
  kkt.topLeftCorner(n, n) = prob.p;
  for (Eigen::Index r = 0; r < k; ++r) {
    kkt.block(n + r, 0, 1, n) = prob.a.row(rows[static_cast<std::size_t>(r)]);
    kkt.block(0, n + r, n, 1) = prob.a.row(rows[static_cast<std::size_t>(r)]).transpose();
  }
  Vector rhs(n + k);
  rhs.head(n) = -prob.q;
  for (Eigen::Index r = 0; r < k; ++r) rhs(n + r) = rhs_b[static_cast<std::size_t>(r)];

  const double delta = 1e-9 * std::max(1.0, kkt.lpNorm<Eigen::Infinity>());
  Matrix reg = kkt;
  reg.topLeftCorner(n, n).diagonal().array() += delta;
  reg.bottomRightCorner(k, k).diagonal().array() -= delta;
  const Eigen::PartialPivLU<Matrix> lu(reg);
  Vector sol = lu.solve(rhs);
  for (int refine = 0; refine < 8; ++refine) {
    const Vector r = rhs - kkt * sol;
    if (r.lpNorm<Eigen::Infinity>() < 1e-15 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>())) break;
    sol += lu.solve(r);
  }
  if (!sol.allFinite()) return std::nullopt;

  Result res;
  res.x = sol.head(n);
  res.y = Vector::Zero(m);
  for (Eigen::Index r = 0; r < k; ++r) {
    const double yi = sol(n + r);
    const int sd = side[static_cast<std::size_t>(r)];
    if (yi * sd < -1e-9 * std::max(1.0, inf_norm(sol.tail(k)))) return std::nullopt;  // wrong sign
    res.y(rows[static_cast<std::size_t>(r)]) = sd < 0 ? std::min(yi, 0.0) : std::max(yi, 0.0);
  }
  res.primal_residual = primal_residual(prob, res.x);
  res.dual_residual = dual_residual(prob, res.x, res.y);
  res.polished = true;
  res.status = Status::Solved;
  return res;
}

}  // namespace detail

/// OSQP-style ADMM on the equilibrated problem, followed by active-set polishing.
inline Result solve(const Problem& prob, const Settings& st = {}, const std::optional<Vector>& x0 = std::nullopt,
                    const std::optional<Vector>& y0 = std::nullopt) {
  const Eigen::Index n = prob.p.rows(), m = prob.a.rows();
  if (prob.p.cols() != n || prob.q.size() != n || prob.a.cols() != n || prob.lower.size() != m ||
      prob.upper.size() != m)
    throw ArgumentError("qp: inconsistent problem dimensions");
  for (Eigen::Index i = 0; i < m; ++i)
    if (prob.lower(i) > prob.upper(i)) throw ArgumentError("qp: lower bound above upper bound");

  const detail::Scaled s = detail::equilibrate(prob, st.scaling_passes);
  const auto unscale_x = [&](const Vector& xs) { return Vector(s.d.cwiseProduct(xs)); };
  const auto unscale_y = [&](const Vector& ys) { return Vector(s.e.cwiseProduct(ys) / s.c); };
  const auto unscale_z = [&](const Vector& zs) { return Vector(zs.cwiseQuotient(s.e)); };

  Vector x = x0 ? Vector(x0->cwiseQuotient(s.d)) : Vector::Zero(n);
  Vector y = y0 ? Vector(y0->cwiseQuotient(s.e) * s.c) : Vector::Zero(m);
  Vector z = (s.a * x).cwiseMax(s.lower).cwiseMin(s.upper);

  double rho = st.rho;
  Vector rho_vec(m);
  const auto set_rho = [&]() {
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!std::isfinite(s.lower(i)) && !std::isfinite(s.upper(i))) rho_vec(i) = 1e-6;
      else if (s.upper(i) - s.lower(i) < 1e-12) rho_vec(i) = 1e3 * rho;
      else rho_vec(i) = rho;
    }
  };
  set_rho();
  Eigen::LLT<Matrix> llt;
  const auto factor = [&]() {
    Matrix k = s.p + s.a.transpose() * rho_vec.asDiagonal() * s.a;
    k.diagonal().array() += st.sigma;
    llt.compute(k);
    if (llt.info() != Eigen::Success) throw NumericError("qp: KKT factorization failed");
  };
  factor();

  Result best;
  Vector y_prev = y;
  double polish_level = st.eps_polish_start;
  int it = 0;
  for (; it < st.max_iter; ++it) {
    y_prev = y;
    const Vector rhs = st.sigma * x - s.q + s.a.transpose() * (rho_vec.cwiseProduct(z) - y);
    const Vector xt = llt.solve(rhs);
    const Vector zt = s.a * xt;
    x = st.alpha * xt + (1.0 - st.alpha) * x;
    const Vector zr = st.alpha * zt + (1.0 - st.alpha) * z;
    const Vector z_new = (zr + y.cwiseQuotient(rho_vec)).cwiseMax(s.lower).cwiseMin(s.upper);
    y += rho_vec.cwiseProduct(zr - z_new);
    z = z_new;
    if (!x.allFinite() || !y.allFinite()) throw NumericError("qp: iterate is not finite");

    if ((it + 1) % st.check_every != 0) continue;

    // residuals on the original (unscaled) problem
    const Vector xu = unscale_x(x), yu = unscale_y(y);
    const Vector axs = s.a * x;
    const double prim = detail::inf_norm((axs - z).cwiseQuotient(s.e));
    const double dual = detail::inf_norm((s.p * x + s.q + s.a.transpose() * y).cwiseQuotient(s.d)) / s.c;
    best.x = xu;
    best.y = yu;
    best.primal_residual = prim;
    best.dual_residual = dual;

    // primal infeasibility certificate
    const Vector dy = unscale_y(y - y_prev);
    const double dy_norm = detail::inf_norm(dy);
    if (dy_norm > 1e-12) {
      double support = 0.0;
      bool finite = true;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (dy(i) > 0) {
          if (!std::isfinite(prob.upper(i))) finite = false;
          else support += prob.upper(i) * dy(i);
        } else if (dy(i) < 0) {
          if (!std::isfinite(prob.lower(i))) finite = false;
          else support += prob.lower(i) * dy(i);
        }
      }
      if (finite && detail::inf_norm(prob.a.transpose() * dy) <= st.eps_infeasible * dy_norm &&
          support < -st.eps_infeasible * dy_norm) {
        best.status = Status::PrimalInfeasible;
        best.iterations = it + 1;
        return best;
      }
    }

    // polish each time the residuals drop by another decade
    if (st.polish && std::max(prim, dual) <= polish_level) {
      polish_level = 0.1 * std::max(prim, dual);
      if (auto pol = detail::polish(prob, yu, unscale_z(z))) {
        if (pol->primal_residual <= st.eps_abs && pol->dual_residual <= std::max(st.eps_abs, 1e-3 * dual)) {
          pol->iterations = it + 1;
          return *pol;
        }
      }
    }
    if (prim <= st.eps_abs && dual <= st.eps_abs) {
      best.status = Status::Solved;
      best.iterations = it + 1;
      if (st.polish) {
        if (auto pol = detail::polish(prob, yu, unscale_z(z)))
          if (pol->primal_residual <= st.eps_abs && pol->dual_residual <= st.eps_abs) {
            pol->iterations = it + 1;
            return *pol;
          }
      }
      return best;
    }
    if ((it + 1) % st.adapt_every == 0) {
      const double prim_s = detail::inf_norm(axs - z) / std::max({detail::inf_norm(axs), detail::inf_norm(z), 1e-12});
      const double dual_s = detail::inf_norm(s.p * x + s.q + s.a.transpose() * y) /
                            std::max({detail::inf_norm(s.p * x), detail::inf_norm(s.a.transpose() * y),
                                      detail::inf_norm(s.q), 1e-12});
      if (dual_s > 0 && prim_s > 0) {
        const double rho_new = std::clamp(rho * std::sqrt(prim_s / dual_s), 1e-6, 1e6);
        if (rho_new > 5.0 * rho || rho_new < 0.2 * rho) {
          rho = rho_new;
          set_rho();
          factor();
        }
      }
    }
  }
  best.iterations = it;
  best.status = Status::MaxIterations;
  if (st.polish) {
    if (auto pol = detail::polish(prob, unscale_y(y), unscale_z(z)))
      if (pol->primal_residual <= st.eps_abs && pol->dual_residual <= std::max(st.eps_abs, best.dual_residual)) {
        pol->iterations = it;
        return *pol;
      }
  }
  return best;
}

}  // namespace netglm::qp
