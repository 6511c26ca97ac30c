#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "netglm/error.hpp"
#include "netglm/hypergraph.hpp"
#include "netglm/rng.hpp"

namespace netglm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Responses y in {-1,+1}^n with covariates X (row i is X_i).
struct Dataset {
  Matrix x;
  Vector y;

  Eigen::Index n() const noexcept { return x.rows(); }
  Eigen::Index d() const noexcept { return x.cols(); }

  /// (y_i + 1) / 2 in {0, 1}.
  double y01(Eigen::Index i) const { return 0.5 * (y(i) + 1.0); }

  void validate() const {
    if (x.rows() != y.size()) throw ArgumentError("dataset: X row count differs from length of y");
    for (Eigen::Index i = 0; i < y.size(); ++i)
      if (y(i) != 1.0 && y(i) != -1.0) throw ArgumentError("dataset: responses must be -1 or +1");
  }
};

struct ModelSpec {
  Hypergraph graph;
  Vector theta;

  void validate() const {
    if (theta.size() < 1) throw ArgumentError("model: theta must have length >= 1");
    if (!theta.allFinite()) throw ArgumentError("model: theta must be finite");
  }
};

struct ArCovariance {
  double rho = 0.2;
};

/// Covariate law: rows i.i.d. N(0, Sigma), Sigma either AR(rho) or explicit.
struct CovariateSpec {
  int d = 1;
  std::variant<ArCovariance, Matrix> kind = ArCovariance{};
};

/// log cosh(x) = |x| + log1p(exp(-2|x|)) - log 2.
inline double log_cosh(double x) noexcept {
  const double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a)) - M_LN2;
}

/// f(x) = e^x / (e^x + e^-x). The lower tail e^(-2|x|) / (1 + e^(-2|x|)) is computed
/// directly and the upper value as its complement, so f(x) + f(-x) rounds to exactly 1
/// while f stays positive far into the lower tail.
inline double f_sigmoid(double x) noexcept {
  const double e = std::exp(-2.0 * std::abs(x));
  const double low = e / (1.0 + e);
  return x < 0.0 ? low : 1.0 - low;
}

/// f(x) (1 - f(x)) = 1 / (4 cosh^2 x), accurate in the tails.
inline double f_variance(double x) noexcept {
  const double c = std::cosh(x);
  return 0.25 / (c * c);
}

/// m_i(y) = sum over edges e containing i of g_e * prod_{j in e, j != i} y_j.
template <typename Y>
double local_field(const Hypergraph& h, const Y& y, VertexId i) {
  double m = 0.0;
  for (int k : h.incident(i)) {
    const auto& e = h.edge(static_cast<std::size_t>(k));
    double prod = e.weight;
    for (VertexId j : e.vertices)
      if (j != i) prod *= y[j];
    m += prod;
  }
  return m;
}

inline void check_dims(const Hypergraph& h, const Matrix& x, const Vector& theta) {
  if (x.rows() != h.vertex_count()) throw ArgumentError("covariate rows do not match vertex count");
  if (x.cols() != theta.size()) throw ArgumentError("covariate columns do not match length of theta");
}

/// P(y_i = +1 | y_-i, X) = f(m_i(y) + X_i' theta).
inline double conditional_prob_plus(const ModelSpec& m, const Dataset& data, VertexId i) {
  check_dims(m.graph, data.x, m.theta);
  if (data.y.size() != data.x.rows()) throw ArgumentError("dataset: X row count differs from length of y");
  m.graph.check_vertex(i);
  return f_sigmoid(local_field(m.graph, data.y, i) + data.x.row(i).dot(m.theta));
}

/// Systematic-scan Gibbs sampler: one sweep resamples sites 0..n-1 in order.
/// Without `init` the chain starts from i.i.d. uniform signs drawn from `rng`.
inline Vector gibbs_sampler(const ModelSpec& m, const Matrix& x, int sweeps, Rng& rng,
                            const std::optional<Vector>& init = std::nullopt) {
  if (sweeps < 1) throw ArgumentError("gibbs_sampler: sweeps must be >= 1");
  check_dims(m.graph, x, m.theta);
  const Eigen::Index n = x.rows();
  Vector y(n);
  if (init) {
    if (init->size() != n) throw ArgumentError("gibbs_sampler: init has wrong length");
    y = *init;
  } else {
    for (Eigen::Index i = 0; i < n; ++i) y(i) = rng.sign();
  }
  const Vector eta = x * m.theta;
  for (int s = 0; s < sweeps; ++s) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = f_sigmoid(local_field(m.graph, y, static_cast<VertexId>(i)) + eta(i));
      y(i) = rng.uniform() < p ? 1.0 : -1.0;
    }
  }
  return y;
}

/// Decodes configuration index `k` (bit i set <=> y_i = +1).
inline Vector config_to_signs(std::uint64_t k, int n) {
  Vector y(n);
  for (int i = 0; i < n; ++i) y(i) = ((k >> i) & 1U) ? 1.0 : -1.0;
  return y;
}

/// Exact law over all 2^n sign configurations, indexed as in config_to_signs.
inline std::vector<double> exact_distribution(const ModelSpec& m, const Matrix& x) {
  const int n = m.graph.vertex_count();
  if (n > 20) throw ResourceError("exact_distribution: n > 20 is too large to enumerate");
  check_dims(m.graph, x, m.theta);
  const Vector eta = x * m.theta;
  const std::size_t count = std::size_t{1} << n;
  std::vector<double> logw(count);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < count; ++k) {
    const Vector y = config_to_signs(k, n);
    double s = y.dot(eta);
    for (const auto& e : m.graph.edges()) {
      double prod = e.weight;
      for (VertexId j : e.vertices) prod *= y(j);
      s += prod;
    }
    logw[k] = s;
    top = std::max(top, s);
  }
  double z = 0.0;
  for (double& w : logw) {
    w = std::exp(w - top);
    z += w;
  }
  for (double& w : logw) w /= z;
  return logw;
}

/// Sigma_ij = rho^|i-j|.
inline Matrix ar_covariance(int d, double rho) {
  if (d < 1) throw ArgumentError("ar_covariance: d must be >= 1");
  if (!(std::abs(rho) < 1.0)) throw ArgumentError("ar_covariance: |rho| must be < 1");
  Matrix s(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) s(i, j) = std::pow(rho, std::abs(i - j));
  return s;
}

inline Matrix covariance_of(const CovariateSpec& spec) {
  if (const auto* ar = std::get_if<ArCovariance>(&spec.kind)) return ar_covariance(spec.d, ar->rho);
  const auto& m = std::get<Matrix>(spec.kind);
  if (m.rows() != spec.d || m.cols() != spec.d) throw ArgumentError("covariate matrix must be d x d");
  if (!m.isApprox(m.transpose(), 1e-12)) throw NotSpdError("covariate matrix is not symmetric");
  return m;
}

/// Lower Cholesky factor; throws NotSpdError when the matrix is not positive definite.
inline Matrix cholesky_lower(const Matrix& s) {
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) throw NotSpdError("matrix is not symmetric positive definite");
  return llt.matrixL();
}

/// Rows X_i = L z_i with L the lower Cholesky factor of Sigma and z_i standard normal.
inline Matrix sample_covariates(int n, const CovariateSpec& spec, Rng& rng) {
  if (n < 0) throw ArgumentError("sample_covariates: n must be >= 0");
  const Matrix l = cholesky_lower(covariance_of(spec));
  Matrix z(n, spec.d);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < spec.d; ++k) z(i, k) = rng.normal();
  return z * l.transpose();
}

}  // namespace netglm
