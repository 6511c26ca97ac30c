#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace netglm;

namespace {

struct Instance {
  Dataset data;
  Hypergraph graph;
  VertexSet s1;
};

// Lattice-coupled Gibbs data with an ascending-order independent set.
Instance make_instance(int rows, int cols, int d, double beta, std::uint64_t seed, double signal = 1.0) {
  Rng rng(seed);
  Instance in;
  in.graph = from_ising(lattice2d(rows, cols), beta, 0.25);
  const int n = rows * cols;
  in.data.x = sample_covariates(n, CovariateSpec{d, ArCovariance{0.2}}, rng);
  Vector theta = Vector::Zero(d);
  theta(0) = signal;
  if (d > 1) theta(1) = -0.5 * signal;
  in.data.y = gibbs_sampler(ModelSpec{in.graph, theta}, in.data.x, 200, rng);
  in.s1 = greedy_strong_independent_set(in.graph);
  return in;
}

oracle::Mple2d to_oracle(const Instance& in, double lambda) {
  const auto m = static_cast<Eigen::Index>(in.s1.size());
  oracle::Mple2d o{Matrix(m, 2), Vector(m), Vector(m), lambda};
  for (Eigen::Index r = 0; r < m; ++r) {
    const int i = in.s1[static_cast<std::size_t>(r)];
    o.x.row(r) = in.data.x.row(i);
    o.y(r) = in.data.y(i);
    double field = 0.0;
    for (int k : in.graph.incident(i)) {
      double prod = in.graph.edge(static_cast<std::size_t>(k)).weight;
      for (int j : in.graph.edge(static_cast<std::size_t>(k)).vertices)
        if (j != i) prod *= in.data.y(j);
      field += prod;
    }
    o.m(r) = field;
  }
  return o;
}

}  // namespace

TEST(PseudoLikelihood, Examples) {
  const Dataset zero{Matrix::Zero(3, 2), Vector{{1.0, -1.0, 1.0}}};
  EXPECT_EQ(neg_pseudo_loglik(Vector::Zero(2), zero, Hypergraph(3), VertexSet{0, 1, 2}), 0.0);

  const Dataset one{Matrix{{1.0}}, Vector{{1.0}}};
  EXPECT_NEAR(neg_pseudo_loglik(Vector{{1.0}}, one, Hypergraph(1), VertexSet{0}),
              -(1.0 - std::log(std::cosh(1.0))), 1e-15);
  EXPECT_NEAR(neg_pseudo_loglik(Vector{{1.0}}, one, Hypergraph(1), VertexSet{0}), -0.5662191695169729, 1e-15);

  EXPECT_THROW(neg_pseudo_loglik(Vector::Zero(2), zero, Hypergraph(3), VertexSet{}), InsufficientDataError);
  EXPECT_THROW(neg_pseudo_loglik(Vector::Zero(3), zero, Hypergraph(3), VertexSet{0}), ArgumentError);
}

TEST(PseudoLikelihood, DifferencesMatchConditionalLogLikelihood) {
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    const Instance in = make_instance(4, 5, 3, 0.3, 100 + t);
    const Vector b1 = Vector::NullaryExpr(3, [&] { return rng.normal(); });
    const Vector b2 = Vector::NullaryExpr(3, [&] { return rng.normal(); });
    // average log P(y_i | y_-i) under each coefficient vector
    const auto avg_cond = [&](const Vector& b) {
      double acc = 0.0;
      for (int i : in.s1) {
        const double p = conditional_prob_plus(ModelSpec{in.graph, b}, in.data, i);
        acc += std::log(in.data.y(i) > 0 ? p : 1.0 - p);
      }
      return acc / static_cast<double>(in.s1.size());
    };
    const double lhs = neg_pseudo_loglik(b1, in.data, in.graph, in.s1) - neg_pseudo_loglik(b2, in.data, in.graph, in.s1);
    EXPECT_NEAR(lhs, -(avg_cond(b1) - avg_cond(b2)), 1e-10);
  }
}

TEST(PseudoGradient, Examples) {
  const Dataset zero{Matrix::Zero(4, 3), Vector{{1.0, -1.0, 1.0, 1.0}}};
  EXPECT_TRUE(pseudo_grad(Vector::Ones(3), zero, Hypergraph(4), VertexSet{0, 2, 3}).isZero());

  const Dataset one{Matrix{{2.0}}, Vector{{1.0}}};
  EXPECT_DOUBLE_EQ(pseudo_grad(Vector::Zero(1), one, Hypergraph(1), VertexSet{0})(0), -2.0);
}

TEST(PseudoGradient, MatchesCentralDifferences) {
  Rng rng(10);
  for (int t = 0; t < 20; ++t) {
    const int d = 1 + static_cast<int>(rng.below(10));
    const Instance in = make_instance(5, 6, d, 0.4, 200 + t);
    const PseudoLikelihood loss(in.data, in.graph, in.s1);
    const Vector b = Vector::NullaryExpr(d, [&] { return 0.5 * rng.normal(); });
    const Vector g = loss.gradient(b);
    Vector fd(d);
    const double h = 1e-5;
    for (int k = 0; k < d; ++k) {
      Vector bp = b, bm = b;
      bp(k) += h;
      bm(k) -= h;
      fd(k) = (loss.value(bp) - loss.value(bm)) / (2 * h);
    }
    EXPECT_LE((g - fd).norm(), 1e-6 * std::max(1.0, g.norm()));
  }
}

TEST(PseudoLikelihood, ConvexAlongSegments) {
  Rng rng(12);
  const Instance in = make_instance(6, 6, 4, 0.3, 5);
  const PseudoLikelihood loss(in.data, in.graph, in.s1);
  for (int t = 0; t < 200; ++t) {
    const Vector a = Vector::NullaryExpr(4, [&] { return 2.0 * rng.normal(); });
    const Vector b = Vector::NullaryExpr(4, [&] { return 2.0 * rng.normal(); });
    EXPECT_LE(loss.value(0.5 * (a + b)), 0.5 * (loss.value(a) + loss.value(b)) + 1e-12);
  }
  const Matrix hess = loss.hessian(Vector::Zero(4));
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(hess).eigenvalues().minCoeff(), -1e-12);
}

TEST(PseudoLikelihood, InvariantToSubsetOrder) {
  const Instance in = make_instance(6, 6, 3, 0.3, 8);
  VertexSet reversed(in.s1.rbegin(), in.s1.rend());
  const Vector b{{0.3, -0.2, 0.1}};
  EXPECT_NEAR(neg_pseudo_loglik(b, in.data, in.graph, in.s1), neg_pseudo_loglik(b, in.data, in.graph, reversed),
              1e-14);
  const MpleFit f1 = fit_mple(in.data, in.graph, in.s1, 0.02);
  const MpleFit f2 = fit_mple(in.data, in.graph, reversed, 0.02);
  EXPECT_LE((f1.theta_tilde - f2.theta_tilde).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(LambdaDefault, Examples) {
  EXPECT_NEAR(lambda_default(1600, 100, 1.0), 0.053649150657233684, 1e-15);
  EXPECT_NEAR(lambda_default(1600, 100, 1.0), std::sqrt(std::log(100.0) / 1600.0), 1e-16);
  EXPECT_EQ(lambda_default(1600, 1, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(lambda_default(900, 50, 0.8), 2 * lambda_default(900, 50, 0.4));
  EXPECT_THROW(lambda_default(0, 5, 1.0), ArgumentError);
  EXPECT_THROW(lambda_default(10, 5, 0.0), ArgumentError);
}

TEST(SoftThreshold, MatchesComponentwiseDefinition) {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const Vector z = Vector::NullaryExpr(6, [&] { return 2.0 * rng.normal(); });
    const double tau = rng.uniform();
    const Vector p = soft_threshold(z, tau);
    for (int k = 0; k < 6; ++k) {
      const double expect = z(k) > tau ? z(k) - tau : z(k) < -tau ? z(k) + tau : 0.0;
      EXPECT_DOUBLE_EQ(p(k), expect);
    }
  }
}

TEST(FitMple, LargePenaltyGivesZero) {
  const Instance in = make_instance(6, 6, 4, 0.2, 3);
  const double gmax = pseudo_grad(Vector::Zero(4), in.data, in.graph, in.s1).lpNorm<Eigen::Infinity>();
  const MpleFit fit = fit_mple(in.data, in.graph, in.s1, gmax * 1.0001);
  EXPECT_TRUE(fit.theta_tilde.isZero());
  EXPECT_TRUE(fit.converged);
}

TEST(FitMple, MatchesBruteForceOracleInTwoDimensions) {
  for (int t = 0; t < 5; ++t) {
    const Instance in = make_instance(10, 10, 2, 0.2, 300 + t);  // |S1| = 50
    ASSERT_EQ(in.s1.size(), 50U);
    const double lambda = 0.02 + 0.01 * t;
    const MpleFit fit = fit_mple(in.data, in.graph, in.s1, lambda);
    const Eigen::Vector2d ref = to_oracle(in, lambda).solve();
    EXPECT_TRUE(fit.converged);
    EXPECT_LE(fit.kkt_residual, 1e-7);
    EXPECT_NEAR(fit.theta_tilde(0), ref(0), 1e-4);
    EXPECT_NEAR(fit.theta_tilde(1), ref(1), 1e-4);
  }
}

TEST(FitMple, KktCertificateAndMonotoneObjective) {
  const Instance in = make_instance(12, 12, 8, 0.3, 41);
  MpleOptions opts;
  opts.record_trace = true;
  const double lambda = 0.03;
  const MpleFit fit = fit_mple(in.data, in.graph, in.s1, lambda, opts);
  ASSERT_TRUE(fit.converged);
  for (std::size_t k = 1; k < fit.objective_trace.size(); ++k)
    EXPECT_LE(fit.objective_trace[k], fit.objective_trace[k - 1] + 1e-15);
  const Vector g = pseudo_grad(fit.theta_tilde, in.data, in.graph, in.s1);
  for (int k = 0; k < 8; ++k) {
    if (fit.theta_tilde(k) != 0.0)
      EXPECT_LE(std::abs(g(k) + lambda * (fit.theta_tilde(k) > 0 ? 1 : -1)), opts.tol);
    else
      EXPECT_LE(std::abs(g(k)), lambda + opts.tol);
  }
  EXPECT_NEAR(fit.objective,
              neg_pseudo_loglik(fit.theta_tilde, in.data, in.graph, in.s1) + lambda * fit.theta_tilde.lpNorm<1>(),
              1e-12);
}

TEST(FitMple, StartingPointDoesNotMatter) {
  const Instance in = make_instance(12, 12, 6, 0.3, 77);
  MpleOptions opts;
  opts.init = Vector::Constant(6, 2.0);
  const MpleFit a = fit_mple(in.data, in.graph, in.s1, 0.03);
  const MpleFit b = fit_mple(in.data, in.graph, in.s1, 0.03, opts);
  EXPECT_LE((a.theta_tilde - b.theta_tilde).lpNorm<Eigen::Infinity>(), 1e-5);
}

TEST(FitMple, IterationCapReportsNonConvergence) {
  const Instance in = make_instance(12, 12, 6, 0.3, 78);
  MpleOptions opts;
  opts.max_iter = 2;
  const MpleFit fit = fit_mple(in.data, in.graph, in.s1, 0.001, opts);
  EXPECT_FALSE(fit.converged);
  EXPECT_EQ(fit.iterations, 2);
  EXPECT_THROW(fit_mple(in.data, in.graph, in.s1, -1.0), ArgumentError);
}

TEST(FitMple, StandardizedFitSatisfiesScaledKkt) {
  Instance in = make_instance(12, 12, 3, 0.3, 79);
  in.data.x.col(1) *= 10.0;
  MpleOptions opts;
  opts.standardize = true;
  const MpleFit fit = fit_mple(in.data, in.graph, in.s1, 0.03, opts);
  EXPECT_TRUE(fit.converged);
  // in standardized coordinates b_k sd_k the gradient scales by 1/sd_k
  const Vector g = pseudo_grad(fit.theta_tilde, in.data, in.graph, in.s1);
  Vector sd(3);
  for (int k = 0; k < 3; ++k) {
    Vector col(static_cast<Eigen::Index>(in.s1.size()));
    for (std::size_t r = 0; r < in.s1.size(); ++r) col(static_cast<Eigen::Index>(r)) = in.data.x(in.s1[r], k);
    sd(k) = std::sqrt((col.array() - col.mean()).square().mean());
  }
  EXPECT_LE(kkt_residual(g.cwiseQuotient(sd), fit.theta_tilde.cwiseProduct(sd), 0.03), 1e-6);
}

TEST(FitMple, ErrorShrinksWithSampleSize) {
  // median over seeds of |theta_tilde - theta|_2 on lattices of growing size
  const auto median_error = [](int side) {
    std::vector<double> errs;
    for (int seed = 0; seed < 20; ++seed) {
      Rng rng(mix_seed(900 + side, seed));
      const Hypergraph h = from_ising(lattice2d(side, side), 0.2, 0.25);
      const int n = side * side, d = 100;
      Dataset data;
      data.x = sample_covariates(n, CovariateSpec{d, ArCovariance{0.2}}, rng);
      Vector theta = Vector::Zero(d);
      theta.head(5).setConstant(1.0);
      data.y = gibbs_sampler(ModelSpec{h, theta}, data.x, 200, rng);
      const VertexSplit sp = split_independent_set(greedy_strong_independent_set(h), rng);
      const MpleFit fit = fit_mple(data, h, sp.s1, lambda_default(n, d, kDefaultLambdaC));
      errs.push_back((fit.theta_tilde - theta).norm());
    }
    std::sort(errs.begin(), errs.end());
    return 0.5 * (errs[9] + errs[10]);
  };
  const double e20 = median_error(20), e30 = median_error(30), e40 = median_error(40);
  EXPECT_GT(e20, e30);
  EXPECT_GT(e30, e40);
}
