#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "netglm/error.hpp"
#include "netglm/hypergraph.hpp"
#include "netglm/inference.hpp"
#include "netglm/io.hpp"
#include "netglm/mrf.hpp"
#include "netglm/rng.hpp"

namespace netglm {

struct LatticeGraph {
  int rows = 40;
  int cols = 40;
};

struct RegularGraph {
  int n = 1600;
  int delta = 4;
};

/// Graph read from a JSON file; its edge weights are used verbatim and beta is ignored.
struct FileGraph {
  std::string path;
};

using GraphSpec = std::variant<LatticeGraph, RegularGraph, FileGraph>;

struct CoordinateTarget {
  int index = 1;
};

/// Q = theta' theta (M = I).
struct QuadraticTarget {};

using TargetSpec = std::variant<CoordinateTarget, QuadraticTarget>;

enum class Method { Proposed, Baseline, Both };

struct ExperimentConfig {
  GraphSpec graph = LatticeGraph{};
  double beta = 0.2;
  int d = 100;
  int s = 5;
  double theta_value = 1.0;
  std::optional<double> target_value;  // overrides theta at the target coordinate
  double rho = 0.2;
  int sweeps = 2000;
  int reps = 100;
  double alpha = 0.05;
  TargetSpec target = CoordinateTarget{};
  Method method = Method::Both;
  std::uint64_t seed = 1;
  double lambda_c = kDefaultLambdaC;
  bool lambda_on_s1 = false;
  ProjectionConstants qp_consts;

  void validate() const {
    if (d < 1) throw ArgumentError("config: d must be >= 1");
    if (s < 0 || s > d) throw ArgumentError("config: need 0 <= s <= d");
    if (reps < 1) throw ArgumentError("config: reps must be >= 1");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw ArgumentError("config: beta must be finite and >= 0");
    if (!(std::abs(rho) < 1.0)) throw ArgumentError("config: |rho| must be < 1");
    if (sweeps < 1) throw ArgumentError("config: sweeps must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("config: alpha must lie in (0, 1)");
    if (!(lambda_c > 0.0)) throw ArgumentError("config: lambda_c must be > 0");
    if (const auto* t = std::get_if<CoordinateTarget>(&target); t && (t->index < 0 || t->index >= d))
      throw ArgumentError("config: target index out of range");
    if (target_value && !std::holds_alternative<CoordinateTarget>(target))
      throw ArgumentError("config: target_value needs a coordinate target");
  }

  PipelineConfig pipeline() const {
    PipelineConfig p;
    p.lambda_c = lambda_c;
    p.lambda_on_s1 = lambda_on_s1;
    p.consts = qp_consts;
    return p;
  }
};

/// Outcome of one method on one replicate.
struct MethodRecord {
  bool ok = false;
  std::string error;
  double estimate = 0.0;
  double variance = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double length = 0.0;
  double t_stat = 0.0;
  bool covered = false;
  bool one_sided_reject = false;
  double oracle_variance = 0.0;  // at the true theta; linear targets only
  double lambda = 0.0;
  double kkt_residual = 0.0;
  int inflations = 0;
  std::size_t s1_size = 0;
  std::size_t s2_size = 0;
};

struct ReplicateRecord {
  int rep = 0;
  std::uint64_t seed = 0;
  double truth = 0.0;
  std::optional<MethodRecord> proposed;
  std::optional<MethodRecord> baseline;
};

struct MethodSummary {
  double coverage = 0.0;
  double median_length = 0.0;
  double max_length = 0.0;
  int successes = 0;
  int failures = 0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<ReplicateRecord> records;
  std::optional<MethodSummary> proposed;
  std::optional<MethodSummary> baseline;
  double runtime_seconds = 0.0;
};

/// Everything a replicate draws before inference.
struct SimulatedData {
  Hypergraph graph;
  Vector theta;
  Dataset data;
};

namespace detail {

enum Stream : std::uint64_t { kGraph = 1, kCovariates = 2, kGibbs = 3, kProposed = 4, kBaseline = 5 };

inline Vector true_theta(const ExperimentConfig& cfg) {
  Vector theta = Vector::Zero(cfg.d);
  theta.head(cfg.s).setConstant(cfg.theta_value);
  if (cfg.target_value) theta(std::get<CoordinateTarget>(cfg.target).index) = *cfg.target_value;
  return theta;
}

inline Hypergraph build_graph(const ExperimentConfig& cfg, Rng& rng) {
  return std::visit(
      [&](const auto& g) -> Hypergraph {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, LatticeGraph>) {
          return from_ising(lattice2d(g.rows, g.cols), cfg.beta, 0.25);
        } else if constexpr (std::is_same_v<G, RegularGraph>) {
          if (g.delta < 1) throw ArgumentError("config: regular graph needs delta >= 1");
          return from_ising(random_regular(g.n, g.delta, rng), cfg.beta, 1.0 / g.delta);
        } else {
          return io::load_graph(g.path);
        }
      },
      cfg.graph);
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace detail

/// Graph, theta and (X, y) for replicate `rep`. A fixed graph (lattice or file)
/// may be supplied to skip rebuilding it.
inline SimulatedData simulate_replicate(const ExperimentConfig& cfg, int rep, const Hypergraph* fixed_graph = nullptr) {
  const std::uint64_t rs = mix_seed(cfg.seed, static_cast<std::uint64_t>(rep));
  Rng graph_rng(mix_seed(rs, detail::kGraph));
  Rng cov_rng(mix_seed(rs, detail::kCovariates));
  Rng gibbs_rng(mix_seed(rs, detail::kGibbs));

  SimulatedData sim;
  sim.graph = fixed_graph ? *fixed_graph : detail::build_graph(cfg, graph_rng);
  sim.theta = detail::true_theta(cfg);
  const int n = sim.graph.vertex_count();
  sim.data.x = sample_covariates(n, CovariateSpec{cfg.d, ArCovariance{cfg.rho}}, cov_rng);
  sim.data.y = gibbs_sampler(ModelSpec{sim.graph, sim.theta}, sim.data.x, cfg.sweeps, gibbs_rng);
  return sim;
}

inline double true_functional(const ExperimentConfig& cfg, const Vector& theta) {
  if (const auto* t = std::get_if<CoordinateTarget>(&cfg.target)) return theta(t->index);
  return theta.squaredNorm();
}

namespace detail {

inline MethodRecord run_method(const ExperimentConfig& cfg, const SimulatedData& sim, double truth, bool baseline,
                               Rng& rng) {
  MethodRecord rec;
  const PipelineConfig pcfg = cfg.pipeline();
  const Hypergraph empty(sim.graph.vertex_count());
  const Hypergraph& h = baseline ? empty : sim.graph;
  try {
    const FirstStep fs = first_step(sim.data, h, !baseline, pcfg, rng);
    rec.lambda = fs.fit.lambda;
    rec.kkt_residual = fs.fit.kkt_residual;
    rec.s1_size = fs.split.s1.size();
    rec.s2_size = fs.split.s2.size();
    if (const auto* t = std::get_if<CoordinateTarget>(&cfg.target)) {
      const Vector c = Vector::Unit(cfg.d, t->index);
      const PipelineReport r = linear_from_first_step(sim.data, h, fs, c, cfg.alpha, pcfg);
      rec.estimate = r.inference.estimate;
      rec.variance = r.inference.variance;
      rec.ci_lo = r.inference.ci_lo;
      rec.ci_hi = r.inference.ci_hi;
      rec.t_stat = r.inference.t_stat;
      rec.one_sided_reject = one_sided_reject(rec.estimate, rec.variance, cfg.alpha);
      rec.oracle_variance = oracle_variance(r.projection, sim.theta, sim.data, fs.split.s2, h);
      rec.inflations = r.projection.inflations;
    } else {
      const Matrix m = Matrix::Identity(cfg.d, cfg.d);
      const QuadraticReport r = quadratic_from_first_step(sim.data, h, fs, m, cfg.alpha, pcfg);
      rec.estimate = r.inference.q_hat;
      rec.variance = r.inference.variance;
      rec.ci_lo = r.inference.ci_lo;
      rec.ci_hi = r.inference.ci_hi;
      rec.t_stat = (rec.estimate - truth) / std::sqrt(rec.variance);
      rec.inflations = r.projection ? r.projection->inflations : 0;
    }
    rec.length = rec.ci_hi - rec.ci_lo;
    rec.covered = rec.ci_lo <= truth && truth <= rec.ci_hi;
    rec.ok = true;
  } catch (const std::exception& e) {
    rec = MethodRecord{};
    rec.error = e.what();
  }
  return rec;
}

inline ReplicateRecord run_replicate(const ExperimentConfig& cfg, int rep, const Hypergraph* fixed_graph) {
  if (rep < 0 || rep >= cfg.reps) throw ArgumentError("run_replicate: rep out of range");
  ReplicateRecord out;
  out.rep = rep;
  out.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(rep));
  const bool want_p = cfg.method != Method::Baseline;
  const bool want_b = cfg.method != Method::Proposed;
  out.truth = true_functional(cfg, detail::true_theta(cfg));
  SimulatedData sim;
  try {
    sim = simulate_replicate(cfg, rep, fixed_graph);
  } catch (const std::exception& e) {
    MethodRecord failed;
    failed.error = "rep " + std::to_string(rep) + ": simulation: " + e.what();
    if (want_p) out.proposed = failed;
    if (want_b) out.baseline = failed;
    return out;
  }
  if (want_p) {
    Rng rng(mix_seed(out.seed, kProposed));
    out.proposed = run_method(cfg, sim, out.truth, false, rng);
    if (!out.proposed->ok) out.proposed->error = "rep " + std::to_string(rep) + ": " + out.proposed->error;
  }
  if (want_b) {
    Rng rng(mix_seed(out.seed, kBaseline));
    out.baseline = run_method(cfg, sim, out.truth, true, rng);
    if (!out.baseline->ok) out.baseline->error = "rep " + std::to_string(rep) + ": " + out.baseline->error;
  }
  return out;
}

}  // namespace detail

/// One replicate: seed mix(cfg.seed, rep), fresh graph (when random), X, y, then the
/// requested method(s). Failures are recorded in the record, not thrown.
inline ReplicateRecord run_replicate(const ExperimentConfig& cfg, int rep) {
  cfg.validate();
  return detail::run_replicate(cfg, rep, nullptr);
}

/// Coverage and length statistics over the successful records of one method.
inline MethodSummary summarize(std::span<const ReplicateRecord> records, bool baseline) {
  MethodSummary s;
  std::vector<double> lengths;
  int covered = 0;
  for (const auto& r : records) {
    const auto& m = baseline ? r.baseline : r.proposed;
    if (!m) continue;
    if (!m->ok) {
      ++s.failures;
      continue;
    }
    ++s.successes;
    covered += m->covered;
    lengths.push_back(m->length);
  }
  if (s.successes == 0) return s;
  s.coverage = static_cast<double>(covered) / s.successes;
  s.median_length = detail::median(lengths);
  s.max_length = *std::max_element(lengths.begin(), lengths.end());
  return s;
}

/// Worker count: hardware concurrency, capped by NETGLM_THREADS when set.
inline unsigned worker_count(int jobs) {
  unsigned w = std::max(1U, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("NETGLM_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap >= 1) w = std::min(w, static_cast<unsigned>(cap));
  }
  return std::min(w, static_cast<unsigned>(std::max(jobs, 1)));
}

/// Runs `count` independent jobs on a pool; job k writes only slot k.
template <typename Job>
void parallel_for(int count, Job&& job) {
  const unsigned workers = worker_count(count);
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  auto body = [&] {
    for (int k; (k = next.fetch_add(1)) < count;) {
      try {
        job(k);
      } catch (...) {
        if (!failed.exchange(true)) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> pool;
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(body);
  body();
  pool.clear();
  if (first_error) std::rethrow_exception(first_error);
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  std::unique_ptr<Hypergraph> fixed;
  if (!std::holds_alternative<RegularGraph>(cfg.graph)) {
    Rng unused(0);
    fixed = std::make_unique<Hypergraph>(detail::build_graph(cfg, unused));
  }

  ExperimentResult res;
  res.config = cfg;
  res.records.resize(static_cast<std::size_t>(cfg.reps));
  parallel_for(cfg.reps, [&](int k) { res.records[static_cast<std::size_t>(k)] = detail::run_replicate(cfg, k, fixed.get()); });

  const auto finish = [&](bool baseline) {
    MethodSummary s = summarize(res.records, baseline);
    if (s.successes == 0) {
      const auto& first = baseline ? res.records.front().baseline : res.records.front().proposed;
      throw ExperimentError(std::string(baseline ? "baseline" : "proposed") + ": all replicates failed; first: " +
                            (first ? first->error : std::string("?")));
    }
    return s;
  };
  if (cfg.method != Method::Baseline) res.proposed = finish(false);
  if (cfg.method != Method::Proposed) res.baseline = finish(true);
  res.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

// ---------------------------------------------------------------------------
// Table grids

enum class Scale { Full, Desk };

struct TableRow {
  int table = 1;
  double row_param = 0.0;
  std::string method;
  MethodSummary summary;
  int reps = 0;
  std::uint64_t seed = 0;
};

/// Configs of one table's grid, paired with the row parameter.
inline std::vector<std::pair<double, ExperimentConfig>> table_grid(int table, Scale scale, std::uint64_t seed) {
  const bool desk = scale == Scale::Desk;
  ExperimentConfig base;
  base.seed = seed;
  base.graph = desk ? LatticeGraph{20, 20} : LatticeGraph{40, 40};
  base.d = desk ? 50 : 100;
  base.s = desk ? 3 : 5;
  std::vector<std::pair<double, ExperimentConfig>> grid;
  switch (table) {
    case 1:
      for (double b : {0.1, 0.15, 0.2, 0.25, 0.3}) {
        ExperimentConfig c = base;
        c.beta = b;
        grid.emplace_back(b, c);
      }
      break;
    case 2:
      for (int delta = 4; delta <= 8; ++delta) {
        ExperimentConfig c = base;
        c.graph = RegularGraph{desk ? 400 : 1600, delta};
        grid.emplace_back(delta, c);
      }
      break;
    case 3:
      for (int d : {100, 125, 150, 175, 200}) {
        ExperimentConfig c = base;
        c.d = desk ? d / 2 : d;
        grid.emplace_back(c.d, c);
      }
      break;
    default:
      throw ArgumentError("reproduce: table must be 1, 2 or 3");
  }
  return grid;
}

inline std::vector<TableRow> reproduce_table(int table, Scale scale, std::uint64_t seed) {
  std::vector<TableRow> rows;
  for (const auto& [param, cfg] : table_grid(table, scale, seed)) {
    const ExperimentResult res = run_experiment(cfg);
    rows.push_back({table, param, "proposed", *res.proposed, cfg.reps, seed});
    rows.push_back({table, param, "baseline", *res.baseline, cfg.reps, seed});
  }
  return rows;
}

inline std::string table_csv(std::span<const TableRow> rows) {
  std::string out = "table,row_param,method,coverage,median_len,max_len,reps,failures,seed\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%g,%s,%.4f,%.6f,%.6f,%d,%d,%llu\n", r.table, r.row_param, r.method.c_str(),
                  r.summary.coverage, r.summary.median_length, r.summary.max_length, r.reps, r.summary.failures,
                  static_cast<unsigned long long>(r.seed));
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config JSON, field for field

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  using nlohmann::json;
  json j;
  std::visit(
      [&](const auto& g) {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, LatticeGraph>)
          j["graph"] = {{"kind", "lattice"}, {"rows", g.rows}, {"cols", g.cols}};
        else if constexpr (std::is_same_v<G, RegularGraph>)
          j["graph"] = {{"kind", "regular"}, {"n", g.n}, {"delta", g.delta}};
        else
          j["graph"] = {{"kind", "file"}, {"path", g.path}};
      },
      cfg.graph);
  j["beta"] = cfg.beta;
  j["d"] = cfg.d;
  j["s"] = cfg.s;
  j["theta_value"] = cfg.theta_value;
  j["target_value"] = cfg.target_value ? json(*cfg.target_value) : json(nullptr);
  j["rho"] = cfg.rho;
  j["sweeps"] = cfg.sweeps;
  j["reps"] = cfg.reps;
  j["alpha"] = cfg.alpha;
  if (const auto* t = std::get_if<CoordinateTarget>(&cfg.target))
    j["target"] = {{"kind", "coordinate"}, {"index", t->index}};
  else
    j["target"] = {{"kind", "quadratic"}, {"m", "identity"}};
  j["method"] = cfg.method == Method::Proposed ? "proposed" : cfg.method == Method::Baseline ? "baseline" : "both";
  j["seed"] = cfg.seed;
  j["lambda_c"] = cfg.lambda_c;
  j["lambda_on_s1"] = cfg.lambda_on_s1;
  j["qp_consts"] = {{"c1", cfg.qp_consts.c1}, {"c2", cfg.qp_consts.c2}, {"c3", cfg.qp_consts.c3}};
  return j;
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> known = {"graph",  "beta",   "d",     "s",      "theta_value",
                                                 "target_value", "rho", "sweeps", "reps", "alpha",
                                                 "target", "method", "seed",  "lambda_c", "lambda_on_s1", "qp_consts"};
  ExperimentConfig cfg;
  try {
    if (!j.is_object()) throw ArgumentError("config json: expected an object");
    for (const auto& [key, _] : j.items())
      if (std::find(known.begin(), known.end(), key) == known.end())
        throw ArgumentError("config json: unknown key '" + key + "'");
    if (j.contains("graph")) {
      const auto& g = j.at("graph");
      const std::string kind = g.at("kind").get<std::string>();
      if (kind == "lattice")
        cfg.graph = LatticeGraph{g.at("rows").get<int>(), g.at("cols").get<int>()};
      else if (kind == "regular")
        cfg.graph = RegularGraph{g.at("n").get<int>(), g.at("delta").get<int>()};
      else if (kind == "file")
        cfg.graph = FileGraph{g.at("path").get<std::string>()};
      else
        throw ArgumentError("config json: unknown graph kind '" + kind + "'");
    }
    const auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("beta", cfg.beta);
    get("d", cfg.d);
    get("s", cfg.s);
    get("theta_value", cfg.theta_value);
    if (j.contains("target_value") && !j.at("target_value").is_null())
      cfg.target_value = j.at("target_value").get<double>();
    get("rho", cfg.rho);
    get("sweeps", cfg.sweeps);
    get("reps", cfg.reps);
    get("alpha", cfg.alpha);
    if (j.contains("target")) {
      const auto& t = j.at("target");
      const std::string kind = t.at("kind").get<std::string>();
      if (kind == "coordinate")
        cfg.target = CoordinateTarget{t.at("index").get<int>()};
      else if (kind == "quadratic") {
        if (t.contains("m") && t.at("m").get<std::string>() != "identity")
          throw ArgumentError("config json: only M = identity is supported");
        cfg.target = QuadraticTarget{};
      } else {
        throw ArgumentError("config json: unknown target kind '" + kind + "'");
      }
    }
    if (j.contains("method")) {
      const std::string m = j.at("method").get<std::string>();
      if (m == "proposed")
        cfg.method = Method::Proposed;
      else if (m == "baseline")
        cfg.method = Method::Baseline;
      else if (m == "both")
        cfg.method = Method::Both;
      else
        throw ArgumentError("config json: unknown method '" + m + "'");
    }
    get("seed", cfg.seed);
    get("lambda_c", cfg.lambda_c);
    get("lambda_on_s1", cfg.lambda_on_s1);
    if (j.contains("qp_consts")) {
      const auto& q = j.at("qp_consts");
      cfg.qp_consts = {q.at("c1").get<double>(), q.at("c2").get<double>(), q.at("c3").get<double>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("config json: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace netglm
