#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <netglm.hpp>
#include <string>

using namespace netglm;

namespace {

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-")
    std::cout << text;
  else
    io::write_file(out, text);
}

struct GenGraphArgs {
  std::string kind = "lattice";
  int rows = 40, cols = 40, n = 1600, delta = 4;
  double beta = 0.2;
  std::uint64_t seed = 1;
  std::string out;
};

int gen_graph(const GenGraphArgs& a) {
  Hypergraph h;
  if (a.kind == "lattice") {
    h = from_ising(lattice2d(a.rows, a.cols), a.beta, 0.25);
  } else {
    Rng rng(a.seed);
    if (a.delta < 1) throw ArgumentError("gen-graph: delta must be >= 1");
    h = from_ising(random_regular(a.n, a.delta, rng), a.beta, 1.0 / a.delta);
  }
  emit(a.out, io::graph_to_json(h).dump(1) + "\n");
  const DegreeReport dr = degree_report(h);
  if (!dr.field_sum_bounded())
    std::fprintf(stderr, "warning: max field sum %.4g exceeds 1\n", dr.max_field_sum);
  return 0;
}

struct SimulateArgs {
  std::string graph;
  int d = 100, s = 5, sweeps = 2000;
  double theta_value = 1.0, rho = 0.2;
  std::uint64_t seed = 1;
  std::string out;
};

int simulate(const SimulateArgs& a) {
  const Hypergraph h = io::load_graph(a.graph);
  if (a.s < 0 || a.s > a.d) throw ArgumentError("simulate: need 0 <= theta-sparse <= d");
  Vector theta = Vector::Zero(a.d);
  theta.head(a.s).setConstant(a.theta_value);
  Rng cov_rng(mix_seed(a.seed, 2));
  Rng gibbs_rng(mix_seed(a.seed, 3));
  Dataset data;
  data.x = sample_covariates(h.vertex_count(), CovariateSpec{a.d, ArCovariance{a.rho}}, cov_rng);
  data.y = gibbs_sampler(ModelSpec{h, theta}, data.x, a.sweeps, gibbs_rng);
  emit(a.out, io::dataset_to_csv(data));
  return 0;
}

struct FitArgs {
  std::string data, graph, out;
  std::uint64_t seed = 1;
  double lambda_c = kDefaultLambdaC;
};

int fit(const FitArgs& a) {
  const Dataset data = io::load_dataset(a.data);
  const Hypergraph h = io::load_graph(a.graph);
  PipelineConfig cfg;
  cfg.lambda_c = a.lambda_c;
  Rng rng(a.seed);
  const FirstStep fs = fit_first_step(data, h, cfg, rng);
  auto j = io::fit_to_json(fs.fit);
  j["s1"] = fs.split.s1;
  j["s2"] = fs.split.s2;
  emit(a.out, j.dump(1) + "\n");
  return 0;
}

struct InferArgs {
  std::string data, graph, c_file, quadratic, out;
  int c_index = -1;
  double alpha = 0.05, null_value = 0.0, lambda_c = kDefaultLambdaC;
  std::uint64_t seed = 1;
};

int infer(const InferArgs& a) {
  const Dataset data = io::load_dataset(a.data);
  const Hypergraph h = io::load_graph(a.graph);
  PipelineConfig cfg;
  cfg.lambda_c = a.lambda_c;
  cfg.null_value = a.null_value;
  Rng rng(a.seed);
  if (!a.quadratic.empty()) {
    if (a.quadratic != "identity") throw ArgumentError("infer: --quadratic supports only 'identity'");
    const Matrix m = Matrix::Identity(data.d(), data.d());
    emit(a.out, io::report_to_json(infer_quadratic_pipeline(data, h, m, a.alpha, cfg, rng)).dump(1) + "\n");
    return 0;
  }
  Vector c;
  if (!a.c_file.empty()) {
    c = io::load_vector(a.c_file);
  } else {
    if (a.c_index < 0 || a.c_index >= data.d()) throw ArgumentError("infer: --c-index out of range");
    c = Vector::Unit(data.d(), a.c_index);
  }
  emit(a.out, io::report_to_json(infer_linear_pipeline(data, h, c, a.alpha, cfg, rng)).dump(1) + "\n");
  return 0;
}

struct ReproduceArgs {
  int table = 1;
  std::string scale = "desk";
  std::uint64_t seed = 1;
  std::string out;
};

int reproduce(const ReproduceArgs& a) {
  const auto rows = reproduce_table(a.table, a.scale == "full" ? Scale::Full : Scale::Desk, a.seed);
  emit(a.out, table_csv(rows));
  return 0;
}

struct ExperimentArgs {
  std::string config, out;
};

int experiment(const ExperimentArgs& a) {
  const ExperimentConfig cfg = config_from_json(nlohmann::json::parse(io::read_file(a.config)));
  const ExperimentResult res = run_experiment(cfg);
  nlohmann::json j;
  j["config"] = config_to_json(cfg);
  j["runtime_seconds"] = res.runtime_seconds;
  const auto summary = [](const MethodSummary& s) {
    return nlohmann::json{{"coverage", s.coverage},
                          {"median_length", s.median_length},
                          {"max_length", s.max_length},
                          {"successes", s.successes},
                          {"failures", s.failures}};
  };
  if (res.proposed) j["proposed"] = summary(*res.proposed);
  if (res.baseline) j["baseline"] = summary(*res.baseline);
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : res.records) {
    nlohmann::json jr = {{"rep", r.rep}, {"seed", r.seed}, {"truth", r.truth}};
    for (const auto& [name, m] : {std::pair{"proposed", &r.proposed}, std::pair{"baseline", &r.baseline}}) {
      if (!*m) continue;
      const MethodRecord& mr = **m;
      jr[name] = mr.ok ? nlohmann::json{{"estimate", mr.estimate},
                                        {"variance", mr.variance},
                                        {"ci", {mr.ci_lo, mr.ci_hi}},
                                        {"covered", mr.covered},
                                        {"length", mr.length},
                                        {"t_stat", mr.t_stat},
                                        {"lambda", mr.lambda},
                                        {"kkt_residual", mr.kkt_residual},
                                        {"inflations", mr.inflations}}
                       : nlohmann::json{{"error", mr.error}};
    }
    recs.push_back(std::move(jr));
  }
  j["records"] = std::move(recs);
  emit(a.out, j.dump(1) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Debiased inference for high-dimensional logistic regression with network-dependent responses"};
  app.require_subcommand(1);

  GenGraphArgs gg;
  auto* cmd_gg = app.add_subcommand("gen-graph", "Write an Ising-weighted lattice or random regular graph as JSON");
  cmd_gg->add_option("--kind", gg.kind)->check(CLI::IsMember({"lattice", "regular"}));
  cmd_gg->add_option("--rows", gg.rows);
  cmd_gg->add_option("--cols", gg.cols);
  cmd_gg->add_option("--n", gg.n);
  cmd_gg->add_option("--delta", gg.delta);
  cmd_gg->add_option("--beta", gg.beta);
  cmd_gg->add_option("--seed", gg.seed);
  cmd_gg->add_option("--out", gg.out);

  SimulateArgs sim;
  auto* cmd_sim = app.add_subcommand("simulate", "Draw AR covariates and Gibbs responses on a graph");
  cmd_sim->add_option("--graph", sim.graph)->required();
  cmd_sim->add_option("--d", sim.d);
  cmd_sim->add_option("--theta-sparse", sim.s);
  cmd_sim->add_option("--theta-value", sim.theta_value);
  cmd_sim->add_option("--rho", sim.rho);
  cmd_sim->add_option("--sweeps", sim.sweeps);
  cmd_sim->add_option("--seed", sim.seed);
  cmd_sim->add_option("--out", sim.out);

  FitArgs ft;
  auto* cmd_fit = app.add_subcommand("fit", "Penalized pseudolikelihood fit on the first half of an independent set");
  cmd_fit->add_option("--data", ft.data)->required();
  cmd_fit->add_option("--graph", ft.graph)->required();
  cmd_fit->add_option("--seed", ft.seed);
  cmd_fit->add_option("--lambda-c", ft.lambda_c);
  cmd_fit->add_option("--out", ft.out);

  InferArgs inf;
  auto* cmd_inf = app.add_subcommand("infer", "Debiased estimate, interval and test for a functional of theta");
  cmd_inf->add_option("--data", inf.data)->required();
  cmd_inf->add_option("--graph", inf.graph)->required();
  auto* o_idx = cmd_inf->add_option("--c-index", inf.c_index, "Zero-based coordinate");
  auto* o_file = cmd_inf->add_option("--c-file", inf.c_file, "CSV with the functional vector c");
  auto* o_quad = cmd_inf->add_option("--quadratic", inf.quadratic)->check(CLI::IsMember({"identity"}));
  o_idx->excludes(o_file)->excludes(o_quad);
  o_file->excludes(o_quad);
  cmd_inf->add_option("--alpha", inf.alpha);
  cmd_inf->add_option("--null", inf.null_value, "Null value for the test statistic");
  cmd_inf->add_option("--lambda-c", inf.lambda_c);
  cmd_inf->add_option("--seed", inf.seed);
  cmd_inf->add_option("--out", inf.out);

  ReproduceArgs rp;
  auto* cmd_rp = app.add_subcommand("reproduce", "Run a coverage table grid and write CSV");
  cmd_rp->add_option("--table", rp.table)->check(CLI::IsMember({1, 2, 3}));
  cmd_rp->add_option("--scale", rp.scale)->check(CLI::IsMember({"full", "desk"}));
  cmd_rp->add_option("--seed", rp.seed);
  cmd_rp->add_option("--out", rp.out);

  ExperimentArgs ex;
  auto* cmd_ex = app.add_subcommand("experiment", "Run one experiment from a JSON config");
  cmd_ex->add_option("--config", ex.config)->required();
  cmd_ex->add_option("--out", ex.out);

  CLI11_PARSE(app, argc, argv);
  try {
    if (cmd_inf->parsed() && inf.c_index < 0 && inf.c_file.empty() && inf.quadratic.empty())
      throw ArgumentError("infer: one of --c-index, --c-file, --quadratic is required");
    if (cmd_gg->parsed()) return gen_graph(gg);
    if (cmd_sim->parsed()) return simulate(sim);
    if (cmd_fit->parsed()) return fit(ft);
    if (cmd_inf->parsed()) return infer(inf);
    if (cmd_rp->parsed()) return reproduce(rp);
    if (cmd_ex->parsed()) return experiment(ex);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
