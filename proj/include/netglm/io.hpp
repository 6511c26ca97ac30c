#pragma once

#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "netglm/error.hpp"
#include "netglm/hypergraph.hpp"
#include "netglm/inference.hpp"
#include "netglm/mple.hpp"
#include "netglm/mrf.hpp"

namespace netglm::io {

using nlohmann::json;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write " + path);
  out << text;
  if (!out) throw ArgumentError("write failed: " + path);
}

/// Shortest decimal text that round-trips the double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// graph: {"n": int, "edges": [{"v": [int...], "g": float}, ...]}

inline json graph_to_json(const Hypergraph& h) {
  json edges = json::array();
  for (const auto& e : h.edges()) edges.push_back({{"v", e.vertices}, {"g", e.weight}});
  return {{"n", h.vertex_count()}, {"edges", std::move(edges)}};
}

inline Hypergraph graph_from_json(const json& j) {
  try {
    const int n = j.at("n").get<int>();
    std::vector<Hyperedge> edges;
    for (const auto& e : j.at("edges")) edges.push_back({e.at("v").get<VertexSet>(), e.at("g").get<double>()});
    return Hypergraph(n, std::move(edges));
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("graph json: ") + e.what());
  }
}

inline void save_graph(const std::string& path, const Hypergraph& h) { write_file(path, graph_to_json(h).dump(1) + "\n"); }

inline Hypergraph load_graph(const std::string& path) {
  try {
    return graph_from_json(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw ArgumentError(path + ": " + e.what());
  }
}

// dataset: CSV with header y,x1..xd

inline std::string dataset_to_csv(const Dataset& data) {
  std::string out = "y";
  for (Eigen::Index k = 0; k < data.d(); ++k) out += ",x" + std::to_string(k + 1);
  out += '\n';
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    out += data.y(i) > 0 ? "1" : "-1";
    for (Eigen::Index k = 0; k < data.d(); ++k) {
      out += ',';
      out += format_double(data.x(i, k));
    }
    out += '\n';
  }
  return out;
}

inline std::vector<std::vector<double>> parse_numeric_csv(const std::string& text, bool header,
                                                          const std::string& what) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  if (header) {
    std::getline(in, line);
    ++line_no;
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = std::min(line.find(',', pos), line.size());
      const std::string cell = line.substr(pos, comma - pos);
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size())
        throw ArgumentError(what + ": bad number '" + cell + "' on line " + std::to_string(line_no));
      row.push_back(v);
      pos = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ArgumentError(what + ": ragged row on line " + std::to_string(line_no));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Dataset dataset_from_csv(const std::string& text) {
  const auto rows = parse_numeric_csv(text, true, "dataset csv");
  if (rows.empty()) throw ArgumentError("dataset csv: no rows");
  if (rows.front().size() < 2) throw ArgumentError("dataset csv: need y and at least one covariate");
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows.front().size() - 1);
  Dataset data{Matrix(n, d), Vector(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    data.y(i) = r[0];
    for (Eigen::Index k = 0; k < d; ++k) data.x(i, k) = r[static_cast<std::size_t>(k + 1)];
  }
  data.validate();
  return data;
}

inline void save_dataset(const std::string& path, const Dataset& data) { write_file(path, dataset_to_csv(data)); }
inline Dataset load_dataset(const std::string& path) { return dataset_from_csv(read_file(path)); }

/// A single column (or single row) of numbers, e.g. a functional vector c.
inline Vector load_vector(const std::string& path) {
  const auto rows = parse_numeric_csv(read_file(path), false, path);
  std::vector<double> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  if (flat.empty()) throw ArgumentError(path + ": empty vector");
  return Eigen::Map<const Vector>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline json fit_to_json(const MpleFit& fit) {
  return {{"theta_tilde", to_std(fit.theta_tilde)}, {"lambda", fit.lambda},       {"kkt_residual", fit.kkt_residual},
          {"iterations", fit.iterations},           {"objective", fit.objective}, {"converged", fit.converged}};
}

inline json projection_to_json(const ProjectionResult& p) {
  return {{"inflations", p.inflations},
          {"iterations", p.iterations},
          {"objective", p.objective},
          {"scalar_constraint_used", p.scalar_constraint_used},
          {"residuals", {{"inf", p.residual_inf}, {"scalar", p.residual_scalar}, {"max", p.residual_max}}}};
}

inline json report_to_json(const PipelineReport& r) {
  const auto& li = r.inference;
  return {{"functional", to_std(li.c)},
          {"estimate", li.estimate},
          {"variance", li.variance},
          {"ci", {li.ci_lo, li.ci_hi}},
          {"alpha", li.alpha},
          {"null_value", li.null_value},
          {"t_stat", li.t_stat},
          {"p_value", li.p_value},
          {"projection", projection_to_json(r.projection)},
          {"fit", {{"lambda", r.fit.lambda}, {"kkt_residual", r.fit.kkt_residual}}},
          {"split", {{"s1", r.split.s1.size()}, {"s2", r.split.s2.size()}}}};
}

inline json report_to_json(const QuadraticReport& r) {
  const auto& qi = r.inference;
  json out = {{"functional", "quadratic_identity"},
              {"estimate", qi.q_hat},
              {"estimate_untruncated", qi.q_tilde},
              {"variance", qi.variance},
              {"ci", {qi.ci_lo, qi.ci_hi}},
              {"alpha", qi.alpha},
              {"degenerate_target", qi.degenerate_target},
              {"fit", {{"lambda", r.fit.lambda}, {"kkt_residual", r.fit.kkt_residual}}},
              {"split", {{"s1", r.split.s1.size()}, {"s2", r.split.s2.size()}}}};
  out["projection"] = r.projection ? projection_to_json(*r.projection) : json(nullptr);
  return out;
}

}  // namespace netglm::io
