#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "netglm/error.hpp"
#include "netglm/rng.hpp"

namespace netglm {

using VertexId = int;
using VertexSet = std::vector<VertexId>;

struct Hyperedge {
  VertexSet vertices;  // strictly increasing, size >= 2
  double weight = 0.0;

  friend bool operator==(const Hyperedge&, const Hyperedge&) = default;
};

/// Weighted hypergraph on vertices 0..n-1 with a cached vertex -> edge incidence index.
/// Edges are stored in canonical (sorted) form; construction validates every invariant
/// and the object is immutable afterwards.
class Hypergraph {
 public:
  Hypergraph() = default;

  explicit Hypergraph(int n, std::vector<Hyperedge> edges = {}) : n_(n), edges_(std::move(edges)) {
    if (n < 0) throw ArgumentError("hypergraph: negative vertex count");
    std::set<VertexSet> seen;
    for (auto& e : edges_) {
      std::sort(e.vertices.begin(), e.vertices.end());
      if (e.vertices.size() < 2) throw ArgumentError("hypergraph: edge with fewer than 2 vertices");
      if (std::adjacent_find(e.vertices.begin(), e.vertices.end()) != e.vertices.end())
        throw ArgumentError("hypergraph: repeated vertex inside an edge");
      if (e.vertices.front() < 0 || e.vertices.back() >= n)
        throw ArgumentError("hypergraph: edge vertex out of range");
      if (!std::isfinite(e.weight) || e.weight < 0.0)
        throw ArgumentError("hypergraph: edge weight must be finite and nonnegative");
      if (!seen.insert(e.vertices).second) throw ArgumentError("hypergraph: duplicate edge");
    }
    incidence_ = build_incidence(n_, edges_);
  }

  int vertex_count() const noexcept { return n_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  std::span<const Hyperedge> edges() const noexcept { return edges_; }
  const Hyperedge& edge(std::size_t k) const { return edges_.at(k); }

  /// Indices of edges containing vertex i.
  std::span<const int> incident(VertexId i) const {
    check_vertex(i);
    return incidence_[static_cast<std::size_t>(i)];
  }

  const std::vector<std::vector<int>>& incidence() const noexcept { return incidence_; }

  bool is_pairwise() const noexcept {
    return std::all_of(edges_.begin(), edges_.end(),
                       [](const Hyperedge& e) { return e.vertices.size() == 2; });
  }

  void check_vertex(VertexId i) const {
    if (i < 0 || i >= n_) throw ArgumentError("vertex id " + std::to_string(i) + " out of range");
  }

  static std::vector<std::vector<int>> build_incidence(int n, std::span<const Hyperedge> edges) {
    std::vector<std::vector<int>> inc(static_cast<std::size_t>(n));
    for (std::size_t k = 0; k < edges.size(); ++k)
      for (VertexId v : edges[k].vertices) inc[static_cast<std::size_t>(v)].push_back(static_cast<int>(k));
    return inc;
  }

 private:
  int n_ = 0;
  std::vector<Hyperedge> edges_;
  std::vector<std::vector<int>> incidence_;
};

struct DegreeReport {
  int max_neighbors = 0;        // Delta
  double max_field_sum = 0.0;   // max_i sum_{e containing i} g_e

  /// Bounded-degree condition on the field sums; violating it is a warning, not an error.
  bool field_sum_bounded() const noexcept { return max_field_sum <= 1.0; }
};

struct VertexSplit {
  VertexSet s_full;
  VertexSet s1;
  VertexSet s2;
};

/// { j != i : some edge contains both i and j }, sorted ascending.
inline VertexSet neighbors(const Hypergraph& h, VertexId i) {
  VertexSet out;
  for (int k : h.incident(i))
    for (VertexId j : h.edge(static_cast<std::size_t>(k)).vertices)
      if (j != i) out.push_back(j);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline DegreeReport degree_report(const Hypergraph& h) {
  DegreeReport r;
  for (VertexId i = 0; i < h.vertex_count(); ++i) {
    r.max_neighbors = std::max(r.max_neighbors, static_cast<int>(neighbors(h, i).size()));
    double field = 0.0;
    for (int k : h.incident(i)) field += h.edge(static_cast<std::size_t>(k)).weight;
    r.max_field_sum = std::max(r.max_field_sum, field);
  }
  return r;
}

/// True when every edge meets `set` in at most one vertex.
inline bool is_strong_independent(const Hypergraph& h, std::span<const VertexId> set) {
  std::vector<char> in(static_cast<std::size_t>(h.vertex_count()), 0);
  for (VertexId v : set) {
    h.check_vertex(v);
    in[static_cast<std::size_t>(v)] = 1;
  }
  for (const auto& e : h.edges()) {
    int hits = 0;
    for (VertexId v : e.vertices) hits += in[static_cast<std::size_t>(v)];
    if (hits > 1) return false;
  }
  return true;
}

/// Greedy scan: accept a vertex when none of its neighbors has been accepted.
/// Result size is at least floor(n / (Delta + 1)). Returned sorted ascending.
inline VertexSet greedy_strong_independent_set(const Hypergraph& h, std::span<const VertexId> order) {
  const auto n = static_cast<std::size_t>(h.vertex_count());
  if (order.size() != n) throw ArgumentError("greedy order must be a permutation of [0, n)");
  std::vector<char> seen(n, 0);
  for (VertexId v : order) {
    h.check_vertex(v);
    if (seen[static_cast<std::size_t>(v)]++) throw ArgumentError("greedy order has a repeated vertex");
  }

  std::vector<char> blocked(n, 0);
  VertexSet out;
  for (VertexId v : order) {
    if (blocked[static_cast<std::size_t>(v)]) continue;
    out.push_back(v);
    blocked[static_cast<std::size_t>(v)] = 1;
    for (int k : h.incident(v))
      for (VertexId j : h.edge(static_cast<std::size_t>(k)).vertices) blocked[static_cast<std::size_t>(j)] = 1;
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline VertexSet greedy_strong_independent_set(const Hypergraph& h) {
  VertexSet order(static_cast<std::size_t>(h.vertex_count()));
  std::iota(order.begin(), order.end(), 0);
  return greedy_strong_independent_set(h, order);
}

inline VertexSet random_order(int n, Rng& rng) {
  VertexSet order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<VertexId>(order));
  return order;
}

/// Uniform random halving; the first part takes the extra vertex when |s| is odd.
inline VertexSplit split_independent_set(std::span<const VertexId> s, Rng& rng) {
  if (s.size() < 2) throw InsufficientDataError("cannot split a vertex set with fewer than 2 vertices");
  VertexSplit split;
  split.s_full.assign(s.begin(), s.end());
  VertexSet shuffled = split.s_full;
  rng.shuffle(std::span<VertexId>(shuffled));
  const std::size_t half = (shuffled.size() + 1) / 2;
  split.s1.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(half));
  split.s2.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(half), shuffled.end());
  std::sort(split.s1.begin(), split.s1.end());
  std::sort(split.s2.begin(), split.s2.end());
  return split;
}

/// rows x cols grid without wraparound; vertex (r, c) has id r * cols + c. Unit weights.
inline Hypergraph lattice2d(int rows, int cols) {
  if (rows < 2 || cols < 2) throw ArgumentError("lattice dimensions must be >= 2");
  std::vector<Hyperedge> edges;
  edges.reserve(static_cast<std::size_t>(rows * (cols - 1) + cols * (rows - 1)));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int v = r * cols + c;
      if (c + 1 < cols) edges.push_back({{v, v + 1}, 1.0});
      if (r + 1 < rows) edges.push_back({{v, v + cols}, 1.0});
    }
  }
  return Hypergraph(rows * cols, std::move(edges));
}

/// Simple delta-regular graph with unit weights. Stubs are paired uniformly at
/// random, refusing loops and repeated edges; a pairing that gets stuck restarts.
/// Each restart counts against `max_attempts`.
inline Hypergraph random_regular(int n, int delta, Rng& rng, int max_attempts = 100000) {
  if (n <= 0 || delta < 0) throw ArgumentError("random_regular: n must be positive and delta nonnegative");
  if (delta >= n) throw ArgumentError("random_regular: delta must be < n");
  if ((static_cast<long long>(n) * delta) % 2 != 0) throw ArgumentError("random_regular: n * delta must be even");

  const auto nn = static_cast<std::size_t>(n);
  std::vector<VertexSet> adj(nn);
  std::vector<VertexId> stubs;
  const auto adjacent = [&adj](VertexId a, VertexId b) {
    const auto& row = adj[static_cast<std::size_t>(a)];
    return std::find(row.begin(), row.end(), b) != row.end();
  };

  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    for (auto& row : adj) row.clear();
    stubs.clear();
    for (VertexId v = 0; v < n; ++v) stubs.insert(stubs.end(), static_cast<std::size_t>(delta), v);

    std::size_t live = stubs.size();
    int misses = 0;
    bool stuck = false;
    while (live > 0) {
      const auto i = static_cast<std::size_t>(rng.below(live));
      auto j = static_cast<std::size_t>(rng.below(live - 1));
      if (j >= i) ++j;
      const VertexId a = stubs[i];
      const VertexId b = stubs[j];
      if (a != b && !adjacent(a, b)) {
        adj[static_cast<std::size_t>(a)].push_back(b);
        adj[static_cast<std::size_t>(b)].push_back(a);
        // remove the higher index first so the lower one stays valid
        const auto hi = std::max(i, j), lo = std::min(i, j);
        stubs[hi] = stubs[--live];
        stubs[lo] = stubs[--live];
        misses = 0;
        continue;
      }
      if (++misses < 64) continue;
      // many consecutive misses: check whether any admissible pair is left
      VertexSet remaining(stubs.begin(), stubs.begin() + static_cast<std::ptrdiff_t>(live));
      std::sort(remaining.begin(), remaining.end());
      remaining.erase(std::unique(remaining.begin(), remaining.end()), remaining.end());
      bool any = false;
      for (std::size_t p = 0; p < remaining.size() && !any; ++p)
        for (std::size_t q = p + 1; q < remaining.size() && !any; ++q)
          any = !adjacent(remaining[p], remaining[q]);
      if (!any) {
        stuck = true;
        break;
      }
      misses = 0;
    }
    if (stuck) continue;

    std::vector<Hyperedge> edges;
    edges.reserve(nn * static_cast<std::size_t>(delta) / 2);
    for (VertexId a = 0; a < n; ++a)
      for (VertexId b : adj[static_cast<std::size_t>(a)])
        if (a < b) edges.push_back({{a, b}, 1.0});
    std::sort(edges.begin(), edges.end(),
              [](const Hyperedge& x, const Hyperedge& y) { return x.vertices < y.vertices; });
    return Hypergraph(n, std::move(edges));
  }
  throw GenerationError("random_regular: attempt budget exhausted");
}

/// Converts a pairwise graph into Ising couplings: every edge gets g = 2 * beta * degree_norm,
/// so that m_i(y) = sum_j 2 beta (A_n)_ij y_j with A_n = degree_norm * A(G).
inline Hypergraph from_ising(const Hypergraph& h, double beta, double degree_norm) {
  if (!h.is_pairwise()) throw ArgumentError("from_ising: all edges must be pairwise");
  if (!(degree_norm > 0.0) || !std::isfinite(degree_norm)) throw ArgumentError("from_ising: degree_norm must be > 0");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ArgumentError("from_ising: beta must be finite and >= 0");
  std::vector<Hyperedge> edges(h.edges().begin(), h.edges().end());
  for (auto& e : edges) e.weight = 2.0 * beta * degree_norm;
  return Hypergraph(h.vertex_count(), std::move(edges));
}

}  // namespace netglm
