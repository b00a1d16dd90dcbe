#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "transgcr/types.hpp"

namespace transgcr {

using NodeId = std::uint32_t;

struct Edge {
  NodeId u = 0;
  NodeId v = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Undirected simple graph. Edges are stored once as (u, v) with u < v,
/// sorted lexicographically, plus a CSR neighbour index for O(deg) row access.
class Graph {
 public:
  Graph() = default;

  /// Edges may be given in either orientation. Self-loops, duplicates (in
  /// either orientation) and out-of-range endpoints throw InvalidArgument.
  Graph(std::size_t num_nodes, std::vector<Edge> edges);

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t num_edges() const { return edges_.size(); }
  std::span<const Edge> edges() const { return edges_; }

  /// Sorted ascending.
  std::span<const NodeId> neighbors(NodeId i) const {
    return {adjacency_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  std::size_t degree(NodeId i) const { return offsets_[i + 1] - offsets_[i]; }

  /// Empirical edge density 2|E| / (n(n-1)); zero for n < 2.
  double density() const;

  /// Block-diagonal union: block k's node i becomes offset_k + i.
  static Graph disjoint_union(std::span<const Graph> graphs);

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.num_nodes_ == b.num_nodes_ && a.edges_ == b.edges_;
  }

 private:
  void build_index();

  std::size_t num_nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> adjacency_;
};

/// S = D^{-1/2} (A + I) D^{-1/2} in CSR form. The sparsity pattern is that of
/// A + I; every row stores its column indices in ascending order.
class NormalizedAdjacency {
 public:
  explicit NormalizedAdjacency(const Graph& g);

  std::size_t num_nodes() const { return row_offsets_.size() - 1; }
  std::size_t num_nonzeros() const { return columns_.size(); }

  std::span<const NodeId> row_columns(std::size_t i) const {
    return {columns_.data() + row_offsets_[i], row_offsets_[i + 1] - row_offsets_[i]};
  }
  std::span<const double> row_values(std::size_t i) const {
    return {values_.data() + row_offsets_[i], row_offsets_[i + 1] - row_offsets_[i]};
  }

  /// Entry lookup by binary search; zero outside the pattern.
  double at(std::size_t i, std::size_t j) const;

  /// out = S * in (sparse times dense).
  Matrix multiply(const Matrix& in) const;

  Matrix to_dense() const;

 private:
  std::vector<std::size_t> row_offsets_;
  std::vector<NodeId> columns_;
  std::vector<double> values_;
};

enum class FeatureScaling { kSymNormalized, kErScaled };

struct PropagatedFeatures {
  Matrix values;
  int hops = 0;
  FeatureScaling scaling = FeatureScaling::kSymNormalized;
};

inline NormalizedAdjacency normalize_adjacency(const Graph& g) { return NormalizedAdjacency(g); }

/// S^M X as M successive sparse-dense products.
PropagatedFeatures propagate(const NormalizedAdjacency& s, const Matrix& x, int hops);

/// Z = A X / sqrt(n p). Without an explicit p the in-sample density is used;
/// an edgeless graph then has no defined scale and ComputationError is thrown.
PropagatedFeatures er_scale(const Graph& g, const Matrix& x, std::optional<double> p = std::nullopt);

// ---------------------------------------------------------------------------
// Random graph models. All are deterministic functions of their seed.

Graph gen_er(std::size_t n, double p, std::uint64_t seed);

/// Nodes are assigned to blocks contiguously in the order of block_sizes.
Graph gen_sbm(std::span<const std::size_t> block_sizes, double within, double between,
              std::uint64_t seed);

/// Graphon W : [0,1]^2 -> [0,1]. Built-ins are rho*u*v, rho*min(u,v) and a
/// constant; arbitrary functions are accepted through Graphon::custom.
class Graphon {
 public:
  enum class Kind { kConstant, kProduct, kMin, kCustom };

  static Graphon constant(double p);
  static Graphon product(double rho);
  static Graphon min(double rho);
  static Graphon custom(std::function<double(double, double)> w, std::string name = "custom");

  /// Parses "constant:<p>", "product:<rho>" or "min:<rho>".
  static Graphon parse(const std::string& id);

  double operator()(double u, double v) const;
  Kind kind() const { return kind_; }
  double parameter() const { return parameter_; }
  std::string id() const;

 private:
  Graphon(Kind kind, double parameter) : kind_(kind), parameter_(parameter) {}

  Kind kind_ = Kind::kConstant;
  double parameter_ = 0.0;
  std::function<double(double, double)> custom_;
  std::string name_;
};

/// Latent positions u_i ~ U(0,1); edge (i,j) with probability W(u_i, u_j).
/// Throws InvalidArgument if W leaves [0,1].
Graph gen_graphon(std::size_t n, const Graphon& w, std::uint64_t seed);

}  // namespace transgcr
