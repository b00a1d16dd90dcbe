#include "transgcr/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <utility>

#include "transgcr/random.hpp"

namespace transgcr {

Graph::Graph(std::size_t num_nodes, std::vector<Edge> edges)
    : num_nodes_(num_nodes), edges_(std::move(edges)) {
  for (Edge& e : edges_) {
    if (e.u == e.v)
      throw InvalidArgument("self-loop at node " + std::to_string(e.u));
    if (e.u >= num_nodes_ || e.v >= num_nodes_)
      throw InvalidArgument("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                            ") out of range for n=" + std::to_string(num_nodes_));
    if (e.u > e.v) std::swap(e.u, e.v);
  }
  std::sort(edges_.begin(), edges_.end());
  auto dup = std::adjacent_find(edges_.begin(), edges_.end());
  if (dup != edges_.end())
    throw InvalidArgument("duplicate edge (" + std::to_string(dup->u) + "," +
                          std::to_string(dup->v) + ")");
  build_index();
}

void Graph::build_index() {
  std::vector<std::size_t> deg(num_nodes_, 0);
  for (const Edge& e : edges_) {
    ++deg[e.u];
    ++deg[e.v];
  }
  offsets_.assign(num_nodes_ + 1, 0);
  for (std::size_t i = 0; i < num_nodes_; ++i) offsets_[i + 1] = offsets_[i] + deg[i];
  adjacency_.assign(offsets_.back(), 0);
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  // Edges are sorted by (u, v), so each node's lower neighbours arrive in
  // ascending order before its higher ones; rows come out sorted.
  for (const Edge& e : edges_) adjacency_[cursor[e.v]++] = e.u;
  for (const Edge& e : edges_) adjacency_[cursor[e.u]++] = e.v;
  for (std::size_t i = 0; i < num_nodes_; ++i)
    std::sort(adjacency_.begin() + offsets_[i], adjacency_.begin() + offsets_[i + 1]);
}

double Graph::density() const {
  if (num_nodes_ < 2) return 0.0;
  const double pairs = 0.5 * static_cast<double>(num_nodes_) * static_cast<double>(num_nodes_ - 1);
  return static_cast<double>(edges_.size()) / pairs;
}

Graph Graph::disjoint_union(std::span<const Graph> graphs) {
  std::size_t total = 0, total_edges = 0;
  for (const Graph& g : graphs) {
    total += g.num_nodes();
    total_edges += g.num_edges();
  }
  std::vector<Edge> edges;
  edges.reserve(total_edges);
  std::size_t offset = 0;
  for (const Graph& g : graphs) {
    for (const Edge& e : g.edges())
      edges.push_back({static_cast<NodeId>(e.u + offset), static_cast<NodeId>(e.v + offset)});
    offset += g.num_nodes();
  }
  return Graph(total, std::move(edges));
}

// ---------------------------------------------------------------------------

NormalizedAdjacency::NormalizedAdjacency(const Graph& g) {
  const std::size_t n = g.num_nodes();
  row_offsets_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i)
    row_offsets_[i + 1] = row_offsets_[i] + g.degree(static_cast<NodeId>(i)) + 1;
  columns_.resize(row_offsets_.back());
  values_.resize(row_offsets_.back());

  std::vector<double> tilde_degree(n);
  for (std::size_t i = 0; i < n; ++i)
    tilde_degree[i] = static_cast<double>(g.degree(static_cast<NodeId>(i)) + 1);

  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = row_offsets_[i];
    bool diagonal_done = false;
    auto emit = [&](NodeId j) {
      columns_[k] = j;
      // The product is commutative in IEEE arithmetic, so S_ij and S_ji are
      // bitwise equal; for j == i sqrt(d^2) is exact and S_ii == 1/d.
      values_[k] = 1.0 / std::sqrt(tilde_degree[i] * tilde_degree[j]);
      ++k;
    };
    for (NodeId j : g.neighbors(static_cast<NodeId>(i))) {
      if (!diagonal_done && j > i) {
        emit(static_cast<NodeId>(i));
        diagonal_done = true;
      }
      emit(j);
    }
    if (!diagonal_done) emit(static_cast<NodeId>(i));
  }
}

double NormalizedAdjacency::at(std::size_t i, std::size_t j) const {
  auto cols = row_columns(i);
  auto it = std::lower_bound(cols.begin(), cols.end(), static_cast<NodeId>(j));
  if (it == cols.end() || *it != j) return 0.0;
  return row_values(i)[static_cast<std::size_t>(it - cols.begin())];
}

Matrix NormalizedAdjacency::multiply(const Matrix& in) const {
  const std::size_t n = num_nodes();
  if (static_cast<std::size_t>(in.rows()) != n)
    throw InvalidArgument("propagate: feature matrix has " + std::to_string(in.rows()) +
                          " rows, graph has " + std::to_string(n) + " nodes");
  Matrix out(in.rows(), in.cols());
  for (Eigen::Index c = 0; c < in.cols(); ++c) {
    const double* src = in.col(c).data();
    double* dst = out.col(c).data();
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k)
        acc += values_[k] * src[columns_[k]];
      dst[i] = acc;
    }
  }
  return out;
}

Matrix NormalizedAdjacency::to_dense() const {
  const auto n = static_cast<Eigen::Index>(num_nodes());
  Matrix dense = Matrix::Zero(n, n);
  for (std::size_t i = 0; i < num_nodes(); ++i)
    for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k)
      dense(static_cast<Eigen::Index>(i), columns_[k]) = values_[k];
  return dense;
}

PropagatedFeatures propagate(const NormalizedAdjacency& s, const Matrix& x, int hops) {
  if (hops < 0) throw InvalidArgument("propagate: hop count must be >= 0");
  if (static_cast<std::size_t>(x.rows()) != s.num_nodes())
    throw InvalidArgument("propagate: feature matrix has " + std::to_string(x.rows()) +
                          " rows, graph has " + std::to_string(s.num_nodes()) + " nodes");
  PropagatedFeatures z{x, hops, FeatureScaling::kSymNormalized};
  for (int m = 0; m < hops; ++m) z.values = s.multiply(z.values);
  return z;
}

PropagatedFeatures er_scale(const Graph& g, const Matrix& x, std::optional<double> p) {
  const std::size_t n = g.num_nodes();
  if (static_cast<std::size_t>(x.rows()) != n)
    throw InvalidArgument("er_scale: feature matrix rows do not match node count");
  double p_eff = 0.0;
  if (p) {
    if (!(*p > 0.0 && *p <= 1.0)) throw InvalidArgument("er_scale: p must lie in (0, 1]");
    p_eff = *p;
  } else {
    p_eff = g.density();
    if (p_eff <= 0.0)
      throw ComputationError("er_scale: estimated edge probability is zero, scaling undefined");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(n) * p_eff);
  Matrix z = Matrix::Zero(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double* src = x.col(c).data();
    double* dst = z.col(c).data();
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (NodeId j : g.neighbors(static_cast<NodeId>(i))) acc += src[j];
      dst[i] = acc * scale;
    }
  }
  return {std::move(z), 1, FeatureScaling::kErScaled};
}

// ---------------------------------------------------------------------------

namespace {

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0))
    throw InvalidArgument(std::string(what) + " must lie in [0, 1]");
}

// Bernoulli(p) with exact behaviour at the endpoints.
inline bool coin(Rng& rng, std::uniform_real_distribution<double>& unit, double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return unit(rng) < p;
}

}  // namespace

Graph gen_er(std::size_t n, double p, std::uint64_t seed) {
  check_probability(p, "gen_er: p");
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (coin(rng, unit, p)) edges.push_back({static_cast<NodeId>(i), static_cast<NodeId>(j)});
  return Graph(n, std::move(edges));
}

Graph gen_sbm(std::span<const std::size_t> block_sizes, double within, double between,
              std::uint64_t seed) {
  check_probability(within, "gen_sbm: within-block probability");
  check_probability(between, "gen_sbm: between-block probability");
  std::vector<std::size_t> block_of;
  for (std::size_t b = 0; b < block_sizes.size(); ++b) {
    if (block_sizes[b] == 0) throw InvalidArgument("gen_sbm: block sizes must be positive");
    block_of.insert(block_of.end(), block_sizes[b], b);
  }
  const std::size_t n = block_of.size();
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = block_of[i] == block_of[j] ? within : between;
      if (coin(rng, unit, p)) edges.push_back({static_cast<NodeId>(i), static_cast<NodeId>(j)});
    }
  return Graph(n, std::move(edges));
}

Graphon Graphon::constant(double p) {
  check_probability(p, "graphon constant");
  return Graphon(Kind::kConstant, p);
}

Graphon Graphon::product(double rho) {
  check_probability(rho, "graphon rho");
  return Graphon(Kind::kProduct, rho);
}

Graphon Graphon::min(double rho) {
  check_probability(rho, "graphon rho");
  return Graphon(Kind::kMin, rho);
}

Graphon Graphon::custom(std::function<double(double, double)> w, std::string name) {
  Graphon g(Kind::kCustom, 0.0);
  g.custom_ = std::move(w);
  g.name_ = std::move(name);
  return g;
}

Graphon Graphon::parse(const std::string& id) {
  const auto colon = id.find(':');
  if (colon == std::string::npos) throw InvalidArgument("graphon id must be <kind>:<parameter>: " + id);
  const std::string kind = id.substr(0, colon);
  double value = 0.0;
  try {
    std::size_t used = 0;
    value = std::stod(id.substr(colon + 1), &used);
    if (used != id.size() - colon - 1) throw InvalidArgument("trailing characters");
  } catch (const std::exception&) {
    throw InvalidArgument("bad graphon parameter in '" + id + "'");
  }
  if (kind == "constant") return constant(value);
  if (kind == "product") return product(value);
  if (kind == "min") return min(value);
  throw InvalidArgument("unknown graphon kind '" + kind + "'");
}

double Graphon::operator()(double u, double v) const {
  switch (kind_) {
    case Kind::kConstant: return parameter_;
    case Kind::kProduct: return parameter_ * u * v;
    case Kind::kMin: return parameter_ * std::min(u, v);
    case Kind::kCustom: return custom_(u, v);
  }
  return 0.0;
}

std::string Graphon::id() const {
  char buf[32];
  const std::string value(buf, std::to_chars(buf, buf + sizeof buf, parameter_).ptr);
  switch (kind_) {
    case Kind::kConstant: return "constant:" + value;
    case Kind::kProduct: return "product:" + value;
    case Kind::kMin: return "min:" + value;
    case Kind::kCustom: return name_;
  }
  return name_;
}

Graph gen_graphon(std::size_t n, const Graphon& w, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> latent(n);
  for (double& u : latent) u = unit(rng);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = w(latent[i], latent[j]);
      if (!(p >= 0.0 && p <= 1.0))
        throw InvalidArgument("graphon " + w.id() + " returned a value outside [0, 1]");
      if (coin(rng, unit, p)) edges.push_back({static_cast<NodeId>(i), static_cast<NodeId>(j)});
    }
  return Graph(n, std::move(edges));
}

}  // namespace transgcr
