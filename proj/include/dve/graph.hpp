#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dve/errors.hpp"
#include "dve/rng.hpp"
#include "dve/sparse.hpp"

namespace dve {

struct SignedEdge {
  std::int32_t source = 0;
  std::int32_t target = 0;
  int sign = 1;  // +1 or -1

  bool operator==(const SignedEdge&) const = default;
};

// Directed graph with +1/-1 edge labels. At most one edge per ordered pair,
// no self-loops. Construct through create() so the invariants hold.
struct SignedDigraph {
  std::int64_t num_nodes = 0;
  std::vector<SignedEdge> edges;
  std::int64_t positive_count = 0;
  std::int64_t negative_count = 0;

  std::int64_t num_edges() const { return static_cast<std::int64_t>(edges.size()); }

  static SignedDigraph create(std::int64_t num_nodes, std::vector<SignedEdge> edges) {
    require(num_nodes >= 0, "graph: negative node count");
    SignedDigraph g;
    g.num_nodes = num_nodes;
    std::unordered_set<std::int64_t> seen;
    seen.reserve(edges.size() * 2);
    for (const SignedEdge& e : edges) {
      if (e.source < 0 || e.target < 0 || e.source >= num_nodes || e.target >= num_nodes) {
        throw ValidationError("graph: edge endpoint out of range: " +
                              std::to_string(e.source) + " -> " + std::to_string(e.target));
      }
      if (e.source == e.target) {
        throw ValidationError("graph: self-loop at node " + std::to_string(e.source));
      }
      if (e.sign != 1 && e.sign != -1) {
        throw ValidationError("graph: edge sign must be 1 or -1");
      }
      const std::int64_t key = static_cast<std::int64_t>(e.source) * num_nodes + e.target;
      if (!seen.insert(key).second) {
        throw ValidationError("graph: duplicate edge " + std::to_string(e.source) +
                              " -> " + std::to_string(e.target));
      }
      if (e.sign > 0) g.positive_count++; else g.negative_count++;
    }
    g.edges = std::move(edges);
    return g;
  }
};

namespace detail {

inline bool parse_int(const std::string& tok, std::int64_t& out) {
  if (tok.empty()) return false;
  std::size_t pos = 0;
  try {
    out = std::stoll(tok, &pos);
  } catch (...) {
    return false;
  }
  return pos == tok.size();
}

struct RawEdge {
  std::int64_t source, target;
  int sign;
};

// Shared line-level scan. Accepts "src tgt sign" rows, '#' comments, blank
// lines, and an optional "# nodes: N" directive.
inline void scan_edge_list(std::istream& in, std::vector<RawEdge>& edges,
                           std::int64_t& declared_nodes) {
  declared_nodes = -1;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string body = line;
    const std::size_t hash = body.find('#');
    if (hash != std::string::npos) {
      std::istringstream comment(body.substr(hash + 1));
      std::string word;
      comment >> word;
      if (word == "nodes:") {
        std::int64_t n = 0;
        std::string tok;
        if (!(comment >> tok) || !parse_int(tok, n) || n < 0) {
          throw ParseError("bad nodes directive", line_no);
        }
        declared_nodes = n;
      }
      body = body.substr(0, hash);
    }
    std::istringstream row(body);
    std::string a, b, c, extra;
    if (!(row >> a)) continue;  // blank or comment-only
    if (!(row >> b >> c) || (row >> extra)) {
      throw ParseError("expected 'source target sign'", line_no);
    }
    std::int64_t u = 0, v = 0, s = 0;
    if (!parse_int(a, u) || !parse_int(b, v)) {
      throw ParseError("bad node index", line_no);
    }
    if (!parse_int(c, s) || (s != 1 && s != -1)) {
      throw ParseError("sign must be 1 or -1", line_no);
    }
    edges.push_back({u, v, static_cast<int>(s)});
  }
}

}  // namespace detail

// Node ids must already be dense 0..N-1. N is max id + 1, or the value of a
// "# nodes: N" directive when one names a larger count (isolated tail nodes).
inline SignedDigraph parse_edge_list(std::istream& in) {
  std::vector<detail::RawEdge> raw;
  std::int64_t declared = -1;
  detail::scan_edge_list(in, raw, declared);
  std::int64_t max_id = -1;
  for (const auto& e : raw) {
    if (e.source < 0 || e.target < 0) throw ParseError("negative node index");
    max_id = std::max({max_id, e.source, e.target});
  }
  std::int64_t n = max_id + 1;
  if (declared >= 0) {
    if (declared < n) {
      throw ParseError("nodes directive (" + std::to_string(declared) +
                       ") smaller than max index + 1 (" + std::to_string(n) + ")");
    }
    n = declared;
  }
  std::vector<SignedEdge> edges;
  edges.reserve(raw.size());
  for (const auto& e : raw) {
    edges.push_back({static_cast<std::int32_t>(e.source),
                     static_cast<std::int32_t>(e.target), e.sign});
  }
  return SignedDigraph::create(n, std::move(edges));
}

struct RemappedGraph {
  SignedDigraph graph;
  std::vector<std::int64_t> original_ids;  // original_ids[dense] = raw id
};

// Like parse_edge_list but accepts arbitrary integer ids, remapping them to
// dense indices in order of first appearance.
inline RemappedGraph parse_edge_list_remapped(std::istream& in) {
  std::vector<detail::RawEdge> raw;
  std::int64_t declared = -1;
  detail::scan_edge_list(in, raw, declared);
  RemappedGraph out;
  std::unordered_map<std::int64_t, std::int32_t> dense;
  dense.reserve(raw.size() * 2);
  auto id_of = [&](std::int64_t raw_id) {
    auto [it, inserted] = dense.try_emplace(
        raw_id, static_cast<std::int32_t>(out.original_ids.size()));
    if (inserted) out.original_ids.push_back(raw_id);
    return it->second;
  };
  std::vector<SignedEdge> edges;
  edges.reserve(raw.size());
  for (const auto& e : raw) {
    const std::int32_t u = id_of(e.source);
    const std::int32_t v = id_of(e.target);
    edges.push_back({u, v, e.sign});
  }
  out.graph = SignedDigraph::create(
      static_cast<std::int64_t>(out.original_ids.size()), std::move(edges));
  return out;
}

inline void serialize_edge_list(std::ostream& out, std::int64_t num_nodes,
                                const std::vector<SignedEdge>& edges) {
  out << "# nodes: " << num_nodes << "\n";
  for (const SignedEdge& e : edges) {
    out << e.source << " " << e.target << " " << e.sign << "\n";
  }
}

inline void serialize_edge_list(std::ostream& out, const SignedDigraph& g) {
  serialize_edge_list(out, g.num_nodes, g.edges);
}

struct EdgeSplit {
  SignedDigraph train;
  std::vector<SignedEdge> test;
  double train_fraction = 0.0;
  std::uint64_t seed = 0;
};

// Uniform edge split. Both sides keep the full node set; the train share is
// round(fraction * |E|) clamped so neither side is empty.
inline EdgeSplit split_edges(const SignedDigraph& g, double train_fraction,
                             std::uint64_t seed) {
  require(train_fraction > 0.0 && train_fraction < 1.0,
          "split: train fraction must lie in (0, 1)");
  const std::int64_t m = g.num_edges();
  require(m >= 2, "split: need at least two edges");
  std::int64_t n_train = std::llround(train_fraction * static_cast<double>(m));
  n_train = std::clamp<std::int64_t>(n_train, 1, m - 1);

  std::vector<std::int64_t> order(m);
  for (std::int64_t i = 0; i < m; ++i) order[i] = i;
  Rng rng = Rng::forked(seed, 0x517);
  rng.shuffle(order);

  std::vector<std::int64_t> train_idx(order.begin(), order.begin() + n_train);
  std::vector<std::int64_t> test_idx(order.begin() + n_train, order.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  EdgeSplit s;
  s.train_fraction = train_fraction;
  s.seed = seed;
  std::vector<SignedEdge> train_edges;
  train_edges.reserve(train_idx.size());
  for (std::int64_t i : train_idx) train_edges.push_back(g.edges[i]);
  s.train = SignedDigraph::create(g.num_nodes, std::move(train_edges));
  s.test.reserve(test_idx.size());
  for (std::int64_t i : test_idx) s.test.push_back(g.edges[i]);
  return s;
}

struct StatsReport {
  std::int64_t num_nodes = 0;
  std::int64_t num_edges = 0;
  std::int64_t positive_count = 0;
  std::int64_t negative_count = 0;
  std::int64_t undirected_positive_pairs = 0;
  std::int64_t undirected_negative_pairs = 0;
  double positive_density = 0.0;  // positive_count / (N * (N - 1))
  double negative_density = 0.0;
};

inline StatsReport graph_stats(const SignedDigraph& g) {
  StatsReport r;
  r.num_nodes = g.num_nodes;
  r.num_edges = g.num_edges();
  r.positive_count = g.positive_count;
  r.negative_count = g.negative_count;
  std::set<std::pair<std::int32_t, std::int32_t>> pos_pairs, neg_pairs;
  for (const SignedEdge& e : g.edges) {
    const auto key = std::minmax(e.source, e.target);
    (e.sign > 0 ? pos_pairs : neg_pairs).insert(key);
  }
  r.undirected_positive_pairs = static_cast<std::int64_t>(pos_pairs.size());
  r.undirected_negative_pairs = static_cast<std::int64_t>(neg_pairs.size());
  if (g.num_nodes > 1) {
    const double slots =
        static_cast<double>(g.num_nodes) * static_cast<double>(g.num_nodes - 1);
    r.positive_density = static_cast<double>(g.positive_count) / slots;
    r.negative_density = static_cast<double>(g.negative_count) / slots;
  }
  return r;
}

// Planted-community generator. Nodes are assigned round-robin to communities
// (node i in community i % k). Each ordered pair (u, v) independently gets an
// intra-community +1 edge with probability p_intra or an inter-community -1
// edge with probability p_inter; flip_noise then flips the realized sign.
// The same seed yields the same edge set for every flip_noise value.
inline SignedDigraph generate_planted_sign_graph(std::int64_t n_nodes,
                                                 int n_communities, double p_intra,
                                                 double p_inter, double flip_noise,
                                                 std::uint64_t seed) {
  require(n_nodes >= 2, "planted graph: need at least two nodes");
  require(n_communities >= 1 && n_communities <= n_nodes,
          "planted graph: bad community count");
  require(p_intra >= 0.0 && p_intra <= 1.0 && p_inter >= 0.0 && p_inter <= 1.0,
          "planted graph: probabilities must lie in [0, 1]");
  require(flip_noise >= 0.0 && flip_noise <= 1.0,
          "planted graph: flip noise must lie in [0, 1]");
  Rng rng = Rng::forked(seed, 0x9a9);
  std::vector<SignedEdge> edges;
  for (std::int64_t u = 0; u < n_nodes; ++u) {
    for (std::int64_t v = 0; v < n_nodes; ++v) {
      if (u == v) continue;
      const bool same = (u % n_communities) == (v % n_communities);
      if (rng.uniform() >= (same ? p_intra : p_inter)) continue;
      int sign = same ? 1 : -1;
      if (rng.uniform() < flip_noise) sign = -sign;
      edges.push_back({static_cast<std::int32_t>(u), static_cast<std::int32_t>(v), sign});
    }
  }
  return SignedDigraph::create(n_nodes, std::move(edges));
}

namespace detail {

// Undirected sign-restricted adjacency: a pair {i, j} is linked when either
// direction carries an edge of the wanted sign.
inline SparseMatrix undirected_adjacency(const SignedDigraph& g, int wanted_sign) {
  std::set<std::pair<std::int32_t, std::int32_t>> pairs;
  for (const SignedEdge& e : g.edges) {
    if (e.sign != wanted_sign) continue;
    pairs.insert(std::minmax(e.source, e.target));
  }
  std::vector<CooEntry> entries;
  entries.reserve(pairs.size() * 2);
  for (const auto& [i, j] : pairs) {
    entries.push_back({i, j, 1.0});
    entries.push_back({j, i, 1.0});
  }
  return SparseMatrix::from_coo(g.num_nodes, g.num_nodes, std::move(entries));
}

}  // namespace detail

struct DecoupledAdjacency {
  SparseMatrix a_pos;
  SparseMatrix a_neg;
  PropagationMatrix prop_pos;
  PropagationMatrix prop_neg;
};

// Splits the signed digraph into undirected positive and negative graphs and
// builds their renormalized propagation matrices.
inline DecoupledAdjacency decouple(const SignedDigraph& g) {
  DecoupledAdjacency d;
  d.a_pos = detail::undirected_adjacency(g, 1);
  d.a_neg = detail::undirected_adjacency(g, -1);
  d.prop_pos = build_propagation(d.a_pos, PropagationKind::positive_branch);
  d.prop_neg = build_propagation(d.a_neg, PropagationKind::negative_branch);
  return d;
}

// Single signed graph variant: entries are the sign of the summed signs over
// both directions of a pair; pairs that cancel to zero are dropped. Degrees
// for the renormalization count surviving neighbors, as build_propagation
// derives them from |entries|.
inline PropagationMatrix build_signed_propagation(const SignedDigraph& g) {
  std::map<std::pair<std::int32_t, std::int32_t>, int> pair_sum;
  for (const SignedEdge& e : g.edges) {
    pair_sum[std::minmax(e.source, e.target)] += e.sign;
  }
  std::vector<CooEntry> entries;
  for (const auto& [pair, sum] : pair_sum) {
    if (sum == 0) continue;
    const double v = sum > 0 ? 1.0 : -1.0;
    entries.push_back({pair.first, pair.second, v});
    entries.push_back({pair.second, pair.first, v});
  }
  SparseMatrix adj = SparseMatrix::from_coo(g.num_nodes, g.num_nodes, std::move(entries));
  PropagationMatrix p = build_propagation(adj, PropagationKind::signed_laplacian);
  return p;
}

// Sorted outbound target lists (any sign), for membership tests and
// candidate counting.
struct OutboundIndex {
  std::vector<std::vector<std::int32_t>> targets;

  explicit OutboundIndex(const SignedDigraph& g) : targets(g.num_nodes) {
    for (const SignedEdge& e : g.edges) targets[e.source].push_back(e.target);
    for (auto& t : targets) std::sort(t.begin(), t.end());
  }

  bool has_edge(std::int32_t u, std::int32_t v) const {
    const auto& t = targets[u];
    return std::binary_search(t.begin(), t.end(), v);
  }

  std::int64_t out_degree(std::int32_t u) const {
    return static_cast<std::int64_t>(targets[u].size());
  }
};

}  // namespace dve
