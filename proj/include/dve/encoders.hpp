#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dve/errors.hpp"
#include "dve/graph.hpp"
#include "dve/rng.hpp"
#include "dve/tape.hpp"

namespace dve {

enum class Variant { dve, de, slve, bpwr, mf };
enum class Fusion { concat, concat_mlp, elementwise_product, elementwise_product_mlp };

inline bool is_gcn_variant(Variant v) {
  return v == Variant::dve || v == Variant::de || v == Variant::slve;
}
inline bool is_variational(Variant v) { return v == Variant::dve || v == Variant::slve; }
inline bool is_decoupled(Variant v) { return v == Variant::dve || v == Variant::de; }

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::dve: return "dve";
    case Variant::de: return "de";
    case Variant::slve: return "slve";
    case Variant::bpwr: return "bpwr";
    case Variant::mf: return "mf";
  }
  return "?";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "dve") return Variant::dve;
  if (s == "de") return Variant::de;
  if (s == "slve") return Variant::slve;
  if (s == "bpwr") return Variant::bpwr;
  if (s == "mf") return Variant::mf;
  throw ValidationError("unknown variant: " + s);
}

inline std::string to_string(Fusion f) {
  switch (f) {
    case Fusion::concat: return "concat";
    case Fusion::concat_mlp: return "concat_mlp";
    case Fusion::elementwise_product: return "ew_product";
    case Fusion::elementwise_product_mlp: return "ew_product_mlp";
  }
  return "?";
}

inline Fusion fusion_from_string(const std::string& s) {
  if (s == "concat") return Fusion::concat;
  if (s == "concat_mlp") return Fusion::concat_mlp;
  if (s == "ew_product") return Fusion::elementwise_product;
  if (s == "ew_product_mlp") return Fusion::elementwise_product_mlp;
  throw ValidationError("unknown fusion: " + s);
}

inline bool fusion_has_weight(Fusion f) {
  return f == Fusion::concat_mlp || f == Fusion::elementwise_product_mlp;
}

struct GcnStack {
  std::vector<Tensor> layers;
};

// One latent factor: a mu stack and, for variational variants, a log-sigma
// stack of the same shape.
struct VariationalBranch {
  GcnStack mu;
  GcnStack log_sigma;
};

struct RoleEncoder {
  VariationalBranch pos;
  VariationalBranch neg;  // unused by slve
  Tensor fusion_w;        // only for the mlp fusions
};

// Layer input/output widths for one stack: feature_dim -> hidden ... -> out.
inline std::vector<std::pair<std::int64_t, std::int64_t>> stack_layer_dims(
    std::int64_t feature_dim, std::int64_t hidden_dim, std::int64_t out_dim,
    int n_layers) {
  std::vector<std::pair<std::int64_t, std::int64_t>> dims;
  for (int l = 0; l < n_layers; ++l) {
    const std::int64_t in = l == 0 ? feature_dim : hidden_dim;
    const std::int64_t out = l == n_layers - 1 ? out_dim : hidden_dim;
    dims.push_back({in, out});
  }
  return dims;
}

// All model parameters for one variant, plus the dimensions needed to
// rebuild the computation. Parameter traversal order is fixed and is the
// contract for initialization, optimizer state, and checkpoints:
//   GCN variants: role (source, target) x branch (pos, then neg when
//   decoupled) x stat (mu, then log-sigma when variational) x layer index,
//   then the fusion weights (source, target) when the fusion has any.
//   Table variants: table_source, table_target.
struct EncoderWeights {
  Variant variant = Variant::dve;
  Fusion fusion = Fusion::concat;
  std::int64_t num_nodes = 0;
  std::int64_t feature_dim = 0;
  std::int64_t hidden_dim = 0;
  std::int64_t latent_dim = 0;
  int gcn_layers = 2;
  std::uint64_t init_seed = 0;

  RoleEncoder source;
  RoleEncoder target;
  Tensor table_source;
  Tensor table_target;

  // Width of one stack's output (2d for the single slve stack, d otherwise).
  std::int64_t stack_out_dim() const {
    return variant == Variant::slve ? 2 * latent_dim : latent_dim;
  }

  // Width of the final per-role embedding.
  std::int64_t embedding_dim() const {
    if (!is_decoupled(variant)) return 2 * latent_dim;
    return (fusion == Fusion::concat || fusion == Fusion::concat_mlp)
               ? 2 * latent_dim
               : latent_dim;
  }

  std::vector<Tensor*> all_params() {
    std::vector<Tensor*> out;
    if (is_gcn_variant(variant)) {
      for (RoleEncoder* role : {&source, &target}) {
        std::vector<VariationalBranch*> branches = {&role->pos};
        if (is_decoupled(variant)) branches.push_back(&role->neg);
        for (VariationalBranch* br : branches) {
          for (Tensor& w : br->mu.layers) out.push_back(&w);
          if (is_variational(variant)) {
            for (Tensor& w : br->log_sigma.layers) out.push_back(&w);
          }
        }
      }
      if (is_decoupled(variant) && fusion_has_weight(fusion)) {
        out.push_back(&source.fusion_w);
        out.push_back(&target.fusion_w);
      }
    } else {
      out.push_back(&table_source);
      out.push_back(&table_target);
    }
    return out;
  }

  std::vector<const Tensor*> all_params() const {
    auto mut = const_cast<EncoderWeights*>(this)->all_params();
    return {mut.begin(), mut.end()};
  }

  static EncoderWeights init(Variant variant, Fusion fusion, std::int64_t num_nodes,
                             std::int64_t hidden_dim, std::int64_t latent_dim,
                             int gcn_layers, std::uint64_t seed) {
    require(num_nodes >= 1, "encoder: need at least one node");
    require(hidden_dim >= 1 && latent_dim >= 1, "encoder: dimensions must be positive");
    require(gcn_layers >= 1 && gcn_layers <= 4, "encoder: layer count must be 1..4");
    EncoderWeights w;
    w.variant = variant;
    w.fusion = fusion;
    w.num_nodes = num_nodes;
    w.feature_dim = num_nodes;  // featureless setting: X = I
    w.hidden_dim = hidden_dim;
    w.latent_dim = latent_dim;
    w.gcn_layers = gcn_layers;
    w.init_seed = seed;
    w.allocate();

    Rng rng = Rng::forked(seed, 0x1417);
    for (Tensor* p : w.all_params()) {
      if (!is_gcn_variant(variant)) {
        for (double& v : p->data) v = rng.normal(0.0, 0.01);
      } else {
        const double bound = std::sqrt(6.0 / static_cast<double>(p->rows + p->cols));
        for (double& v : p->data) v = rng.uniform(-bound, bound);
      }
    }
    return w;
  }

  // Allocates zero tensors of the right shapes (used by init and by the
  // checkpoint reader, which then checks stored shapes against these).
  void allocate() {
    if (is_gcn_variant(variant)) {
      const auto dims =
          stack_layer_dims(feature_dim, hidden_dim, stack_out_dim(), gcn_layers);
      for (RoleEncoder* role : {&source, &target}) {
        std::vector<VariationalBranch*> branches = {&role->pos};
        if (is_decoupled(variant)) branches.push_back(&role->neg);
        for (VariationalBranch* br : branches) {
          br->mu.layers.clear();
          br->log_sigma.layers.clear();
          for (const auto& [in, out] : dims) br->mu.layers.emplace_back(in, out);
          if (is_variational(variant)) {
            for (const auto& [in, out] : dims) br->log_sigma.layers.emplace_back(in, out);
          }
        }
        if (is_decoupled(variant) && fusion_has_weight(fusion)) {
          const std::int64_t fw = embedding_dim();
          role->fusion_w = Tensor(fw, fw);
        }
      }
    } else {
      table_source = Tensor(num_nodes, 2 * latent_dim);
      table_target = Tensor(num_nodes, 2 * latent_dim);
    }
  }
};

// Sparse inputs the encoder variants propagate over. Pointees must outlive
// any tape that encodes with them.
struct PropagationSet {
  const SparseMatrix* pos = nullptr;
  const SparseMatrix* neg = nullptr;
  const SparseMatrix* sign = nullptr;

  static PropagationSet for_weights(const EncoderWeights& w, const DecoupledAdjacency* dec,
                                    const PropagationMatrix* signed_prop) {
    PropagationSet p;
    if (is_decoupled(w.variant)) {
      require(dec != nullptr, "encode: decoupled variant needs pos/neg propagation");
      p.pos = &dec->prop_pos.matrix;
      p.neg = &dec->prop_neg.matrix;
    } else if (w.variant == Variant::slve) {
      require(signed_prop != nullptr, "encode: slve needs the signed propagation");
      p.sign = &signed_prop->matrix;
    }
    return p;
  }
};

struct BranchNodes {
  NodeId z;
  NodeId mu;         // invalid for table variants
  NodeId log_sigma;  // invalid unless variational and training
};

struct EncoderRun {
  NodeId z_s;
  NodeId z_t;
  std::vector<BranchNodes> source_branches;
  std::vector<BranchNodes> target_branches;
  std::vector<NodeId> params;  // trainable leaves, order == all_params()
};

struct EncodeOptions {
  bool training = false;
  double dropout_rate = 0.0;
  Rng* rng = nullptr;  // consumed for dropout masks and eps when training
};

namespace detail {

inline Tensor dropout_mask(std::int64_t rows, std::int64_t cols, double rate, Rng& rng) {
  const double keep = 1.0 - rate;
  Tensor m(rows, cols);
  for (double& v : m.data) v = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return m;
}

// One GCN stack, featureless: layer 0 contracts A~ X W into A~ W since
// X = I. Hidden outputs get relu then (in training) inverted dropout; the
// top layer stays linear.
inline NodeId run_stack(Tape& t, const SparseMatrix* prop,
                        const std::vector<NodeId>& weights, const EncodeOptions& opt) {
  NodeId h;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    NodeId pre = l == 0 ? weights[0] : t.matmul(h, weights[l]);
    NodeId out = t.spmm_const(prop, pre);
    if (l + 1 < weights.size()) {
      h = t.relu(out);
      if (opt.training && opt.dropout_rate > 0.0) {
        const std::int64_t rows = t.value(h).rows;
        const std::int64_t cols = t.value(h).cols;
        h = t.ew_mul(h, t.leaf(dropout_mask(rows, cols, opt.dropout_rate, *opt.rng)));
      }
    } else {
      h = out;
    }
  }
  return h;
}

constexpr double kLogSigmaClamp = 10.0;

inline BranchNodes run_branch(Tape& t, const SparseMatrix* prop,
                              const std::vector<NodeId>& mu_ws,
                              const std::vector<NodeId>& sigma_ws,
                              const EncodeOptions& opt) {
  BranchNodes b;
  b.mu = run_stack(t, prop, mu_ws, opt);
  if (sigma_ws.empty()) {  // deterministic branch: z is the mean path
    b.z = b.mu;
    return b;
  }
  if (!opt.training) {  // eval uses the posterior mean
    b.z = b.mu;
    return b;
  }
  b.log_sigma = t.clamp(run_stack(t, prop, sigma_ws, opt), -kLogSigmaClamp, kLogSigmaClamp);
  Tensor eps(t.value(b.mu).rows, t.value(b.mu).cols);
  for (double& v : eps.data) v = opt.rng->normal();
  b.z = t.add(b.mu, t.ew_mul(t.exp(b.log_sigma), t.leaf(std::move(eps))));
  return b;
}

}  // namespace detail

// Builds the forward pass for one step. Registers every parameter as a
// trainable leaf (order == all_params()), then wires the variant's graph.
// In training mode the rng is consumed in a fixed order: per role, per
// branch, mu-stack dropout masks by layer, log-sigma-stack masks, then eps.
inline EncoderRun encode(Tape& t, const EncoderWeights& w, const PropagationSet& props,
                         const EncodeOptions& opt) {
  if (opt.training && (opt.dropout_rate > 0.0 || is_variational(w.variant))) {
    require(opt.rng != nullptr, "encode: training mode needs an rng");
  }
  require(!opt.training || (opt.dropout_rate >= 0.0 && opt.dropout_rate < 1.0),
          "encode: dropout rate must lie in [0, 1)");
  EncoderRun run;
  std::vector<const Tensor*> params = w.all_params();
  std::vector<NodeId> leaves;
  leaves.reserve(params.size());
  for (const Tensor* p : params) leaves.push_back(t.leaf(*p, true));
  run.params = leaves;

  if (!is_gcn_variant(w.variant)) {
    run.z_s = leaves[0];
    run.z_t = leaves[1];
    return run;
  }

  // Walk leaves in the same order all_params laid them out.
  std::size_t cursor = 0;
  auto take_stack = [&](int n) {
    std::vector<NodeId> ws(leaves.begin() + cursor, leaves.begin() + cursor + n);
    cursor += n;
    return ws;
  };

  const int L = w.gcn_layers;
  for (bool is_source : {true, false}) {
    std::vector<BranchNodes>& branches =
        is_source ? run.source_branches : run.target_branches;
    const int n_branches = is_decoupled(w.variant) ? 2 : 1;
    for (int bi = 0; bi < n_branches; ++bi) {
      const SparseMatrix* prop =
          w.variant == Variant::slve ? props.sign : (bi == 0 ? props.pos : props.neg);
      require(prop != nullptr, "encode: missing propagation matrix");
      std::vector<NodeId> mu_ws = take_stack(L);
      std::vector<NodeId> sigma_ws;
      if (is_variational(w.variant)) sigma_ws = take_stack(L);
      branches.push_back(detail::run_branch(t, prop, mu_ws, sigma_ws, opt));
    }
  }

  NodeId fusion_s, fusion_t;
  if (is_decoupled(w.variant) && fusion_has_weight(w.fusion)) {
    fusion_s = leaves[cursor++];
    fusion_t = leaves[cursor++];
  }

  auto fuse = [&](const std::vector<BranchNodes>& branches, NodeId fw) {
    if (w.variant == Variant::slve) return branches[0].z;
    const NodeId zp = branches[0].z;
    const NodeId zn = branches[1].z;
    switch (w.fusion) {
      case Fusion::concat: return t.concat_cols(zp, zn);
      case Fusion::concat_mlp: return t.matmul(t.concat_cols(zp, zn), fw);
      case Fusion::elementwise_product: return t.ew_mul(zp, zn);
      case Fusion::elementwise_product_mlp: return t.matmul(t.ew_mul(zp, zn), fw);
    }
    throw ValidationError("encode: unknown fusion");
  };
  run.z_s = fuse(run.source_branches, fusion_s);
  run.z_t = fuse(run.target_branches, fusion_t);
  return run;
}

// Final embeddings, eval mode (no sampling, no dropout).
struct LatentEmbeddings {
  Tensor z_source;
  Tensor z_target;
};

inline LatentEmbeddings eval_embeddings(const EncoderWeights& w, const PropagationSet& props) {
  Tape t;
  EncodeOptions opt;
  EncoderRun run = encode(t, w, props, opt);
  return {t.value(run.z_s), t.value(run.z_t)};
}

inline LatentEmbeddings eval_embeddings(const EncoderWeights& w, const SignedDigraph& g) {
  require(g.num_nodes == w.num_nodes, "eval: graph size differs from model");
  DecoupledAdjacency dec;
  PropagationMatrix sp;
  PropagationSet props;
  if (is_decoupled(w.variant)) {
    dec = decouple(g);
    props = PropagationSet::for_weights(w, &dec, nullptr);
  } else if (w.variant == Variant::slve) {
    sp = build_signed_propagation(g);
    props = PropagationSet::for_weights(w, nullptr, &sp);
  }
  return eval_embeddings(w, props);
}

}  // namespace dve
