#pragma once

#include <cstdint>
#include <vector>

#include "dve/encoders.hpp"
#include "dve/sampling.hpp"
#include "dve/tape.hpp"

namespace dve {

// Link score: inner product of source row i and target row j.
inline double score(const LatentEmbeddings& e, std::int64_t i, std::int64_t j) {
  return row_dot(e.z_source, i, e.z_target, j);
}

// One pairwise ranking term: -mean over triplets of
// ln sigma(z_s[i] . z_t[mid] - z_s[i] . z_t[low]).
// An empty triplet list contributes a constant zero.
inline NodeId bpwr_term(Tape& t, NodeId z_s, NodeId z_t,
                        const std::vector<Triplet>& triplets) {
  if (triplets.empty()) return t.leaf(Tensor(1, 1, 0.0));
  const std::int64_t m = static_cast<std::int64_t>(triplets.size());
  std::vector<std::int64_t> iv(m), mv(m), lv(m);
  for (std::int64_t r = 0; r < m; ++r) {
    iv[r] = triplets[r].i;
    mv[r] = triplets[r].mid;
    lv[r] = triplets[r].low;
  }
  const NodeId gi = t.row_gather(z_s, std::move(iv));
  const NodeId gmid = t.row_gather(z_t, std::move(mv));
  const NodeId glow = t.row_gather(z_t, std::move(lv));
  // row-wise margins z_i . (z_mid - z_low), folded with a ones column
  const std::int64_t width = t.value(gi).cols;
  const NodeId prod = t.ew_mul(gi, t.sub(gmid, glow));
  const NodeId margins = t.matmul(prod, t.leaf(Tensor(width, 1, 1.0)));
  return t.scalar_mul(t.mean(t.log_sigmoid(margins)), -1.0);
}

// KL(q || N(0, I)) averaged over rows:
//   (1 / 2R) * [ sum(mu^2 + exp(2 ls) - 2 ls) - R * C ]
// for an R x C mu. Matches the closed form (1/R) sum_i 1/2 sum_j
// (mu^2 + sigma^2 - 1 - ln sigma^2).
inline NodeId kl_standard_normal(Tape& t, NodeId mu, NodeId log_sigma) {
  require(t.value(mu).same_shape(t.value(log_sigma)), "kl: mu and log-sigma shapes differ");
  // copy the dimensions out: pushing nodes may reallocate tape storage
  const double rows = static_cast<double>(t.value(mu).rows);
  const double count = static_cast<double>(t.value(mu).size());
  const NodeId two_ls = t.scalar_mul(log_sigma, 2.0);
  const NodeId inner = t.sub(t.add(t.square(mu), t.exp(two_ls)), two_ls);
  const NodeId total = t.sub(t.sum(inner), t.leaf(Tensor(1, 1, count)));
  return t.scalar_mul(total, 1.0 / (2.0 * rows));
}

struct LossBreakdown {
  double bpwr_pos = 0.0;
  double bpwr_neg = 0.0;
  double kl_source = 0.0;
  double kl_target = 0.0;
  double total = 0.0;
};

struct Objective {
  NodeId total;
  LossBreakdown parts;
};

// Per-batch training objective: both ranking terms plus, for variational
// variants, the per-role KL regularizers. Non-variational runs carry no
// KL nodes and get the plain ranking objective.
inline Objective assemble_objective(Tape& t, const EncoderRun& run,
                                    const TripletBatch& batch) {
  Objective obj;
  const NodeId pos = bpwr_term(t, run.z_s, run.z_t, batch.pos_triplets);
  const NodeId neg = bpwr_term(t, run.z_s, run.z_t, batch.neg_triplets);
  NodeId total = t.add(pos, neg);
  obj.parts.bpwr_pos = t.value(pos)(0, 0);
  obj.parts.bpwr_neg = t.value(neg)(0, 0);

  auto role_kl = [&](const std::vector<BranchNodes>& branches, double& out) {
    NodeId acc;
    for (const BranchNodes& b : branches) {
      if (!b.log_sigma.valid()) continue;
      const NodeId k = kl_standard_normal(t, b.mu, b.log_sigma);
      acc = acc.valid() ? t.add(acc, k) : k;
    }
    if (acc.valid()) out = t.value(acc)(0, 0);
    return acc;
  };
  const NodeId kl_s = role_kl(run.source_branches, obj.parts.kl_source);
  const NodeId kl_t = role_kl(run.target_branches, obj.parts.kl_target);
  if (kl_s.valid()) total = t.add(total, kl_s);
  if (kl_t.valid()) total = t.add(total, kl_t);

  obj.total = total;
  obj.parts.total = t.value(total)(0, 0);
  return obj;
}

}  // namespace dve
