#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dve/errors.hpp"
#include "dve/graph.hpp"
#include "dve/rng.hpp"

namespace dve {

// Ranked pair for the pairwise loss: the model should score i -> mid above
// i -> low. Positive-link triplets carry (i, j, k) as (i, mid=j, low=k);
// negative-link triplets carry (i, k, r) as (i, mid=k, low=r), with k an
// unobserved target sampled fresh each epoch.
struct Triplet {
  std::int32_t i = 0;
  std::int32_t mid = 0;
  std::int32_t low = 0;
};

struct TripletBatch {
  std::int64_t epoch = 0;
  std::int64_t index = 0;
  std::vector<Triplet> pos_triplets;
  std::vector<Triplet> neg_triplets;
};

// Epoch-wise batch builder. Every epoch reshuffles the training edges and
// draws n_noise unobserved targets per edge; everything is a pure function
// of (seed, epoch).
class TripletSampler {
 public:
  TripletSampler(const SignedDigraph& train, std::int64_t batch_size, int n_noise,
                 std::uint64_t seed)
      : graph_(&train), out_(train), batch_size_(batch_size), n_noise_(n_noise),
        seed_(seed) {
    require(batch_size >= 1, "sampler: batch size must be positive");
    require(n_noise >= 1, "sampler: n_noise must be positive");
    require(train.num_edges() >= 1, "sampler: graph has no edges");
  }

  std::vector<TripletBatch> epoch_batches(std::int64_t epoch) const {
    Rng rng(mix_seed(mix_seed(seed_, 0xba7c), static_cast<std::uint64_t>(epoch)));
    const std::int64_t m = graph_->num_edges();
    std::vector<std::int64_t> order(m);
    for (std::int64_t i = 0; i < m; ++i) order[i] = i;
    rng.shuffle(order);

    std::vector<TripletBatch> batches;
    for (std::int64_t start = 0; start < m; start += batch_size_) {
      TripletBatch b;
      b.epoch = epoch;
      b.index = static_cast<std::int64_t>(batches.size());
      const std::int64_t end = std::min(m, start + batch_size_);
      for (std::int64_t p = start; p < end; ++p) {
        const SignedEdge& e = graph_->edges[order[p]];
        for (int s = 0; s < n_noise_; ++s) {
          const std::int32_t k = sample_null(e.source, rng);
          if (e.sign > 0) {
            b.pos_triplets.push_back({e.source, e.target, k});
          } else {
            b.neg_triplets.push_back({e.source, k, e.target});
          }
        }
      }
      batches.push_back(std::move(b));
    }
    return batches;
  }

  // Uniform over targets with no observed edge from i (either sign), i
  // excluded. Rejection first; after 100 misses, exact enumeration.
  std::int32_t sample_null(std::int32_t i, Rng& rng) const {
    const std::int64_t n = graph_->num_nodes;
    const std::int64_t candidates = n - 1 - out_.out_degree(i);
    if (candidates <= 0) {
      throw ValidationError("sampler: node " + std::to_string(i) +
                            " has no unobserved targets");
    }
    for (int attempt = 0; attempt < 100; ++attempt) {
      const auto k = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(n)));
      if (k != i && !out_.has_edge(i, k)) return k;
    }
    std::vector<std::int32_t> pool;
    pool.reserve(candidates);
    for (std::int32_t k = 0; k < n; ++k) {
      if (k != i && !out_.has_edge(i, k)) pool.push_back(k);
    }
    return pool[rng.below(pool.size())];
  }

 private:
  const SignedDigraph* graph_;
  OutboundIndex out_;
  std::int64_t batch_size_;
  int n_noise_;
  std::uint64_t seed_;
};

}  // namespace dve
