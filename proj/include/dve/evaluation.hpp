#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dve/encoders.hpp"
#include "dve/errors.hpp"
#include "dve/graph.hpp"
#include "dve/losses.hpp"
#include "dve/optimizer.hpp"
#include "dve/rng.hpp"
#include "dve/tape.hpp"

namespace dve {

// Rank-based AUC with midranks for ties: exactly the fraction of
// (positive, negative) pairs won, ties counted half.
inline double auc_score(const std::vector<double>& scores, const std::vector<int>& labels) {
  require(scores.size() == labels.size(), "auc: score and label counts differ");
  const std::int64_t n = static_cast<std::int64_t>(scores.size());
  std::int64_t n_pos = 0;
  for (int l : labels) {
    require(l == 0 || l == 1, "auc: labels must be 0 or 1");
    n_pos += l;
  }
  const std::int64_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw ValidationError("auc: need both classes");
  }
  std::vector<std::int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
    return scores[a] != scores[b] ? scores[a] < scores[b] : a < b;
  });
  double pos_rank_sum = 0.0;
  std::int64_t i = 0;
  while (i < n) {
    std::int64_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based midrank
    for (std::int64_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) pos_rank_sum += mid_rank;
    }
    i = j;
  }
  const double p = static_cast<double>(n_pos);
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(n_neg));
}

// F1 for the positive class; 0 when precision + recall is 0.
inline double f1_score(const std::vector<int>& predicted, const std::vector<int>& labels) {
  require(predicted.size() == labels.size(), "f1: prediction and label counts differ");
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predicted[i] == 1 && labels[i] == 1) ++tp;
    if (predicted[i] == 1 && labels[i] == 0) ++fp;
    if (predicted[i] == 0 && labels[i] == 1) ++fn;
  }
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

// How a test link (u, v) is presented to the probe. directed concatenates
// the source-role row of u with the target-role row of v; symmetric averages
// that with the reversed pairing, discarding the direction.
enum class LinkRep { directed, symmetric };

inline std::string to_string(LinkRep r) {
  return r == LinkRep::directed ? "directed" : "symmetric";
}

inline LinkRep link_rep_from_string(const std::string& s) {
  if (s == "directed") return LinkRep::directed;
  if (s == "symmetric") return LinkRep::symmetric;
  throw ValidationError("unknown link representation: " + s);
}

struct ProbeConfig {
  std::int64_t hidden_dim = 64;
  std::int64_t epochs = 100;
  double learning_rate = 0.01;
  double rmsprop_decay = 0.9;
  double rmsprop_epsilon = 1e-8;
  LinkRep link_rep = LinkRep::directed;
};

struct SignPredictionReport {
  double auc = 0.0;
  double f1 = 0.0;
  std::int64_t train_links = 0;
  std::int64_t test_links = 0;
};

namespace detail {

inline Tensor link_features(const LatentEmbeddings& emb,
                            const std::vector<SignedEdge>& links, LinkRep rep) {
  const std::int64_t w = emb.z_source.cols;
  Tensor x(static_cast<std::int64_t>(links.size()), 2 * w);
  for (std::size_t r = 0; r < links.size(); ++r) {
    const SignedEdge& e = links[r];
    for (std::int64_t j = 0; j < w; ++j) {
      double a = emb.z_source(e.source, j);
      double b = emb.z_target(e.target, j);
      if (rep == LinkRep::symmetric) {
        a = 0.5 * (a + emb.z_source(e.target, j));
        b = 0.5 * (b + emb.z_target(e.source, j));
      }
      x(static_cast<std::int64_t>(r), j) = a;
      x(static_cast<std::int64_t>(r), w + j) = b;
    }
  }
  return x;
}

struct ProbeModel {
  Tensor w1, b1, w2, b2;

  Tensor logits(const Tensor& x) const {
    Tensor ones(x.rows, 1, 1.0);
    Tensor h = add(matmul(x, w1), matmul(ones, b1));
    for (double& v : h.data) v = v > 0.0 ? v : 0.0;
    return add(matmul(h, w2), matmul(ones, b2));
  }
};

// Two-layer relu MLP trained full-batch with RMSProp on cross entropy.
inline ProbeModel fit_probe(const Tensor& x, const std::vector<int>& labels,
                            const ProbeConfig& cfg, std::uint64_t seed) {
  Rng rng = Rng::forked(seed, 0x9b0be);
  ProbeModel m;
  const std::int64_t in = x.cols, hid = cfg.hidden_dim;
  m.w1 = Tensor(in, hid);
  m.b1 = Tensor(1, hid);
  m.w2 = Tensor(hid, 1);
  m.b2 = Tensor(1, 1);
  const double bound1 = std::sqrt(6.0 / static_cast<double>(in + hid));
  for (double& v : m.w1.data) v = rng.uniform(-bound1, bound1);
  const double bound2 = std::sqrt(6.0 / static_cast<double>(hid + 1));
  for (double& v : m.w2.data) v = rng.uniform(-bound2, bound2);

  Tensor y(x.rows, 1);
  Tensor y_flip(x.rows, 1);
  for (std::int64_t i = 0; i < x.rows; ++i) {
    y(i, 0) = labels[i];
    y_flip(i, 0) = 1.0 - labels[i];
  }

  std::vector<Tensor*> params = {&m.w1, &m.b1, &m.w2, &m.b2};
  RmsPropState state = RmsPropState::like(params);
  const RmsPropConfig opt{cfg.learning_rate, cfg.rmsprop_decay, cfg.rmsprop_epsilon};

  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Tape t;
    const NodeId xn = t.leaf(x);
    const NodeId ones = t.leaf(Tensor(x.rows, 1, 1.0));
    const NodeId w1 = t.leaf(m.w1, true);
    const NodeId b1 = t.leaf(m.b1, true);
    const NodeId w2 = t.leaf(m.w2, true);
    const NodeId b2 = t.leaf(m.b2, true);
    const NodeId h = t.relu(t.add(t.matmul(xn, w1), t.matmul(ones, b1)));
    const NodeId logit = t.add(t.matmul(h, w2), t.matmul(ones, b2));
    // cross entropy: -mean[y ln sigma(l) + (1 - y) ln sigma(-l)]
    const NodeId ll = t.add(t.ew_mul(t.leaf(y), t.log_sigmoid(logit)),
                            t.ew_mul(t.leaf(y_flip), t.log_sigmoid(t.scalar_mul(logit, -1.0))));
    const NodeId loss = t.scalar_mul(t.mean(ll), -1.0);
    t.backward(loss);
    std::vector<Tensor> grads = {t.grad(w1), t.grad(b1), t.grad(w2), t.grad(b2)};
    rmsprop_step(params, grads, state, opt);
  }
  return m;
}

}  // namespace detail

// Link sign prediction: freeze the embeddings, train the probe on the train
// split's links, report AUC and F1 on the test links.
inline SignPredictionReport eval_sign_prediction(const LatentEmbeddings& emb,
                                                 const SignedDigraph& train,
                                                 const std::vector<SignedEdge>& test,
                                                 const ProbeConfig& cfg,
                                                 std::uint64_t seed) {
  require(!test.empty(), "sign prediction: empty test split");
  auto labels_of = [](const std::vector<SignedEdge>& es) {
    std::vector<int> ls;
    ls.reserve(es.size());
    for (const SignedEdge& e : es) ls.push_back(e.sign > 0 ? 1 : 0);
    return ls;
  };
  const std::vector<int> train_labels = labels_of(train.edges);
  const std::vector<int> test_labels = labels_of(test);
  auto has_both = [](const std::vector<int>& ls) {
    return std::count(ls.begin(), ls.end(), 1) > 0 &&
           std::count(ls.begin(), ls.end(), 0) > 0;
  };
  if (!has_both(train_labels) || !has_both(test_labels)) {
    throw ValidationError("sign prediction: a split carries only one sign class");
  }

  const Tensor x_train = detail::link_features(emb, train.edges, cfg.link_rep);
  const Tensor x_test = detail::link_features(emb, test, cfg.link_rep);
  const detail::ProbeModel probe = detail::fit_probe(x_train, train_labels, cfg, seed);

  const Tensor logits = probe.logits(x_test);
  std::vector<double> probs(test.size());
  std::vector<int> predicted(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    const double l = logits(static_cast<std::int64_t>(i), 0);
    probs[i] = l >= 0.0 ? 1.0 / (1.0 + std::exp(-l)) : std::exp(l) / (1.0 + std::exp(l));
    predicted[i] = probs[i] >= 0.5 ? 1 : 0;
  }

  SignPredictionReport rep;
  rep.auc = auc_score(probs, test_labels);
  rep.f1 = f1_score(predicted, test_labels);
  rep.train_links = train.num_edges();
  rep.test_links = static_cast<std::int64_t>(test.size());
  return rep;
}

struct RankingReport {
  std::vector<int> ks;
  std::vector<double> recall;     // aligned with ks
  std::vector<double> precision;  // aligned with ks
  std::int64_t evaluated_sources = 0;
};

// Node recommendation. For every source with at least one positive test
// link, candidates are all other nodes minus the source's train-split
// targets (either sign); relevant items are its positive test targets.
// Candidates are ranked by score, ties broken by node index.
inline RankingReport eval_recommendation(const LatentEmbeddings& emb,
                                         const SignedDigraph& train,
                                         const std::vector<SignedEdge>& test,
                                         std::vector<int> ks) {
  require(!ks.empty(), "ranking: need at least one cutoff");
  std::sort(ks.begin(), ks.end());
  require(ks.front() >= 1, "ranking: cutoffs must be positive");
  const std::int64_t n = train.num_nodes;
  OutboundIndex train_out(train);

  std::map<std::int32_t, std::set<std::int32_t>> relevant;
  for (const SignedEdge& e : test) {
    if (e.sign > 0) relevant[e.source].insert(e.target);
  }

  RankingReport rep;
  rep.ks = ks;
  rep.recall.assign(ks.size(), 0.0);
  rep.precision.assign(ks.size(), 0.0);
  const int max_k = ks.back();

  for (const auto& [src, rel] : relevant) {
    std::vector<std::pair<double, std::int32_t>> candidates;  // (score, node)
    candidates.reserve(n - 1);
    for (std::int32_t v = 0; v < n; ++v) {
      if (v != src && !train_out.has_edge(src, v)) {
        candidates.push_back({score(emb, src, v), v});
      }
    }
    if (candidates.empty()) continue;
    const std::int64_t top = std::min<std::int64_t>(max_k, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + top, candidates.end(),
                      [](const auto& a, const auto& b) {
                        return a.first != b.first ? a.first > b.first
                                                  : a.second < b.second;
                      });
    rep.evaluated_sources++;
    std::int64_t hits = 0;
    std::size_t ki = 0;
    for (std::int64_t r = 0; r < top; ++r) {
      if (rel.count(candidates[r].second)) ++hits;
      while (ki < ks.size() && r + 1 == ks[ki]) {
        rep.recall[ki] += static_cast<double>(hits) / static_cast<double>(rel.size());
        rep.precision[ki] += static_cast<double>(hits) / static_cast<double>(ks[ki]);
        ++ki;
      }
    }
    // cutoffs beyond the candidate list count the hits found so far
    while (ki < ks.size()) {
      rep.recall[ki] += static_cast<double>(hits) / static_cast<double>(rel.size());
      rep.precision[ki] += static_cast<double>(hits) / static_cast<double>(ks[ki]);
      ++ki;
    }
  }
  if (rep.evaluated_sources == 0) {
    throw ValidationError("ranking: no source has a positive test link");
  }
  for (std::size_t i = 0; i < ks.size(); ++i) {
    rep.recall[i] /= static_cast<double>(rep.evaluated_sources);
    rep.precision[i] /= static_cast<double>(rep.evaluated_sources);
  }
  return rep;
}

struct ClosenessClassStats {
  std::int64_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<std::int64_t> histogram;
};

struct ClosenessReport {
  int n_bins = 64;
  ClosenessClassStats positive;
  ClosenessClassStats negative;
  ClosenessClassStats unlinked;
  std::int64_t skipped_zero_norm = 0;
};

namespace detail {

inline bool cosine(const LatentEmbeddings& emb, std::int32_t i, std::int32_t j,
                   double& out) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::int64_t k = 0; k < emb.z_source.cols; ++k) {
    const double a = emb.z_source(i, k);
    const double b = emb.z_target(j, k);
    dot += a * b;
    na += a * a;
    nb += b * b;
  }
  if (na == 0.0 || nb == 0.0) return false;
  out = dot / (std::sqrt(na) * std::sqrt(nb));
  return true;
}

struct ClassAccum {
  std::vector<double> values;

  ClosenessClassStats finish(int n_bins) const {
    ClosenessClassStats s;
    s.histogram.assign(n_bins, 0);
    s.count = static_cast<std::int64_t>(values.size());
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size()));
    for (double v : values) {
      auto bin = static_cast<std::int64_t>(std::floor((v + 1.0) / 2.0 * n_bins));
      bin = std::clamp<std::int64_t>(bin, 0, n_bins - 1);
      s.histogram[bin]++;
    }
    return s;
  }
};

}  // namespace detail

// Cosine closeness between source and target rows, split by pair class:
// positively linked pairs, negatively linked pairs, and sampled unlinked
// pairs (no edge u -> v). Pairs with a zero-norm row are skipped and counted.
inline ClosenessReport closeness_stats(const LatentEmbeddings& emb,
                                       const SignedDigraph& g,
                                       std::int64_t n_null_samples, std::uint64_t seed,
                                       int n_bins = 64) {
  require(n_null_samples >= 0, "closeness: negative sample count");
  require(n_bins >= 1, "closeness: need at least one bin");
  ClosenessReport rep;
  rep.n_bins = n_bins;
  detail::ClassAccum pos, neg, nul;
  double c = 0.0;
  for (const SignedEdge& e : g.edges) {
    if (!detail::cosine(emb, e.source, e.target, c)) {
      rep.skipped_zero_norm++;
      continue;
    }
    (e.sign > 0 ? pos : neg).values.push_back(c);
  }
  OutboundIndex out(g);
  Rng rng = Rng::forked(seed, 0xc705e);
  const std::int64_t n = g.num_nodes;
  std::int64_t drawn = 0;
  std::int64_t attempts = 0;
  const std::int64_t attempt_cap = n_null_samples * 1000 + 1000;
  while (drawn < n_null_samples) {
    if (++attempts > attempt_cap) {
      throw ValidationError("closeness: cannot find unlinked pairs");
    }
    const auto u = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(n)));
    const auto v = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(n)));
    if (u == v || out.has_edge(u, v)) continue;
    ++drawn;
    if (!detail::cosine(emb, u, v, c)) {
      rep.skipped_zero_norm++;
      continue;
    }
    nul.values.push_back(c);
  }
  rep.positive = pos.finish(n_bins);
  rep.negative = neg.finish(n_bins);
  rep.unlinked = nul.finish(n_bins);
  return rep;
}

}  // namespace dve
