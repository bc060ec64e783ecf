#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dve/losses.hpp"
#include "dve/trainer.hpp"
#include "testutil.hpp"

using namespace dve;

namespace {

const std::vector<Triplet> kTriplets = {{0, 1, 2}, {1, 3, 0}, {2, 0, 3}, {0, 2, 1}};

double loop_bpwr(const Tensor& zs, const Tensor& zt, const std::vector<Triplet>& ts) {
  double acc = 0.0;
  for (const Triplet& t : ts) {
    double margin = 0.0;
    for (std::int64_t c = 0; c < zs.cols; ++c) {
      margin += zs(t.i, c) * (zt(t.mid, c) - zt(t.low, c));
    }
    acc += std::log(1.0 / (1.0 + std::exp(-margin)));
  }
  return -acc / static_cast<double>(ts.size());
}

template <class Build>
void check_gradient(const Tensor& x, Build build, double tol = 1e-6) {
  auto f = [&](const Tensor& v) {
    Tape t;
    return t.value(build(t, t.leaf(v, true)))(0, 0);
  };
  Tape t;
  const NodeId xi = t.leaf(x, true);
  t.backward(build(t, xi));
  REQUIRE(testutil::grad_error(t.grad(xi), testutil::fd_gradient(f, x)) < tol);
}

}  // namespace

TEST_CASE("zero embeddings give ln 2 per ranking term") {
  Tape t;
  const NodeId zs = t.leaf(Tensor(4, 3), true);
  const NodeId zt = t.leaf(Tensor(4, 3), true);
  const NodeId pos = bpwr_term(t, zs, zt, kTriplets);
  REQUIRE(std::abs(t.value(pos)(0, 0) - std::log(2.0)) < 1e-12);
  const NodeId both = t.add(pos, bpwr_term(t, zs, zt, kTriplets));
  REQUIRE(std::abs(t.value(both)(0, 0) - 2.0 * std::log(2.0)) < 1e-12);
}

TEST_CASE("ranking term matches a loop oracle") {
  Rng rng(31);
  const Tensor zs = testutil::random_tensor(rng, 4, 3);
  const Tensor zt = testutil::random_tensor(rng, 4, 3);
  Tape t;
  const NodeId loss = bpwr_term(t, t.leaf(zs), t.leaf(zt), kTriplets);
  REQUIRE(std::abs(t.value(loss)(0, 0) - loop_bpwr(zs, zt, kTriplets)) < 1e-12);
}

TEST_CASE("ranking term gradients match finite differences") {
  Rng rng(37);
  const Tensor zs = testutil::random_tensor(rng, 4, 3);
  const Tensor zt = testutil::random_tensor(rng, 4, 3);
  check_gradient(zs, [&](Tape& t, NodeId v) {
    return bpwr_term(t, v, t.leaf(zt), kTriplets);
  });
  check_gradient(zt, [&](Tape& t, NodeId v) {
    return bpwr_term(t, t.leaf(zs), v, kTriplets);
  });
}

TEST_CASE("empty triplet lists contribute a constant zero") {
  Tape t;
  const NodeId zs = t.leaf(Tensor(4, 3, 0.5), true);
  const NodeId term = bpwr_term(t, zs, zs, {});
  REQUIRE(t.value(term)(0, 0) == 0.0);
  REQUIRE(!t.needs_grad(term));
}

TEST_CASE("kl of the standard normal is zero") {
  Tape t;
  const NodeId mu = t.leaf(Tensor(5, 4), true);
  const NodeId ls = t.leaf(Tensor(5, 4), true);
  REQUIRE(t.value(kl_standard_normal(t, mu, ls))(0, 0) == 0.0);
}

TEST_CASE("kl matches the closed form") {
  Tape t;
  const NodeId mu1 = t.leaf(Tensor(1, 1, 1.0));
  const NodeId ls0 = t.leaf(Tensor(1, 1, 0.0));
  REQUIRE(std::abs(t.value(kl_standard_normal(t, mu1, ls0))(0, 0) - 0.5) < 1e-15);

  const Tensor mu = Tensor::from({{1.0, 2.0}, {-0.5, 0.25}});
  const Tensor ls = Tensor::from({{0.5, -0.5}, {0.1, 0.0}});
  double want = 0.0;  // mean over rows of 1/2 sum_j (mu^2 + s^2 - 1 - ln s^2)
  for (std::int64_t i = 0; i < 2; ++i) {
    double row = 0.0;
    for (std::int64_t j = 0; j < 2; ++j) {
      const double s2 = std::exp(2.0 * ls(i, j));
      row += mu(i, j) * mu(i, j) + s2 - 1.0 - std::log(s2);
    }
    want += 0.5 * row;
  }
  want /= 2.0;
  Tape t2;
  const double got =
      t2.value(kl_standard_normal(t2, t2.leaf(mu), t2.leaf(ls)))(0, 0);
  REQUIRE(std::abs(got - want) < 1e-12);

  const NodeId wrong = t2.leaf(Tensor(3, 2));
  REQUIRE_THROWS_AS(kl_standard_normal(t2, t2.leaf(mu), wrong), ValidationError);
}

TEST_CASE("kl gradients match finite differences") {
  Rng rng(41);
  const Tensor mu = testutil::random_tensor(rng, 3, 4);
  const Tensor ls = testutil::random_tensor(rng, 3, 4);
  check_gradient(mu, [&](Tape& t, NodeId v) {
    return kl_standard_normal(t, v, t.leaf(ls));
  });
  check_gradient(ls, [&](Tape& t, NodeId v) {
    return kl_standard_normal(t, t.leaf(mu), v);
  });
}

TEST_CASE("score is the source-target inner product") {
  LatentEmbeddings e;
  e.z_source = Tensor::from({{1.0, 2.0}, {0.5, -1.0}});
  e.z_target = Tensor::from({{3.0, -1.0}, {2.0, 2.0}});
  REQUIRE(score(e, 0, 0) == 1.0);
  REQUIRE(score(e, 1, 1) == -1.0);
}

TEST_CASE("variational objectives carry kl parts, deterministic ones do not") {
  const SignedDigraph g = generate_planted_sign_graph(14, 2, 0.6, 0.5, 0.0, 21);
  REQUIRE(g.positive_count > 0);
  REQUIRE(g.negative_count > 0);
  const DecoupledAdjacency dec = decouple(g);
  const TripletSampler sampler(g, 1000, 2, 3);
  const TripletBatch batch = sampler.epoch_batches(0)[0];

  auto run_variant = [&](Variant v) {
    const EncoderWeights w = EncoderWeights::init(v, Fusion::concat, g.num_nodes, 6, 4, 2, 4);
    const PropagationSet props = PropagationSet::for_weights(w, &dec, nullptr);
    Rng rng(8);
    EncodeOptions opt;
    opt.training = true;
    opt.rng = &rng;
    Tape t;
    const EncoderRun run = encode(t, w, props, opt);
    return assemble_objective(t, run, batch).parts;
  };

  const LossBreakdown dve = run_variant(Variant::dve);
  REQUIRE(dve.kl_source > 0.0);
  REQUIRE(dve.kl_target > 0.0);
  REQUIRE(std::abs(dve.total - (dve.bpwr_pos + dve.bpwr_neg + dve.kl_source + dve.kl_target)) <
          1e-12);

  const LossBreakdown de = run_variant(Variant::de);
  REQUIRE(de.kl_source == 0.0);
  REQUIRE(de.kl_target == 0.0);
  REQUIRE(std::abs(de.total - (de.bpwr_pos + de.bpwr_neg)) < 1e-12);
}

TEST_CASE("table variants get the plain ranking objective") {
  const SignedDigraph g = generate_planted_sign_graph(14, 2, 0.6, 0.5, 0.0, 21);
  const TripletSampler sampler(g, 1000, 2, 3);
  const TripletBatch batch = sampler.epoch_batches(0)[0];
  const EncoderWeights w =
      EncoderWeights::init(Variant::bpwr, Fusion::concat, g.num_nodes, 6, 4, 2, 4);
  Tape t;
  const EncoderRun run = encode(t, w, PropagationSet{}, EncodeOptions{});
  const Objective obj = assemble_objective(t, run, batch);
  REQUIRE(obj.parts.kl_source == 0.0);
  REQUIRE(obj.parts.kl_target == 0.0);
  const double want = loop_bpwr(w.table_source, w.table_target, batch.pos_triplets) +
                      loop_bpwr(w.table_source, w.table_target, batch.neg_triplets);
  REQUIRE(std::abs(obj.parts.total - want) < 1e-12);
}
