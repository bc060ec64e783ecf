#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <vector>

#include "dve/sampling.hpp"
#include "testutil.hpp"

using namespace dve;

namespace {

SignedDigraph tiny_graph() {
  // 0 -> 1 (+), 0 -> 2 (-), 3 -> 0 (+), 4 -> 1 (-): five nodes, four edges
  return SignedDigraph::create(
      5, {{0, 1, 1}, {0, 2, -1}, {3, 0, 1}, {4, 1, -1}});
}

bool same_batches(const std::vector<TripletBatch>& a, const std::vector<TripletBatch>& b) {
  if (a.size() != b.size()) return false;
  auto same_triplets = [](const std::vector<Triplet>& x, const std::vector<Triplet>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i].i != y[i].i || x[i].mid != y[i].mid || x[i].low != y[i].low) return false;
    }
    return true;
  };
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same_triplets(a[i].pos_triplets, b[i].pos_triplets)) return false;
    if (!same_triplets(a[i].neg_triplets, b[i].neg_triplets)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("triplet counts follow the edge signs") {
  const SignedDigraph g = tiny_graph();
  const TripletSampler sampler(g, 100, 3, 1);
  const auto batches = sampler.epoch_batches(0);
  REQUIRE(batches.size() == 1);
  REQUIRE(batches[0].pos_triplets.size() == 2 * 3);  // two positive edges
  REQUIRE(batches[0].neg_triplets.size() == 2 * 3);
}

TEST_CASE("triplets are anchored on observed edges") {
  const SignedDigraph g = tiny_graph();
  const OutboundIndex out(g);
  const TripletSampler sampler(g, 100, 5, 2);
  for (const TripletBatch& b : sampler.epoch_batches(3)) {
    for (const Triplet& t : b.pos_triplets) {
      REQUIRE(out.has_edge(t.i, t.mid));  // mid is the linked target
      REQUIRE(t.low != t.i);
      REQUIRE(!out.has_edge(t.i, t.low));
    }
    for (const Triplet& t : b.neg_triplets) {
      REQUIRE(out.has_edge(t.i, t.low));  // low is the negatively linked target
      REQUIRE(t.mid != t.i);
      REQUIRE(!out.has_edge(t.i, t.mid));
    }
  }
}

TEST_CASE("batches slice the shuffled edge order") {
  SignedDigraph g = generate_planted_sign_graph(30, 2, 0.4, 0.3, 0.0, 9);
  const std::int64_t m = g.num_edges();
  const std::int64_t bs = 7;
  const TripletSampler sampler(g, bs, 2, 5);
  const auto batches = sampler.epoch_batches(1);
  REQUIRE(static_cast<std::int64_t>(batches.size()) == (m + bs - 1) / bs);
  std::int64_t covered = 0;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    REQUIRE(batches[i].index == static_cast<std::int64_t>(i));
    REQUIRE(batches[i].epoch == 1);
    const std::int64_t edges_here =
        static_cast<std::int64_t>(batches[i].pos_triplets.size() + batches[i].neg_triplets.size()) / 2;
    if (i + 1 < batches.size()) REQUIRE(edges_here == bs);
    covered += edges_here;
  }
  REQUIRE(covered == m);
}

TEST_CASE("epochs are deterministic and distinct") {
  SignedDigraph g = generate_planted_sign_graph(30, 2, 0.4, 0.3, 0.0, 9);
  const TripletSampler a(g, 8, 2, 5);
  const TripletSampler b(g, 8, 2, 5);
  const TripletSampler other_seed(g, 8, 2, 6);
  REQUIRE(same_batches(a.epoch_batches(4), b.epoch_batches(4)));
  REQUIRE(!same_batches(a.epoch_batches(4), a.epoch_batches(5)));
  REQUIRE(!same_batches(a.epoch_batches(4), other_seed.epoch_batches(4)));
}

TEST_CASE("null sampling excludes self and observed targets") {
  const SignedDigraph g = tiny_graph();
  const TripletSampler sampler(g, 100, 1, 1);
  Rng rng(17);
  std::set<std::int32_t> seen;
  for (int it = 0; it < 400; ++it) {
    const std::int32_t k = sampler.sample_null(0, rng);
    REQUIRE(k != 0);
    REQUIRE(k != 1);  // 0 -> 1 observed
    REQUIRE(k != 2);  // 0 -> 2 observed
    seen.insert(k);
  }
  REQUIRE(seen == std::set<std::int32_t>{3, 4});
}

TEST_CASE("exhausted nodes are reported by id") {
  // node 0 links to every other node, so it has no unobserved target
  const SignedDigraph g =
      SignedDigraph::create(3, {{0, 1, 1}, {0, 2, -1}, {1, 2, 1}});
  const TripletSampler sampler(g, 10, 1, 1);
  Rng rng(3);
  REQUIRE_THROWS_WITH(sampler.sample_null(0, rng),
                      Catch::Matchers::ContainsSubstring("node 0"));
  REQUIRE_NOTHROW(sampler.sample_null(1, rng));
}

TEST_CASE("constructor validates its arguments") {
  const SignedDigraph g = tiny_graph();
  REQUIRE_THROWS_AS(TripletSampler(g, 0, 1, 1), ValidationError);
  REQUIRE_THROWS_AS(TripletSampler(g, 10, 0, 1), ValidationError);
  const SignedDigraph empty = SignedDigraph::create(4, {});
  REQUIRE_THROWS_AS(TripletSampler(empty, 10, 1, 1), ValidationError);
}
