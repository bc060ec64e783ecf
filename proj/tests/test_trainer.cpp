#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <numeric>
#include <vector>

#include "dve/trainer.hpp"
#include "testutil.hpp"

using namespace dve;

namespace {

TrainConfig small_config(Variant v, std::int64_t epochs) {
  TrainConfig cfg;
  cfg.variant = v;
  cfg.epochs = epochs;
  cfg.batch_size = 50;
  cfg.n_noise = 2;
  cfg.hidden_dim = 8;
  cfg.latent_dim = 4;
  cfg.dropout_rate = 0.2;
  cfg.seed = 11;
  return cfg;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.rows == b.rows && a.cols == b.cols &&
         std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("training is bitwise deterministic") {
  const SignedDigraph g = generate_planted_sign_graph(25, 2, 0.5, 0.4, 0.05, 13);
  const TrainConfig cfg = small_config(Variant::dve, 3);
  const TrainResult a = train(g, cfg);
  const TrainResult b = train(g, cfg);
  REQUIRE(bitwise_equal(a.embeddings.z_source, b.embeddings.z_source));
  REQUIRE(bitwise_equal(a.embeddings.z_target, b.embeddings.z_target));
  REQUIRE(a.steps.size() == b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    REQUIRE(a.steps[i].loss.total == b.steps[i].loss.total);
    REQUIRE(a.steps[i].grad_norm == b.steps[i].grad_norm);
  }

  TrainConfig other = cfg;
  other.seed = 12;
  const TrainResult c = train(g, other);
  REQUIRE(!bitwise_equal(a.embeddings.z_source, c.embeddings.z_source));
}

TEST_CASE("step records cover every batch of every epoch") {
  const SignedDigraph g = generate_planted_sign_graph(25, 2, 0.5, 0.4, 0.0, 13);
  const std::int64_t m = g.num_edges();
  TrainConfig cfg = small_config(Variant::bpwr, 2);
  cfg.batch_size = 16;
  const TrainResult r = train(g, cfg);
  const std::int64_t per_epoch = (m + 15) / 16;
  REQUIRE(static_cast<std::int64_t>(r.steps.size()) == 2 * per_epoch);
  REQUIRE(r.steps.front().epoch == 1);
  REQUIRE(r.steps.front().batch == 0);
  REQUIRE(r.steps.back().epoch == 2);
  REQUIRE(r.epoch_mean_loss.size() == 2);
  const double mean1 =
      std::accumulate(r.steps.begin(), r.steps.begin() + per_epoch, 0.0,
                      [](double acc, const StepRecord& s) { return acc + s.loss.total; }) /
      static_cast<double>(per_epoch);
  REQUIRE(r.epoch_mean_loss[0] == Catch::Approx(mean1).epsilon(1e-15));
}

TEST_CASE("ranking loss falls on a planted graph") {
  const SignedDigraph g = generate_planted_sign_graph(40, 2, 0.5, 0.4, 0.0, 29);
  TrainConfig cfg = small_config(Variant::bpwr, 30);
  cfg.learning_rate = 0.05;
  const TrainResult r = train(g, cfg);
  // near-zero tables put the very first batch at the coin-flip loss
  REQUIRE(std::abs(r.steps.front().loss.total - 2.0 * std::log(2.0)) < 0.01);
  const double first = r.epoch_mean_loss.front();
  const double last = r.epoch_mean_loss.back();
  REQUIRE(last < 0.6 * first);
}

TEST_CASE("dve trains and its loss includes positive kl") {
  const SignedDigraph g = generate_planted_sign_graph(25, 2, 0.5, 0.4, 0.0, 13);
  const TrainResult r = train(g, small_config(Variant::dve, 2));
  for (const StepRecord& s : r.steps) {
    REQUIRE(s.loss.kl_source > 0.0);
    REQUIRE(s.loss.kl_target > 0.0);
    REQUIRE(std::isfinite(s.loss.total));
  }
  REQUIRE(r.embeddings.z_source.rows == g.num_nodes);
  REQUIRE(r.embeddings.z_source.cols == 8);  // concat fusion of two 4-wide branches
  REQUIRE(r.embeddings.z_source.all_finite());
}

TEST_CASE("every variant runs end to end") {
  const SignedDigraph g = generate_planted_sign_graph(20, 2, 0.5, 0.4, 0.0, 17);
  for (Variant v : {Variant::dve, Variant::de, Variant::slve, Variant::bpwr, Variant::mf}) {
    const TrainResult r = train(g, small_config(v, 2));
    REQUIRE(r.embeddings.z_source.rows == g.num_nodes);
    REQUIRE(r.embeddings.z_source.cols == 8);
    REQUIRE(r.embeddings.z_source.all_finite());
    REQUIRE(r.embeddings.z_target.all_finite());
  }
}

TEST_CASE("an all-positive graph still trains") {
  const SignedDigraph g = generate_planted_sign_graph(20, 2, 0.6, 0.0, 0.0, 19);
  REQUIRE(g.negative_count == 0);
  for (Variant v : {Variant::dve, Variant::slve}) {
    const TrainResult r = train(g, small_config(v, 2));
    REQUIRE(r.embeddings.z_source.all_finite());
    for (const StepRecord& s : r.steps) REQUIRE(s.loss.bpwr_neg == 0.0);
  }
}

TEST_CASE("checkpoint hook fires on the configured cadence") {
  const SignedDigraph g = generate_planted_sign_graph(20, 2, 0.5, 0.4, 0.0, 17);
  TrainConfig cfg = small_config(Variant::de, 7);
  cfg.checkpoint_every = 3;
  std::vector<std::int64_t> seen;
  TrainHooks hooks;
  hooks.on_checkpoint = [&](std::int64_t epoch, const EncoderWeights&) {
    seen.push_back(epoch);
  };
  train(g, cfg, hooks);
  REQUIRE(seen == std::vector<std::int64_t>{3, 6});
}

TEST_CASE("epoch hook reports the running means") {
  const SignedDigraph g = generate_planted_sign_graph(20, 2, 0.5, 0.4, 0.0, 17);
  std::vector<double> means;
  TrainHooks hooks;
  hooks.on_epoch = [&](std::int64_t, double m) { means.push_back(m); };
  const TrainResult r = train(g, small_config(Variant::bpwr, 4), hooks);
  REQUIRE(means == r.epoch_mean_loss);
}

TEST_CASE("divergence raises with epoch and batch context") {
  const SignedDigraph g = generate_planted_sign_graph(20, 2, 0.5, 0.4, 0.0, 17);
  TrainConfig cfg = small_config(Variant::bpwr, 3);
  cfg.learning_rate = 1e160;  // squared updates overflow on the next step
  REQUIRE_THROWS_WITH(train(g, cfg), Catch::Matchers::ContainsSubstring("diverged at epoch"));
}

TEST_CASE("bad configs and empty graphs are rejected") {
  const SignedDigraph g = generate_planted_sign_graph(20, 2, 0.5, 0.4, 0.0, 17);
  TrainConfig cfg = small_config(Variant::dve, 1);
  cfg.dropout_rate = 1.0;
  REQUIRE_THROWS_AS(train(g, cfg), ValidationError);
  cfg = small_config(Variant::dve, 0);
  REQUIRE_THROWS_AS(train(g, cfg), ValidationError);
  const SignedDigraph empty = SignedDigraph::create(5, {});
  REQUIRE_THROWS_AS(train(empty, small_config(Variant::dve, 1)), ValidationError);
}
