#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dve/encoders.hpp"
#include "dve/errors.hpp"
#include "dve/graph.hpp"
#include "dve/losses.hpp"
#include "dve/optimizer.hpp"
#include "dve/sampling.hpp"

namespace dve {

struct TrainConfig {
  Variant variant = Variant::dve;
  Fusion fusion = Fusion::concat;
  std::int64_t epochs = 200;
  std::int64_t batch_size = 1000;
  double learning_rate = 0.01;
  double dropout_rate = 0.2;
  int n_noise = 5;
  std::int64_t hidden_dim = 128;
  std::int64_t latent_dim = 64;
  int gcn_layers = 2;
  double rmsprop_decay = 0.9;
  double rmsprop_epsilon = 1e-8;
  std::uint64_t seed = 1;
  std::int64_t checkpoint_every = 0;  // epochs between snapshots; 0 = none

  void validate() const {
    require(epochs >= 1, "config: epochs must be positive");
    require(batch_size >= 1, "config: batch size must be positive");
    require(learning_rate > 0.0, "config: learning rate must be positive");
    require(dropout_rate >= 0.0 && dropout_rate < 1.0,
            "config: dropout must lie in [0, 1)");
    require(n_noise >= 1, "config: n_noise must be positive");
    require(hidden_dim >= 1 && latent_dim >= 1, "config: dimensions must be positive");
    require(gcn_layers >= 1 && gcn_layers <= 4, "config: layers must be 1..4");
    require(rmsprop_decay > 0.0 && rmsprop_decay < 1.0,
            "config: rmsprop decay must lie in (0, 1)");
    require(rmsprop_epsilon > 0.0, "config: rmsprop epsilon must be positive");
    require(checkpoint_every >= 0, "config: checkpoint interval must be nonnegative");
  }
};

struct StepRecord {
  std::int64_t epoch = 0;  // 1-based
  std::int64_t batch = 0;  // 0-based within the epoch
  LossBreakdown loss;
  double grad_norm = 0.0;
};

struct TrainHooks {
  std::function<void(std::int64_t epoch, const EncoderWeights&)> on_checkpoint;
  std::function<void(const StepRecord&)> on_step;
  std::function<void(std::int64_t epoch, double mean_loss)> on_epoch;
};

struct TrainResult {
  EncoderWeights weights;
  std::vector<StepRecord> steps;
  std::vector<double> epoch_mean_loss;
  LatentEmbeddings embeddings;  // eval mode, final weights
};

// Full training loop. Deterministic in (graph, config): initialization,
// shuffles, noise targets, dropout, and eps all come from streams forked off
// config.seed. Throws NumericError (with epoch/batch context) if the model
// diverges; checkpoints already handed to hooks.on_checkpoint stand.
inline TrainResult train(const SignedDigraph& graph, const TrainConfig& cfg,
                         const TrainHooks& hooks = {}) {
  cfg.validate();
  require(graph.num_edges() >= 1, "train: graph has no edges");

  TrainResult res;
  res.weights = EncoderWeights::init(cfg.variant, cfg.fusion, graph.num_nodes,
                                     cfg.hidden_dim, cfg.latent_dim, cfg.gcn_layers,
                                     cfg.seed);

  DecoupledAdjacency dec;
  PropagationMatrix signed_prop;
  PropagationSet props;
  if (is_decoupled(cfg.variant)) {
    dec = decouple(graph);
    props = PropagationSet::for_weights(res.weights, &dec, nullptr);
  } else if (cfg.variant == Variant::slve) {
    signed_prop = build_signed_propagation(graph);
    props = PropagationSet::for_weights(res.weights, nullptr, &signed_prop);
  }

  TripletSampler sampler(graph, cfg.batch_size, cfg.n_noise, cfg.seed);
  Rng model_rng = Rng::forked(cfg.seed, 0x30d);

  std::vector<Tensor*> params = res.weights.all_params();
  RmsPropState opt_state = RmsPropState::like(params);
  const RmsPropConfig opt_cfg{cfg.learning_rate, cfg.rmsprop_decay, cfg.rmsprop_epsilon};

  EncodeOptions opt;
  opt.training = true;
  opt.dropout_rate = is_gcn_variant(cfg.variant) ? cfg.dropout_rate : 0.0;
  opt.rng = &model_rng;

  for (std::int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const std::vector<TripletBatch> batches = sampler.epoch_batches(epoch);
    double epoch_loss = 0.0;
    for (const TripletBatch& batch : batches) {
      try {
        Tape tape;
        EncoderRun run = encode(tape, res.weights, props, opt);
        Objective obj = assemble_objective(tape, run, batch);
        tape.backward(obj.total);

        std::vector<Tensor> grads;
        grads.reserve(run.params.size());
        for (NodeId id : run.params) grads.push_back(tape.grad(id));

        StepRecord rec;
        rec.epoch = epoch;
        rec.batch = batch.index;
        rec.loss = obj.parts;
        rec.grad_norm = global_grad_norm(grads);
        rmsprop_step(params, grads, opt_state, opt_cfg);

        epoch_loss += rec.loss.total;
        res.steps.push_back(rec);
        if (hooks.on_step) hooks.on_step(rec);
      } catch (const NumericError& e) {
        throw NumericError("diverged at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch.index) + ": " + e.what());
      }
    }
    const double mean_loss = epoch_loss / static_cast<double>(batches.size());
    res.epoch_mean_loss.push_back(mean_loss);
    if (hooks.on_epoch) hooks.on_epoch(epoch, mean_loss);
    if (hooks.on_checkpoint && cfg.checkpoint_every > 0 &&
        epoch % cfg.checkpoint_every == 0) {
      hooks.on_checkpoint(epoch, res.weights);
    }
  }

  res.embeddings = eval_embeddings(res.weights, props);
  return res;
}

}  // namespace dve
