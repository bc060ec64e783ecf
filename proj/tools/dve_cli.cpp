// Command line front end: synth / split / stats / train / eval / export.
// Every command that writes files also writes a run manifest so results can
// be traced back to inputs, settings, and seed.

#include <chrono>
#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dve/dve.hpp"

namespace {

using dve::Json;

struct WallTimer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

std::string join_path(const std::string& dir, const std::string& name) {
  if (dir.empty()) return name;
  return dir.back() == '/' ? dir + name : dir + "/" + name;
}

dve::SignedDigraph load_graph(const std::string& path) {
  auto in = dve::open_input(path);
  try {
    return dve::parse_edge_list(in);
  } catch (const dve::ParseError& e) {
    throw dve::ParseError(path + ": " + e.what());
  }
}

struct SynthArgs {
  std::string out;
  std::int64_t nodes = 0;
  int communities = 2;
  double p_intra = 0.0;
  double p_inter = 0.0;
  double flip_noise = 0.0;
  std::uint64_t seed = 1;
};

int run_synth(const SynthArgs& a) {
  WallTimer timer;
  dve::RunManifest man;
  man.command = "synth";
  man.started_at = dve::utc_timestamp();
  man.seed = a.seed;
  man.arguments = {{"out", a.out},         {"nodes", a.nodes},
                   {"communities", a.communities}, {"p_intra", a.p_intra},
                   {"p_inter", a.p_inter}, {"flip_noise", a.flip_noise},
                   {"seed", a.seed}};

  dve::SignedDigraph g = dve::generate_planted_sign_graph(
      a.nodes, a.communities, a.p_intra, a.p_inter, a.flip_noise, a.seed);
  dve::write_edge_list_file(a.out, g);
  man.outputs.push_back(a.out);
  man.extra["stats"] = dve::stats_to_json(dve::graph_stats(g));

  man.finished_at = dve::utc_timestamp();
  man.wall_seconds = timer.seconds();
  dve::write_json_file(a.out + ".manifest.json", man.to_json());
  std::cout << "wrote " << a.out << " (" << g.num_edges() << " edges, "
            << g.num_nodes << " nodes)\n";
  return 0;
}

struct SplitArgs {
  std::string edges;
  std::string out_dir;
  double train_fraction = 0.8;
  std::uint64_t seed = 1;
  bool remap = false;
};

int run_split(const SplitArgs& a) {
  WallTimer timer;
  dve::RunManifest man;
  man.command = "split";
  man.started_at = dve::utc_timestamp();
  man.seed = a.seed;
  man.arguments = {{"edges", a.edges},
                   {"out_dir", a.out_dir},
                   {"train_fraction", a.train_fraction},
                   {"seed", a.seed},
                   {"remap", a.remap}};
  man.add_input(a.edges);
  dve::ensure_dir(a.out_dir);

  dve::SignedDigraph g;
  std::vector<std::int64_t> original_ids;
  if (a.remap) {
    auto in = dve::open_input(a.edges);
    dve::RemappedGraph rg = dve::parse_edge_list_remapped(in);
    g = std::move(rg.graph);
    original_ids = std::move(rg.original_ids);
  } else {
    g = load_graph(a.edges);
  }

  dve::EdgeSplit split = dve::split_edges(g, a.train_fraction, a.seed);
  const std::string train_path = join_path(a.out_dir, "train.edges");
  const std::string test_path = join_path(a.out_dir, "test.edges");
  dve::write_edge_list_file(train_path, split.train);
  dve::write_edge_list_file(test_path, g.num_nodes, split.test);
  man.outputs.push_back(train_path);
  man.outputs.push_back(test_path);

  if (a.remap) {
    const std::string map_path = join_path(a.out_dir, "node_map.csv");
    dve::write_node_map_csv(map_path, original_ids);
    man.outputs.push_back(map_path);
  }

  auto side_counts = [](const std::vector<dve::SignedEdge>& es) {
    Json j;
    std::int64_t pos = 0;
    for (const auto& e : es) {
      if (e.sign > 0) ++pos;
    }
    j["edges"] = static_cast<std::int64_t>(es.size());
    j["positive"] = pos;
    j["negative"] = static_cast<std::int64_t>(es.size()) - pos;
    return j;
  };
  Json split_info;
  split_info["num_nodes"] = g.num_nodes;
  split_info["train_fraction"] = a.train_fraction;
  split_info["seed"] = a.seed;
  split_info["train"] = side_counts(split.train.edges);
  split_info["test"] = side_counts(split.test);
  const std::string split_json = join_path(a.out_dir, "split.json");
  dve::write_json_file(split_json, split_info);
  man.outputs.push_back(split_json);

  man.finished_at = dve::utc_timestamp();
  man.wall_seconds = timer.seconds();
  dve::write_json_file(join_path(a.out_dir, "manifest.json"), man.to_json());
  std::cout << "split " << g.num_edges() << " edges into " << split.train.num_edges()
            << " train / " << split.test.size() << " test\n";
  return 0;
}

struct StatsArgs {
  std::string edges;
  std::string out;
};

int run_stats(const StatsArgs& a) {
  WallTimer timer;
  dve::SignedDigraph g = load_graph(a.edges);
  const Json j = dve::stats_to_json(dve::graph_stats(g));
  if (a.out.empty()) {
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  dve::RunManifest man;
  man.command = "stats";
  man.started_at = dve::utc_timestamp();
  man.arguments = {{"edges", a.edges}, {"out", a.out}};
  man.add_input(a.edges);
  dve::write_json_file(a.out, j);
  man.outputs.push_back(a.out);
  man.finished_at = dve::utc_timestamp();
  man.wall_seconds = timer.seconds();
  dve::write_json_file(a.out + ".manifest.json", man.to_json());
  return 0;
}

struct TrainArgs {
  std::string train;
  std::string out_dir;
  std::string variant = "dve";
  std::string fusion = "concat";
  dve::TrainConfig cfg;
};

int run_train(const TrainArgs& a) {
  WallTimer timer;
  dve::TrainConfig cfg = a.cfg;
  cfg.variant = dve::variant_from_string(a.variant);
  cfg.fusion = dve::fusion_from_string(a.fusion);
  cfg.validate();

  dve::RunManifest man;
  man.command = "train";
  man.started_at = dve::utc_timestamp();
  man.seed = cfg.seed;
  man.arguments = {{"train", a.train},
                   {"out_dir", a.out_dir},
                   {"variant", a.variant},
                   {"fusion", a.fusion},
                   {"epochs", cfg.epochs},
                   {"batch_size", cfg.batch_size},
                   {"learning_rate", cfg.learning_rate},
                   {"dropout", cfg.dropout_rate},
                   {"n_noise", cfg.n_noise},
                   {"hidden_dim", cfg.hidden_dim},
                   {"latent_dim", cfg.latent_dim},
                   {"layers", cfg.gcn_layers},
                   {"rmsprop_decay", cfg.rmsprop_decay},
                   {"rmsprop_epsilon", cfg.rmsprop_epsilon},
                   {"checkpoint_every", cfg.checkpoint_every},
                   {"seed", cfg.seed}};
  man.add_input(a.train);
  dve::ensure_dir(a.out_dir);

  dve::SignedDigraph g = load_graph(a.train);

  std::vector<dve::StepRecord> steps;
  dve::TrainHooks hooks;
  hooks.on_step = [&steps](const dve::StepRecord& r) { steps.push_back(r); };
  hooks.on_checkpoint = [&](std::int64_t epoch, const dve::EncoderWeights& w) {
    const std::string path =
        join_path(a.out_dir, "checkpoint_epoch_" + std::to_string(epoch) + ".dveckpt");
    dve::save_checkpoint(path, w);
    man.outputs.push_back(path);
  };

  const std::string log_path = join_path(a.out_dir, "training_log.csv");
  try {
    dve::TrainResult res = dve::train(g, cfg, hooks);

    const std::string ckpt_path = join_path(a.out_dir, "checkpoint.dveckpt");
    dve::save_checkpoint(ckpt_path, res.weights);
    man.outputs.push_back(ckpt_path);
    dve::write_training_log_csv(log_path, res.steps);
    man.outputs.push_back(log_path);
    const std::string emb_path = join_path(a.out_dir, "embeddings.csv");
    dve::write_embeddings_csv(emb_path, res.embeddings);
    man.outputs.push_back(emb_path);

    man.extra["epoch_mean_loss"] = res.epoch_mean_loss;
    man.extra["final_loss"] = res.epoch_mean_loss.back();
    man.finished_at = dve::utc_timestamp();
    man.wall_seconds = timer.seconds();
    dve::write_json_file(join_path(a.out_dir, "manifest.json"), man.to_json());
    std::cout << "trained " << a.variant << " for " << cfg.epochs << " epochs, final loss "
              << dve::fmt_double(res.epoch_mean_loss.back()) << "\n";
    return 0;
  } catch (const dve::NumericError&) {
    // keep the step log and any periodic checkpoints for the post-mortem
    dve::write_training_log_csv(log_path, steps);
    throw;
  }
}

struct EvalArgs {
  std::vector<std::string> checkpoints;
  std::string train;
  std::string test;
  std::string out;
  std::string task = "all";
  std::vector<int> ks = {10, 20, 50};
  std::string link_rep = "directed";
  dve::ProbeConfig probe;
  std::int64_t n_null = 10000;
  std::uint64_t seed = 1;
};

int run_eval(const EvalArgs& a) {
  WallTimer timer;
  const bool do_sign = a.task == "sign" || a.task == "all";
  const bool do_ranking = a.task == "ranking" || a.task == "all";
  const bool do_closeness = a.task == "closeness" || a.task == "all";
  if (!do_sign && !do_ranking && !do_closeness) {
    throw dve::ValidationError("unknown task: " + a.task);
  }

  dve::RunManifest man;
  man.command = "eval";
  man.started_at = dve::utc_timestamp();
  man.seed = a.seed;
  man.arguments = {{"checkpoints", a.checkpoints},
                   {"train", a.train},
                   {"test", a.test},
                   {"out", a.out},
                   {"task", a.task},
                   {"k", a.ks},
                   {"link_rep", a.link_rep},
                   {"probe_hidden", a.probe.hidden_dim},
                   {"probe_epochs", a.probe.epochs},
                   {"probe_learning_rate", a.probe.learning_rate},
                   {"n_null", a.n_null},
                   {"seed", a.seed}};
  for (const auto& c : a.checkpoints) man.add_input(c);
  man.add_input(a.train);
  man.add_input(a.test);

  dve::SignedDigraph train_graph = load_graph(a.train);
  dve::SignedDigraph test_graph = load_graph(a.test);
  if (test_graph.num_nodes > train_graph.num_nodes) {
    throw dve::ValidationError("test split names more nodes than the train split");
  }
  const std::vector<dve::SignedEdge>& test_edges = test_graph.edges;

  dve::ProbeConfig probe = a.probe;
  probe.link_rep = dve::link_rep_from_string(a.link_rep);

  // union of both splits, for pair-class closeness over the whole dataset
  std::optional<dve::SignedDigraph> union_graph;
  if (do_closeness) {
    std::vector<dve::SignedEdge> all_edges = train_graph.edges;
    all_edges.insert(all_edges.end(), test_edges.begin(), test_edges.end());
    union_graph = dve::SignedDigraph::create(train_graph.num_nodes, std::move(all_edges));
  }

  Json per_ckpt = Json::array();
  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t ci = 0; ci < a.checkpoints.size(); ++ci) {
    dve::EncoderWeights w = dve::load_checkpoint(a.checkpoints[ci]);
    if (w.num_nodes != train_graph.num_nodes) {
      throw dve::ValidationError("checkpoint was trained on " +
                                 std::to_string(w.num_nodes) + " nodes, graph has " +
                                 std::to_string(train_graph.num_nodes));
    }
    const dve::LatentEmbeddings emb = dve::eval_embeddings(w, train_graph);
    Json m;
    m["checkpoint"] = a.checkpoints[ci];
    m["variant"] = dve::to_string(w.variant);
    double selection = 0.0;
    if (do_sign) {
      const auto rep = dve::eval_sign_prediction(emb, train_graph, test_edges, probe, a.seed);
      m["sign_prediction"] = dve::sign_report_to_json(rep);
      selection = rep.auc;
    }
    if (do_ranking) {
      const auto rep = dve::eval_recommendation(emb, train_graph, test_edges, a.ks);
      m["recommendation"] = dve::ranking_report_to_json(rep);
      if (!do_sign) selection = rep.recall.back();
    }
    if (do_closeness) {
      const auto rep = dve::closeness_stats(emb, *union_graph, a.n_null, a.seed);
      m["closeness"] = dve::closeness_report_to_json(rep);
    }
    per_ckpt.push_back(m);
    if (selection > best_score) {
      best_score = selection;
      best = ci;
    }
  }

  Json out;
  out["task"] = a.task;
  out["selected_checkpoint"] = a.checkpoints[best];
  out["metrics"] = per_ckpt[best];
  if (a.checkpoints.size() > 1) out["all_checkpoints"] = per_ckpt;
  dve::write_json_file(a.out, out);
  man.outputs.push_back(a.out);

  man.finished_at = dve::utc_timestamp();
  man.wall_seconds = timer.seconds();
  dve::write_json_file(a.out + ".manifest.json", man.to_json());
  std::cout << out["metrics"].dump(2) << "\n";
  return 0;
}

struct ExportArgs {
  std::string checkpoint;
  std::string train;
  std::string out;
};

int run_export(const ExportArgs& a) {
  WallTimer timer;
  dve::RunManifest man;
  man.command = "export";
  man.started_at = dve::utc_timestamp();
  man.arguments = {{"checkpoint", a.checkpoint}, {"train", a.train}, {"out", a.out}};
  man.add_input(a.checkpoint);

  dve::EncoderWeights w = dve::load_checkpoint(a.checkpoint);
  dve::LatentEmbeddings emb;
  if (dve::is_gcn_variant(w.variant)) {
    if (a.train.empty()) {
      throw dve::ValidationError("variant " + dve::to_string(w.variant) +
                                 " rebuilds embeddings from the graph; pass --train");
    }
    man.add_input(a.train);
    dve::SignedDigraph g = load_graph(a.train);
    emb = dve::eval_embeddings(w, g);
  } else {
    emb.z_source = w.table_source;
    emb.z_target = w.table_target;
  }
  dve::write_embeddings_csv(a.out, emb);
  man.outputs.push_back(a.out);

  man.finished_at = dve::utc_timestamp();
  man.wall_seconds = timer.seconds();
  dve::write_json_file(a.out + ".manifest.json", man.to_json());
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Signed directed graph embeddings: decoupled variational GCN encoders "
               "with a balance-aware pairwise ranking objective"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from an INI file (sections per subcommand)");

  int threads = 1;
  app.add_option("--threads", threads, "worker threads for dense/sparse kernels")
      ->check(CLI::PositiveNumber);

  SynthArgs synth;
  CLI::App* s_synth = app.add_subcommand("synth", "generate a planted-community signed graph");
  s_synth->add_option("--out", synth.out, "output edge list")->required();
  s_synth->add_option("--nodes", synth.nodes, "node count")->required();
  s_synth->add_option("--communities", synth.communities, "community count");
  s_synth->add_option("--p-intra", synth.p_intra, "intra-community edge probability")->required();
  s_synth->add_option("--p-inter", synth.p_inter, "inter-community edge probability")->required();
  s_synth->add_option("--flip-noise", synth.flip_noise, "sign flip probability");
  s_synth->add_option("--seed", synth.seed, "rng seed");

  SplitArgs split;
  CLI::App* s_split = app.add_subcommand("split", "split an edge list into train/test");
  s_split->add_option("--edges", split.edges, "input edge list")->required();
  s_split->add_option("--out-dir", split.out_dir, "output directory")->required();
  s_split->add_option("--train-fraction", split.train_fraction, "train share of edges");
  s_split->add_option("--seed", split.seed, "rng seed");
  s_split->add_flag("--remap", split.remap, "accept arbitrary node ids, remap densely");

  StatsArgs stats;
  CLI::App* s_stats = app.add_subcommand("stats", "summarize an edge list");
  s_stats->add_option("--edges", stats.edges, "input edge list")->required();
  s_stats->add_option("--out", stats.out, "output JSON (stdout if omitted)");

  TrainArgs train;
  CLI::App* s_train = app.add_subcommand("train", "train an embedding model");
  s_train->add_option("--train", train.train, "training edge list")->required();
  s_train->add_option("--out-dir", train.out_dir, "output directory")->required();
  s_train->add_option("--variant", train.variant, "dve | de | slve | bpwr | mf");
  s_train->add_option("--fusion", train.fusion,
                      "concat | concat_mlp | ew_product | ew_product_mlp");
  s_train->add_option("--epochs", train.cfg.epochs, "training epochs");
  s_train->add_option("--batch-size", train.cfg.batch_size, "edges per batch");
  s_train->add_option("--learning-rate", train.cfg.learning_rate, "rmsprop step size");
  s_train->add_option("--dropout", train.cfg.dropout_rate, "hidden-layer dropout rate");
  s_train->add_option("--n-noise", train.cfg.n_noise, "noise targets per edge");
  s_train->add_option("--hidden-dim", train.cfg.hidden_dim, "hidden layer width");
  s_train->add_option("--latent-dim", train.cfg.latent_dim, "latent width per factor");
  s_train->add_option("--layers", train.cfg.gcn_layers, "gcn layers per stack (1..4)");
  s_train->add_option("--rmsprop-decay", train.cfg.rmsprop_decay, "rmsprop decay");
  s_train->add_option("--rmsprop-epsilon", train.cfg.rmsprop_epsilon, "rmsprop epsilon");
  s_train->add_option("--checkpoint-every", train.cfg.checkpoint_every,
                      "periodic checkpoint interval in epochs (0 = off)");
  s_train->add_option("--seed", train.cfg.seed, "rng seed");

  EvalArgs eval;
  CLI::App* s_eval = app.add_subcommand("eval", "evaluate a trained model");
  s_eval->add_option("--checkpoint", eval.checkpoints,
                     "model checkpoint (repeat to pick the best by the task metric)")
      ->required();
  s_eval->add_option("--train", eval.train, "training edge list")->required();
  s_eval->add_option("--test", eval.test, "held-out edge list")->required();
  s_eval->add_option("--out", eval.out, "output metrics JSON")->required();
  s_eval->add_option("--task", eval.task, "sign | ranking | closeness | all");
  s_eval->add_option("--k", eval.ks, "ranking cutoffs")->delimiter(',');
  s_eval->add_option("--link-rep", eval.link_rep, "directed | symmetric");
  s_eval->add_option("--probe-hidden", eval.probe.hidden_dim, "probe hidden width");
  s_eval->add_option("--probe-epochs", eval.probe.epochs, "probe training epochs");
  s_eval->add_option("--probe-lr", eval.probe.learning_rate, "probe learning rate");
  s_eval->add_option("--n-null", eval.n_null, "unlinked pairs sampled for closeness");
  s_eval->add_option("--seed", eval.seed, "rng seed for probe init and null pairs");

  ExportArgs exp;
  CLI::App* s_export = app.add_subcommand("export", "write embeddings from a checkpoint");
  s_export->add_option("--checkpoint", exp.checkpoint, "model checkpoint")->required();
  s_export->add_option("--train", exp.train,
                       "training edge list (needed for gcn variants)");
  s_export->add_option("--out", exp.out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  dve::set_num_threads(threads);
  try {
    if (s_synth->parsed()) return run_synth(synth);
    if (s_split->parsed()) return run_split(split);
    if (s_stats->parsed()) return run_stats(stats);
    if (s_train->parsed()) return run_train(train);
    if (s_eval->parsed()) return run_eval(eval);
    if (s_export->parsed()) return run_export(exp);
  } catch (const dve::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const dve::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const dve::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
