#pragma once

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dve/errors.hpp"
#include "dve/evaluation.hpp"
#include "dve/graph.hpp"
#include "dve/trainer.hpp"

namespace dve {

using Json = nlohmann::ordered_json;

// Shortest exactly-round-tripping decimal for a double.
inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = 0.0;
  std::sscanf(buf, "%lf", &back);
  if (back == v) {
    for (int prec = 1; prec < 17; ++prec) {
      char shorter[64];
      std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
      std::sscanf(shorter, "%lf", &back);
      if (back == v) return shorter;
    }
  }
  return buf;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open input file: " + path);
  return in;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open output file: " + path);
  out << content;
  if (!out) throw IoError("failed writing: " + path);
}

inline void write_json_file(const std::string& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

// FNV-1a over the file bytes; stable fingerprint for run manifests.
inline std::string fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open input file: " + path);
  std::uint64_t h = 14695981039346656037ULL;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  char hex[32];
  std::snprintf(hex, sizeof(hex), "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return hex;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

#ifndef DVE_BUILD_ID
#define DVE_BUILD_ID "unknown"
#endif

// Every command writes one of these next to its outputs, so a run can be
// reproduced from the manifest alone. Timestamps and wall time live only
// here; all other outputs are byte-stable for a fixed seed.
struct RunManifest {
  std::string command;
  Json arguments = Json::object();
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;  // path -> digest
  std::vector<std::string> outputs;
  std::string started_at;
  std::string finished_at;
  double wall_seconds = 0.0;
  Json extra = Json::object();

  void add_input(const std::string& path) { inputs[path] = fnv1a64_file(path); }

  Json to_json() const {
    Json j;
    j["command"] = command;
    j["arguments"] = arguments;
    j["seed"] = seed;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["build_id"] = DVE_BUILD_ID;
    j["started_at"] = started_at;
    j["finished_at"] = finished_at;
    j["wall_seconds"] = wall_seconds;
    if (!extra.empty()) j["extra"] = extra;
    return j;
  }
};

inline Json stats_to_json(const StatsReport& r) {
  Json j;
  j["num_nodes"] = r.num_nodes;
  j["num_edges"] = r.num_edges;
  j["positive_edges"] = r.positive_count;
  j["negative_edges"] = r.negative_count;
  j["undirected_positive_pairs"] = r.undirected_positive_pairs;
  j["undirected_negative_pairs"] = r.undirected_negative_pairs;
  j["positive_density"] = r.positive_density;
  j["negative_density"] = r.negative_density;
  return j;
}

inline void write_edge_list_file(const std::string& path, const SignedDigraph& g) {
  std::ostringstream out;
  serialize_edge_list(out, g);
  write_text_file(path, out.str());
}

inline void write_edge_list_file(const std::string& path, std::int64_t num_nodes,
                                 const std::vector<SignedEdge>& edges) {
  std::ostringstream out;
  serialize_edge_list(out, num_nodes, edges);
  write_text_file(path, out.str());
}

inline void write_node_map_csv(const std::string& path,
                               const std::vector<std::int64_t>& original_ids) {
  std::ostringstream out;
  out << "dense_id,original_id\n";
  for (std::size_t i = 0; i < original_ids.size(); ++i) {
    out << i << "," << original_ids[i] << "\n";
  }
  write_text_file(path, out.str());
}

inline void write_training_log_csv(const std::string& path,
                                   const std::vector<StepRecord>& steps) {
  std::ostringstream out;
  out << "epoch,batch,bpwr_pos,bpwr_neg,kl_source,kl_target,total,grad_norm\n";
  for (const StepRecord& s : steps) {
    out << s.epoch << "," << s.batch << "," << fmt_double(s.loss.bpwr_pos) << ","
        << fmt_double(s.loss.bpwr_neg) << "," << fmt_double(s.loss.kl_source) << ","
        << fmt_double(s.loss.kl_target) << "," << fmt_double(s.loss.total) << ","
        << fmt_double(s.grad_norm) << "\n";
  }
  write_text_file(path, out.str());
}

inline void write_embeddings_csv(const std::string& path, const LatentEmbeddings& emb) {
  std::ostringstream out;
  out << "node,role";
  for (std::int64_t j = 0; j < emb.z_source.cols; ++j) out << ",z" << j;
  out << "\n";
  auto rows = [&](const Tensor& z, const char* role) {
    for (std::int64_t i = 0; i < z.rows; ++i) {
      out << i << "," << role;
      for (std::int64_t j = 0; j < z.cols; ++j) out << "," << fmt_double(z(i, j));
      out << "\n";
    }
  };
  rows(emb.z_source, "source");
  rows(emb.z_target, "target");
  write_text_file(path, out.str());
}

inline Json sign_report_to_json(const SignPredictionReport& r) {
  Json j;
  j["auc"] = r.auc;
  j["f1"] = r.f1;
  j["train_links"] = r.train_links;
  j["test_links"] = r.test_links;
  return j;
}

inline Json ranking_report_to_json(const RankingReport& r) {
  Json j;
  j["evaluated_sources"] = r.evaluated_sources;
  Json at = Json::object();
  for (std::size_t i = 0; i < r.ks.size(); ++i) {
    Json row;
    row["recall"] = r.recall[i];
    row["precision"] = r.precision[i];
    at[std::to_string(r.ks[i])] = row;
  }
  j["at_k"] = at;
  return j;
}

inline Json closeness_report_to_json(const ClosenessReport& r) {
  auto cls = [](const ClosenessClassStats& c) {
    Json j;
    j["count"] = c.count;
    j["mean"] = c.mean;
    j["stddev"] = c.stddev;
    j["histogram"] = c.histogram;
    return j;
  };
  Json j;
  j["n_bins"] = r.n_bins;
  j["bin_range"] = {-1.0, 1.0};
  j["positive"] = cls(r.positive);
  j["negative"] = cls(r.negative);
  j["unlinked"] = cls(r.unlinked);
  j["skipped_zero_norm"] = r.skipped_zero_norm;
  return j;
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory: " + dir + " (" + ec.message() + ")");
}

}  // namespace dve
