#pragma once

#include <filesystem>

#include "weaver/config.hpp"
#include "weaver/evalsuite.hpp"
#include "weaver/persistence.hpp"

namespace weaver {

struct LoadedCorpus {
  ToolCorpus corpus;
  EmbeddingTable embeddings;
  TrajectorySet trajectories;
};

inline LoadedCorpus load_corpus(const RunConfig& cfg) {
  LoadedCorpus out;
  if (cfg.synthetic) {
    SyntheticSpec spec = cfg.synth_spec;
    spec.seed = cfg.seed;
    auto synth = synth_corpus(spec);
    out.corpus = std::move(synth.corpus);
    out.embeddings = std::move(synth.embeddings);
    out.trajectories = std::move(synth.trajectories);
    return out;
  }
  out.corpus = load_tools(cfg.tools_path);
  if (cfg.embedding_format == "binary")
    out.embeddings = load_embeddings_binary(cfg.embeddings_path, cfg.quantizer.input_dim);
  else
    out.embeddings = load_embeddings(cfg.embeddings_path, cfg.quantizer.input_dim);
  for (const auto& rec : out.corpus.records())
    if (!out.embeddings.vectors.count(rec.tool_id))
      throw ConfigError("corpus.embeddings: no embedding for tool " + rec.tool_id);
  if (!cfg.trajectories_path.empty())
    out.trajectories =
        load_trajectories(cfg.trajectories_path, out.corpus, cfg.strict_trajectories);
  return out;
}

inline std::vector<Vec> embeddings_in_corpus_order(const LoadedCorpus& data) {
  std::vector<Vec> out;
  out.reserve(data.corpus.size());
  for (const auto& rec : data.corpus.records()) out.push_back(data.embeddings.at(rec.tool_id));
  return out;
}

struct PipelineResult {
  QuantizerModel model;
  CodeAssignment assignment;
  CooccurrenceGraph graph;
};

inline QuantizerModel run_fit(const RunConfig& cfg, const LoadedCorpus& data,
                              CooccurrenceGraph* graph_out = nullptr) {
  auto graph = similarity(build_cooccurrence(data.trajectories, data.corpus));
  auto model = fit(embeddings_in_corpus_order(data), &graph, cfg.quantizer);
  if (graph_out) *graph_out = std::move(graph);
  return model;
}

inline nlohmann::json uniformity_to_json(const UniformityReport& rep) {
  nlohmann::json j;
  j["counts"] = rep.counts;
  j["mean"] = rep.mean;
  j["stddev"] = rep.stddev;
  j["relative_std"] = rep.relative_std;
  j["min"] = rep.min;
  j["max"] = rep.max;
  j["p5"] = rep.p5;
  j["p95"] = rep.p95;
  return j;
}

inline nlohmann::json eval_report_to_json(const EvalReport& rep) {
  nlohmann::json j;
  nlohmann::json means = nlohmann::json::object();
  for (const auto& [k, v] : rep.ndcg) means["ndcg@" + std::to_string(k)] = v;
  j["means"] = std::move(means);
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : rep.per_query) {
    nlohmann::json rj;
    rj["query_id"] = row.query_id;
    for (const auto& [k, v] : row.ndcg) rj["ndcg@" + std::to_string(k)] = v;
    rows.push_back(std::move(rj));
  }
  j["per_query"] = std::move(rows);
  j["fingerprint"] = rep.fingerprint;
  return j;
}

inline nlohmann::json sweep_rows_to_json(const std::vector<SweepRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j;
    j["lambda"] = r.lambda_value;
    j["codes_per_level"] = r.codes_per_level;
    j["levels"] = r.levels;
    j["vocab_tokens"] = r.vocab_tokens;
    j["capacity"] = r.capacity;
    j["feasible"] = r.feasible;
    j["collision_report"] = r.collision_report;
    j["uniformity_relative_std"] = r.uniformity_relative_std;
    for (const auto& [k, v] : r.ndcg) j["ndcg@" + std::to_string(k)] = v;
    arr.push_back(std::move(j));
  }
  return arr;
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows,
                            const std::vector<std::size_t>& ks, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write sweep table: " + path);
  out << "lambda,codes_per_level,levels,vocab_tokens,capacity,feasible,collision_report,"
         "uniformity_relative_std";
  for (std::size_t k : ks) out << ",ndcg@" << k;
  out << "\n";
  out << std::setprecision(9);
  for (const auto& r : rows) {
    out << r.lambda_value << "," << r.codes_per_level << "," << r.levels << ","
        << r.vocab_tokens << "," << r.capacity << "," << (r.feasible ? "true" : "false") << ","
        << r.collision_report << "," << r.uniformity_relative_std;
    for (std::size_t k : ks) {
      out << ",";
      auto it = r.ndcg.find(k);
      if (it != r.ndcg.end()) out << it->second;
    }
    out << "\n";
  }
}

inline std::string out_path(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.output_dir);
  return (std::filesystem::path(cfg.output_dir) / name).string();
}

}  // namespace weaver
