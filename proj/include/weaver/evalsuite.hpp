#pragma once

#include <set>

#include "weaver/codec.hpp"
#include "weaver/corpus.hpp"
#include "weaver/quantizer.hpp"

namespace weaver {

struct Query {
  std::string query_id;
  Vec embedding;
  std::set<std::string> relevant;
};

struct QuerySet {
  std::vector<Query> queries;
};

struct RankedRetrieval {
  std::string query_id;
  std::vector<ScoredTool> ranked;
};

// ---- NDCG ------------------------------------------------------------------

/// Binary-relevance NDCG@k. IDCG places min(k, |relevant|) relevant items
/// first, so it is never zero for a nonempty relevant set.
inline double ndcg_at_k(const std::vector<std::string>& ranked,
                        const std::set<std::string>& relevant, std::size_t k) {
  if (k == 0) throw ConfigError("ndcg_at_k: k must be >= 1");
  if (relevant.empty()) throw ConfigError("ndcg_at_k: empty relevant set");
  double dcg = 0.0;
  const std::size_t top = std::min(k, ranked.size());
  for (std::size_t i = 0; i < top; ++i)
    if (relevant.count(ranked[i])) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  double idcg = 0.0;
  const std::size_t ideal = std::min(k, relevant.size());
  for (std::size_t i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / idcg;
}

// ---- surrogate scorer ------------------------------------------------------

/// Stand-in for the fine-tuned generative model: the query is encoded into
/// the latent space and each next code is scored by the negated squared
/// distance between the running residual and the candidate centroid.
inline StepScorer surrogate_scorer(const QuantizerModel& model, const Vec& query_embedding) {
  Vec z = model.encode(query_embedding);
  return [&model, z = std::move(z)](const std::vector<std::size_t>& prefix) {
    Vec r = z;
    for (std::size_t l = 0; l < prefix.size(); ++l)
      axpy(-1.0, model.codebooks[l].centroids[prefix[l]], r);
    const auto& cb = model.codebooks.at(prefix.size()).centroids;
    Vec scores(cb.size());
    for (std::size_t k = 0; k < cb.size(); ++k) scores[k] = -squared_distance(r, cb[k]);
    return scores;
  };
}

inline RankedRetrieval retrieve(const Query& query, const QuantizerModel& model,
                                const CodeTrie& trie, std::size_t width, std::size_t topk) {
  RankedRetrieval out;
  out.query_id = query.query_id;
  out.ranked = constrained_beam_search(surrogate_scorer(model, query.embedding), trie, width, topk);
  return out;
}

// ---- evaluation ------------------------------------------------------------

struct EvalReport {
  std::map<std::size_t, double> ndcg;  // k -> mean over queries
  struct Row {
    std::string query_id;
    std::map<std::size_t, double> ndcg;
  };
  std::vector<Row> per_query;
  std::string fingerprint;  // run configuration fingerprint, filled by the caller
};

inline EvalReport run_eval(const QuerySet& queries, const QuantizerModel& model,
                           const CodeTrie& trie, std::size_t width,
                           const std::vector<std::size_t>& ks = {1, 3, 5}) {
  if (queries.queries.empty()) throw ConfigError("run_eval: empty query set");
  EvalReport rep;
  const std::size_t topk = *std::max_element(ks.begin(), ks.end());
  for (const auto& q : queries.queries) {
    auto rr = retrieve(q, model, trie, width, topk);
    std::vector<std::string> ranked_ids;
    for (const auto& st : rr.ranked) ranked_ids.push_back(st.tool_id);
    EvalReport::Row row;
    row.query_id = q.query_id;
    for (std::size_t k : ks) row.ndcg[k] = ndcg_at_k(ranked_ids, q.relevant, k);
    rep.per_query.push_back(std::move(row));
  }
  for (std::size_t k : ks) {
    double s = 0.0;
    for (const auto& row : rep.per_query) s += row.ndcg.at(k);
    rep.ndcg[k] = s / static_cast<double>(rep.per_query.size());
  }
  return rep;
}

/// Synthetic query set: noisy copies of relevant-tool embeddings.
inline QuerySet make_synthetic_queries(const ToolCorpus& corpus, const EmbeddingTable& emb,
                                       std::size_t n_queries, double noise,
                                       std::uint64_t seed) {
  if (corpus.size() == 0) throw ConfigError("make_synthetic_queries: empty corpus");
  QuerySet qs;
  auto rng = substream(seed, "queries");
  std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < n_queries; ++i) {
    const auto& rec = corpus.at(pick(rng));
    Query q;
    q.query_id = "q" + std::to_string(i);
    q.embedding = emb.at(rec.tool_id);
    for (double& x : q.embedding) x += noise * gauss(rng);
    q.relevant = {rec.tool_id};
    qs.queries.push_back(std::move(q));
  }
  return qs;
}

// ---- sweeps ----------------------------------------------------------------

struct SweepRow {
  double lambda_value = 0.0;
  std::size_t codes_per_level = 0;
  std::size_t levels = 0;
  std::size_t vocab_tokens = 0;   // K * L
  double capacity = 0.0;          // K^L
  bool feasible = true;
  std::size_t collision_report = 0;
  double uniformity_relative_std = 0.0;
  std::map<std::size_t, double> ndcg;  // k -> mean over seeds
};

struct SweepSettings {
  SyntheticSpec corpus_spec;
  QuantizerConfig quantizer;
  double sinkhorn_epsilon = 0.01;
  std::size_t sinkhorn_iters = 50;
  std::size_t beam_width = 8;
  std::size_t n_queries = 64;
  double query_noise = 0.05;
  std::vector<std::size_t> ks = {1, 3, 5};
};

/// Fit + assign + eval one configuration and seed; shared by all sweeps.
inline SweepRow run_single(const SweepSettings& s, QuantizerConfig cfg, std::uint64_t seed) {
  SyntheticSpec spec = s.corpus_spec;
  spec.seed = seed;
  auto synth = synth_corpus(spec);
  cfg.seed = seed;
  cfg.input_dim = synth.embeddings.dim;

  SweepRow row;
  row.codes_per_level = cfg.codes_per_level;
  row.levels = cfg.levels;
  row.lambda_value = cfg.collab_lambda;
  row.vocab_tokens = cfg.codes_per_level * cfg.levels;
  row.capacity =
      std::pow(static_cast<double>(cfg.codes_per_level), static_cast<double>(cfg.levels));
  if (static_cast<double>(synth.corpus.size()) > row.capacity) {
    row.feasible = false;
    return row;
  }

  auto graph = similarity(build_cooccurrence(synth.trajectories, synth.corpus));
  std::vector<Vec> embs;
  for (const auto& rec : synth.corpus.records()) embs.push_back(synth.embeddings.at(rec.tool_id));
  auto model = fit(embs, &graph, cfg);
  CodeAssignment assignment;
  try {
    assignment = assign_codes(model, synth.corpus, synth.embeddings, s.sinkhorn_epsilon,
                              s.sinkhorn_iters);
  } catch (const ConfigError&) {
    // prefix capacity exhausted for this trained model: same verdict as the
    // upfront K^L check, discovered late
    row.feasible = false;
    return row;
  }
  row.collision_report = assignment.collision_report;

  std::vector<std::size_t> final_codes;
  for (const auto& [id, code] : assignment.codes) final_codes.push_back(code.back());
  row.uniformity_relative_std =
      uniformity_stats(final_codes, cfg.codes_per_level).relative_std;

  auto trie = build_trie(assignment);
  auto queries =
      make_synthetic_queries(synth.corpus, synth.embeddings, s.n_queries, s.query_noise, seed);
  auto rep = run_eval(queries, model, trie, s.beam_width, s.ks);
  row.ndcg = rep.ndcg;
  return row;
}

inline SweepRow mean_over_seeds(const SweepSettings& s, const QuantizerConfig& cfg,
                                const std::vector<std::uint64_t>& seeds) {
  SweepRow acc;
  std::size_t n_ok = 0;
  for (std::uint64_t seed : seeds) {
    SweepRow r = run_single(s, cfg, seed);
    if (!r.feasible) return r;
    if (n_ok == 0) acc = r;
    else {
      acc.collision_report += r.collision_report;
      acc.uniformity_relative_std += r.uniformity_relative_std;
      for (auto& [k, v] : acc.ndcg) v += r.ndcg.at(k);
    }
    ++n_ok;
  }
  const double d = static_cast<double>(n_ok);
  acc.uniformity_relative_std /= d;
  for (auto& [k, v] : acc.ndcg) v /= d;
  return acc;
}

inline std::vector<SweepRow> sweep_lambda(const SweepSettings& s,
                                          const std::vector<double>& values,
                                          const std::vector<std::uint64_t>& seeds) {
  std::vector<SweepRow> rows;
  for (double lam : values) {
    QuantizerConfig cfg = s.quantizer;
    cfg.collab_lambda = lam;
    rows.push_back(mean_over_seeds(s, cfg, seeds));
    rows.back().lambda_value = lam;
  }
  return rows;
}

inline std::vector<SweepRow> sweep_vocab(const SweepSettings& s,
                                         const std::vector<std::size_t>& k_values,
                                         const std::vector<std::uint64_t>& seeds) {
  std::vector<SweepRow> rows;
  for (std::size_t k : k_values) {
    QuantizerConfig cfg = s.quantizer;
    cfg.codes_per_level = k;
    rows.push_back(mean_over_seeds(s, cfg, seeds));
    rows.back().codes_per_level = k;
    rows.back().vocab_tokens = k * cfg.levels;
    rows.back().capacity =
        std::pow(static_cast<double>(k), static_cast<double>(cfg.levels));
  }
  return rows;
}

inline std::vector<SweepRow> sweep_depth(const SweepSettings& s,
                                         const std::vector<std::size_t>& l_values,
                                         const std::vector<std::uint64_t>& seeds) {
  std::vector<SweepRow> rows;
  for (std::size_t l : l_values) {
    QuantizerConfig cfg = s.quantizer;
    cfg.levels = l;
    rows.push_back(mean_over_seeds(s, cfg, seeds));
    rows.back().levels = l;
    rows.back().vocab_tokens = cfg.codes_per_level * l;
    rows.back().capacity =
        std::pow(static_cast<double>(cfg.codes_per_level), static_cast<double>(l));
  }
  return rows;
}

// ---- atomic baseline -------------------------------------------------------

struct BaselineComparison {
  std::size_t n_tools = 0;
  std::size_t atomic_vocab = 0;        // one token per tool
  std::size_t compositional_vocab = 0; // K * L
  double capacity = 0.0;               // K^L
  double ratio = 0.0;                  // atomic / compositional
};

inline BaselineComparison atomic_baseline_stats(std::size_t n_tools, std::size_t k,
                                                std::size_t l) {
  if (n_tools == 0 || k == 0 || l == 0)
    throw ConfigError("atomic_baseline_stats: all inputs must be positive");
  BaselineComparison c;
  c.n_tools = n_tools;
  c.atomic_vocab = n_tools;
  c.compositional_vocab = k * l;
  c.capacity = std::pow(static_cast<double>(k), static_cast<double>(l));
  c.ratio = static_cast<double>(c.atomic_vocab) / static_cast<double>(c.compositional_vocab);
  return c;
}

}  // namespace weaver
