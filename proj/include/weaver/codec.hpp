#pragma once

#include <functional>
#include <map>

#include <json.hpp>

#include "weaver/corpus.hpp"
#include "weaver/quantizer.hpp"

namespace weaver {

struct CodeAssignment {
  std::size_t levels = 0;
  std::size_t codes_per_level = 0;
  std::map<std::string, std::vector<std::size_t>> codes;  // tool_id -> [i1..iL]
  std::size_t collision_report = 0;  // tools that needed reassignment pre-resolution
};

inline std::string spell_tokens(const std::vector<std::size_t>& code) {
  std::string s;
  for (std::size_t l = 0; l < code.size(); ++l)
    s += "<T" + std::to_string(l + 1) + "_" + std::to_string(code[l]) + ">";
  return s;
}

/// Final code assignment over the whole corpus: levels 1..L-1 by argmin,
/// level L by capacity-constrained Sinkhorn assignment (or argmin with
/// use_sinkhorn=false), then deterministic resolution of any residual
/// full-sequence duplicates.
inline CodeAssignment assign_codes(const QuantizerModel& model, const ToolCorpus& corpus,
                                   const EmbeddingTable& embeddings, double epsilon,
                                   std::size_t iters, bool use_sinkhorn = true) {
  const auto& cfg = model.config;
  const std::size_t n = corpus.size();
  const std::size_t k = cfg.codes_per_level;
  double capacity = std::pow(static_cast<double>(k), static_cast<double>(cfg.levels));
  if (static_cast<double>(n) > capacity)
    throw ConfigError("assign_codes: corpus of " + std::to_string(n) +
                      " tools exceeds code capacity K^L = " + std::to_string(capacity));

  // levels 1..L-1 greedily
  std::vector<std::vector<std::size_t>> seq(n);
  std::vector<Vec> residual(n);
  for (std::size_t i = 0; i < n; ++i) {
    residual[i] = model.encode(embeddings.at(corpus.at(i).tool_id));
    for (std::size_t l = 0; l + 1 < cfg.levels; ++l) {
      auto [idx, next] = quantize_level(residual[i], model.codebooks[l]);
      seq[i].push_back(idx);
      residual[i] = std::move(next);
    }
  }

  // final level
  const auto& last_cb = model.codebooks[cfg.levels - 1].centroids;
  if (use_sinkhorn && n > 1) {
    auto ua = uniform_assign(residual, last_cb, epsilon, iters);
    for (std::size_t i = 0; i < n; ++i) seq[i].push_back(ua.indices[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      auto [idx, next] = quantize_level(residual[i], model.codebooks[cfg.levels - 1]);
      seq[i].push_back(idx);
    }
  }

  CodeAssignment out;
  out.levels = cfg.levels;
  out.codes_per_level = k;

  // group by full sequence
  std::map<std::vector<std::size_t>, std::vector<std::size_t>> by_seq;
  for (std::size_t i = 0; i < n; ++i) by_seq[seq[i]].push_back(i);
  for (const auto& [s, tools] : by_seq)
    if (tools.size() > 1) out.collision_report += tools.size() - 1;

  // resolution: among colliding tools keep the one with lowest level-L cost,
  // reassign the rest (ascending tool_id) to their next-cheapest free level-L code
  auto level_cost = [&](std::size_t tool, std::size_t code) {
    return squared_distance(residual[tool], last_cb[code]);
  };
  std::map<std::vector<std::size_t>, std::size_t> taken;
  for (const auto& [s, tools] : by_seq) taken[s] = tools.front();

  for (auto& [s, tools] : by_seq) {
    if (tools.size() <= 1) continue;
    std::size_t keep = tools[0];
    for (std::size_t t : tools)
      if (level_cost(t, s.back()) < level_cost(keep, s.back()) ||
          (level_cost(t, s.back()) == level_cost(keep, s.back()) &&
           corpus.at(t).tool_id < corpus.at(keep).tool_id))
        keep = t;

    std::vector<std::size_t> movers;
    for (std::size_t t : tools)
      if (t != keep) movers.push_back(t);
    std::sort(movers.begin(), movers.end(), [&](std::size_t a, std::size_t b) {
      return corpus.at(a).tool_id < corpus.at(b).tool_id;
    });

    for (std::size_t t : movers) {
      std::vector<std::pair<double, std::size_t>> by_cost;
      for (std::size_t c = 0; c < k; ++c) by_cost.emplace_back(level_cost(t, c), c);
      std::sort(by_cost.begin(), by_cost.end());
      bool placed = false;
      for (const auto& [cost, c] : by_cost) {
        std::vector<std::size_t> cand = s;
        cand.back() = c;
        if (taken.count(cand)) continue;
        taken[cand] = t;
        seq[t] = cand;
        placed = true;
        break;
      }
      if (!placed)
        throw ConfigError("assign_codes: cannot resolve collision for " + corpus.at(t).tool_id +
                          ", prefix saturated");
    }
  }

  for (std::size_t i = 0; i < n; ++i) out.codes[corpus.at(i).tool_id] = seq[i];

  // post-resolution uniqueness is an invariant
  std::map<std::vector<std::size_t>, std::string> check;
  for (const auto& [id, s] : out.codes) {
    auto [it, fresh] = check.emplace(s, id);
    if (!fresh)
      throw NumericError("assign_codes: duplicate sequence after resolution: " + it->second +
                         " vs " + id);
  }
  return out;
}

// ---- trie ------------------------------------------------------------------

class CodeTrie {
 public:
  struct Node {
    std::map<std::size_t, std::size_t> children;  // code index -> node id
    std::ptrdiff_t tool = -1;                     // leaf payload
  };

  explicit CodeTrie(std::size_t levels = 0) : levels_(levels) { nodes_.emplace_back(); }

  std::size_t levels() const { return levels_; }
  std::size_t leaf_count() const { return leaves_; }
  const std::vector<std::string>& tool_ids() const { return tool_ids_; }

  void insert(const std::vector<std::size_t>& code, const std::string& tool_id) {
    if (code.size() != levels_) throw Error("trie: wrong code length for " + tool_id);
    std::size_t cur = 0;
    for (std::size_t c : code) {
      auto it = nodes_[cur].children.find(c);
      if (it == nodes_[cur].children.end()) {
        nodes_.emplace_back();
        it = nodes_[cur].children.emplace(c, nodes_.size() - 1).first;
      }
      cur = it->second;
    }
    if (nodes_[cur].tool >= 0)
      throw Error("trie: duplicate sequence for " + tool_id + " and " +
                  tool_ids_[static_cast<std::size_t>(nodes_[cur].tool)]);
    nodes_[cur].tool = static_cast<std::ptrdiff_t>(tool_ids_.size());
    tool_ids_.push_back(tool_id);
    ++leaves_;
  }

  /// Children of an internal prefix; throws if the prefix is not in the trie.
  std::vector<std::size_t> allowed_next(const std::vector<std::size_t>& prefix) const {
    const Node& node = locate(prefix);
    std::vector<std::size_t> out;
    out.reserve(node.children.size());
    for (const auto& [c, _] : node.children) out.push_back(c);
    return out;
  }

  const std::string& tool_at(const std::vector<std::size_t>& code) const {
    const Node& node = locate(code);
    if (node.tool < 0) throw Error("trie: not a leaf");
    return tool_ids_[static_cast<std::size_t>(node.tool)];
  }

  bool contains_leaf(const std::vector<std::size_t>& code) const {
    const Node* cur = &nodes_[0];
    for (std::size_t c : code) {
      auto it = cur->children.find(c);
      if (it == cur->children.end()) return false;
      cur = &nodes_[it->second];
    }
    return cur->tool >= 0;
  }

  const Node& root() const { return nodes_[0]; }

 private:
  const Node& locate(const std::vector<std::size_t>& prefix) const {
    std::size_t cur = 0;
    for (std::size_t c : prefix) {
      auto it = nodes_[cur].children.find(c);
      if (it == nodes_[cur].children.end()) throw Error("trie: prefix not present");
      cur = it->second;
    }
    return nodes_[cur];
  }

  std::size_t levels_;
  std::vector<Node> nodes_;
  std::vector<std::string> tool_ids_;
  std::size_t leaves_ = 0;
};

inline CodeTrie build_trie(const CodeAssignment& assignment) {
  CodeTrie trie(assignment.levels);
  for (const auto& [id, code] : assignment.codes) trie.insert(code, id);
  return trie;
}

// ---- constrained beam search ----------------------------------------------

/// Scoring contract: given the prefix of already chosen codes, return a
/// finite log-score for every code index at the next level. Masking invalid
/// continuations is the trie's job, not the scorer's.
using StepScorer = std::function<Vec(const std::vector<std::size_t>& prefix)>;

struct BeamHypothesis {
  std::vector<std::size_t> prefix;
  double score = 0.0;
};

struct ScoredTool {
  std::string tool_id;
  std::vector<std::size_t> code;
  double score = 0.0;
};

inline std::vector<ScoredTool> constrained_beam_search(const StepScorer& scorer,
                                                       const CodeTrie& trie, std::size_t width,
                                                       std::size_t topk) {
  if (width == 0 || topk == 0) throw ConfigError("beam search: width and topk must be >= 1");
  if (trie.leaf_count() == 0) return {};

  std::vector<BeamHypothesis> beam{BeamHypothesis{}};
  for (std::size_t level = 0; level < trie.levels(); ++level) {
    std::vector<BeamHypothesis> next;
    for (const auto& hyp : beam) {
      const Vec scores = scorer(hyp.prefix);
      for (std::size_t c : trie.allowed_next(hyp.prefix)) {
        if (c >= scores.size())
          throw Error("beam search: scorer returned too few scores");
        if (!std::isfinite(scores[c]))
          throw NumericError("beam search: scorer returned a non-finite score");
        BeamHypothesis h;
        h.prefix = hyp.prefix;
        h.prefix.push_back(c);
        h.score = hyp.score + scores[c];
        next.push_back(std::move(h));
      }
    }
    // top width by score, ties by lexicographic prefix
    std::sort(next.begin(), next.end(), [](const BeamHypothesis& a, const BeamHypothesis& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.prefix < b.prefix;
    });
    if (next.size() > width) next.resize(width);
    beam = std::move(next);
  }

  std::vector<ScoredTool> out;
  for (const auto& hyp : beam)
    out.push_back({trie.tool_at(hyp.prefix), hyp.prefix, hyp.score});
  std::sort(out.begin(), out.end(), [](const ScoredTool& a, const ScoredTool& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.code < b.code;
  });
  if (out.size() > topk) out.resize(topk);
  return out;
}

// ---- code map formats ------------------------------------------------------

inline void export_codemap_tsv(const CodeAssignment& a, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write code map: " + path);
  for (const auto& [id, code] : a.codes) {
    out << id << "\t";
    for (std::size_t l = 0; l < code.size(); ++l) out << (l ? "," : "") << code[l];
    out << "\t" << spell_tokens(code) << "\n";
  }
}

inline nlohmann::json codemap_to_json(const CodeAssignment& a) {
  nlohmann::json j;
  j["levels"] = a.levels;
  j["codes_per_level"] = a.codes_per_level;
  j["collision_report"] = a.collision_report;
  nlohmann::json codes = nlohmann::json::object();
  for (const auto& [id, code] : a.codes) codes[id] = code;
  j["codes"] = std::move(codes);
  return j;
}

inline CodeAssignment codemap_from_json(const nlohmann::json& j) {
  CodeAssignment a;
  a.levels = j.at("levels").get<std::size_t>();
  a.codes_per_level = j.at("codes_per_level").get<std::size_t>();
  a.collision_report = j.at("collision_report").get<std::size_t>();
  std::map<std::vector<std::size_t>, std::string> seen;
  for (const auto& [id, cj] : j.at("codes").items()) {
    std::vector<std::size_t> code = cj.get<std::vector<std::size_t>>();
    if (code.size() != a.levels)
      throw ParseError("codemap payload: codes." + id + " has wrong length");
    for (std::size_t c : code)
      if (c >= a.codes_per_level)
        throw ParseError("codemap payload: codes." + id + " index out of range");
    auto [it, fresh] = seen.emplace(code, id);
    if (!fresh)
      throw ParseError("codemap payload: duplicate sequence for " + it->second + " and " + id);
    a.codes[id] = std::move(code);
  }
  return a;
}

}  // namespace weaver
