#pragma once

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "weaver/common.hpp"

namespace weaver {

struct ToolRecord {
  std::string tool_id;
  std::string name;
  std::string doc;
  std::optional<std::string> category;
};

/// Ordered collection of tool records with unique ids.
class ToolCorpus {
 public:
  void add(ToolRecord rec) {
    if (rec.tool_id.empty()) throw ParseError("tool record with empty tool_id");
    auto [it, fresh] = index_.emplace(rec.tool_id, records_.size());
    if (!fresh) throw ParseError("duplicate tool_id: " + rec.tool_id);
    records_.push_back(std::move(rec));
  }

  std::size_t size() const { return records_.size(); }
  const ToolRecord& at(std::size_t i) const { return records_.at(i); }
  const std::vector<ToolRecord>& records() const { return records_; }

  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  std::size_t index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw Error("unknown tool_id: " + id);
    return it->second;
  }

 private:
  std::vector<ToolRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct EmbeddingTable {
  std::size_t dim = 0;
  std::unordered_map<std::string, Vec> vectors;

  const Vec& at(const std::string& id) const {
    auto it = vectors.find(id);
    if (it == vectors.end()) throw Error("no embedding for tool_id: " + id);
    return it->second;
  }
};

struct TrajectorySet {
  std::vector<std::vector<std::string>> trajectories;
};

struct SyntheticSpec {
  int n_tools = 0;
  int n_groups = 0;
  int dim = 0;
  double group_spread = 0.1;
  int trajectories_per_group = 0;
  int trajectory_len = 0;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_tools <= 0 || n_groups <= 0 || dim <= 0 || trajectories_per_group <= 0 ||
        trajectory_len <= 0)
      throw ConfigError("synthetic spec: all counts must be positive");
    if (n_groups > n_tools) throw ConfigError("synthetic spec: n_groups > n_tools");
    if (!(group_spread > 0)) throw ConfigError("synthetic spec: group_spread must be > 0");
  }
};

// ---- line-delimited loaders -----------------------------------------------

inline ToolCorpus load_tools(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open tool file: " + path);
  ToolCorpus corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    ToolRecord rec;
    try {
      rec.tool_id = j.at("tool_id").get<std::string>();
      rec.name = j.value("name", "");
      rec.doc = j.value("doc", "");
      if (j.contains("category") && !j["category"].is_null())
        rec.category = j["category"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    try {
      corpus.add(std::move(rec));
    } catch (const ParseError& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return corpus;
}

inline void save_tools(const ToolCorpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write tool file: " + path);
  for (const auto& rec : corpus.records()) {
    nlohmann::json j;
    j["tool_id"] = rec.tool_id;
    j["name"] = rec.name;
    j["doc"] = rec.doc;
    if (rec.category) j["category"] = *rec.category;
    out << j.dump() << "\n";
  }
}

inline EmbeddingTable load_embeddings(const std::string& path, std::size_t expected_dim) {
  if (expected_dim == 0) throw ConfigError("expected_dim must be positive");
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file: " + path);
  EmbeddingTable table;
  table.dim = expected_dim;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    const std::string id = j.at("tool_id").get<std::string>();
    Vec v = j.at("vector").get<Vec>();
    if (v.size() != expected_dim)
      throw ParseError(path + ":" + std::to_string(lineno) + ": dimension mismatch, row " +
                       std::to_string(lineno) + " has " + std::to_string(v.size()) +
                       " values, expected " + std::to_string(expected_dim));
    if (!all_finite(v))
      throw ParseError(path + ":" + std::to_string(lineno) + ": non-finite value in row " +
                       std::to_string(lineno));
    table.vectors[id] = std::move(v);
  }
  return table;
}

inline void save_embeddings(const EmbeddingTable& table, const ToolCorpus& corpus,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write embedding file: " + path);
  for (const auto& rec : corpus.records()) {
    nlohmann::json j;
    j["tool_id"] = rec.tool_id;
    j["vector"] = table.at(rec.tool_id);
    out << j.dump() << "\n";
  }
}

// ---- binary embedding format ----------------------------------------------
// magic "WVEMB1", LE u32 count, u32 dim, per row: u16 id length + id bytes +
// dim LE f32 values.

inline void save_embeddings_binary(const EmbeddingTable& table, const ToolCorpus& corpus,
                                   const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write binary embedding file: " + path);
  out.write("WVEMB1", 6);
  auto put_u32 = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  put_u32(static_cast<std::uint32_t>(corpus.size()));
  put_u32(static_cast<std::uint32_t>(table.dim));
  for (const auto& rec : corpus.records()) {
    const auto& id = rec.tool_id;
    const std::uint16_t len = static_cast<std::uint16_t>(id.size());
    unsigned char lb[2] = {static_cast<unsigned char>(len), static_cast<unsigned char>(len >> 8)};
    out.write(reinterpret_cast<const char*>(lb), 2);
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    for (double x : table.at(id)) {
      float f = static_cast<float>(x);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(bits);
    }
  }
}

inline EmbeddingTable load_embeddings_binary(const std::string& path,
                                             std::size_t expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open binary embedding file: " + path);
  char magic[6];
  if (!in.read(magic, 6) || std::memcmp(magic, "WVEMB1", 6) != 0)
    throw ParseError(path + ": bad magic, not a WVEMB1 file");
  auto get_u32 = [&]() {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw ParseError(path + ": truncated file");
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
  };
  const std::uint32_t count = get_u32();
  const std::uint32_t dim = get_u32();
  if (expected_dim != 0 && dim != expected_dim)
    throw ParseError(path + ": dimension mismatch, file has " + std::to_string(dim) +
                     ", expected " + std::to_string(expected_dim));
  EmbeddingTable table;
  table.dim = dim;
  for (std::uint32_t r = 0; r < count; ++r) {
    unsigned char lb[2];
    if (!in.read(reinterpret_cast<char*>(lb), 2)) throw ParseError(path + ": truncated file");
    const std::size_t len = std::size_t(lb[0]) | (std::size_t(lb[1]) << 8);
    std::string id(len, '\0');
    if (!in.read(id.data(), static_cast<std::streamsize>(len)))
      throw ParseError(path + ": truncated file");
    Vec v(dim);
    for (std::uint32_t i = 0; i < dim; ++i) {
      std::uint32_t bits = get_u32();
      float f;
      std::memcpy(&f, &bits, 4);
      v[i] = f;
      if (!std::isfinite(v[i]))
        throw ParseError(path + ": non-finite value in row " + std::to_string(r));
    }
    table.vectors[id] = std::move(v);
  }
  return table;
}

// ---- trajectories ----------------------------------------------------------

struct TrajectoryLoadStats {
  std::size_t dropped_ids = 0;  // lenient mode only
};

inline TrajectorySet load_trajectories(const std::string& path, const ToolCorpus& corpus,
                                       bool strict = true,
                                       TrajectoryLoadStats* stats = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trajectory file: " + path);
  TrajectorySet out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_array())
      throw ParseError(path + ":" + std::to_string(lineno) + ": trajectory must be an array");
    std::vector<std::string> traj;
    for (const auto& el : j) {
      std::string id = el.get<std::string>();
      if (!corpus.contains(id)) {
        if (strict)
          throw ParseError(path + ":" + std::to_string(lineno) + ": unknown tool_id: " + id);
        if (stats) ++stats->dropped_ids;
        continue;
      }
      traj.push_back(std::move(id));
    }
    if (traj.empty()) {
      if (strict)
        throw ParseError(path + ":" + std::to_string(lineno) + ": empty trajectory");
      continue;
    }
    out.trajectories.push_back(std::move(traj));
  }
  return out;
}

inline void save_trajectories(const TrajectorySet& trajs, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write trajectory file: " + path);
  for (const auto& t : trajs.trajectories) out << nlohmann::json(t).dump() << "\n";
}

// ---- deterministic hash embedder ------------------------------------------
// Test fallback for the external text encoder: whitespace+lowercase tokens,
// each feature-hashed to a bucket with a +-1 sign hash, bucket counts
// L2-normalized.

inline Vec hash_embed(const std::string& text, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw ConfigError("hash_embed: dim must be positive");
  Vec v(dim, 0.0);
  std::istringstream ss(text);
  std::string tok;
  std::size_t ntok = 0;
  while (ss >> tok) {
    std::transform(tok.begin(), tok.end(), tok.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    const std::uint64_t h = mix64(fnv1a64(tok) ^ mix64(seed));
    const std::size_t bucket = h % dim;
    const double sign = ((h >> 32) & 1) ? 1.0 : -1.0;
    v[bucket] += sign;
    ++ntok;
  }
  if (ntok == 0) throw ParseError("hash_embed: text has no tokens");
  const double n = norm2(v);
  if (n > 0)
    for (double& x : v) x /= n;
  return v;
}

// ---- synthetic corpus ------------------------------------------------------

struct SyntheticCorpus {
  ToolCorpus corpus;
  EmbeddingTable embeddings;
  TrajectorySet trajectories;
  std::vector<int> group_of;       // group label per tool index
  std::vector<Vec> group_centers;  // planted centroids
};

/// Planted-cluster corpus: n_groups well-separated centroids, tools as
/// centroid + isotropic noise, trajectories drawn within a single group so
/// co-usage aligns with the embedding clusters. Deterministic in spec.seed.
inline SyntheticCorpus synth_corpus(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticCorpus out;

  auto rng_centers = substream(spec.seed, "synth.centers");
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Vec> centers(spec.n_groups, Vec(spec.dim));
  for (auto& c : centers)
    for (double& x : c) x = gauss(rng_centers);
  // Rescale so the minimum pairwise centroid distance is >= 10 * group_spread.
  double min_dist = std::numeric_limits<double>::infinity();
  for (int a = 0; a < spec.n_groups; ++a)
    for (int b = a + 1; b < spec.n_groups; ++b)
      min_dist = std::min(min_dist, std::sqrt(squared_distance(centers[a], centers[b])));
  const double target = 10.0 * spec.group_spread;
  if (spec.n_groups > 1) {
    if (!(min_dist > 0)) throw NumericError("synth_corpus: degenerate centroid draw");
    if (min_dist < target)
      for (auto& c : centers)
        for (double& x : c) x *= target / min_dist;
  }
  out.group_centers = centers;

  auto rng_noise = substream(spec.seed, "synth.noise");
  out.embeddings.dim = static_cast<std::size_t>(spec.dim);
  char buf[32];
  for (int i = 0; i < spec.n_tools; ++i) {
    const int g = i % spec.n_groups;
    std::snprintf(buf, sizeof buf, "tool_%05d", i);
    ToolRecord rec;
    rec.tool_id = buf;
    rec.name = buf;
    rec.doc = "synthetic tool " + std::to_string(i) + " group " + std::to_string(g);
    rec.category = "group_" + std::to_string(g);
    out.corpus.add(std::move(rec));
    out.group_of.push_back(g);
    Vec e = centers[g];
    for (double& x : e) x += spec.group_spread * gauss(rng_noise);
    out.embeddings.vectors[buf] = std::move(e);
  }

  // Tools of each group, for within-group trajectory sampling.
  std::vector<std::vector<std::size_t>> members(spec.n_groups);
  for (int i = 0; i < spec.n_tools; ++i) members[out.group_of[i]].push_back(i);

  auto rng_traj = substream(spec.seed, "synth.trajectories");
  for (int g = 0; g < spec.n_groups; ++g) {
    const auto& m = members[g];
    if (m.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, m.size() - 1);
    for (int t = 0; t < spec.trajectories_per_group; ++t) {
      std::vector<std::string> traj;
      for (int s = 0; s < spec.trajectory_len; ++s)
        traj.push_back(out.corpus.at(m[pick(rng_traj)]).tool_id);
      out.trajectories.trajectories.push_back(std::move(traj));
    }
  }
  return out;
}

}  // namespace weaver
