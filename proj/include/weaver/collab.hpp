#pragma once

#include <fstream>
#include <iomanip>
#include <map>
#include <unordered_map>

#include "weaver/common.hpp"
#include "weaver/corpus.hpp"

namespace weaver {

/// Tool-tool co-occurrence counts C and cosine-normalized similarity A.
/// Both matrices are symmetric; A is kept sparse (zero entries omitted).
struct CooccurrenceGraph {
  std::size_t n = 0;
  std::vector<std::string> ids;  // row -> tool_id
  std::unordered_map<std::string, std::size_t> index;

  std::vector<std::int64_t> diag;                         // C_uu
  std::vector<std::map<std::size_t, std::int64_t>> off;   // C_uv, u != v, both directions
  std::vector<std::map<std::size_t, double>> sim;         // A_uv, u != v, both directions
  bool sim_built = false;

  std::int64_t count(std::size_t u, std::size_t v) const {
    if (u == v) return diag[u];
    auto it = off[u].find(v);
    return it == off[u].end() ? 0 : it->second;
  }

  double similarity_at(std::size_t u, std::size_t v) const {
    if (u == v) return diag[u] > 0 ? 1.0 : 0.0;
    auto it = sim[u].find(v);
    return it == sim[u].end() ? 0.0 : it->second;
  }
};

/// Set semantics per trajectory: each unordered pair of distinct tools present
/// in a trajectory counts once; the diagonal counts trajectories containing
/// the tool. Multiset semantics (multiplicity products) behind a flag.
inline CooccurrenceGraph build_cooccurrence(const TrajectorySet& trajs,
                                            const ToolCorpus& corpus,
                                            bool multiset = false) {
  CooccurrenceGraph g;
  g.n = corpus.size();
  g.ids.reserve(g.n);
  for (const auto& rec : corpus.records()) {
    g.index[rec.tool_id] = g.ids.size();
    g.ids.push_back(rec.tool_id);
  }
  g.diag.assign(g.n, 0);
  g.off.resize(g.n);

  for (const auto& traj : trajs.trajectories) {
    std::map<std::size_t, std::int64_t> mult;
    for (const auto& id : traj) mult[corpus.index_of(id)] += 1;
    for (auto it = mult.begin(); it != mult.end(); ++it) {
      g.diag[it->first] += multiset ? it->second : 1;
      for (auto jt = std::next(it); jt != mult.end(); ++jt) {
        const std::int64_t w = multiset ? it->second * jt->second : 1;
        g.off[it->first][jt->first] += w;
        g.off[jt->first][it->first] += w;
      }
    }
  }
  return g;
}

/// A_uv = C_uv / sqrt(C_uu * C_vv); zero whenever either diagonal count is 0.
inline CooccurrenceGraph similarity(CooccurrenceGraph g) {
  g.sim.assign(g.n, {});
  for (std::size_t u = 0; u < g.n; ++u) {
    if (g.diag[u] == 0) continue;
    for (const auto& [v, cuv] : g.off[u]) {
      if (g.diag[v] == 0 || cuv == 0) continue;
      g.sim[u][v] = static_cast<double>(cuv) /
                    std::sqrt(static_cast<double>(g.diag[u]) * static_cast<double>(g.diag[v]));
    }
  }
  g.sim_built = true;
  return g;
}

/// Keep only the top-k strongest neighbors per row (symmetrized by union).
inline void truncate_top_k(CooccurrenceGraph& g, std::size_t k) {
  std::vector<std::map<std::size_t, double>> kept(g.n);
  for (std::size_t u = 0; u < g.n; ++u) {
    std::vector<std::pair<double, std::size_t>> row;
    for (const auto& [v, a] : g.sim[u]) row.emplace_back(-a, v);
    std::sort(row.begin(), row.end());
    for (std::size_t i = 0; i < std::min(k, row.size()); ++i) {
      const std::size_t v = row[i].second;
      kept[u][v] = -row[i].first;
      kept[v][u] = -row[i].first;
    }
  }
  g.sim = std::move(kept);
}

inline void export_similarity(const CooccurrenceGraph& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write similarity file: " + path);
  out << std::setprecision(9);
  for (std::size_t u = 0; u < g.n; ++u)
    for (const auto& [v, a] : g.sim[u])
      if (u < v && a > 0) out << g.ids[u] << "\t" << g.ids[v] << "\t" << a << "\n";
}

// ---- graph Laplacian loss --------------------------------------------------
// Ordered double-sum convention: loss = sum_{u,v} A_uv ||zhat_u - zhat_v||^2,
// each unordered pair counted twice. grad wrt zhat_u = sum_v 4 A_uv (zhat_u - zhat_v).

struct CollabResult {
  double loss = 0.0;
  std::vector<Vec> grad;  // parallel to the batch
};

/// `batch_rows[i]` is the graph row index of batch element i; pairs outside
/// the batch are ignored (batch approximation of the full pairwise sum).
inline CollabResult collab_loss(const std::vector<Vec>& zhat,
                                const std::vector<std::size_t>& batch_rows,
                                const CooccurrenceGraph& g) {
  if (zhat.size() != batch_rows.size())
    throw Error("collab_loss: batch size mismatch");
  const std::size_t b = zhat.size();
  const std::size_t dim = b ? zhat[0].size() : 0;
  for (const auto& z : zhat)
    if (z.size() != dim) throw Error("collab_loss: dimension mismatch in batch");

  std::unordered_map<std::size_t, std::size_t> pos;
  pos.reserve(b);
  for (std::size_t i = 0; i < b; ++i) pos[batch_rows[i]] = i;

  CollabResult res;
  res.grad.assign(b, Vec(dim, 0.0));
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t u = batch_rows[i];
    for (const auto& [v, a] : g.sim[u]) {
      auto it = pos.find(v);
      if (it == pos.end()) continue;
      const std::size_t j = it->second;
      const double d2 = squared_distance(zhat[i], zhat[j]);
      res.loss += a * d2;  // ordered sum: (i,j) and (j,i) both visited
      for (std::size_t k = 0; k < dim; ++k)
        res.grad[i][k] += 4.0 * a * (zhat[i][k] - zhat[j][k]);
    }
  }
  return res;
}

}  // namespace weaver
