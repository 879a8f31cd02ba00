#pragma once

#include <algorithm>
#include <numeric>

#include "weaver/common.hpp"

namespace weaver {

/// Entropically regularized transport of n tool residuals onto K centroids.
struct TransportProblem {
  std::size_t n = 0, k = 0;
  std::vector<double> cost;  // row-major n x k, squared distances
  double epsilon = 0.01;
  std::size_t max_iters = 50;
  Vec row_marginals;  // defaults to uniform 1/n
  Vec col_marginals;  // defaults to uniform 1/k

  double at(std::size_t d, std::size_t c) const { return cost[d * k + c]; }

  void validate() const {
    if (!(epsilon > 0)) throw ConfigError("sinkhorn: epsilon must be > 0");
    if (n == 0 || k == 0) throw ConfigError("sinkhorn: empty problem");
    if (cost.size() != n * k) throw ConfigError("sinkhorn: cost shape mismatch");
    for (double c : cost)
      if (!std::isfinite(c) || c < 0)
        throw NumericError("sinkhorn: cost entries must be finite and >= 0");
    auto check_marg = [](const Vec& m, std::size_t len, const char* what) {
      if (m.size() != len) throw ConfigError(std::string("sinkhorn: bad ") + what + " length");
      double s = 0;
      for (double x : m) {
        if (!(x > 0)) throw ConfigError(std::string("sinkhorn: ") + what + " must be positive");
        s += x;
      }
      if (std::abs(s - 1.0) > 1e-9)
        throw ConfigError(std::string("sinkhorn: ") + what + " must sum to 1");
    };
    if (!row_marginals.empty()) check_marg(row_marginals, n, "row_marginals");
    if (!col_marginals.empty()) check_marg(col_marginals, k, "col_marginals");
  }
};

struct TransportPlan {
  std::size_t n = 0, k = 0;
  std::vector<double> plan;  // row-major n x k
  double row_err = 0.0, col_err = 0.0;
  std::size_t iters_run = 0;
  std::vector<double> violation_trace;  // max row violation after each iteration

  double at(std::size_t d, std::size_t c) const { return plan[d * k + c]; }
};

/// Log-domain Sinkhorn-Knopp on the kernel exp(-cost/eps): alternating
/// row/column potential updates against the marginals. Stops at max_iters or
/// when the max marginal violation drops below 1e-6. Never produces
/// non-finite scalings for finite costs.
inline TransportPlan sinkhorn_plan(const TransportProblem& prob) {
  TransportProblem p = prob;
  if (p.row_marginals.empty()) p.row_marginals.assign(p.n, 1.0 / static_cast<double>(p.n));
  if (p.col_marginals.empty()) p.col_marginals.assign(p.k, 1.0 / static_cast<double>(p.k));
  p.validate();

  const std::size_t n = p.n, k = p.k;
  const double eps = p.epsilon;
  Vec f(n, 0.0), g(k, 0.0);
  Vec log_a(n), log_b(k);
  for (std::size_t d = 0; d < n; ++d) log_a[d] = std::log(p.row_marginals[d]);
  for (std::size_t c = 0; c < k; ++c) log_b[c] = std::log(p.col_marginals[c]);

  TransportPlan out;
  out.n = n;
  out.k = k;

  Vec scratch(std::max(n, k));
  const double tol = 1e-6;
  for (std::size_t it = 0; it < p.max_iters; ++it) {
    // row potentials
    for (std::size_t d = 0; d < n; ++d) {
      double m = -std::numeric_limits<double>::infinity();
      const double* cd = &p.cost[d * k];
      for (std::size_t c = 0; c < k; ++c) {
        scratch[c] = (g[c] - cd[c]) / eps;
        m = std::max(m, scratch[c]);
      }
      double s = 0.0;
      for (std::size_t c = 0; c < k; ++c) s += std::exp(scratch[c] - m);
      f[d] = eps * (log_a[d] - (m + std::log(s)));
    }
    // column potentials
    for (std::size_t c = 0; c < k; ++c) {
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t d = 0; d < n; ++d) {
        scratch[d] = (f[d] - p.cost[d * k + c]) / eps;
        m = std::max(m, scratch[d]);
      }
      double s = 0.0;
      for (std::size_t d = 0; d < n; ++d) s += std::exp(scratch[d] - m);
      g[c] = eps * (log_b[c] - (m + std::log(s)));
    }
    ++out.iters_run;
    // columns are exact after the g update; the residual lives on the rows
    double viol = 0.0;
    for (std::size_t d = 0; d < n; ++d) {
      double rs = 0.0;
      const double* cd = &p.cost[d * k];
      for (std::size_t c = 0; c < k; ++c) rs += std::exp((f[d] + g[c] - cd[c]) / eps);
      viol = std::max(viol, std::abs(rs - p.row_marginals[d]));
    }
    out.violation_trace.push_back(viol);
    if (viol < tol) break;
  }

  out.plan.resize(n * k);
  Vec row_sums(n, 0.0), col_sums(k, 0.0);
  for (std::size_t d = 0; d < n; ++d) {
    const double* cd = &p.cost[d * k];
    for (std::size_t c = 0; c < k; ++c) {
      const double v = std::exp((f[d] + g[c] - cd[c]) / eps);
      if (!std::isfinite(v)) throw NumericError("sinkhorn: non-finite plan entry");
      out.plan[d * k + c] = v;
      row_sums[d] += v;
      col_sums[c] += v;
    }
  }
  for (std::size_t d = 0; d < n; ++d)
    out.row_err = std::max(out.row_err, std::abs(row_sums[d] - p.row_marginals[d]));
  for (std::size_t c = 0; c < k; ++c)
    out.col_err = std::max(out.col_err, std::abs(col_sums[c] - p.col_marginals[c]));
  return out;
}

/// Per-row argmax of the plan (ties to the smallest column). This is the
/// training-time soft-to-hard assignment; capacities are not enforced here.
inline std::vector<std::size_t> plan_argmax(const TransportPlan& plan) {
  std::vector<std::size_t> idx(plan.n);
  for (std::size_t d = 0; d < plan.n; ++d) {
    std::size_t best = 0;
    double best_v = -1.0;
    for (std::size_t c = 0; c < plan.k; ++c) {
      const double v = plan.at(d, c);
      if (v > best_v) {
        best_v = v;
        best = c;
      }
    }
    idx[d] = best;
  }
  return idx;
}

struct UniformityReport {
  std::vector<std::size_t> counts;  // per code
  double mean = 0.0;                // target n / K
  double stddev = 0.0;
  double relative_std = 0.0;
  std::size_t min = 0, max = 0;
  std::size_t p5 = 0, p95 = 0;
};

inline UniformityReport uniformity_stats(const std::vector<std::size_t>& indices,
                                         std::size_t k) {
  UniformityReport rep;
  rep.counts.assign(k, 0);
  for (std::size_t i : indices) {
    if (i >= k) throw Error("uniformity_stats: index out of range");
    ++rep.counts[i];
  }
  const double n = static_cast<double>(indices.size());
  rep.mean = n / static_cast<double>(k);
  double var = 0.0;
  rep.min = indices.empty() ? 0 : *std::min_element(rep.counts.begin(), rep.counts.end());
  rep.max = *std::max_element(rep.counts.begin(), rep.counts.end());
  for (std::size_t c : rep.counts) {
    const double d = static_cast<double>(c) - rep.mean;
    var += d * d;
  }
  var /= static_cast<double>(k);
  rep.stddev = std::sqrt(var);
  rep.relative_std = rep.mean > 0 ? rep.stddev / rep.mean : 0.0;
  std::vector<std::size_t> sorted = rep.counts;
  std::sort(sorted.begin(), sorted.end());
  rep.p5 = sorted[static_cast<std::size_t>(0.05 * static_cast<double>(k - 1))];
  rep.p95 = sorted[static_cast<std::size_t>(0.95 * static_cast<double>(k - 1))];
  return rep;
}

struct UniformAssignment {
  std::vector<std::size_t> indices;
  UniformityReport report;
  TransportPlan plan;
};

/// Solve the uniform transport problem and round to a hard, capacity-
/// respecting assignment: tools in descending order of plan-argmax
/// confidence, each taking its highest-probability column with remaining
/// capacity.
inline UniformAssignment uniform_assign(const std::vector<Vec>& residuals,
                                        const std::vector<Vec>& centroids, double epsilon,
                                        std::size_t iters, std::size_t capacity = 0) {
  const std::size_t n = residuals.size();
  const std::size_t k = centroids.size();
  if (n == 0) throw ConfigError("uniform_assign: no residuals");
  if (capacity == 0) capacity = (n + k - 1) / k;  // ceil(n/K)
  if (n > k * capacity)
    throw ConfigError("uniform_assign: infeasible, " + std::to_string(n) + " tools > " +
                      std::to_string(k) + " codes x capacity " + std::to_string(capacity));

  TransportProblem prob;
  prob.n = n;
  prob.k = k;
  prob.epsilon = epsilon;
  prob.max_iters = iters;
  prob.cost.resize(n * k);
  for (std::size_t d = 0; d < n; ++d)
    for (std::size_t c = 0; c < k; ++c)
      prob.cost[d * k + c] = squared_distance(residuals[d], centroids[c]);

  UniformAssignment out;
  out.plan = sinkhorn_plan(prob);

  // order tools by argmax confidence, descending (ties by tool index)
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Vec conf(n);
  for (std::size_t d = 0; d < n; ++d) {
    double m = 0.0;
    for (std::size_t c = 0; c < k; ++c) m = std::max(m, out.plan.at(d, c));
    conf[d] = m;
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return conf[a] > conf[b]; });

  out.indices.assign(n, 0);
  std::vector<std::size_t> load(k, 0);
  std::vector<std::size_t> cols(k);
  for (std::size_t d : order) {
    std::iota(cols.begin(), cols.end(), 0);
    std::stable_sort(cols.begin(), cols.end(), [&](std::size_t a, std::size_t b) {
      return out.plan.at(d, a) > out.plan.at(d, b);
    });
    bool placed = false;
    for (std::size_t c : cols) {
      if (load[c] < capacity) {
        out.indices[d] = c;
        ++load[c];
        placed = true;
        break;
      }
    }
    if (!placed) throw NumericError("uniform_assign: internal capacity accounting error");
  }
  out.report = uniformity_stats(out.indices, k);
  return out;
}

}  // namespace weaver
