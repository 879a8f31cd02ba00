#pragma once

#include "weaver/common.hpp"

namespace weaver {

// Softplus keeps the whole objective smooth, which the finite-difference
// gradient checks rely on.
inline double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

inline double softplus_deriv(double x) {  // sigmoid
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct AffineLayer {
  std::size_t in = 0, out = 0;
  std::vector<double> weight;  // row-major, out x in
  Vec bias;

  void init(std::size_t in_dim, std::size_t out_dim, std::mt19937_64& rng) {
    in = in_dim;
    out = out_dim;
    weight.assign(in * out, 0.0);
    bias.assign(out, 0.0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& w : weight) w = u(rng);
    for (double& b : bias) b = u(rng);
  }
};

/// Stack of affine layers with softplus between them. `activate_last`
/// controls whether the final affine output also passes through softplus
/// (true for the encoder, false for the decoder so reconstructions are
/// unconstrained).
struct Mlp {
  std::vector<AffineLayer> layers;
  bool activate_last = true;

  std::size_t input_dim() const { return layers.front().in; }
  std::size_t output_dim() const { return layers.back().out; }

  static Mlp make(const std::vector<std::size_t>& dims, bool activate_last,
                  std::mt19937_64& rng) {
    if (dims.size() < 2) throw Error("Mlp: need at least input and output dims");
    Mlp m;
    m.activate_last = activate_last;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      AffineLayer l;
      l.init(dims[i], dims[i + 1], rng);
      m.layers.push_back(std::move(l));
    }
    return m;
  }

  struct Trace {
    std::vector<Vec> inputs;  // input to each layer
    std::vector<Vec> pre;     // pre-activation output of each layer
  };

  Vec forward(const Vec& x, Trace* trace = nullptr) const {
    if (x.size() != input_dim())
      throw Error("Mlp: input dimension mismatch: got " + std::to_string(x.size()) +
                  ", expected " + std::to_string(input_dim()));
    Vec cur = x;
    if (trace) {
      trace->inputs.clear();
      trace->pre.clear();
    }
    for (std::size_t li = 0; li < layers.size(); ++li) {
      const auto& l = layers[li];
      if (trace) trace->inputs.push_back(cur);
      Vec next(l.out);
      for (std::size_t o = 0; o < l.out; ++o) {
        double s = l.bias[o];
        const double* w = &l.weight[o * l.in];
        for (std::size_t i = 0; i < l.in; ++i) s += w[i] * cur[i];
        next[o] = s;
      }
      if (trace) trace->pre.push_back(next);
      const bool act = activate_last || li + 1 < layers.size();
      if (act)
        for (double& v : next) v = softplus(v);
      cur = std::move(next);
    }
    return cur;
  }

  struct Grad {
    std::vector<std::vector<double>> weight;
    std::vector<Vec> bias;

    void resize_like(const Mlp& m) {
      weight.clear();
      bias.clear();
      for (const auto& l : m.layers) {
        weight.emplace_back(l.weight.size(), 0.0);
        bias.emplace_back(l.bias.size(), 0.0);
      }
    }
  };

  /// Backprop `g_out` (gradient wrt the network output) through the trace;
  /// accumulates into `grad`, returns the gradient wrt the network input.
  Vec backward(const Trace& trace, Vec g_out, Grad& grad) const {
    for (std::size_t li = layers.size(); li-- > 0;) {
      const auto& l = layers[li];
      const bool act = activate_last || li + 1 < layers.size();
      if (act)
        for (std::size_t o = 0; o < l.out; ++o)
          g_out[o] *= softplus_deriv(trace.pre[li][o]);
      const Vec& x = trace.inputs[li];
      Vec g_in(l.in, 0.0);
      for (std::size_t o = 0; o < l.out; ++o) {
        grad.bias[li][o] += g_out[o];
        double* gw = &grad.weight[li][o * l.in];
        const double* w = &l.weight[o * l.in];
        for (std::size_t i = 0; i < l.in; ++i) {
          gw[i] += g_out[o] * x[i];
          g_in[i] += g_out[o] * w[i];
        }
      }
      g_out = std::move(g_in);
    }
    return g_out;
  }
};

}  // namespace weaver
