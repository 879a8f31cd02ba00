#pragma once

#include <optional>

#include <json.hpp>

#include "weaver/collab.hpp"
#include "weaver/common.hpp"
#include "weaver/kmeans.hpp"
#include "weaver/mlp.hpp"
#include "weaver/sinkhorn.hpp"

namespace weaver {

enum class ReconMode { decoder, latent };

struct QuantizerConfig {
  std::size_t input_dim = 768;
  std::size_t latent_dim = 64;
  std::vector<std::size_t> hidden_dims = {1024, 512, 256, 128};
  std::size_t levels = 2;
  std::size_t codes_per_level = 1024;
  double commitment_beta = 0.25;
  double collab_lambda = 1.0;
  double learning_rate = 1e-5;
  std::size_t batch_size = 5096;  // clamped to corpus size
  std::size_t epochs = 0;
  std::size_t warmup_epochs = 50;
  double weight_decay = 0.0;
  std::size_t kmeans_max_iters = 100;
  ReconMode recon_mode = ReconMode::decoder;
  bool sinkhorn_train = true;       // uniform mapping on the final level per batch
  bool sinkhorn_all_levels = false; // apply the uniform mapping at every level
  double sinkhorn_epsilon = 0.01;
  std::size_t sinkhorn_iters = 50;
  std::uint64_t seed = 0;

  void validate() const {
    if (levels < 1) throw ConfigError("quantizer: levels must be >= 1");
    if (codes_per_level < 2) throw ConfigError("quantizer: codes_per_level must be >= 2");
    if (latent_dim > input_dim) throw ConfigError("quantizer: latent_dim > input_dim");
    if (commitment_beta < 0) throw ConfigError("quantizer: commitment_beta must be >= 0");
    if (collab_lambda < 0) throw ConfigError("quantizer: collab_lambda must be >= 0");
    if (!(learning_rate > 0)) throw ConfigError("quantizer: learning_rate must be > 0");
    if (batch_size == 0) throw ConfigError("quantizer: batch_size must be > 0");
  }
};

struct Codebook {
  std::vector<Vec> centroids;  // K vectors of length latent_dim
};

struct LossBreakdown {
  double recon = 0.0;
  double quant = 0.0;
  double collab = 0.0;
  double total = 0.0;
};

struct QuantizerModel {
  QuantizerConfig config;
  Mlp encoder;
  std::optional<Mlp> decoder;
  std::vector<Codebook> codebooks;
  std::vector<LossBreakdown> training_log;

  Vec encode(const Vec& e) const { return encoder.forward(e); }
};

// ---- quantization ----------------------------------------------------------

/// Nearest centroid by squared distance; ties broken by smallest index.
inline std::pair<std::size_t, Vec> quantize_level(const Vec& r, const Codebook& cb) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < cb.centroids.size(); ++k) {
    const double d = squared_distance(r, cb.centroids[k]);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  Vec next = r;
  axpy(-1.0, cb.centroids[best], next);
  return {best, std::move(next)};
}

struct QuantizeResult {
  std::vector<std::size_t> indices;  // length L
  Vec zhat;                          // sum of selected centroids
  std::vector<Vec> residuals;        // length L+1; residuals[0] == z
};

/// Greedy recursive quantization; zhat + residuals[L] == z exactly.
inline QuantizeResult quantize(const QuantizerModel& model, const Vec& z) {
  QuantizeResult res;
  res.residuals.push_back(z);
  res.zhat.assign(z.size(), 0.0);
  for (const auto& cb : model.codebooks) {
    auto [idx, next] = quantize_level(res.residuals.back(), cb);
    axpy(1.0, cb.centroids[idx], res.zhat);
    res.indices.push_back(idx);
    res.residuals.push_back(std::move(next));
  }
  return res;
}

/// Level-synchronous quantization of a whole batch, optionally replacing the
/// argmin at uniform-mapped levels with the batch Sinkhorn assignment.
struct BatchQuantization {
  std::vector<QuantizeResult> per_sample;
};

inline bool level_uses_sinkhorn(const QuantizerConfig& cfg, std::size_t level /*0-based*/) {
  return cfg.sinkhorn_all_levels || level + 1 == cfg.levels;
}

inline BatchQuantization batch_quantize(const QuantizerModel& model,
                                        const std::vector<Vec>& zs, bool use_sinkhorn) {
  const std::size_t b = zs.size();
  BatchQuantization out;
  out.per_sample.resize(b);
  for (std::size_t i = 0; i < b; ++i) {
    out.per_sample[i].residuals.push_back(zs[i]);
    out.per_sample[i].zhat.assign(zs[i].size(), 0.0);
  }
  const auto& cfg = model.config;
  for (std::size_t l = 0; l < model.codebooks.size(); ++l) {
    const auto& cb = model.codebooks[l];
    std::vector<std::size_t> idx(b);
    if (use_sinkhorn && level_uses_sinkhorn(cfg, l) && b > 1) {
      std::vector<Vec> residuals(b);
      for (std::size_t i = 0; i < b; ++i) residuals[i] = out.per_sample[i].residuals.back();
      TransportProblem prob;
      prob.n = b;
      prob.k = cb.centroids.size();
      prob.epsilon = cfg.sinkhorn_epsilon;
      prob.max_iters = cfg.sinkhorn_iters;
      prob.cost.resize(prob.n * prob.k);
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t k = 0; k < prob.k; ++k)
          prob.cost[i * prob.k + k] = squared_distance(residuals[i], cb.centroids[k]);
      idx = plan_argmax(sinkhorn_plan(prob));
    } else {
      for (std::size_t i = 0; i < b; ++i) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < cb.centroids.size(); ++k) {
          const double d = squared_distance(out.per_sample[i].residuals.back(), cb.centroids[k]);
          if (d < best_d) {
            best_d = d;
            best = k;
          }
        }
        idx[i] = best;
      }
    }
    for (std::size_t i = 0; i < b; ++i) {
      auto& qr = out.per_sample[i];
      qr.indices.push_back(idx[i]);
      Vec next = qr.residuals.back();
      axpy(-1.0, cb.centroids[idx[i]], next);
      axpy(1.0, cb.centroids[idx[i]], qr.zhat);
      qr.residuals.push_back(std::move(next));
    }
  }
  return out;
}

// ---- codebook initialization ----------------------------------------------

/// Sequential k-means init: level l is clustered on the residuals left by the
/// already-initialized levels 1..l-1.
inline std::vector<Codebook> init_codebooks(const std::vector<Vec>& zs,
                                            const QuantizerConfig& cfg) {
  std::vector<Codebook> books;
  std::vector<Vec> residuals = zs;
  for (std::size_t l = 0; l < cfg.levels; ++l) {
    auto km = kmeans(residuals, cfg.codes_per_level, cfg.kmeans_max_iters,
                     substream_seed(cfg.seed, "init.kmeans", l));
    Codebook cb;
    cb.centroids = km.centroids;
    for (std::size_t i = 0; i < residuals.size(); ++i)
      axpy(-1.0, cb.centroids[km.assignment[i]], residuals[i]);
    books.push_back(std::move(cb));
  }
  return books;
}

// ---- loss and gradients ----------------------------------------------------

struct ModelGrad {
  Mlp::Grad encoder;
  Mlp::Grad decoder;  // unused in latent mode
  std::vector<std::vector<Vec>> codebooks;  // [level][code] -> grad vector

  void resize_like(const QuantizerModel& m) {
    encoder.resize_like(m.encoder);
    if (m.decoder) decoder.resize_like(*m.decoder);
    codebooks.assign(m.codebooks.size(), {});
    for (std::size_t l = 0; l < m.codebooks.size(); ++l)
      codebooks[l].assign(m.codebooks[l].centroids.size(),
                          Vec(m.config.latent_dim, 0.0));
  }
};

struct BatchLoss {
  LossBreakdown losses;
  ModelGrad grad;
  BatchQuantization quantization;
};

/// One forward/backward pass over a batch.
///
/// recon and quant are batch means; collab is the raw double sum over
/// within-batch pairs. Codebook centroids receive gradient from the codebook
/// quant term and, through zhat as a direct sum of centroids, from
/// recon/collab; the encoder receives gradient from the commitment term and
/// from recon/collab via the straight-through estimator.
inline BatchLoss loss_terms(const QuantizerModel& model, const std::vector<Vec>& embeddings,
                            const std::vector<std::size_t>& graph_rows,
                            const CooccurrenceGraph* graph, bool use_sinkhorn = false) {
  const auto& cfg = model.config;
  const std::size_t b = embeddings.size();
  if (b == 0) throw Error("loss_terms: empty batch");
  const double inv_b = 1.0 / static_cast<double>(b);

  BatchLoss out;
  out.grad.resize_like(model);

  // forward: encode everything
  std::vector<Mlp::Trace> enc_traces(b);
  std::vector<Vec> zs(b);
  for (std::size_t i = 0; i < b; ++i) zs[i] = model.encoder.forward(embeddings[i], &enc_traces[i]);

  out.quantization = batch_quantize(model, zs, use_sinkhorn);

  // collab term (raw double sum over the batch)
  CollabResult collab;
  const bool with_collab = graph != nullptr && cfg.collab_lambda > 0;
  if (with_collab) {
    std::vector<Vec> zhats(b);
    for (std::size_t i = 0; i < b; ++i) zhats[i] = out.quantization.per_sample[i].zhat;
    collab = collab_loss(zhats, graph_rows, *graph);
    out.losses.collab = collab.loss;
  }

  std::vector<Mlp::Trace> dec_trace(1);
  for (std::size_t i = 0; i < b; ++i) {
    const auto& qr = out.quantization.per_sample[i];
    const Vec& z = zs[i];
    const Vec& zhat = qr.zhat;

    // gradient wrt zhat that flows to both centroids and (via STE) the encoder
    Vec g_zhat_both(cfg.latent_dim, 0.0);
    // gradient wrt zhat that flows to centroids only (literal latent recon)
    Vec g_zhat_cb(cfg.latent_dim, 0.0);

    if (cfg.recon_mode == ReconMode::decoder) {
      const Vec xhat = model.decoder->forward(zhat, &dec_trace[0]);
      double r = squared_distance(embeddings[i], xhat);
      out.losses.recon += r * inv_b;
      Vec g_x(xhat.size());
      for (std::size_t j = 0; j < xhat.size(); ++j)
        g_x[j] = 2.0 * (xhat[j] - embeddings[i][j]) * inv_b;
      Vec g_in = model.decoder->backward(dec_trace[0], std::move(g_x), out.grad.decoder);
      for (std::size_t j = 0; j < cfg.latent_dim; ++j) g_zhat_both[j] += g_in[j];
    } else {
      out.losses.recon += squared_distance(z, zhat) * inv_b;
      for (std::size_t j = 0; j < cfg.latent_dim; ++j)
        g_zhat_cb[j] += 2.0 * (zhat[j] - z[j]) * inv_b;
    }

    if (with_collab)
      for (std::size_t j = 0; j < cfg.latent_dim; ++j)
        g_zhat_both[j] += cfg.collab_lambda * collab.grad[i][j];

    // quant term and its gradients
    Vec g_z = g_zhat_both;  // straight-through contribution
    for (std::size_t l = 0; l < cfg.levels; ++l) {
      const std::size_t idx = qr.indices[l];
      const Vec& r_next = qr.residuals[l + 1];  // r_l - v_{l,idx}
      const double d2 = dot(r_next, r_next);
      out.losses.quant += (1.0 + cfg.commitment_beta) * d2 * inv_b;
      auto& g_v = out.grad.codebooks[l][idx];
      for (std::size_t j = 0; j < cfg.latent_dim; ++j) {
        g_v[j] += -2.0 * r_next[j] * inv_b;                         // codebook pull
        g_v[j] += g_zhat_both[j] + g_zhat_cb[j];                    // through zhat
        g_z[j] += 2.0 * cfg.commitment_beta * r_next[j] * inv_b;    // commitment
      }
    }

    model.encoder.backward(enc_traces[i], std::move(g_z), out.grad.encoder);
  }

  out.losses.total =
      out.losses.recon + out.losses.quant + cfg.collab_lambda * out.losses.collab;
  auto check = [](double v, const char* term) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite loss term: ") + term);
  };
  check(out.losses.recon, "recon");
  check(out.losses.quant, "quant");
  check(out.losses.collab, "collab");
  return out;
}

// ---- optimizer -------------------------------------------------------------
// Decoupled-weight-decay adaptive-moment updates: two moment accumulators,
// bias correction, decay applied directly to the parameter.

class AdamW {
 public:
  AdamW(std::size_t n_params, double lr, double weight_decay)
      : lr_(lr), wd_(weight_decay), m_(n_params, 0.0), v_(n_params, 0.0) {}

  void step(std::vector<double*>& params, const std::vector<const double*>& grads,
            double lr_scale) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const double lr = lr_ * lr_scale;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = *grads[i];
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
      const double mh = m_[i] / bc1;
      const double vh = v_[i] / bc2;
      *params[i] -= lr * (mh / (std::sqrt(vh) + eps_) + wd_ * (*params[i]));
    }
  }

  void reset_slot(std::size_t i) { m_[i] = v_[i] = 0.0; }

 private:
  double lr_, wd_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::uint64_t t_ = 0;
  std::vector<double> m_, v_;
};

namespace detail {

// Fixed parameter enumeration order: encoder layers (weights then biases),
// decoder layers, then codebooks level by level.
template <typename ParamFn>
void visit_params(QuantizerModel& model, ModelGrad& grad, ParamFn&& fn) {
  for (std::size_t li = 0; li < model.encoder.layers.size(); ++li) {
    auto& l = model.encoder.layers[li];
    for (std::size_t i = 0; i < l.weight.size(); ++i) fn(l.weight[i], grad.encoder.weight[li][i]);
    for (std::size_t i = 0; i < l.bias.size(); ++i) fn(l.bias[i], grad.encoder.bias[li][i]);
  }
  if (model.decoder) {
    for (std::size_t li = 0; li < model.decoder->layers.size(); ++li) {
      auto& l = model.decoder->layers[li];
      for (std::size_t i = 0; i < l.weight.size(); ++i)
        fn(l.weight[i], grad.decoder.weight[li][i]);
      for (std::size_t i = 0; i < l.bias.size(); ++i) fn(l.bias[i], grad.decoder.bias[li][i]);
    }
  }
  for (std::size_t l = 0; l < model.codebooks.size(); ++l)
    for (std::size_t k = 0; k < model.codebooks[l].centroids.size(); ++k)
      for (std::size_t j = 0; j < model.codebooks[l].centroids[k].size(); ++j)
        fn(model.codebooks[l].centroids[k][j], grad.codebooks[l][k][j]);
}

}  // namespace detail

// ---- training --------------------------------------------------------------

inline QuantizerModel init_model(const std::vector<Vec>& embeddings, QuantizerConfig cfg) {
  cfg.validate();
  if (embeddings.empty()) throw ConfigError("fit: no embeddings");
  cfg.batch_size = std::min(cfg.batch_size, embeddings.size());

  QuantizerModel model;
  model.config = cfg;

  std::vector<std::size_t> enc_dims;
  enc_dims.push_back(cfg.input_dim);
  for (auto h : cfg.hidden_dims) enc_dims.push_back(h);
  enc_dims.push_back(cfg.latent_dim);
  auto rng_enc = substream(cfg.seed, "init.encoder");
  model.encoder = Mlp::make(enc_dims, /*activate_last=*/true, rng_enc);

  if (cfg.recon_mode == ReconMode::decoder) {
    std::vector<std::size_t> dec_dims(enc_dims.rbegin(), enc_dims.rend());
    auto rng_dec = substream(cfg.seed, "init.decoder");
    model.decoder = Mlp::make(dec_dims, /*activate_last=*/false, rng_dec);
  }

  std::vector<Vec> zs(embeddings.size());
  for (std::size_t i = 0; i < embeddings.size(); ++i) zs[i] = model.encoder.forward(embeddings[i]);
  model.codebooks = init_codebooks(zs, cfg);
  return model;
}

/// Minibatch training of the full tokenization objective. Deterministic in
/// cfg.seed. graph may be null when collab_lambda == 0.
inline QuantizerModel fit(const std::vector<Vec>& embeddings, const CooccurrenceGraph* graph,
                          const QuantizerConfig& config) {
  QuantizerModel model = init_model(embeddings, config);
  const auto& cfg = model.config;
  const std::size_t n = embeddings.size();

  // count parameters and wire up optimizer slots
  ModelGrad grad;
  grad.resize_like(model);
  std::size_t n_params = 0;
  detail::visit_params(model, grad, [&](double&, double&) { ++n_params; });
  AdamW opt(n_params, cfg.learning_rate, cfg.weight_decay);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto rng_shuffle = substream(cfg.seed, "shuffle", epoch);
    std::shuffle(order.begin(), order.end(), rng_shuffle);

    const double warm = cfg.warmup_epochs == 0
                            ? 1.0
                            : std::min(1.0, static_cast<double>(epoch + 1) /
                                                static_cast<double>(cfg.warmup_epochs));

    LossBreakdown epoch_loss;
    std::size_t n_batches = 0;
    std::vector<std::vector<bool>> used(cfg.levels,
                                        std::vector<bool>(cfg.codes_per_level, false));
    std::vector<std::vector<Vec>> residual_pool(cfg.levels);  // for dead-code reseeding

    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      std::vector<Vec> batch;
      std::vector<std::size_t> rows;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(embeddings[order[i]]);
        rows.push_back(order[i]);
      }

      BatchLoss bl;
      try {
        bl = loss_terms(model, batch, rows, graph, cfg.sinkhorn_train);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                           ", last good epoch " +
                           (epoch == 0 ? std::string("none")
                                       : std::to_string(epoch - 1)) +
                           ")");
      }

      for (std::size_t i = 0; i < bl.quantization.per_sample.size(); ++i)
        for (std::size_t l = 0; l < cfg.levels; ++l) {
          used[l][bl.quantization.per_sample[i].indices[l]] = true;
          if (residual_pool[l].size() < 256)
            residual_pool[l].push_back(bl.quantization.per_sample[i].residuals[l]);
        }

      std::vector<double*> params;
      std::vector<const double*> grads;
      params.reserve(n_params);
      grads.reserve(n_params);
      detail::visit_params(model, bl.grad,
                           [&](double& p, double& g) {
                             params.push_back(&p);
                             grads.push_back(&g);
                           });
      opt.step(params, grads, warm);

      epoch_loss.recon += bl.losses.recon;
      epoch_loss.quant += bl.losses.quant;
      epoch_loss.collab += bl.losses.collab;
      ++n_batches;
    }

    epoch_loss.recon /= static_cast<double>(n_batches);
    epoch_loss.quant /= static_cast<double>(n_batches);
    epoch_loss.collab /= static_cast<double>(n_batches);
    epoch_loss.total =
        epoch_loss.recon + epoch_loss.quant + cfg.collab_lambda * epoch_loss.collab;
    model.training_log.push_back(epoch_loss);

    // re-seed codes unused for the whole epoch
    auto rng_dead = substream(cfg.seed, "deadcode", epoch);
    std::normal_distribution<double> jitter(0.0, 1e-3);
    for (std::size_t l = 0; l < cfg.levels; ++l) {
      if (residual_pool[l].empty()) continue;
      std::uniform_int_distribution<std::size_t> pick(0, residual_pool[l].size() - 1);
      for (std::size_t k = 0; k < cfg.codes_per_level; ++k) {
        if (used[l][k]) continue;
        Vec v = residual_pool[l][pick(rng_dead)];
        for (double& x : v) x += jitter(rng_dead);
        model.codebooks[l].centroids[k] = std::move(v);
      }
    }
  }
  return model;
}

// ---- serialization payload -------------------------------------------------

inline nlohmann::json mlp_to_json(const Mlp& m) {
  nlohmann::json j;
  j["activate_last"] = m.activate_last;
  j["layers"] = nlohmann::json::array();
  for (const auto& l : m.layers) {
    nlohmann::json lj;
    lj["in"] = l.in;
    lj["out"] = l.out;
    lj["weight"] = l.weight;
    lj["bias"] = l.bias;
    j["layers"].push_back(std::move(lj));
  }
  return j;
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
  Mlp m;
  m.activate_last = j.at("activate_last").get<bool>();
  for (const auto& lj : j.at("layers")) {
    AffineLayer l;
    l.in = lj.at("in").get<std::size_t>();
    l.out = lj.at("out").get<std::size_t>();
    l.weight = lj.at("weight").get<std::vector<double>>();
    l.bias = lj.at("bias").get<Vec>();
    if (l.weight.size() != l.in * l.out || l.bias.size() != l.out)
      throw ParseError("model payload: layer shape mismatch");
    m.layers.push_back(std::move(l));
  }
  if (m.layers.empty()) throw ParseError("model payload: empty mlp");
  return m;
}

inline nlohmann::json config_to_json(const QuantizerConfig& c) {
  nlohmann::json j;
  j["input_dim"] = c.input_dim;
  j["latent_dim"] = c.latent_dim;
  j["hidden_dims"] = c.hidden_dims;
  j["levels"] = c.levels;
  j["codes_per_level"] = c.codes_per_level;
  j["commitment_beta"] = c.commitment_beta;
  j["collab_lambda"] = c.collab_lambda;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["warmup_epochs"] = c.warmup_epochs;
  j["weight_decay"] = c.weight_decay;
  j["kmeans_max_iters"] = c.kmeans_max_iters;
  j["recon_mode"] = c.recon_mode == ReconMode::decoder ? "decoder" : "latent";
  j["sinkhorn_train"] = c.sinkhorn_train;
  j["sinkhorn_all_levels"] = c.sinkhorn_all_levels;
  j["sinkhorn_epsilon"] = c.sinkhorn_epsilon;
  j["sinkhorn_iters"] = c.sinkhorn_iters;
  j["seed"] = c.seed;
  return j;
}

inline QuantizerConfig config_from_json(const nlohmann::json& j) {
  QuantizerConfig c;
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.latent_dim = j.at("latent_dim").get<std::size_t>();
  c.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
  c.levels = j.at("levels").get<std::size_t>();
  c.codes_per_level = j.at("codes_per_level").get<std::size_t>();
  c.commitment_beta = j.at("commitment_beta").get<double>();
  c.collab_lambda = j.at("collab_lambda").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.warmup_epochs = j.at("warmup_epochs").get<std::size_t>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.kmeans_max_iters = j.at("kmeans_max_iters").get<std::size_t>();
  const std::string rm = j.at("recon_mode").get<std::string>();
  if (rm == "decoder")
    c.recon_mode = ReconMode::decoder;
  else if (rm == "latent")
    c.recon_mode = ReconMode::latent;
  else
    throw ParseError("model payload: unknown recon_mode: " + rm);
  c.sinkhorn_train = j.at("sinkhorn_train").get<bool>();
  c.sinkhorn_all_levels = j.at("sinkhorn_all_levels").get<bool>();
  c.sinkhorn_epsilon = j.at("sinkhorn_epsilon").get<double>();
  c.sinkhorn_iters = j.at("sinkhorn_iters").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

inline nlohmann::json model_to_json(const QuantizerModel& m) {
  nlohmann::json j;
  j["config"] = config_to_json(m.config);
  j["encoder"] = mlp_to_json(m.encoder);
  if (m.decoder) j["decoder"] = mlp_to_json(*m.decoder);
  j["codebooks"] = nlohmann::json::array();
  for (const auto& cb : m.codebooks) j["codebooks"].push_back(cb.centroids);
  j["training_log"] = nlohmann::json::array();
  for (const auto& e : m.training_log) {
    nlohmann::json ej;
    ej["recon"] = e.recon;
    ej["quant"] = e.quant;
    ej["collab"] = e.collab;
    ej["total"] = e.total;
    j["training_log"].push_back(std::move(ej));
  }
  return j;
}

inline QuantizerModel model_from_json(const nlohmann::json& j) {
  QuantizerModel m;
  m.config = config_from_json(j.at("config"));
  m.encoder = mlp_from_json(j.at("encoder"));
  if (j.contains("decoder")) m.decoder = mlp_from_json(j.at("decoder"));
  if ((m.config.recon_mode == ReconMode::decoder) != m.decoder.has_value())
    throw ParseError("model payload: decoder presence inconsistent with recon_mode");
  for (const auto& cbj : j.at("codebooks")) {
    Codebook cb;
    cb.centroids = cbj.get<std::vector<Vec>>();
    if (cb.centroids.size() != m.config.codes_per_level)
      throw ParseError("model payload: codebook size mismatch");
    for (const auto& c : cb.centroids)
      if (c.size() != m.config.latent_dim || !all_finite(c))
        throw ParseError("model payload: bad centroid");
    m.codebooks.push_back(std::move(cb));
  }
  if (m.codebooks.size() != m.config.levels)
    throw ParseError("model payload: codebook count != levels");
  for (const auto& ej : j.at("training_log")) {
    LossBreakdown e;
    e.recon = ej.at("recon").get<double>();
    e.quant = ej.at("quant").get<double>();
    e.collab = ej.at("collab").get<double>();
    e.total = ej.at("total").get<double>();
    m.training_log.push_back(e);
  }
  return m;
}

}  // namespace weaver
