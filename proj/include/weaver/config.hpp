#pragma once

#include <cctype>
#include <fstream>
#include <map>

#include <json.hpp>

#include "weaver/corpus.hpp"
#include "weaver/quantizer.hpp"

namespace weaver {

// ---- minimal TOML-style parser ---------------------------------------------
// Supports what the run configs need: comments, [section] headers (dotted),
// key = value with strings, integers, floats, booleans and flat arrays.
// Keys are flattened to dotted paths.

using ConfigTable = std::map<std::string, nlohmann::json>;

namespace detail {

inline std::string strip(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline nlohmann::json parse_toml_scalar(const std::string& raw, const std::string& where) {
  const std::string v = strip(raw);
  if (v.empty()) throw ParseError(where + ": empty value");
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') throw ParseError(where + ": unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      if (v[i] == '\\' && i + 2 < v.size()) {
        ++i;
        switch (v[i]) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: throw ParseError(where + ": bad escape");
        }
      } else {
        out += v[i];
      }
    }
    return out;
  }
  if (v == "true") return true;
  if (v == "false") return false;
  if (v.find_first_of(".eE") != std::string::npos &&
      v.find_first_not_of("+-0123456789.eE") == std::string::npos) {
    try {
      return std::stod(v);
    } catch (...) {
      throw ParseError(where + ": bad number: " + v);
    }
  }
  if (v.find_first_not_of("+-0123456789") == std::string::npos) {
    try {
      return static_cast<std::int64_t>(std::stoll(v));
    } catch (...) {
      throw ParseError(where + ": bad integer: " + v);
    }
  }
  throw ParseError(where + ": cannot parse value: " + v);
}

inline nlohmann::json parse_toml_value(const std::string& raw, const std::string& where) {
  const std::string v = strip(raw);
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']') throw ParseError(where + ": unterminated array");
    nlohmann::json arr = nlohmann::json::array();
    std::string body = v.substr(1, v.size() - 2);
    std::string cur;
    bool in_str = false;
    for (char c : body) {
      if (c == '"') in_str = !in_str;
      if (c == ',' && !in_str) {
        if (!strip(cur).empty()) arr.push_back(parse_toml_scalar(cur, where));
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!strip(cur).empty()) arr.push_back(parse_toml_scalar(cur, where));
    return arr;
  }
  return parse_toml_scalar(v, where);
}

inline std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

}  // namespace detail

inline ConfigTable parse_config_text(const std::string& text, const std::string& origin = "<config>") {
  ConfigTable table;
  std::istringstream ss(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    line = detail::strip(detail::strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(where + ": unterminated section header");
      section = detail::strip(line.substr(1, line.size() - 2));
      if (section.empty()) throw ParseError(where + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(where + ": expected key = value");
    std::string key = detail::strip(line.substr(0, eq));
    if (key.empty()) throw ParseError(where + ": empty key");
    if (!section.empty()) key = section + "." + key;
    table[key] = detail::parse_toml_value(line.substr(eq + 1), where);
  }
  return table;
}

inline ConfigTable parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text, path);
}

/// Flag override "dotted.key=value"; value parsed with the same scalar rules.
inline void apply_override(ConfigTable& table, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw ConfigError("override must be key=value: " + kv);
  const std::string key = detail::strip(kv.substr(0, eq));
  table[key] = detail::parse_toml_value(kv.substr(eq + 1), "--set " + key);
}

// ---- run configuration -----------------------------------------------------

struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";

  // corpus source
  bool synthetic = true;
  SyntheticSpec synth_spec{200, 8, 32, 0.05, 40, 4, 0};
  std::string tools_path, embeddings_path, trajectories_path;
  std::string embedding_format = "jsonl";  // jsonl | binary
  bool strict_trajectories = true;

  QuantizerConfig quantizer;

  double sinkhorn_epsilon = 0.01;
  std::size_t sinkhorn_iters = 50;
  bool assign_sinkhorn = true;

  std::size_t beam_width = 8;
  std::size_t beam_topk = 5;

  std::vector<std::size_t> eval_ks = {1, 3, 5};
  std::size_t n_queries = 64;
  double query_noise = 0.05;

  std::vector<double> sweep_lambda_values = {0.01, 0.1, 1.0, 10.0};
  std::vector<std::size_t> sweep_k_values = {4, 8, 16};
  std::vector<std::size_t> sweep_l_values = {1, 2, 3};
  std::vector<std::uint64_t> sweep_seeds = {1, 2, 3};
};

namespace detail {

template <typename T>
T get_or(const ConfigTable& t, const std::string& key, T fallback) {
  auto it = t.find(key);
  if (it == t.end()) return fallback;
  try {
    return it->second.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key " + key + ": wrong type");
  }
}

}  // namespace detail

inline RunConfig load_run_config(const ConfigTable& t) {
  RunConfig c;
  c.seed = detail::get_or<std::uint64_t>(t, "seed", c.seed);
  c.output_dir = detail::get_or<std::string>(t, "output_dir", c.output_dir);

  const std::string mode = detail::get_or<std::string>(t, "corpus.mode", "synthetic");
  if (mode == "synthetic") {
    c.synthetic = true;
  } else if (mode == "files") {
    c.synthetic = false;
  } else {
    throw ConfigError("config key corpus.mode: must be \"synthetic\" or \"files\"");
  }
  c.tools_path = detail::get_or<std::string>(t, "corpus.tools", "");
  c.embeddings_path = detail::get_or<std::string>(t, "corpus.embeddings", "");
  c.trajectories_path = detail::get_or<std::string>(t, "corpus.trajectories", "");
  c.embedding_format = detail::get_or<std::string>(t, "corpus.embedding_format", "jsonl");
  c.strict_trajectories = detail::get_or<bool>(t, "corpus.strict", true);

  c.synth_spec.n_tools = detail::get_or<int>(t, "synthetic.n_tools", c.synth_spec.n_tools);
  c.synth_spec.n_groups = detail::get_or<int>(t, "synthetic.n_groups", c.synth_spec.n_groups);
  c.synth_spec.dim = detail::get_or<int>(t, "synthetic.dim", c.synth_spec.dim);
  c.synth_spec.group_spread =
      detail::get_or<double>(t, "synthetic.group_spread", c.synth_spec.group_spread);
  c.synth_spec.trajectories_per_group = detail::get_or<int>(
      t, "synthetic.trajectories_per_group", c.synth_spec.trajectories_per_group);
  c.synth_spec.trajectory_len =
      detail::get_or<int>(t, "synthetic.trajectory_len", c.synth_spec.trajectory_len);
  c.synth_spec.seed = c.seed;

  auto& q = c.quantizer;
  q.input_dim = detail::get_or<std::size_t>(t, "quantizer.input_dim",
                                            c.synthetic ? std::size_t(c.synth_spec.dim) : 768);
  q.latent_dim = detail::get_or<std::size_t>(t, "quantizer.latent_dim", 8);
  q.hidden_dims =
      detail::get_or<std::vector<std::size_t>>(t, "quantizer.hidden_dims", {16});
  q.levels = detail::get_or<std::size_t>(t, "quantizer.levels", 2);
  q.codes_per_level = detail::get_or<std::size_t>(t, "quantizer.codes_per_level", 8);
  q.commitment_beta = detail::get_or<double>(t, "quantizer.commitment_beta", 0.25);
  q.collab_lambda = detail::get_or<double>(t, "quantizer.collab_lambda", 1.0);
  q.learning_rate = detail::get_or<double>(t, "quantizer.learning_rate", 1e-2);
  q.batch_size = detail::get_or<std::size_t>(t, "quantizer.batch_size", 5096);
  q.epochs = detail::get_or<std::size_t>(t, "quantizer.epochs", 40);
  q.warmup_epochs = detail::get_or<std::size_t>(t, "quantizer.warmup_epochs", 5);
  q.weight_decay = detail::get_or<double>(t, "quantizer.weight_decay", 0.0);
  q.kmeans_max_iters = detail::get_or<std::size_t>(t, "quantizer.kmeans_max_iters", 100);
  const std::string rm = detail::get_or<std::string>(t, "quantizer.recon_mode", "decoder");
  if (rm == "decoder")
    q.recon_mode = ReconMode::decoder;
  else if (rm == "latent")
    q.recon_mode = ReconMode::latent;
  else
    throw ConfigError("config key quantizer.recon_mode: must be \"decoder\" or \"latent\"");
  q.sinkhorn_train = detail::get_or<bool>(t, "quantizer.sinkhorn_train", true);
  q.sinkhorn_all_levels = detail::get_or<bool>(t, "quantizer.sinkhorn_all_levels", false);
  q.seed = c.seed;

  c.sinkhorn_epsilon = detail::get_or<double>(t, "sinkhorn.epsilon", c.sinkhorn_epsilon);
  c.sinkhorn_iters = detail::get_or<std::size_t>(t, "sinkhorn.iters", c.sinkhorn_iters);
  c.assign_sinkhorn = detail::get_or<bool>(t, "sinkhorn.assign", true);
  q.sinkhorn_epsilon = c.sinkhorn_epsilon;
  q.sinkhorn_iters = c.sinkhorn_iters;

  c.beam_width = detail::get_or<std::size_t>(t, "beam.width", c.beam_width);
  c.beam_topk = detail::get_or<std::size_t>(t, "beam.topk", c.beam_topk);

  c.eval_ks = detail::get_or<std::vector<std::size_t>>(t, "eval.ks", c.eval_ks);
  c.n_queries = detail::get_or<std::size_t>(t, "eval.n_queries", c.n_queries);
  c.query_noise = detail::get_or<double>(t, "eval.query_noise", c.query_noise);

  c.sweep_lambda_values =
      detail::get_or<std::vector<double>>(t, "sweep.lambda_values", c.sweep_lambda_values);
  c.sweep_k_values =
      detail::get_or<std::vector<std::size_t>>(t, "sweep.k_values", c.sweep_k_values);
  c.sweep_l_values =
      detail::get_or<std::vector<std::size_t>>(t, "sweep.l_values", c.sweep_l_values);
  c.sweep_seeds =
      detail::get_or<std::vector<std::uint64_t>>(t, "sweep.seeds", c.sweep_seeds);

  if (!c.synthetic) {
    if (c.tools_path.empty()) throw ConfigError("config key corpus.tools: required in files mode");
    if (c.embeddings_path.empty())
      throw ConfigError("config key corpus.embeddings: required in files mode");
  }
  q.validate();
  return c;
}

/// Semantic fingerprint of the run settings (paths excluded so two runs of
/// the same configuration in different directories match).
inline nlohmann::json run_config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["synthetic"] = c.synthetic;
  if (c.synthetic) {
    j["synth"] = {{"n_tools", c.synth_spec.n_tools},
                  {"n_groups", c.synth_spec.n_groups},
                  {"dim", c.synth_spec.dim},
                  {"group_spread", c.synth_spec.group_spread},
                  {"trajectories_per_group", c.synth_spec.trajectories_per_group},
                  {"trajectory_len", c.synth_spec.trajectory_len}};
  }
  j["quantizer"] = config_to_json(c.quantizer);
  j["sinkhorn"] = {{"epsilon", c.sinkhorn_epsilon},
                   {"iters", c.sinkhorn_iters},
                   {"assign", c.assign_sinkhorn}};
  j["beam"] = {{"width", c.beam_width}, {"topk", c.beam_topk}};
  j["eval"] = {{"ks", c.eval_ks}, {"n_queries", c.n_queries}, {"query_noise", c.query_noise}};
  return j;
}

}  // namespace weaver
