// weaver: structured tool-identifier pipeline driver.
//
// Subcommands: synth, fit, assign, eval, sweep, report, export.
// Configuration comes from a TOML-style file plus dotted-key --set overrides;
// precedence is flags > file > defaults. Exit codes: 0 success, 2 config or
// validation error, 3 numerical failure, 4 I/O error.

#include <cstdlib>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "weaver/pipeline.hpp"

using namespace weaver;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output_dir;
  std::int64_t seed = -1;
  double collab_lambda = -1.0;
  bool no_sinkhorn = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "TOML run configuration file");
  cmd->add_option("--set", args.overrides, "override a config key, e.g. --set quantizer.epochs=10")
      ->take_all();
  cmd->add_option("-o,--out", args.output_dir, "output directory (default: config, then $WEAVER_OUT)");
  cmd->add_option("--seed", args.seed, "root seed override");
  cmd->add_option("--collab-lambda", args.collab_lambda, "collaborative loss weight override");
  cmd->add_flag("--no-sinkhorn", args.no_sinkhorn,
                "pure argmin at the final level in training and assignment");
}

RunConfig resolve_config(const CommonArgs& args) {
  ConfigTable table;
  if (!args.config_path.empty()) table = parse_config_file(args.config_path);
  for (const auto& kv : args.overrides) apply_override(table, kv);
  if (args.seed >= 0) apply_override(table, "seed=" + std::to_string(args.seed));
  if (args.collab_lambda >= 0)
    apply_override(table, "quantizer.collab_lambda=" + std::to_string(args.collab_lambda));
  if (args.no_sinkhorn) {
    apply_override(table, "quantizer.sinkhorn_train=false");
    apply_override(table, "sinkhorn.assign=false");
  }

  RunConfig cfg = load_run_config(table);
  if (!args.output_dir.empty()) {
    cfg.output_dir = args.output_dir;
  } else if (!table.count("output_dir")) {
    if (const char* env = std::getenv("WEAVER_OUT")) cfg.output_dir = env;
  }
  return cfg;
}

QuantizerModel load_model_bundle(const std::string& path) {
  auto bundle = load(path);
  if (bundle.kind != "model")
    throw ConfigError("expected a model bundle, got kind \"" + bundle.kind + "\": " + path);
  return model_from_json(bundle.payload);
}

CodeAssignment load_codemap_bundle(const std::string& path) {
  auto bundle = load(path);
  if (bundle.kind != "codemap")
    throw ConfigError("expected a codemap bundle, got kind \"" + bundle.kind + "\": " + path);
  return codemap_from_json(bundle.payload);
}

void print_uniformity(const UniformityReport& rep) {
  std::cout << "uniformity: mean " << rep.mean << ", stddev " << rep.stddev << ", relative_std "
            << rep.relative_std << ", counts in [" << rep.min << ", " << rep.max << "], p5 "
            << rep.p5 << ", p95 " << rep.p95 << "\n";
}

UniformityReport final_level_uniformity(const CodeAssignment& a) {
  std::vector<std::size_t> final_codes;
  for (const auto& [id, code] : a.codes) final_codes.push_back(code.back());
  return uniformity_stats(final_codes, a.codes_per_level);
}

QuerySet load_queries(const std::string& path, std::size_t dim) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open query file: " + path);
  QuerySet qs;
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
    Query q;
    q.query_id = j.at("query_id").get<std::string>();
    q.embedding = j.at("vector").get<Vec>();
    if (q.embedding.size() != dim)
      throw ParseError(path + ":" + std::to_string(lineno) + ": dimension mismatch");
    for (const auto& r : j.at("relevant")) q.relevant.insert(r.get<std::string>());
    qs.queries.push_back(std::move(q));
  }
  return qs;
}

// ---- subcommand bodies -----------------------------------------------------

int cmd_synth(const CommonArgs& args) {
  auto cfg = resolve_config(args);
  SyntheticSpec spec = cfg.synth_spec;
  spec.seed = cfg.seed;
  auto synth = synth_corpus(spec);

  save_tools(synth.corpus, out_path(cfg, "tools.jsonl"));
  if (cfg.embedding_format == "binary")
    save_embeddings_binary(synth.embeddings, synth.corpus, out_path(cfg, "embeddings.wvemb"));
  else
    save_embeddings(synth.embeddings, synth.corpus, out_path(cfg, "embeddings.jsonl"));
  save_trajectories(synth.trajectories, out_path(cfg, "trajectories.jsonl"));
  std::cout << "synth: " << synth.corpus.size() << " tools, "
            << synth.trajectories.trajectories.size() << " trajectories, dim "
            << synth.embeddings.dim << " -> " << cfg.output_dir << "\n";
  return 0;
}

int cmd_fit(const CommonArgs& args) {
  auto cfg = resolve_config(args);
  auto data = load_corpus(cfg);
  auto model = run_fit(cfg, data);

  std::cout << "epoch  recon        quant        collab       total\n";
  std::cout << std::setprecision(6);
  for (std::size_t e = 0; e < model.training_log.size(); ++e) {
    const auto& l = model.training_log[e];
    std::cout << std::left << std::setw(7) << e << std::setw(13) << l.recon << std::setw(13)
              << l.quant << std::setw(13) << l.collab << l.total << "\n";
  }
  const std::string fp =
      save({kFormatVersion, "model", model_to_json(model)}, out_path(cfg, "model.json"));
  std::cout << "model " << out_path(cfg, "model.json") << " fingerprint " << fp << "\n";
  return 0;
}

int cmd_assign(const CommonArgs& args, const std::string& model_path) {
  auto cfg = resolve_config(args);
  auto model =
      load_model_bundle(model_path.empty() ? out_path(cfg, "model.json") : model_path);
  cfg.quantizer = model.config;  // corpus loading follows the model's dimensions
  auto data = load_corpus(cfg);

  auto assignment = assign_codes(model, data.corpus, data.embeddings, cfg.sinkhorn_epsilon,
                                 cfg.sinkhorn_iters, cfg.assign_sinkhorn);
  std::cout << "assigned " << assignment.codes.size() << " tools, collision_report "
            << assignment.collision_report << "\n";
  print_uniformity(final_level_uniformity(assignment));

  const std::string fp = save({kFormatVersion, "codemap", codemap_to_json(assignment)},
                              out_path(cfg, "codemap.json"));
  export_codemap_tsv(assignment, out_path(cfg, "codemap.tsv"));
  std::cout << "codemap " << out_path(cfg, "codemap.json") << " fingerprint " << fp << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& model_path,
             const std::string& codemap_path, const std::string& queries_path) {
  auto cfg = resolve_config(args);
  auto model =
      load_model_bundle(model_path.empty() ? out_path(cfg, "model.json") : model_path);
  auto assignment = load_codemap_bundle(
      codemap_path.empty() ? out_path(cfg, "codemap.json") : codemap_path);
  cfg.quantizer = model.config;
  auto trie = build_trie(assignment);

  QuerySet queries;
  if (!queries_path.empty()) {
    queries = load_queries(queries_path, model.config.input_dim);
  } else {
    auto data = load_corpus(cfg);
    queries = make_synthetic_queries(data.corpus, data.embeddings, cfg.n_queries,
                                     cfg.query_noise, cfg.seed);
  }

  auto rep = run_eval(queries, model, trie, cfg.beam_width, cfg.eval_ks);
  rep.fingerprint = fingerprint({kFormatVersion, "report", run_config_to_json(cfg)});
  for (const auto& [k, v] : rep.ndcg) std::cout << "ndcg@" << k << " " << v << "\n";
  const std::string fp = save({kFormatVersion, "report", eval_report_to_json(rep)},
                              out_path(cfg, "report.json"));
  std::cout << "report " << out_path(cfg, "report.json") << " fingerprint " << fp << "\n";
  return 0;
}

int cmd_sweep(const CommonArgs& args, const std::string& kind) {
  auto cfg = resolve_config(args);
  if (!cfg.synthetic)
    throw ConfigError("sweep: only synthetic corpora are supported (corpus.mode)");

  SweepSettings s;
  s.corpus_spec = cfg.synth_spec;
  s.quantizer = cfg.quantizer;
  s.sinkhorn_epsilon = cfg.sinkhorn_epsilon;
  s.sinkhorn_iters = cfg.sinkhorn_iters;
  s.beam_width = cfg.beam_width;
  s.n_queries = cfg.n_queries;
  s.query_noise = cfg.query_noise;
  s.ks = cfg.eval_ks;

  std::vector<SweepRow> rows;
  if (kind == "lambda")
    rows = sweep_lambda(s, cfg.sweep_lambda_values, cfg.sweep_seeds);
  else if (kind == "vocab")
    rows = sweep_vocab(s, cfg.sweep_k_values, cfg.sweep_seeds);
  else if (kind == "depth")
    rows = sweep_depth(s, cfg.sweep_l_values, cfg.sweep_seeds);
  else
    throw ConfigError("sweep: kind must be lambda, vocab, or depth");

  const std::string csv = out_path(cfg, "sweep_" + kind + ".csv");
  write_sweep_csv(rows, s.ks, csv);
  save({kFormatVersion, "report", sweep_rows_to_json(rows)},
       out_path(cfg, "sweep_" + kind + ".json"));
  std::cout << "sweep " << kind << ": " << rows.size() << " rows -> " << csv << "\n";
  for (const auto& r : rows)
    if (!r.feasible)
      std::cout << "  infeasible: K=" << r.codes_per_level << " L=" << r.levels
                << " (capacity " << r.capacity << " insufficient for the corpus)\n";
  return 0;
}

int cmd_report(const CommonArgs& args) {
  auto cfg = resolve_config(args);
  std::cout << "run summary for " << cfg.output_dir << "\n";

  const std::string model_path = out_path(cfg, "model.json");
  if (std::filesystem::exists(model_path)) {
    auto model = load_model_bundle(model_path);
    const auto& c = model.config;
    std::cout << "model: D=" << c.input_dim << " D'=" << c.latent_dim << " K="
              << c.codes_per_level << " L=" << c.levels << ", " << model.training_log.size()
              << " epochs trained\n";
    if (!model.training_log.empty()) {
      const auto& l = model.training_log.back();
      std::cout << "  final losses: recon " << l.recon << ", quant " << l.quant << ", collab "
                << l.collab << ", total " << l.total << "\n";
    }
    const std::size_t n_tools =
        cfg.synthetic ? std::size_t(cfg.synth_spec.n_tools) : load_corpus(cfg).corpus.size();
    auto base = atomic_baseline_stats(n_tools, c.codes_per_level, c.levels);
    std::cout << "  vocabulary: " << base.compositional_vocab << " tokens vs "
              << base.atomic_vocab << " atomic (ratio " << base.ratio << "), capacity "
              << base.capacity << "\n";
  }

  const std::string codemap_path = out_path(cfg, "codemap.json");
  if (std::filesystem::exists(codemap_path)) {
    auto assignment = load_codemap_bundle(codemap_path);
    std::cout << "codemap: " << assignment.codes.size() << " tools, collision_report "
              << assignment.collision_report << "\n";
    print_uniformity(final_level_uniformity(assignment));
  }

  const std::string report_path = out_path(cfg, "report.json");
  if (std::filesystem::exists(report_path)) {
    auto bundle = load(report_path);
    for (const auto& [key, v] : bundle.payload.at("means").items())
      std::cout << "eval " << key << " " << v.get<double>() << "\n";
  }
  return 0;
}

int cmd_export(const CommonArgs& args, const std::string& what) {
  auto cfg = resolve_config(args);
  if (what == "codemap") {
    auto assignment = load_codemap_bundle(out_path(cfg, "codemap.json"));
    export_codemap_tsv(assignment, out_path(cfg, "codemap.tsv"));
    std::cout << "wrote " << out_path(cfg, "codemap.tsv") << "\n";
  } else if (what == "graph") {
    auto data = load_corpus(cfg);
    auto graph = similarity(build_cooccurrence(data.trajectories, data.corpus));
    export_similarity(graph, out_path(cfg, "similarity.tsv"));
    std::cout << "wrote " << out_path(cfg, "similarity.tsv") << "\n";
  } else if (what == "embeddings") {
    auto data = load_corpus(cfg);
    save_embeddings_binary(data.embeddings, data.corpus, out_path(cfg, "embeddings.wvemb"));
    std::cout << "wrote " << out_path(cfg, "embeddings.wvemb") << "\n";
  } else {
    throw ConfigError("export: what must be codemap, graph, or embeddings");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"structured tool-identifier pipeline"};
  app.require_subcommand(1);

  CommonArgs synth_args, fit_args, assign_args, eval_args, sweep_args, report_args, export_args;
  std::string model_path, codemap_path, queries_path, sweep_kind = "lambda",
                                                      export_what = "codemap";

  add_common(app.add_subcommand("synth", "generate a synthetic corpus"), synth_args);
  add_common(app.add_subcommand("fit", "train the quantizer"), fit_args);

  auto* assign = app.add_subcommand("assign", "assign code sequences to the corpus");
  add_common(assign, assign_args);
  assign->add_option("--model", model_path, "model bundle (default <out>/model.json)");

  auto* eval = app.add_subcommand("eval", "run retrieval evaluation");
  add_common(eval, eval_args);
  eval->add_option("--model", model_path, "model bundle (default <out>/model.json)");
  eval->add_option("--codemap", codemap_path, "codemap bundle (default <out>/codemap.json)");
  eval->add_option("--queries", queries_path,
                   "query JSONL (query_id, vector, relevant); default: synthetic queries");

  auto* sweep = app.add_subcommand("sweep", "sweep lambda, vocabulary, or depth");
  add_common(sweep, sweep_args);
  sweep->add_option("--kind", sweep_kind, "lambda | vocab | depth");

  add_common(app.add_subcommand("report", "summarize artifacts in the output directory"),
             report_args);

  auto* exp = app.add_subcommand("export", "export artifacts in exchange formats");
  add_common(exp, export_args);
  exp->add_option("--what", export_what, "codemap | graph | embeddings");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("synth")) return cmd_synth(synth_args);
    if (app.got_subcommand("fit")) return cmd_fit(fit_args);
    if (app.got_subcommand("assign")) return cmd_assign(assign_args, model_path);
    if (app.got_subcommand("eval"))
      return cmd_eval(eval_args, model_path, codemap_path, queries_path);
    if (app.got_subcommand("sweep")) return cmd_sweep(sweep_args, sweep_kind);
    if (app.got_subcommand("report")) return cmd_report(report_args);
    if (app.got_subcommand("export")) return cmd_export(export_args, export_what);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
