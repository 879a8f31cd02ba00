#include <catch2/catch_amalgamated.hpp>

#include "weaver/evalsuite.hpp"

using namespace weaver;

namespace {

struct Fixture {
  SyntheticCorpus synth;
  QuantizerModel model;
  CodeAssignment assignment;
  CodeTrie trie;

  Fixture() : trie(0) {}
};

Fixture make_fixture(std::uint64_t seed = 7, std::size_t epochs = 10) {
  Fixture fx;
  SyntheticSpec spec{20, 4, 6, 0.03, 10, 3, seed};
  fx.synth = synth_corpus(spec);

  QuantizerConfig cfg;
  cfg.input_dim = 6;
  cfg.latent_dim = 3;
  cfg.hidden_dims = {8};
  cfg.levels = 2;
  cfg.codes_per_level = 8;
  cfg.learning_rate = 1e-2;
  cfg.epochs = epochs;
  cfg.warmup_epochs = 2;
  cfg.batch_size = 20;
  cfg.collab_lambda = 0.01;
  cfg.seed = seed;

  auto graph = similarity(build_cooccurrence(fx.synth.trajectories, fx.synth.corpus));
  std::vector<Vec> embs;
  for (const auto& rec : fx.synth.corpus.records())
    embs.push_back(fx.synth.embeddings.at(rec.tool_id));
  fx.model = fit(embs, &graph, cfg);
  fx.assignment = assign_codes(fx.model, fx.synth.corpus, fx.synth.embeddings, 0.05, 200);
  fx.trie = build_trie(fx.assignment);
  return fx;
}

}  // namespace

TEST_CASE("ndcg matches hand-computed values") {
  std::set<std::string> rel = {"a", "b"};

  // relevant item first: perfect at k=1
  CHECK_THAT(ndcg_at_k({"a", "x", "y"}, rel, 1), Catch::Matchers::WithinAbs(1.0, 1e-12));

  // relevant at positions 1 and 3 of k=3: dcg = 1 + 1/log2(4), idcg = 1 + 1/log2(3)
  const double dcg = 1.0 + 1.0 / std::log2(4.0);
  const double idcg = 1.0 + 1.0 / std::log2(3.0);
  CHECK_THAT(ndcg_at_k({"a", "x", "b"}, rel, 3), Catch::Matchers::WithinAbs(dcg / idcg, 1e-12));

  // no relevant item retrieved
  CHECK(ndcg_at_k({"x", "y"}, rel, 2) == 0.0);

  // ideal ordering is exactly 1 even when k exceeds the list
  CHECK_THAT(ndcg_at_k({"b", "a"}, rel, 10), Catch::Matchers::WithinAbs(1.0, 1e-12));

  // k smaller than the relevant set: idcg uses only k slots
  CHECK_THAT(ndcg_at_k({"a"}, rel, 1), Catch::Matchers::WithinAbs(1.0, 1e-12));

  // single relevant item at position 2 of k=5
  CHECK_THAT(ndcg_at_k({"x", "a"}, {"a"}, 5),
             Catch::Matchers::WithinAbs(1.0 / std::log2(3.0), 1e-12));

  CHECK_THROWS_AS(ndcg_at_k({"a"}, rel, 0), ConfigError);
  CHECK_THROWS_AS(ndcg_at_k({"a"}, {}, 1), ConfigError);
}

TEST_CASE("surrogate scorer ranks the true code path first for clean queries") {
  auto fx = make_fixture();
  std::size_t hits = 0;
  for (const auto& rec : fx.synth.corpus.records()) {
    const auto& e = fx.synth.embeddings.at(rec.tool_id);
    auto scorer = surrogate_scorer(fx.model, e);

    // the scorer's greedy path equals greedy quantization of the encoded query
    auto qr = quantize(fx.model, fx.model.encode(e));
    std::vector<std::size_t> prefix;
    for (std::size_t l = 0; l < 2; ++l) {
      auto scores = scorer(prefix);
      std::size_t best = static_cast<std::size_t>(
          std::max_element(scores.begin(), scores.end()) - scores.begin());
      CHECK(best == qr.indices[l]);
      prefix.push_back(best);
    }

    // within-group embeddings are near-duplicates, so exact-identity rank 1 is
    // not attainable; the contract is a same-cell neighbor at rank 1
    auto rr = retrieve({rec.tool_id, e, {rec.tool_id}}, fx.model, fx.trie, 32, 1);
    REQUIRE(rr.ranked.size() == 1);
    const std::size_t self = fx.synth.corpus.index_of(rec.tool_id);
    const std::size_t top = fx.synth.corpus.index_of(rr.ranked[0].tool_id);
    if (fx.synth.group_of[self] == fx.synth.group_of[top]) ++hits;
  }
  CHECK(hits >= fx.synth.corpus.size() * 8 / 10);
}

TEST_CASE("run_eval aggregates per-query ndcg") {
  auto fx = make_fixture();
  auto queries = make_synthetic_queries(fx.synth.corpus, fx.synth.embeddings, 16, 0.01, 5);
  auto rep = run_eval(queries, fx.model, fx.trie, 8, {1, 3});
  REQUIRE(rep.per_query.size() == 16);
  for (std::size_t k : {std::size_t{1}, std::size_t{3}}) {
    double s = 0.0;
    for (const auto& row : rep.per_query) {
      CHECK(row.ndcg.at(k) >= 0.0);
      CHECK(row.ndcg.at(k) <= 1.0);
      s += row.ndcg.at(k);
    }
    CHECK_THAT(rep.ndcg.at(k), Catch::Matchers::WithinAbs(s / 16.0, 1e-12));
  }
  // ndcg@3 dominates ndcg@1 for single-relevant queries
  CHECK(rep.ndcg.at(3) >= rep.ndcg.at(1));

  CHECK_THROWS_AS(run_eval(QuerySet{}, fx.model, fx.trie, 8), ConfigError);
}

TEST_CASE("low-noise queries against a trained model retrieve well") {
  auto fx = make_fixture(11, 25);
  auto queries = make_synthetic_queries(fx.synth.corpus, fx.synth.embeddings, 32, 0.005, 13);
  auto rep = run_eval(queries, fx.model, fx.trie, 16, {1, 3, 5});
  CHECK(rep.ndcg.at(5) > 0.4);
  CHECK(rep.ndcg.at(5) >= rep.ndcg.at(1));
}

TEST_CASE("make_synthetic_queries is deterministic and tracks its source tool") {
  auto fx = make_fixture();
  auto q1 = make_synthetic_queries(fx.synth.corpus, fx.synth.embeddings, 8, 0.1, 3);
  auto q2 = make_synthetic_queries(fx.synth.corpus, fx.synth.embeddings, 8, 0.1, 3);
  REQUIRE(q1.queries.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(q1.queries[i].embedding == q2.queries[i].embedding);
    CHECK(q1.queries[i].relevant == q2.queries[i].relevant);
    REQUIRE(q1.queries[i].relevant.size() == 1);
    // the query embedding stays within noise range of its source embedding
    const auto& src = fx.synth.embeddings.at(*q1.queries[i].relevant.begin());
    CHECK(std::sqrt(squared_distance(q1.queries[i].embedding, src)) < 0.1 * 10.0);
  }
  // different seed, different queries
  auto q3 = make_synthetic_queries(fx.synth.corpus, fx.synth.embeddings, 8, 0.1, 4);
  CHECK(q1.queries[0].embedding != q3.queries[0].embedding);
}

TEST_CASE("run_single produces a full sweep row") {
  SweepSettings s;
  s.corpus_spec = {16, 4, 6, 0.05, 8, 3, 0};
  s.quantizer.input_dim = 6;
  s.quantizer.latent_dim = 3;
  s.quantizer.hidden_dims = {6};
  s.quantizer.levels = 2;
  s.quantizer.codes_per_level = 6;
  s.quantizer.learning_rate = 1e-2;
  s.quantizer.epochs = 5;
  s.quantizer.warmup_epochs = 2;
  s.quantizer.batch_size = 16;
  s.n_queries = 8;

  auto row = run_single(s, s.quantizer, 1);
  CHECK(row.feasible);
  CHECK(row.vocab_tokens == 12);
  CHECK(row.capacity == 36.0);
  CHECK(row.ndcg.count(5) == 1);
  CHECK(row.uniformity_relative_std >= 0.0);

  // infeasible configuration short-circuits
  auto cfg = s.quantizer;
  cfg.codes_per_level = 3;  // capacity 9 < 16 tools
  auto bad = run_single(s, cfg, 1);
  CHECK_FALSE(bad.feasible);
  CHECK(bad.ndcg.empty());
}

TEST_CASE("sweeps cover the requested grid") {
  SweepSettings s;
  s.corpus_spec = {12, 3, 6, 0.05, 6, 3, 0};
  s.quantizer.input_dim = 6;
  s.quantizer.latent_dim = 3;
  s.quantizer.hidden_dims = {6};
  s.quantizer.levels = 2;
  s.quantizer.codes_per_level = 6;
  s.quantizer.learning_rate = 1e-2;
  s.quantizer.epochs = 3;
  s.quantizer.warmup_epochs = 1;
  s.quantizer.batch_size = 12;
  s.n_queries = 4;

  auto lam = sweep_lambda(s, {0.0, 1.0}, {1, 2});
  REQUIRE(lam.size() == 2);
  CHECK(lam[0].lambda_value == 0.0);
  CHECK(lam[1].lambda_value == 1.0);

  auto voc = sweep_vocab(s, {6, 8}, {1});
  REQUIRE(voc.size() == 2);
  CHECK(voc[0].vocab_tokens == 12);
  CHECK(voc[1].vocab_tokens == 16);
  CHECK(voc[1].capacity == 64.0);

  auto dep = sweep_depth(s, {2, 3}, {1});
  REQUIRE(dep.size() == 2);
  CHECK(dep[1].levels == 3);
  CHECK(dep[1].capacity == 216.0);
}

TEST_CASE("atomic baseline arithmetic") {
  auto c = atomic_baseline_stats(47000, 1024, 2);
  CHECK(c.atomic_vocab == 47000);
  CHECK(c.compositional_vocab == 2048);
  CHECK(c.capacity == 1024.0 * 1024.0);
  CHECK_THAT(c.ratio, Catch::Matchers::WithinRel(47000.0 / 2048.0, 1e-12));
  CHECK(c.ratio > 20.0);
  CHECK_THROWS_AS(atomic_baseline_stats(0, 1, 1), ConfigError);
}
