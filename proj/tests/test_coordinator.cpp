#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "coordinator.hpp"
#include "datagen.hpp"
#include "shard_index.hpp"

using namespace fairsync;

namespace {

CorpusBundle small_corpus(int items_per_group, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.group_count = 4;
  cfg.items_per_group = items_per_group;
  cfg.dim = 8;
  cfg.noise = 0.3;
  cfg.user_count = 40;
  cfg.relevant_per_user = 5;
  cfg.seed = seed;
  return synth_corpus(cfg);
}

RunConfig basic_config(Algorithm algorithm, int k, std::int64_t horizon) {
  RunConfig config;
  config.algorithm = algorithm;
  config.k = k;
  config.horizon = horizon;
  config.batch_size = 1;
  config.eta = 0.01;
  return config;
}

FairnessSpec zero_spec(int groups, std::int64_t horizon, int k) {
  FairnessSpec spec;
  spec.min_exposure.assign(static_cast<std::size_t>(groups), 0);
  spec.horizon = horizon;
  spec.k = k;
  return spec;
}

std::vector<CandidateList> run_with_shards(const CorpusBundle& bundle, int shard_count,
                                           RunConfig config, const FairnessSpec& spec) {
  Catalog catalog = bundle.catalog;
  reshard(catalog, shard_count, Partitioning::RoundRobin);
  const auto shards = build_all_indexes(catalog);
  config.shard_count = shard_count;
  Coordinator coordinator(catalog, shards, spec, config);
  return coordinator.run(bundle.stream).candidates;
}

bool identical_candidates(const std::vector<CandidateList>& a,
                          const std::vector<CandidateList>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (a[t].user_id != b[t].user_id) return false;
    if (a[t].entries.size() != b[t].entries.size()) return false;
    for (std::size_t i = 0; i < a[t].entries.size(); ++i) {
      if (a[t].entries[i].item_id != b[t].entries[i].item_id) return false;
      if (a[t].entries[i].score != b[t].entries[i].score) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("merge_topk takes the globally smallest pairs") {
  const std::vector<std::vector<ScoredItem>> partials{
      {{10, 0, 1.0}, {11, 0, 3.0}},
      {{20, 1, 2.0}, {21, 1, 4.0}},
  };
  const auto merged = merge_topk(partials, 2);
  REQUIRE(merged.size() == 2);
  CHECK(merged[0].item_id == 10);
  CHECK(merged[1].item_id == 20);
}

TEST_CASE("merge_topk ignores empty partials and enforces the size contract") {
  const std::vector<std::vector<ScoredItem>> partials{
      {},
      {{5, 0, -1.0}, {6, 0, 0.0}},
  };
  const auto merged = merge_topk(partials, 2);
  CHECK(merged[0].item_id == 5);
  CHECK_THROWS_AS(merge_topk(partials, 3), std::invalid_argument);
}

TEST_CASE("merge_topk equals concatenate-sort-truncate") {
  Rng rng(71);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::vector<ScoredItem>> partials(1 + rng.bounded(4));
    std::vector<ScoredItem> all;
    std::int64_t next_id = 0;
    for (auto& partial : partials) {
      const int n = static_cast<int>(rng.bounded(6));
      for (int i = 0; i < n; ++i)
        partial.push_back({next_id++, 0, rng.uniform(-1, 1)});
      std::sort(partial.begin(), partial.end(),
                [](const ScoredItem& a, const ScoredItem& b) {
                  if (a.score != b.score) return a.score < b.score;
                  return a.item_id < b.item_id;
                });
      all.insert(all.end(), partial.begin(), partial.end());
    }
    if (all.size() < 3) continue;
    std::sort(all.begin(), all.end(), [](const ScoredItem& a, const ScoredItem& b) {
      if (a.score != b.score) return a.score < b.score;
      return a.item_id < b.item_id;
    });
    const auto merged = merge_topk(partials, 3);
    for (int i = 0; i < 3; ++i) {
      CHECK(merged[static_cast<std::size_t>(i)].item_id ==
            all[static_cast<std::size_t>(i)].item_id);
    }
  }
}

TEST_CASE("retrieve over one shard equals local_topk") {
  const auto bundle = small_corpus(10, 1);
  const auto shards = build_all_indexes(bundle.catalog);
  const DualVector mu(4, 0.0);
  const auto list = retrieve(bundle.stream[0].embedding, mu, shards, 5);
  const auto expected =
      local_topk(shards[0], build_query(bundle.stream[0].embedding, mu), 5);
  REQUIRE(list.entries.size() == 5);
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(list.entries[i].item_id == expected[i].item_id);
}

TEST_CASE("a shard with uniformly better scores supplies the whole list") {
  Catalog catalog;
  catalog.group_count = 1;
  catalog.shard_count = 2;
  for (int i = 0; i < 4; ++i) catalog.items.push_back({i, {10.0 - i}, 0, 0});
  for (int i = 4; i < 8; ++i) catalog.items.push_back({i, {1.0 - (i - 4)}, 0, 1});
  const auto shards = build_all_indexes(catalog);
  const auto list = retrieve({1.0}, DualVector{0.0}, shards, 4);
  REQUIRE(list.entries.size() == 4);
  for (const auto& e : list.entries) CHECK(e.item_id < 4);
  CHECK(list.entries[0].item_id == 0);  // dot 10 -> distance -10
}

TEST_CASE("retrieve matches the single-shard oracle across partitions") {
  const auto bundle = small_corpus(50, 2);  // 200 items
  const DualVector mu{0.2, -0.1, 0.05, 0.0};

  Catalog single = bundle.catalog;
  reshard(single, 1, Partitioning::RoundRobin);
  const auto baseline = build_all_indexes(single);

  Catalog split = bundle.catalog;
  reshard(split, 4, Partitioning::RoundRobin);
  const auto shards = build_all_indexes(split);

  for (int t = 0; t < 10; ++t) {
    const auto& user = bundle.stream[static_cast<std::size_t>(t)].embedding;
    const auto got = retrieve(user, mu, shards, 20);
    const auto want = retrieve(user, mu, baseline, 20);
    REQUIRE(got.entries.size() == want.entries.size());
    for (std::size_t i = 0; i < got.entries.size(); ++i) {
      CHECK(got.entries[i].item_id == want.entries[i].item_id);
      CHECK(got.entries[i].score == want.entries[i].score);
    }
  }
}

TEST_CASE("retrieve fails when the corpus is smaller than K") {
  const auto bundle = small_corpus(1, 3);  // 4 items
  const auto shards = build_all_indexes(bundle.catalog);
  CHECK_THROWS_AS(retrieve(bundle.stream[0].embedding, DualVector(4, 0.0), shards, 5),
                  std::invalid_argument);
}

TEST_CASE("subgradient worked example and tie rule") {
  FairnessSpec spec;
  spec.min_exposure = {2, 2};
  spec.horizon = 3;
  spec.k = 2;

  CandidateList all_group1;
  all_group1.entries = {{5, 1, -0.9}, {6, 1, -0.8}};
  const auto s = subgradient(all_group1, {0.5, 0.1}, spec);
  CHECK(s[0] == doctest::Approx(4.0));
  CHECK(s[1] == doctest::Approx(0.0));

  // Stationarity: exposures equal to m for g != top and to TK - sum_{g!=top} m
  // at the top coordinate give a zero subgradient.
  FairnessSpec spec2;
  spec2.min_exposure = {1, 2};
  spec2.horizon = 1;
  spec2.k = 3;
  CandidateList balanced;
  balanced.entries = {{0, 0, -1.0}, {1, 1, -0.9}, {2, 1, -0.8}};
  const auto s2 = subgradient(balanced, {0.7, 0.1}, spec2);  // top = 0, TK - m_1 = 1
  CHECK(s2[0] == doctest::Approx(0.0));
  CHECK(s2[1] == doctest::Approx(0.0));

  // All-equal mu breaks the argmax tie toward group 0: s_0 absorbs the slack.
  const auto s3 = subgradient(all_group1, {0.0, 0.0}, spec);
  CHECK(s3[0] == doctest::Approx((6.0 - 2.0) - 0.0));
  CHECK(s3[1] == doctest::Approx(2.0 - 2.0));
}

TEST_CASE("per-step scaling divides the horizon out of the magnitudes") {
  FairnessSpec spec;
  spec.min_exposure = {2000, 2000};
  spec.horizon = 10000;
  spec.k = 5;
  CandidateList list;
  list.entries = {{0, 0, -1}, {1, 0, -1}, {2, 0, -1}, {3, 0, -1}, {4, 0, -1}};
  const auto s = subgradient_scaled(list, {0.0, 0.0}, spec, GradientScaling::PerStep);
  CHECK(s[0] == doctest::Approx((5.0 - 0.2) - 5.0));  // top coordinate
  CHECK(s[1] == doctest::Approx(0.2));
  const auto full = subgradient_scaled(list, {0.0, 0.0}, spec,
                                       GradientScaling::FullHorizon);
  CHECK(full[0] == doctest::Approx(50000.0 - 2000.0 - 5.0));
  CHECK(full[1] == doctest::Approx(2000.0));
}

TEST_CASE("B=1 updates mu after every user") {
  const auto bundle = small_corpus(10, 4);
  const auto shards = build_all_indexes(bundle.catalog);
  FairnessSpec spec = zero_spec(4, 8, 5);
  spec.min_exposure = {10, 10, 10, 10};
  Coordinator coordinator(bundle.catalog, shards, spec,
                          basic_config(Algorithm::FairSync, 5, 8));
  DualVector prev = coordinator.mu();
  for (int t = 0; t < 4; ++t) {
    coordinator.step(bundle.stream[static_cast<std::size_t>(t)]);
    CHECK(coordinator.mu() != prev);
    prev = coordinator.mu();
  }
}

TEST_CASE("B larger than T never updates mu") {
  const auto bundle = small_corpus(10, 5);
  const auto shards = build_all_indexes(bundle.catalog);
  FairnessSpec spec = zero_spec(4, 8, 5);
  spec.min_exposure = {5, 5, 5, 5};
  RunConfig config = basic_config(Algorithm::FairSync, 5, 8);
  config.batch_size = 100;
  Coordinator fairsync_run(bundle.catalog, shards, spec, config);
  const auto report = fairsync_run.run(bundle.stream);
  CHECK(fairsync_run.mu() == DualVector(4, 0.0));

  Coordinator plain_run(bundle.catalog, shards, spec,
                        basic_config(Algorithm::Plain, 5, 8));
  const auto plain = plain_run.run(bundle.stream);
  CHECK(identical_candidates(report.candidates, plain.candidates));
}

TEST_CASE("B=4 over T=8 triggers exactly two optimizer steps") {
  const auto bundle = small_corpus(10, 6);
  const auto shards = build_all_indexes(bundle.catalog);
  FairnessSpec spec = zero_spec(4, 8, 5);
  spec.min_exposure = {4, 4, 4, 4};
  RunConfig config = basic_config(Algorithm::FairSync, 5, 8);
  config.batch_size = 4;
  Coordinator coordinator(bundle.catalog, shards, spec, config);
  const auto report = coordinator.run(bundle.stream);
  // Initial snapshot plus one per optimizer step.
  CHECK(report.mu_trace.size() == 3);
  CHECK(report.mu_trace[1].step == 4);
  CHECK(report.mu_trace[2].step == 8);
}

TEST_CASE("T=0 produces an empty report") {
  const auto bundle = small_corpus(10, 7);
  const auto shards = build_all_indexes(bundle.catalog);
  Coordinator coordinator(bundle.catalog, shards, zero_spec(4, 0, 5),
                          basic_config(Algorithm::FairSync, 5, 0));
  const auto report = coordinator.run(bundle.stream);
  CHECK(report.candidates.empty());
  CHECK(report.processed == 0);
  CHECK_FALSE(report.incomplete);
  CHECK(report.ledger.total() == 0);
}

TEST_CASE("a short stream is flagged incomplete") {
  const auto bundle = small_corpus(10, 8);
  const auto shards = build_all_indexes(bundle.catalog);
  Coordinator coordinator(bundle.catalog, shards, zero_spec(4, 100, 5),
                          basic_config(Algorithm::FairSync, 5, 100));
  const auto report = coordinator.run(bundle.stream);
  CHECK(report.processed == 40);
  CHECK(report.incomplete);
}

TEST_CASE("runs are deterministic") {
  const auto bundle = small_corpus(12, 9);
  FairnessSpec spec = zero_spec(4, 40, 6);
  spec.min_exposure = {30, 30, 30, 30};
  RunConfig config = basic_config(Algorithm::FairSync, 6, 40);
  config.batch_size = 4;
  const auto a = run_with_shards(bundle, 2, config, spec);
  const auto b = run_with_shards(bundle, 2, config, spec);
  CHECK(identical_candidates(a, b));
}

TEST_CASE("sharding invariance: candidate sequences are bit-identical") {
  const auto bundle = small_corpus(25, 10);  // 100 items
  FairnessSpec spec = zero_spec(4, 40, 8);
  spec.min_exposure = {40, 40, 40, 40};
  RunConfig config = basic_config(Algorithm::FairSync, 8, 40);
  config.batch_size = 2;
  const auto baseline = run_with_shards(bundle, 1, config, spec);
  for (int shards : {2, 3, 4, 8}) {
    CHECK(identical_candidates(baseline, run_with_shards(bundle, shards, config, spec)));
  }
}

TEST_CASE("online causality: the future never changes the past") {
  const auto bundle = small_corpus(10, 11);
  FairnessSpec spec = zero_spec(4, 20, 5);
  spec.min_exposure = {20, 20, 20, 20};
  RunConfig config = basic_config(Algorithm::FairSync, 5, 20);
  const auto full = run_with_shards(bundle, 2, config, spec);

  CorpusBundle permuted = bundle;
  std::reverse(permuted.stream.begin() + 10, permuted.stream.end());
  const auto altered = run_with_shards(permuted, 2, config, spec);
  for (int t = 0; t < 10; ++t) {
    CHECK(full[static_cast<std::size_t>(t)].user_id ==
          altered[static_cast<std::size_t>(t)].user_id);
    for (std::size_t i = 0; i < full[static_cast<std::size_t>(t)].entries.size(); ++i)
      CHECK(full[static_cast<std::size_t>(t)].entries[i].item_id ==
            altered[static_cast<std::size_t>(t)].entries[i].item_id);
  }
}

TEST_CASE("ledger conservation across a run") {
  const auto bundle = small_corpus(10, 12);
  const auto shards = build_all_indexes(bundle.catalog);
  FairnessSpec spec = zero_spec(4, 30, 7);
  Coordinator coordinator(bundle.catalog, shards, spec,
                          basic_config(Algorithm::FairSync, 7, 30));
  const auto report = coordinator.run(bundle.stream);
  CHECK(report.ledger.total() == report.processed * 7);
}

TEST_CASE("an underexposed group's mu strictly decreases after one step") {
  // Buffered gradients in which group 2 is far below its per-step share.
  FairnessSpec spec;
  spec.min_exposure = {0, 0, 12, 0};
  spec.horizon = 4;
  spec.k = 3;
  CandidateList list;
  list.entries = {{0, 0, -1.0}, {1, 1, -0.9}, {2, 3, -0.8}};  // none from group 2
  GradientBuffer buffer(2);
  const DualVector mu(4, 0.0);
  buffer.push(subgradient_scaled(list, mu, spec, GradientScaling::PerStep));
  buffer.push(subgradient_scaled(list, mu, spec, GradientScaling::PerStep));
  AdamState state(4, 0.01);
  const auto next = adam_step(state, mu, buffer.reduce(BufferReduce::Mean));
  CHECK(next[2] < 0.0);
}

TEST_CASE("infeasible specs refuse to run") {
  const auto bundle = small_corpus(10, 13);
  const auto shards = build_all_indexes(bundle.catalog);
  FairnessSpec spec;
  spec.min_exposure = {100, 100, 100, 100};
  spec.horizon = 10;
  spec.k = 5;  // TK = 50 < 400
  Coordinator coordinator(bundle.catalog, shards, spec,
                          basic_config(Algorithm::FairSync, 5, 10));
  CHECK_THROWS_AS(coordinator.run(bundle.stream), InfeasibleError);
}

TEST_CASE("stepping past the horizon is rejected") {
  const auto bundle = small_corpus(10, 14);
  const auto shards = build_all_indexes(bundle.catalog);
  Coordinator coordinator(bundle.catalog, shards, zero_spec(4, 1, 5),
                          basic_config(Algorithm::FairSync, 5, 1));
  coordinator.step(bundle.stream[0]);
  CHECK_THROWS_AS(coordinator.step(bundle.stream[1]), std::invalid_argument);
}
