#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "coordinator.hpp"
#include "datagen.hpp"
#include "metrics.hpp"
#include "shard_index.hpp"

using namespace fairsync;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("fairsync_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int n = 0;
    return n;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

bool same_catalog(const Catalog& a, const Catalog& b) {
  if (a.group_count != b.group_count || a.items.size() != b.items.size()) return false;
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    if (a.items[i].item_id != b.items[i].item_id) return false;
    if (a.items[i].group_id != b.items[i].group_id) return false;
    if (a.items[i].embedding != b.items[i].embedding) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("synthetic corpora are deterministic under the seed") {
  SynthConfig cfg;
  cfg.group_count = 3;
  cfg.items_per_group = 5;
  cfg.dim = 6;
  cfg.user_count = 10;
  cfg.seed = 99;
  const auto a = synth_corpus(cfg);
  const auto b = synth_corpus(cfg);
  CHECK(same_catalog(a.catalog, b.catalog));
  REQUIRE(a.stream.size() == b.stream.size());
  for (std::size_t t = 0; t < a.stream.size(); ++t)
    CHECK(a.stream[t].embedding == b.stream[t].embedding);
}

TEST_CASE("noise-free corpora put each user's nearest items in the home group") {
  SynthConfig cfg;
  cfg.group_count = 4;
  cfg.items_per_group = 6;
  cfg.dim = 8;
  cfg.noise = 0.0;
  cfg.user_count = 12;
  cfg.relevant_per_user = 6;
  cfg.seed = 5;
  const auto bundle = synth_corpus(cfg);
  for (const auto& user : bundle.stream) {
    const auto* rel = bundle.relevance.find(user.user_id);
    REQUIRE(rel != nullptr);
    // All relevant items come from one group, and their distance strictly
    // beats every other group's items.
    int home = -1;
    for (auto item_id : *rel) {
      const auto& item = bundle.catalog.items[static_cast<std::size_t>(item_id)];
      if (home == -1) home = item.group_id;
      CHECK(item.group_id == home);
    }
    double worst_rel = -1e300, best_other = 1e300;
    for (const auto& item : bundle.catalog.items) {
      const double d = base_distance(user.embedding, item.embedding);
      if (rel->count(item.item_id)) worst_rel = std::max(worst_rel, d);
      else best_other = std::min(best_other, d);
    }
    CHECK(worst_rel < best_other);
  }
}

TEST_CASE("affinity weights steer which groups get users") {
  SynthConfig cfg;
  cfg.group_count = 3;
  cfg.items_per_group = 4;
  cfg.dim = 6;
  cfg.noise = 0.0;
  cfg.user_count = 30;
  cfg.relevant_per_user = 2;
  cfg.group_affinity = {1.0, 1.0, 0.0};
  cfg.seed = 6;
  const auto bundle = synth_corpus(cfg);
  for (const auto& user : bundle.stream) {
    const auto* rel = bundle.relevance.find(user.user_id);
    for (auto item_id : *rel)
      CHECK(bundle.catalog.items[static_cast<std::size_t>(item_id)].group_id != 2);
  }
}

TEST_CASE("extreme corpus distances fall in the stated bands") {
  const auto bundle = extreme_case_corpus();
  CHECK(bundle.catalog.items.size() == 10);
  CHECK(bundle.stream.size() == 10000);
  CHECK(bundle.catalog.group_count == 2);
  for (std::size_t t = 0; t < bundle.stream.size(); t += 97) {
    const auto& user = bundle.stream[t];
    double worst_liked = -1.0;
    double best_disliked = 2.0;
    for (const auto& item : bundle.catalog.items) {
      const double d = base_distance(user.embedding, item.embedding);
      CHECK(d >= 0.0);
      CHECK(d <= 1.0);
      if (item.group_id == 0) {
        CHECK(d < 0.4);
        worst_liked = std::max(worst_liked, d);
      } else {
        CHECK(d >= 0.4);
        best_disliked = std::min(best_disliked, d);
      }
    }
    CHECK(worst_liked < best_disliked);
    const auto* rel = bundle.relevance.find(user.user_id);
    REQUIRE(rel != nullptr);
    CHECK(rel->size() == 5);
  }
}

TEST_CASE("plain KNN on the extreme corpus: recall 1.0, esp 50%") {
  const auto bundle = extreme_case_corpus();
  const auto shards = build_all_indexes(bundle.catalog);
  FairnessSpec spec;
  spec.min_exposure = {2000, 2000};
  spec.horizon = static_cast<std::int64_t>(bundle.stream.size());
  spec.k = 5;
  RunConfig config;
  config.algorithm = Algorithm::Plain;
  config.k = 5;
  config.horizon = spec.horizon;
  Coordinator coordinator(bundle.catalog, shards, spec, config);
  const auto report = coordinator.run(bundle.stream);
  const auto result = evaluate(report, bundle.relevance, spec);
  CHECK(result.recall == doctest::Approx(1.0));
  CHECK(result.esp == doctest::Approx(0.5));
  CHECK(report.ledger.counts[0] == 50000);
  CHECK(report.ledger.counts[1] == 0);
}

TEST_CASE("fseb round trip") {
  TempDir dir;
  std::vector<Embedding> rows{{0.25, -1.5, 3.0}, {quantize_f32(0.1), 0.0, -2.75}};
  write_fseb(dir.file("x.fseb"), rows);
  const auto loaded = read_fseb(dir.file("x.fseb"));
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0] == rows[0]);
  CHECK(loaded[1] == rows[1]);
  CHECK(read_embeddings(dir.file("x.fseb")) == loaded);
}

TEST_CASE("csv embedding alternative") {
  TempDir dir;
  {
    std::ofstream out(dir.file("e.csv"));
    out << "id,v0,v1\n1,0.5,-0.25\n0,1.0,2.0\n";
  }
  const auto rows = read_embeddings_csv(dir.file("e.csv"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == Embedding{1.0, 2.0});
  CHECK(rows[1] == Embedding{0.5, -0.25});
  CHECK(read_embeddings(dir.file("e.csv")) == rows);
}

TEST_CASE("malformed inputs abort with a line number") {
  TempDir dir;
  {
    std::ofstream out(dir.file("bad.csv"));
    out << "id,v0\n0,1.0\n1,oops\n";
  }
  try {
    read_embeddings_csv(dir.file("bad.csv"));
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
}

TEST_CASE("loader performs the 80/10/10 split on a toy file") {
  TempDir dir;
  write_fseb(dir.file("items.fseb"), {{1, 0}, {0, 1}, {1, 1}});
  write_fseb(dir.file("users.fseb"), {{1, 0}, {0, 1}});
  {
    std::ofstream out(dir.file("groups.csv"));
    out << "item_id,group_label\n0,a\n1,b\n2,a\n";
  }
  {
    std::ofstream out(dir.file("inter.csv"));
    out << "user_id,item_id,timestamp\n";
    // Ten interactions; the last by timestamp is the single test row.
    for (int i = 0; i < 9; ++i) out << (i % 2) << "," << (i % 3) << "," << (10 + i) << "\n";
    out << "1,2,100\n";
  }
  const auto bundle = load_corpus(dir.file("items.fseb"), dir.file("users.fseb"),
                                  dir.file("groups.csv"), dir.file("inter.csv"));
  REQUIRE(bundle.stream.size() == 1);  // 8 train / 1 validation / 1 test
  CHECK(bundle.stream[0].user_id == 1);
  const auto* rel = bundle.relevance.find(1);
  REQUIRE(rel != nullptr);
  CHECK(rel->count(2) == 1);
  // String labels map to dense ids in sorted order.
  CHECK(bundle.group_labels == std::vector<std::string>{"a", "b"});
  CHECK(bundle.catalog.items[0].group_id == 0);
  CHECK(bundle.catalog.items[1].group_id == 1);
}

TEST_CASE("unknown items in interactions abort") {
  TempDir dir;
  write_fseb(dir.file("items.fseb"), {{1, 0}});
  write_fseb(dir.file("users.fseb"), {{1, 0}});
  {
    std::ofstream out(dir.file("groups.csv"));
    out << "0,only\n";
  }
  {
    std::ofstream out(dir.file("inter.csv"));
    out << "0,7,1\n";
  }
  CHECK_THROWS_AS(load_corpus(dir.file("items.fseb"), dir.file("users.fseb"),
                              dir.file("groups.csv"), dir.file("inter.csv")),
                  IoError);
}

TEST_CASE("infrequent groups merge under the size floor") {
  TempDir dir;
  write_fseb(dir.file("items.fseb"), {{1, 0}, {0, 1}, {1, 1}, {0, 0.5}});
  write_fseb(dir.file("users.fseb"), {{1, 0}});
  {
    std::ofstream out(dir.file("groups.csv"));
    out << "0,big\n1,big\n2,big\n3,rare\n";
  }
  {
    std::ofstream out(dir.file("inter.csv"));
    for (int i = 0; i < 10; ++i) out << "0," << (i % 4) << "," << i << "\n";
  }
  LoadOptions options;
  options.min_group_size = 2;
  const auto bundle = load_corpus(dir.file("items.fseb"), dir.file("users.fseb"),
                                  dir.file("groups.csv"), dir.file("inter.csv"), options);
  CHECK(bundle.catalog.group_count == 2);
  CHECK(bundle.group_labels == std::vector<std::string>{"big", "__infrequent__"});
  CHECK(bundle.catalog.items[3].group_id == 1);
}

TEST_CASE("write_corpus then load_corpus_dir round-trips the catalog") {
  SynthConfig cfg;
  cfg.group_count = 3;
  cfg.items_per_group = 4;
  cfg.dim = 5;
  cfg.user_count = 8;
  cfg.relevant_per_user = 3;
  cfg.seed = 17;
  const auto bundle = synth_corpus(cfg);

  TempDir dir;
  write_corpus(dir.path.string(), bundle);
  const auto loaded = load_corpus_dir(dir.path.string());
  CHECK(same_catalog(bundle.catalog, loaded.catalog));
  REQUIRE(loaded.stream.size() == bundle.stream.size());
  for (std::size_t t = 0; t < bundle.stream.size(); ++t)
    CHECK(bundle.stream[t].embedding == loaded.stream[t].embedding);
  for (const auto& user : bundle.stream) {
    const auto* a = bundle.relevance.find(user.user_id);
    const auto* b = loaded.relevance.find(user.user_id);
    REQUIRE(a != nullptr);
    REQUIRE(b != nullptr);
    CHECK(*a == *b);
  }
}
