#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

#include "experiment.hpp"

using namespace fairsync;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("fairsync_exp_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string tiny_config_json(const std::string& out_dir, const std::string& algorithm) {
  json config = {
      {"algorithm", algorithm},
      {"K", 5},
      {"B", 2},
      {"eta", 0.005},
      {"M", 2},
      {"seed", 3},
      {"m_uniform", 4},
      {"corpus",
       {{"synthetic",
         {{"group_count", 3},
          {"items_per_group", 8},
          {"dim", 6},
          {"noise", 0.3},
          {"user_count", 30},
          {"relevant_per_user", 4},
          {"seed", 12}}}}},
      {"out", out_dir},
  };
  return config.dump();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json summary_without_latency(const std::string& path) {
  json summary = json::parse(slurp(path));
  summary.erase("latency");
  return summary;
}

}  // namespace

TEST_CASE("config parsing fills defaults and validates") {
  const auto config = parse_experiment_config(tiny_config_json("/tmp/x", "fairsync"));
  CHECK(config.run.k == 5);
  CHECK(config.run.batch_size == 2);
  CHECK(config.run.scaling == GradientScaling::PerStep);
  CHECK(config.run.reduce == BufferReduce::Mean);
  CHECK(config.m_uniform == 4);

  CHECK_THROWS_AS(parse_experiment_config("{\"algorithm\":\"nope\"}"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_experiment_config("{\"unknown_key\":1}"), std::invalid_argument);
  CHECK_THROWS_AS(parse_experiment_config("not json"), std::invalid_argument);
  // No corpus source.
  CHECK_THROWS_AS(parse_experiment_config("{\"K\":5}"), std::invalid_argument);
  // Two corpus sources.
  CHECK_THROWS_AS(parse_experiment_config(
                      "{\"corpus\":{\"extreme\":{},\"dir\":\"x\"}}"),
                  std::invalid_argument);
}

TEST_CASE("run writes all artifacts and a plain run has a zero mu trace") {
  TempDir dir;
  const auto config = parse_experiment_config(tiny_config_json(dir.path.string(), "plain"));
  const auto outcome = run_experiment(config);
  CHECK(outcome.processed == 30);

  for (const char* name : {"effective_config.json", "metrics.csv", "summary.json",
                           "candidates.csv", "mu_trace.csv", "group_map.csv"})
    CHECK(fs::exists(dir.path / name));

  std::ifstream trace(dir.file("mu_trace.csv"));
  std::string line;
  std::getline(trace, line);
  CHECK(line == "step,g0,g1,g2");
  while (std::getline(trace, line)) {
    std::stringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');
    while (std::getline(ss, field, ',')) CHECK(field == "0");
  }

  const std::string metrics = slurp(dir.file("metrics.csv"));
  CHECK(metrics.find("algorithm,K,m_profile,recall,ndcg,hr,esp") == 0);
  CHECK(metrics.find("plain,5,uniform:4,") != std::string::npos);
}

TEST_CASE("reruns are byte-identical on the deterministic artifact set") {
  TempDir a, b;
  run_experiment(parse_experiment_config(tiny_config_json(a.path.string(), "fairsync")));
  run_experiment(parse_experiment_config(tiny_config_json(b.path.string(), "fairsync")));
  CHECK(slurp(a.file("candidates.csv")) == slurp(b.file("candidates.csv")));
  CHECK(slurp(a.file("metrics.csv")) == slurp(b.file("metrics.csv")));
  CHECK(slurp(a.file("mu_trace.csv")) == slurp(b.file("mu_trace.csv")));
  CHECK(summary_without_latency(a.file("summary.json")) ==
        summary_without_latency(b.file("summary.json")));
}

TEST_CASE("rerunning from the effective config echo reproduces the outputs") {
  TempDir first, second;
  run_experiment(parse_experiment_config(tiny_config_json(first.path.string(), "fairsync")));
  json echoed = json::parse(slurp(first.file("effective_config.json")));
  echoed["out"] = second.path.string();
  run_experiment(parse_experiment_config(echoed.dump()));
  CHECK(slurp(first.file("candidates.csv")) == slurp(second.file("candidates.csv")));
  CHECK(slurp(first.file("mu_trace.csv")) == slurp(second.file("mu_trace.csv")));
}

TEST_CASE("infeasible m-profiles are reported as such") {
  TempDir dir;
  json config = json::parse(tiny_config_json(dir.path.string(), "fairsync"));
  config["m_uniform"] = 1000;  // sum m = 3000 > TK = 150
  CHECK_THROWS_AS(run_experiment(parse_experiment_config(config.dump())),
                  InfeasibleError);
}

TEST_CASE("m-profile files assign per-group minimums") {
  TempDir dir;
  {
    std::ofstream out(dir.file("m.csv"));
    out << "group_id,m\n0,3\n2,7\n";
  }
  json config = json::parse(tiny_config_json(dir.path.string(), "fairsync"));
  config.erase("m_uniform");
  config["m_file"] = dir.file("m.csv");
  const auto parsed = parse_experiment_config(config.dump());
  const auto spec = build_fairness_spec(parsed, 3, 30);
  CHECK(spec.min_exposure == std::vector<std::int64_t>{3, 0, 7});
}

TEST_CASE("sweep runs each value and aggregates a csv") {
  TempDir dir;
  const auto config = parse_experiment_config(tiny_config_json(dir.path.string(), "fairsync"));
  SweepSpec spec;
  spec.param = "B";
  spec.values = {1, 4};
  const auto rows = run_sweep(config, spec);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].ok);
  CHECK(rows[1].ok);
  CHECK(fs::exists(dir.path / "sweep.csv"));
  CHECK(fs::exists(dir.path / "B_1" / "summary.json"));
  CHECK(fs::exists(dir.path / "B_4" / "summary.json"));
  const std::string csv = slurp(dir.file("sweep.csv"));
  CHECK(csv.find("param,value,recall,ndcg,hr,esp,p50_us,p99_us,status") == 0);
}

TEST_CASE("sweep records per-run failures and continues") {
  TempDir dir;
  const auto config = parse_experiment_config(tiny_config_json(dir.path.string(), "fairsync"));
  SweepSpec spec;
  spec.param = "m";
  spec.values = {4, 1000, 2};  // the middle value is infeasible
  const auto rows = run_sweep(config, spec);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].ok);
  CHECK_FALSE(rows[1].ok);
  CHECK(rows[1].error.find("infeasible") != std::string::npos);
  CHECK(rows[2].ok);
}

TEST_CASE("empty sweeps are a no-op") {
  TempDir dir;
  const auto config = parse_experiment_config(tiny_config_json(dir.path.string(), "fairsync"));
  SweepSpec spec;
  spec.param = "B";
  const auto rows = run_sweep(config, spec);
  CHECK(rows.empty());
  CHECK(fs::exists(dir.path / "sweep.csv"));
}

TEST_CASE("gen writes a loadable corpus directory") {
  TempDir dir;
  json config = json::parse(tiny_config_json((dir.path / "corpus").string(), "plain"));
  generate_corpus(parse_experiment_config(config.dump()));
  const auto bundle = load_corpus_dir((dir.path / "corpus").string());
  CHECK(bundle.catalog.items.size() == 24);
  CHECK(bundle.stream.size() == 30);
}

TEST_CASE("runs work end-to-end from raw interaction files") {
  TempDir dir;
  std::vector<Embedding> items, users;
  Rng rng(4);
  for (int i = 0; i < 12; ++i) {
    Embedding e(4);
    for (auto& v : e) v = quantize_f32(rng.uniform(-1, 1));
    items.push_back(e);
  }
  for (int u = 0; u < 6; ++u) {
    Embedding e(4);
    for (auto& v : e) v = quantize_f32(rng.uniform(-1, 1));
    users.push_back(e);
  }
  write_fseb(dir.file("items.fseb"), items);
  write_fseb(dir.file("users.fseb"), users);
  {
    std::ofstream out(dir.file("groups.csv"));
    out << "item_id,group_label\n";
    for (int i = 0; i < 12; ++i) out << i << ",g" << (i % 3) << "\n";
  }
  {
    std::ofstream out(dir.file("inter.csv"));
    out << "user_id,item_id,timestamp\n";
    for (int t = 0; t < 40; ++t)
      out << (t % 6) << "," << (t % 12) << "," << (100 + t) << "\n";
  }
  json config = {
      {"algorithm", "fairsync"},
      {"K", 4},
      {"B", 1},
      {"m_uniform", 1},
      {"corpus",
       {{"files",
         {{"items", dir.file("items.fseb")},
          {"users", dir.file("users.fseb")},
          {"groups", dir.file("groups.csv")},
          {"interactions", dir.file("inter.csv")}}}}},
      {"out", (dir.path / "run").string()},
  };
  const auto outcome = run_experiment(parse_experiment_config(config.dump()));
  CHECK(outcome.processed == 4);  // 40 interactions -> 32 train / 4 val / 4 test
  CHECK(fs::exists(dir.path / "run" / "summary.json"));
  const std::string mapping = slurp((dir.path / "run" / "group_map.csv").string());
  CHECK(mapping.find("g0,0") != std::string::npos);
  CHECK(mapping.find("g2,2") != std::string::npos);
}

TEST_CASE("verify passes with a small budget") {
  VerifyConfig config;
  config.duality_instances = 8;
  config.weak_duality_samples = 50;
  config.fd_pairs = 30;
  config.knapsack_instances = 100;
  config.concavity_checks = 500;
  const auto report = run_verify(config);
  INFO(report.text);
  CHECK(report.passed);
  CHECK(report.text.find("PASS duality") != std::string::npos);
  CHECK(report.text.find("PASS subgradient") != std::string::npos);
  CHECK(report.text.find("PASS knapsack") != std::string::npos);
  CHECK(report.text.find("PASS concavity") != std::string::npos);
}

TEST_CASE("verify with zero budget is a vacuous pass with a warning") {
  VerifyConfig config;
  config.duality_instances = 0;
  config.weak_duality_samples = 0;
  config.fd_pairs = 0;
  config.knapsack_instances = 0;
  config.concavity_checks = 0;
  const auto report = run_verify(config);
  CHECK(report.passed);
  CHECK(report.text.find("WARN") != std::string::npos);
}

TEST_CASE("the sign-flip hook makes verify fail with a coordinate report") {
  VerifyConfig config;
  config.duality_instances = 0;
  config.fd_pairs = 30;
  config.knapsack_instances = 0;
  config.concavity_checks = 0;
  config.inject_sign_flip = true;
  const auto report = run_verify(config);
  CHECK_FALSE(report.passed);
  CHECK(report.text.find("FAIL subgradient") != std::string::npos);
  CHECK(report.text.find("coordinate") != std::string::npos);
}
