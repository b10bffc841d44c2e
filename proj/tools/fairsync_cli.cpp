// Experiment runner over the FairSync C API. Subcommands: gen, run, sweep,
// verify. Flags override the corresponding config fields.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairsync/fairsync.h"

namespace {

using nlohmann::json;

struct Overrides {
  std::optional<int> k;
  std::optional<std::int64_t> t;
  std::optional<int> b;
  std::optional<double> eta;
  std::optional<int> m_shards;
  std::optional<double> lambda;
  std::optional<std::string> algorithm;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> m_uniform;
  std::optional<std::string> m_file;
  std::string out;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open config file " << path << "\n";
    std::exit(2);
  }
  try {
    json obj;
    in >> obj;
    return obj;
  } catch (const json::exception& e) {
    std::cerr << "error: " << path << ": " << e.what() << "\n";
    std::exit(2);
  }
}

std::string apply_overrides(json config, const Overrides& o) {
  if (o.k) config["K"] = *o.k;
  if (o.t) config["T"] = *o.t;
  if (o.b) config["B"] = *o.b;
  if (o.eta) config["eta"] = *o.eta;
  if (o.m_shards) config["M"] = *o.m_shards;
  if (o.lambda) config["lambda"] = *o.lambda;
  if (o.algorithm) config["algorithm"] = *o.algorithm;
  if (o.seed) config["seed"] = *o.seed;
  if (o.m_uniform) {
    config["m_uniform"] = *o.m_uniform;
    config.erase("m_file");
  }
  if (o.m_file) {
    config["m_file"] = *o.m_file;
    config.erase("m_uniform");
  }
  if (!o.out.empty()) config["out"] = o.out;
  return config.dump();
}

int report_failure(const char* what) {
  std::cerr << "error: " << what << ": " << fs_last_error() << "\n";
  return 1;
}

void print_run_summary(const std::string& out_dir) {
  std::ifstream in(out_dir + "/summary.json");
  if (!in) return;
  try {
    json summary;
    in >> summary;
    const auto& m = summary["metrics"];
    std::cout << "algorithm=" << summary["algorithm"].get<std::string>()
              << " recall=" << m["recall"].get<double>()
              << " ndcg=" << m["ndcg"].get<double>() << " hr=" << m["hr"].get<double>()
              << " esp=" << m["esp"].get<double>()
              << " p50_us=" << summary["latency"]["p50_us"].get<double>() << "\n";
    std::cout << "artifacts in " << out_dir << "\n";
  } catch (const json::exception&) {
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FairSync: exposure-constrained distributed dense retrieval"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(fs_version()));

  std::string config_path;
  Overrides o;

  auto add_common = [&](CLI::App* cmd, bool with_out_required) {
    cmd->add_option("-c,--config", config_path, "experiment config (JSON)");
    cmd->add_option("--K", o.k, "candidate list size");
    cmd->add_option("--T", o.t, "horizon (0 = whole stream)");
    cmd->add_option("--B", o.b, "dual update batch size");
    cmd->add_option("--eta", o.eta, "learning rate");
    cmd->add_option("--M", o.m_shards, "shard count");
    cmd->add_option("--lambda", o.lambda, "baseline trade-off coefficient");
    cmd->add_option("--algorithm", o.algorithm,
                    "fairsync|regfair|ipw|kneighbor|uncalibrated|plain");
    cmd->add_option("--seed", o.seed, "RNG seed");
    auto* m_uniform = cmd->add_option("--m", o.m_uniform,
                                      "uniform minimum exposure per group");
    cmd->add_option("--m-file", o.m_file, "per-group m profile (CSV group_id,m)")
        ->excludes(m_uniform);
    auto* out = cmd->add_option("-o,--out", o.out, "output directory");
    if (with_out_required) out->required();
  };

  auto* cmd_gen = app.add_subcommand("gen", "generate a corpus and write it to disk");
  add_common(cmd_gen, true);

  auto* cmd_run = app.add_subcommand("run", "run one retrieval experiment");
  add_common(cmd_run, false);

  auto* cmd_sweep = app.add_subcommand("sweep", "run a parameter sweep");
  add_common(cmd_sweep, false);
  std::string sweep_param;
  std::vector<double> sweep_values;
  bool sweep_parallel = false;
  cmd_sweep->add_option("--param", sweep_param, "B|m|K|eta")->required();
  cmd_sweep->add_option("--values", sweep_values, "sweep values")->required();
  cmd_sweep->add_flag("--parallel", sweep_parallel, "run sweep points concurrently");

  auto* cmd_verify =
      app.add_subcommand("verify", "brute-force verification of the dual machinery");
  int duality_instances = 100;
  int weak_samples = 1000;
  int fd_pairs = 500;
  int knapsack_instances = 1000;
  int concavity_checks = 10000;
  std::uint64_t verify_seed = 20240101;
  bool inject_sign_flip = false;
  cmd_verify->add_option("--instances", duality_instances, "duality instances");
  cmd_verify->add_option("--mu-samples", weak_samples, "weak-duality mu samples");
  cmd_verify->add_option("--fd-pairs", fd_pairs, "finite-difference pairs");
  cmd_verify->add_option("--knapsack", knapsack_instances, "knapsack instances");
  cmd_verify->add_option("--concavity", concavity_checks, "concavity checks");
  cmd_verify->add_option("--seed", verify_seed, "RNG seed");
  cmd_verify
      ->add_flag("--inject-sign-flip", inject_sign_flip,
                 "negative control: check the uncorrected subgradient sign")
      ->group("");  // test hook, hidden from help

  CLI11_PARSE(app, argc, argv);

  if (cmd_gen->parsed()) {
    const std::string config = apply_overrides(load_config(config_path), o);
    if (fs_gen(config.c_str(), o.out.c_str()) != FS_OK) return report_failure("gen");
    std::cout << "corpus written to " << o.out << "\n";
    return 0;
  }

  if (cmd_run->parsed()) {
    json base = load_config(config_path);
    const std::string config = apply_overrides(base, o);
    const std::string out_dir =
        !o.out.empty() ? o.out : base.value("out", std::string{});
    if (out_dir.empty()) {
      std::cerr << "error: run needs --out or an 'out' config entry\n";
      return 2;
    }
    if (fs_run(config.c_str(), out_dir.c_str()) != FS_OK) return report_failure("run");
    print_run_summary(out_dir);
    return 0;
  }

  if (cmd_sweep->parsed()) {
    json base = load_config(config_path);
    const std::string config = apply_overrides(base, o);
    const std::string out_dir =
        !o.out.empty() ? o.out : base.value("out", std::string{});
    if (out_dir.empty()) {
      std::cerr << "error: sweep needs --out or an 'out' config entry\n";
      return 2;
    }
    json sweep = {{"param", sweep_param},
                  {"values", sweep_values},
                  {"parallel", sweep_parallel}};
    if (fs_sweep(config.c_str(), sweep.dump().c_str(), out_dir.c_str()) != FS_OK)
      return report_failure("sweep");
    std::cout << "sweep results in " << out_dir << "/sweep.csv\n";
    return 0;
  }

  if (cmd_verify->parsed()) {
    json config = {{"duality_instances", duality_instances},
                   {"weak_duality_samples", weak_samples},
                   {"fd_pairs", fd_pairs},
                   {"knapsack_instances", knapsack_instances},
                   {"concavity_checks", concavity_checks},
                   {"seed", verify_seed},
                   {"inject_sign_flip", inject_sign_flip}};
    char* report = nullptr;
    const fs_status status = fs_verify(config.dump().c_str(), &report);
    if (report) {
      std::cout << report;
      fs_string_free(report);
    }
    if (status == FS_OK) return 0;
    if (status == FS_ERR_VERIFY_FAILED) return 1;
    return report_failure("verify");
  }

  return 0;
}
