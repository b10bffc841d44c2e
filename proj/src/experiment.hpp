#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "coordinator.hpp"
#include "core.hpp"
#include "datagen.hpp"
#include "metrics.hpp"

namespace fairsync {

// One corpus source must be set.
struct CorpusSource {
  std::optional<SynthConfig> synthetic;
  std::optional<std::uint64_t> extreme_seed;
  std::optional<std::string> dir;
  struct Files {
    std::string items, users, groups, interactions;
    int min_group_size = 0;
  };
  std::optional<Files> files;
};

struct ExperimentConfig {
  RunConfig run;
  Partitioning partitioning = Partitioning::RoundRobin;
  bool esp_at_least = false;
  std::int64_t m_uniform = 0;
  std::optional<std::string> m_file;
  CorpusSource corpus;
  std::string out;

  void validate() const;
};

ExperimentConfig parse_experiment_config(const std::string& json_text);

// Fully resolved config (defaults filled in); re-running from this echo
// must reproduce the deterministic outputs byte for byte.
std::string effective_config_json(const ExperimentConfig& config);

CorpusBundle resolve_corpus(const CorpusSource& source);

FairnessSpec build_fairness_spec(const ExperimentConfig& config, int group_count,
                                 std::int64_t stream_length);

struct RunOutcome {
  MetricsResult metrics;
  double p50_us = 0.0;
  double p99_us = 0.0;
  std::int64_t processed = 0;
  std::int64_t fallback_fills = 0;
  bool incomplete = false;
  std::vector<std::int64_t> final_exposures;
  DualVector final_mu;
};

// Runs one experiment and writes effective_config.json, metrics.csv,
// summary.json, candidates.csv and mu_trace.csv into config.out.
RunOutcome run_experiment(const ExperimentConfig& config);

// In-memory variant for tests and sweeps over pre-resolved corpora.
RunOutcome run_experiment_on(const ExperimentConfig& config, const CorpusBundle& bundle,
                             RunReport* report_out = nullptr);

struct SweepSpec {
  std::string param;  // "B", "m", "K" or "eta"
  std::vector<double> values;
  bool parallel = false;  // runs are independent; opt-in concurrency
};

SweepSpec parse_sweep_spec(const std::string& json_text);

struct SweepRow {
  double value = 0.0;
  bool ok = false;
  std::string error;
  RunOutcome outcome;
};

std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const SweepSpec& sweep);

void generate_corpus(const ExperimentConfig& config);

struct VerifyConfig {
  int duality_instances = 100;
  int weak_duality_samples = 1000;
  int fd_pairs = 500;
  int knapsack_instances = 1000;
  int concavity_checks = 10000;
  std::uint64_t seed = 20240101;
  bool inject_sign_flip = false;  // negative-control hook
};

VerifyConfig parse_verify_config(const std::string& json_text);

struct VerifyReport {
  bool passed = false;
  std::string text;  // one line per suite plus failure details
};

VerifyReport run_verify(const VerifyConfig& config);

}  // namespace fairsync
