#include "experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include <json.hpp>

#include "oracle.hpp"
#include "shard_index.hpp"

namespace fairsync {

using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const char* scaling_name(GradientScaling s) {
  return s == GradientScaling::PerStep ? "per_step" : "full_horizon";
}
GradientScaling parse_scaling(const std::string& s) {
  if (s == "per_step") return GradientScaling::PerStep;
  if (s == "full_horizon") return GradientScaling::FullHorizon;
  throw std::invalid_argument("unknown gradient_scaling: " + s);
}

const char* reduce_name(BufferReduce r) {
  return r == BufferReduce::Mean ? "mean" : "sum";
}
BufferReduce parse_reduce(const std::string& s) {
  if (s == "mean") return BufferReduce::Mean;
  if (s == "sum") return BufferReduce::Sum;
  throw std::invalid_argument("unknown buffer_reduce: " + s);
}

const char* optimizer_name(OptimizerKind o) {
  return o == OptimizerKind::Adam ? "adam" : "sgd";
}
OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "sgd") return OptimizerKind::Sgd;
  throw std::invalid_argument("unknown optimizer: " + s);
}

const char* partitioning_name(Partitioning p) {
  return p == Partitioning::RoundRobin ? "round_robin" : "hash";
}
Partitioning parse_partitioning(const std::string& s) {
  if (s == "round_robin") return Partitioning::RoundRobin;
  if (s == "hash") return Partitioning::HashId;
  throw std::invalid_argument("unknown partitioning: " + s);
}

void check_keys(const json& obj, const std::vector<std::string>& known,
                const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw std::invalid_argument("unknown key '" + key + "' in " + where);
  }
}

json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(what + ": " + e.what());
  }
}

SynthConfig parse_synth(const json& obj) {
  check_keys(obj,
             {"group_count", "items_per_group", "dim", "center_spread", "noise",
              "user_count", "group_affinity", "relevant_per_user", "seed"},
             "corpus.synthetic");
  SynthConfig cfg;
  cfg.group_count = obj.value("group_count", cfg.group_count);
  cfg.items_per_group = obj.value("items_per_group", cfg.items_per_group);
  cfg.dim = obj.value("dim", cfg.dim);
  cfg.center_spread = obj.value("center_spread", cfg.center_spread);
  cfg.noise = obj.value("noise", cfg.noise);
  cfg.user_count = obj.value("user_count", cfg.user_count);
  cfg.relevant_per_user = obj.value("relevant_per_user", cfg.relevant_per_user);
  cfg.seed = obj.value("seed", cfg.seed);
  if (obj.contains("group_affinity"))
    cfg.group_affinity = obj["group_affinity"].get<std::vector<double>>();
  cfg.validate();
  return cfg;
}

json synth_to_json(const SynthConfig& cfg) {
  json obj;
  obj["group_count"] = cfg.group_count;
  obj["items_per_group"] = cfg.items_per_group;
  obj["dim"] = cfg.dim;
  obj["center_spread"] = cfg.center_spread;
  obj["noise"] = cfg.noise;
  obj["user_count"] = cfg.user_count;
  obj["relevant_per_user"] = cfg.relevant_per_user;
  obj["seed"] = cfg.seed;
  if (!cfg.group_affinity.empty()) obj["group_affinity"] = cfg.group_affinity;
  return obj;
}

}  // namespace

void ExperimentConfig::validate() const {
  run.validate();
  int sources = 0;
  if (corpus.synthetic) ++sources;
  if (corpus.extreme_seed) ++sources;
  if (corpus.dir) ++sources;
  if (corpus.files) ++sources;
  require(sources == 1, "config: exactly one corpus source must be set");
  require(m_uniform >= 0, "config: m_uniform must be >= 0");
  require(!(m_uniform > 0 && m_file), "config: m_uniform and m_file are exclusive");
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  const json obj = parse_json_text(json_text, "config");
  check_keys(obj,
             {"algorithm", "K", "T", "B", "eta", "M", "lambda", "seed",
              "gradient_scaling", "buffer_reduce", "optimizer", "partitioning",
              "esp_at_least", "m_uniform", "m_file", "corpus", "out"},
             "config");
  ExperimentConfig cfg;
  cfg.run.algorithm = parse_algorithm(obj.value("algorithm", "fairsync"));
  cfg.run.k = obj.value("K", cfg.run.k);
  cfg.run.horizon = obj.value("T", cfg.run.horizon);
  cfg.run.batch_size = obj.value("B", cfg.run.batch_size);
  cfg.run.eta = obj.value("eta", cfg.run.eta);
  cfg.run.shard_count = obj.value("M", cfg.run.shard_count);
  cfg.run.lambda = obj.value("lambda", cfg.run.lambda);
  cfg.run.seed = obj.value("seed", cfg.run.seed);
  cfg.run.scaling = parse_scaling(obj.value("gradient_scaling", "per_step"));
  cfg.run.reduce = parse_reduce(obj.value("buffer_reduce", "mean"));
  cfg.run.optimizer = parse_optimizer(obj.value("optimizer", "adam"));
  cfg.partitioning = parse_partitioning(obj.value("partitioning", "round_robin"));
  cfg.esp_at_least = obj.value("esp_at_least", false);
  cfg.m_uniform = obj.value("m_uniform", std::int64_t{0});
  if (obj.contains("m_file")) cfg.m_file = obj["m_file"].get<std::string>();
  cfg.out = obj.value("out", "");

  if (obj.contains("corpus")) {
    const json& c = obj["corpus"];
    check_keys(c, {"synthetic", "extreme", "dir", "files"}, "corpus");
    if (c.contains("synthetic")) {
      cfg.corpus.synthetic = parse_synth(c["synthetic"]);
      // A generator without its own seed inherits the run seed.
      if (!c["synthetic"].contains("seed")) cfg.corpus.synthetic->seed = cfg.run.seed;
    }
    if (c.contains("extreme")) {
      check_keys(c["extreme"], {"seed"}, "corpus.extreme");
      cfg.corpus.extreme_seed = c["extreme"].value("seed", std::uint64_t{20240229});
    }
    if (c.contains("dir")) cfg.corpus.dir = c["dir"].get<std::string>();
    if (c.contains("files")) {
      const json& f = c["files"];
      check_keys(f, {"items", "users", "groups", "interactions", "min_group_size"},
                 "corpus.files");
      CorpusSource::Files files;
      files.items = f.at("items").get<std::string>();
      files.users = f.at("users").get<std::string>();
      files.groups = f.at("groups").get<std::string>();
      files.interactions = f.at("interactions").get<std::string>();
      files.min_group_size = f.value("min_group_size", 0);
      cfg.corpus.files = files;
    }
  }
  cfg.validate();
  return cfg;
}

std::string effective_config_json(const ExperimentConfig& config) {
  json obj;
  obj["algorithm"] = algorithm_name(config.run.algorithm);
  obj["K"] = config.run.k;
  obj["T"] = config.run.horizon;
  obj["B"] = config.run.batch_size;
  obj["eta"] = config.run.eta;
  obj["M"] = config.run.shard_count;
  obj["lambda"] = config.run.lambda;
  obj["seed"] = config.run.seed;
  obj["gradient_scaling"] = scaling_name(config.run.scaling);
  obj["buffer_reduce"] = reduce_name(config.run.reduce);
  obj["optimizer"] = optimizer_name(config.run.optimizer);
  obj["partitioning"] = partitioning_name(config.partitioning);
  obj["esp_at_least"] = config.esp_at_least;
  obj["m_uniform"] = config.m_uniform;
  if (config.m_file) obj["m_file"] = *config.m_file;
  json corpus;
  if (config.corpus.synthetic) corpus["synthetic"] = synth_to_json(*config.corpus.synthetic);
  if (config.corpus.extreme_seed) corpus["extreme"] = {{"seed", *config.corpus.extreme_seed}};
  if (config.corpus.dir) corpus["dir"] = *config.corpus.dir;
  if (config.corpus.files) {
    corpus["files"] = {{"items", config.corpus.files->items},
                       {"users", config.corpus.files->users},
                       {"groups", config.corpus.files->groups},
                       {"interactions", config.corpus.files->interactions},
                       {"min_group_size", config.corpus.files->min_group_size}};
  }
  obj["corpus"] = corpus;
  obj["out"] = config.out;
  return obj.dump(2) + "\n";
}

CorpusBundle resolve_corpus(const CorpusSource& source) {
  if (source.synthetic) return synth_corpus(*source.synthetic);
  if (source.extreme_seed) return extreme_case_corpus(*source.extreme_seed);
  if (source.dir) return load_corpus_dir(*source.dir);
  if (source.files) {
    LoadOptions options;
    options.min_group_size = source.files->min_group_size;
    return load_corpus(source.files->items, source.files->users, source.files->groups,
                       source.files->interactions, options);
  }
  throw std::invalid_argument("config: no corpus source");
}

namespace {

std::vector<std::int64_t> read_m_profile(const std::string& path, int group_count) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open");
  std::vector<std::int64_t> m(static_cast<std::size_t>(group_count), 0);
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = line;
    t.erase(0, t.find_first_not_of(" \t\r\n"));
    if (t.empty()) continue;
    if (lineno == 1 && t.rfind("group_id", 0) == 0) continue;
    std::stringstream ss(t);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b))
      throw IoError(path + ":" + std::to_string(lineno) + ": expected group_id,m");
    std::int64_t g = 0, v = 0;
    try {
      g = std::stoll(a);
      v = std::stoll(b);
    } catch (const std::exception&) {
      throw IoError(path + ":" + std::to_string(lineno) + ": expected integers");
    }
    if (g < 0 || g >= group_count)
      throw IoError(path + ":" + std::to_string(lineno) + ": group id out of range");
    if (v < 0) throw IoError(path + ":" + std::to_string(lineno) + ": negative m");
    m[static_cast<std::size_t>(g)] = v;
  }
  return m;
}

double percentile_us(std::vector<std::int64_t> nanos, double pct) {
  if (nanos.empty()) return 0.0;
  std::sort(nanos.begin(), nanos.end());
  const double pos = pct / 100.0 * static_cast<double>(nanos.size() - 1);
  const std::size_t idx = static_cast<std::size_t>(std::llround(pos));
  return static_cast<double>(nanos[std::min(idx, nanos.size() - 1)]) / 1000.0;
}

std::string m_profile_label(const ExperimentConfig& config) {
  if (config.m_file) return "file:" + *config.m_file;
  return "uniform:" + std::to_string(config.m_uniform);
}

void write_artifacts(const ExperimentConfig& config, const CorpusBundle& bundle,
                     const RunReport& report, const RunOutcome& outcome) {
  namespace fs = std::filesystem;
  require(!config.out.empty(), "config: out directory required");
  fs::create_directories(config.out);

  {
    std::ofstream out(config.out + "/effective_config.json");
    out << effective_config_json(config);
  }
  {
    std::ofstream out(config.out + "/metrics.csv");
    out << "algorithm,K,m_profile,recall,ndcg,hr,esp\n";
    out << algorithm_name(config.run.algorithm) << "," << config.run.k << ","
        << m_profile_label(config) << "," << fmt_double(outcome.metrics.recall) << ","
        << fmt_double(outcome.metrics.ndcg) << "," << fmt_double(outcome.metrics.hr)
        << "," << fmt_double(outcome.metrics.esp) << "\n";
  }
  {
    std::ofstream out(config.out + "/candidates.csv");
    out << "user_id,rank,item_id,group_id,score\n";
    for (const CandidateList& list : report.candidates) {
      int rank = 1;
      for (const ScoredItem& e : list.entries)
        out << list.user_id << "," << rank++ << "," << e.item_id << "," << e.group_id
            << "," << fmt_double(e.score) << "\n";
    }
  }
  {
    std::ofstream out(config.out + "/mu_trace.csv");
    out << "step";
    const std::size_t groups = report.ledger.counts.size();
    for (std::size_t g = 0; g < groups; ++g) out << ",g" << g;
    out << "\n";
    for (const MuSnapshot& snap : report.mu_trace) {
      out << snap.step;
      for (double v : snap.mu) out << "," << fmt_double(v);
      out << "\n";
    }
  }
  if (!bundle.group_labels.empty()) {
    std::ofstream out(config.out + "/group_map.csv");
    out << "group_label,group_id\n";
    for (std::size_t g = 0; g < bundle.group_labels.size(); ++g)
      out << bundle.group_labels[g] << "," << g << "\n";
  }
  {
    json summary;
    summary["algorithm"] = algorithm_name(config.run.algorithm);
    summary["K"] = config.run.k;
    summary["B"] = config.run.batch_size;
    summary["eta"] = config.run.eta;
    summary["M"] = config.run.shard_count;
    summary["seed"] = config.run.seed;
    summary["m_profile"] = m_profile_label(config);
    summary["metrics"] = {{"recall", outcome.metrics.recall},
                          {"ndcg", outcome.metrics.ndcg},
                          {"hr", outcome.metrics.hr},
                          {"esp", outcome.metrics.esp}};
    summary["evaluated_users"] = outcome.metrics.evaluated_users;
    summary["skipped_users"] = outcome.metrics.skipped_users;
    summary["processed"] = outcome.processed;
    summary["incomplete"] = outcome.incomplete;
    summary["fallback_fills"] = outcome.fallback_fills;
    summary["final_exposures"] = outcome.final_exposures;
    summary["final_mu"] = outcome.final_mu;
    summary["mu_snapshots"] = report.mu_trace.size();
    // Wall-clock block: excluded from the byte-identical reproducibility set.
    summary["latency"] = {{"p50_us", outcome.p50_us}, {"p99_us", outcome.p99_us}};
    std::ofstream out(config.out + "/summary.json");
    out << summary.dump(2) << "\n";
  }
}

}  // namespace

FairnessSpec build_fairness_spec(const ExperimentConfig& config, int group_count,
                                 std::int64_t stream_length) {
  FairnessSpec spec;
  spec.k = config.run.k;
  spec.horizon = config.run.horizon > 0 ? config.run.horizon : stream_length;
  if (config.m_file) {
    spec.min_exposure = read_m_profile(*config.m_file, group_count);
  } else {
    spec.min_exposure.assign(static_cast<std::size_t>(group_count), config.m_uniform);
  }
  return spec;
}

RunOutcome run_experiment_on(const ExperimentConfig& config, const CorpusBundle& bundle,
                             RunReport* report_out) {
  config.run.validate();
  Catalog catalog = bundle.catalog;
  reshard(catalog, config.run.shard_count, config.partitioning);
  const std::vector<ShardIndex> shards = build_all_indexes(catalog);

  FairnessSpec spec = build_fairness_spec(config, catalog.group_count,
                                          static_cast<std::int64_t>(bundle.stream.size()));
  RunConfig run = config.run;
  run.horizon = spec.horizon;

  Coordinator coordinator(catalog, shards, spec, run);
  RunReport report = coordinator.run(bundle.stream);

  RunOutcome outcome;
  outcome.metrics = evaluate(report, bundle.relevance, spec, config.esp_at_least);
  outcome.p50_us = percentile_us(report.step_nanos, 50.0);
  outcome.p99_us = percentile_us(report.step_nanos, 99.0);
  outcome.processed = report.processed;
  outcome.fallback_fills = report.fallback_fills;
  outcome.incomplete = report.incomplete;
  outcome.final_exposures = report.ledger.counts;
  outcome.final_mu = report.mu_trace.empty() ? DualVector{} : report.mu_trace.back().mu;
  if (report_out) *report_out = std::move(report);
  return outcome;
}

RunOutcome run_experiment(const ExperimentConfig& config) {
  config.validate();
  const CorpusBundle bundle = resolve_corpus(config.corpus);
  RunReport report;
  RunOutcome outcome = run_experiment_on(config, bundle, &report);
  write_artifacts(config, bundle, report, outcome);
  return outcome;
}

SweepSpec parse_sweep_spec(const std::string& json_text) {
  const json obj = parse_json_text(json_text, "sweep");
  check_keys(obj, {"param", "values", "parallel"}, "sweep");
  SweepSpec spec;
  spec.param = obj.value("param", "");
  if (obj.contains("values")) spec.values = obj["values"].get<std::vector<double>>();
  spec.parallel = obj.value("parallel", false);
  require(spec.param == "B" || spec.param == "m" || spec.param == "K" ||
              spec.param == "eta",
          "sweep: param must be one of B, m, K, eta");
  return spec;
}

namespace {

std::string sweep_value_label(const std::string& param, double value) {
  if (param == "eta") return fmt_double(value);
  return std::to_string(static_cast<std::int64_t>(value));
}

}  // namespace

std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const SweepSpec& sweep) {
  namespace fs = std::filesystem;
  require(!config.out.empty(), "sweep: out directory required");
  fs::create_directories(config.out);

  auto run_one = [&](double value) {
    ExperimentConfig run_config = config;
    if (sweep.param == "B") run_config.run.batch_size = static_cast<int>(value);
    else if (sweep.param == "K") run_config.run.k = static_cast<int>(value);
    else if (sweep.param == "eta") run_config.run.eta = value;
    else {
      run_config.m_uniform = static_cast<std::int64_t>(value);
      run_config.m_file.reset();
    }
    run_config.out =
        config.out + "/" + sweep.param + "_" + sweep_value_label(sweep.param, value);
    SweepRow row;
    row.value = value;
    try {
      row.outcome = run_experiment(run_config);
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    return row;
  };

  std::vector<SweepRow> rows;
  if (sweep.parallel) {
    std::vector<std::future<SweepRow>> futures;
    futures.reserve(sweep.values.size());
    for (double value : sweep.values)
      futures.push_back(std::async(std::launch::async, run_one, value));
    for (auto& f : futures) rows.push_back(f.get());
  } else {
    for (double value : sweep.values) rows.push_back(run_one(value));
  }

  std::ofstream out(config.out + "/sweep.csv");
  out << "param,value,recall,ndcg,hr,esp,p50_us,p99_us,status\n";
  for (const SweepRow& row : rows) {
    out << sweep.param << "," << sweep_value_label(sweep.param, row.value) << ",";
    if (row.ok) {
      out << fmt_double(row.outcome.metrics.recall) << ","
          << fmt_double(row.outcome.metrics.ndcg) << ","
          << fmt_double(row.outcome.metrics.hr) << ","
          << fmt_double(row.outcome.metrics.esp) << ","
          << fmt_double(row.outcome.p50_us) << "," << fmt_double(row.outcome.p99_us)
          << ",ok\n";
    } else {
      std::string error = row.error;
      std::replace(error.begin(), error.end(), ',', ';');
      out << ",,,,,,error: " << error << "\n";
    }
  }
  return rows;
}

void generate_corpus(const ExperimentConfig& config) {
  require(!config.out.empty(), "gen: out directory required");
  const CorpusBundle bundle = resolve_corpus(config.corpus);
  write_corpus(config.out, bundle);
}

VerifyConfig parse_verify_config(const std::string& json_text) {
  const json obj = parse_json_text(json_text, "verify");
  check_keys(obj,
             {"duality_instances", "weak_duality_samples", "fd_pairs",
              "knapsack_instances", "concavity_checks", "seed", "inject_sign_flip"},
             "verify");
  VerifyConfig cfg;
  cfg.duality_instances = obj.value("duality_instances", cfg.duality_instances);
  cfg.weak_duality_samples = obj.value("weak_duality_samples", cfg.weak_duality_samples);
  cfg.fd_pairs = obj.value("fd_pairs", cfg.fd_pairs);
  cfg.knapsack_instances = obj.value("knapsack_instances", cfg.knapsack_instances);
  cfg.concavity_checks = obj.value("concavity_checks", cfg.concavity_checks);
  cfg.seed = obj.value("seed", cfg.seed);
  cfg.inject_sign_flip = obj.value("inject_sign_flip", cfg.inject_sign_flip);
  return cfg;
}

namespace {

json instance_to_json(const oracle::TinyInstance& inst) {
  json obj;
  obj["scores"] = inst.scores;
  obj["groups"] = inst.groups;
  obj["m"] = inst.min_exposure;
  obj["k"] = inst.k;
  return obj;
}

}  // namespace

VerifyReport run_verify(const VerifyConfig& config) {
  std::ostringstream out;
  bool all_ok = true;
  const double kDualityTol = 1e-3;
  const double kFdTol = 1e-5;
  const double kFdStep = 1e-5;

  if (config.duality_instances <= 0 && config.fd_pairs <= 0 &&
      config.knapsack_instances <= 0 && config.concavity_checks <= 0)
    out << "WARN zero budget: all suites skipped, vacuous pass\n";

  if (config.duality_instances > 0) {
    Rng rng(config.seed, 21);
    Rng mu_rng(config.seed, 22);
    double worst_gap = 0.0;
    double worst_weak = 0.0;
    bool ok = true;
    for (int i = 0; i < config.duality_instances && ok; ++i) {
      const auto inst = oracle::random_feasible_instance(rng);
      const auto primal = oracle::primal_optimum(inst);
      if (!primal.feasible) {
        ok = false;
        out << "FAIL duality: generated instance reported infeasible\n"
            << instance_to_json(inst).dump() << "\n";
        break;
      }
      const auto dual = oracle::dual_optimum(inst);
      const double gap = std::abs(primal.value - dual.value);
      worst_gap = std::max(worst_gap, gap);
      if (gap > kDualityTol) {
        ok = false;
        out << "FAIL duality: |primal - dual| = " << fmt_double(gap)
            << " exceeds " << fmt_double(kDualityTol) << " on instance "
            << instance_to_json(inst).dump() << "\n";
        break;
      }
      for (int j = 0; j < config.weak_duality_samples; ++j) {
        DualVector mu(static_cast<std::size_t>(inst.group_count()));
        for (double& v : mu) v = mu_rng.uniform(-2.0, 2.0);
        const double w = oracle::dual_objective(mu, inst);
        worst_weak = std::min(worst_weak, w - primal.value);
        if (w < primal.value - 1e-9) {
          ok = false;
          out << "FAIL duality: weak duality violated, W_dual(mu) - primal = "
              << fmt_double(w - primal.value) << " on instance "
              << instance_to_json(inst).dump() << "\n";
          break;
        }
      }
    }
    if (ok)
      out << "PASS duality: " << config.duality_instances
          << " instances, worst |primal - dual| = " << fmt_double(worst_gap)
          << ", weak duality margin >= " << fmt_double(worst_weak) << "\n";
    all_ok = all_ok && ok;
  }

  if (config.fd_pairs > 0) {
    Rng rng(config.seed, 23);
    Rng mu_rng(config.seed, 24);
    int checked = 0, rejected = 0;
    double worst = 0.0;
    bool ok = true;
    const int max_attempts = config.fd_pairs * 50;
    int attempts = 0;
    while (checked < config.fd_pairs && attempts < max_attempts && ok) {
      ++attempts;
      const auto inst = oracle::random_feasible_instance(rng);
      DualVector mu(static_cast<std::size_t>(inst.group_count()));
      for (double& v : mu) v = mu_rng.uniform(-1.0, 1.0);
      const auto result =
          oracle::fd_subgradient_check(mu, inst, kFdStep, config.inject_sign_flip);
      if (result.degenerate) {
        ++rejected;
        continue;
      }
      ++checked;
      worst = std::max(worst, result.max_rel_error);
      if (result.max_rel_error > kFdTol) {
        ok = false;
        out << "FAIL subgradient: max relative error " << fmt_double(result.max_rel_error)
            << " at coordinate " << result.worst_coordinate << " (analytic "
            << fmt_double(result.analytic[static_cast<std::size_t>(result.worst_coordinate)])
            << ", finite difference "
            << fmt_double(
                   result.finite_difference[static_cast<std::size_t>(result.worst_coordinate)])
            << ") on instance " << instance_to_json(inst).dump() << " mu " << json(mu).dump()
            << "\n";
      }
    }
    if (ok && checked < config.fd_pairs) {
      ok = false;
      out << "FAIL subgradient: only " << checked
          << " non-degenerate pairs found within the attempt budget\n";
    }
    if (ok)
      out << "PASS subgradient: " << checked << " pairs (" << rejected
          << " degenerate rejected), max relative error = " << fmt_double(worst) << "\n";
    all_ok = all_ok && ok;
  }

  if (config.knapsack_instances > 0) {
    Rng rng(config.seed, 25);
    bool ok = true;
    for (int i = 0; i < config.knapsack_instances && ok; ++i) {
      const int groups = static_cast<int>(rng.range(1, 5));
      std::vector<std::int64_t> m(static_cast<std::size_t>(groups));
      std::int64_t m_sum = 0;
      for (auto& v : m) {
        v = rng.range(0, 3);
        m_sum += v;
      }
      if (m_sum > 12) {
        m.assign(static_cast<std::size_t>(groups), 0);
        m_sum = 0;
      }
      const std::int64_t total = rng.range(m_sum, 12);
      DualVector mu(static_cast<std::size_t>(groups));
      for (double& v : mu) v = static_cast<double>(rng.range(-10, 10));
      const double closed = oracle::knapsack_closed_form(mu, m, total);
      const double brute = oracle::knapsack_enumerate(mu, m, total);
      if (closed != brute) {
        ok = false;
        out << "FAIL knapsack: closed form " << fmt_double(closed) << " != enumeration "
            << fmt_double(brute) << " for mu " << json(mu).dump() << " m " << json(m).dump()
            << " total " << total << "\n";
      }
    }
    if (ok)
      out << "PASS knapsack: " << config.knapsack_instances
          << " integer instances, closed form exact\n";
    all_ok = all_ok && ok;
  }

  if (config.concavity_checks > 0) {
    Rng rng(config.seed, 26);
    bool ok = true;
    for (int i = 0; i < config.concavity_checks && ok; ++i) {
      const int n = static_cast<int>(rng.range(2, 32));
      const int k = static_cast<int>(rng.range(1, n));
      std::vector<double> x(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n));
      for (double& v : x) v = rng.uniform(-1.0, 1.0);
      for (double& v : y) v = rng.uniform(-1.0, 1.0);
      double lambda = rng.uniform();
      const auto pick = rng.bounded(10);
      if (pick == 0) lambda = 0.0;
      if (pick == 1) lambda = 1.0;
      if (!oracle::topk_concavity_check(x, y, lambda, k)) {
        ok = false;
        out << "FAIL concavity: violated for k=" << k << " lambda=" << fmt_double(lambda)
            << " x=" << json(x).dump() << " y=" << json(y).dump() << "\n";
      }
    }
    if (ok)
      out << "PASS concavity: " << config.concavity_checks << " checks at 1e-12\n";
    all_ok = all_ok && ok;
  }

  VerifyReport report;
  report.passed = all_ok;
  report.text = out.str();
  return report;
}

}  // namespace fairsync
