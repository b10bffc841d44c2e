#include "fairsync/fairsync.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include <json.hpp>

#include "coordinator.hpp"
#include "core.hpp"
#include "datagen.hpp"
#include "experiment.hpp"
#include "shard_index.hpp"

namespace {

thread_local std::string g_last_error;

fs_status fail(fs_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename Fn>
fs_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const fairsync::InfeasibleError& e) {
    return fail(FS_ERR_INFEASIBLE, e.what());
  } catch (const fairsync::IoError& e) {
    return fail(FS_ERR_IO, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(FS_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(FS_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(FS_ERR_INTERNAL, "unknown error");
  }
}

fs_status require_arg(bool ok, const char* message) {
  return ok ? FS_OK : fail(FS_ERR_INVALID_ARGUMENT, message);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

struct fs_corpus {
  std::shared_ptr<const fairsync::CorpusBundle> bundle;
};

struct fs_engine {
  std::shared_ptr<const fairsync::CorpusBundle> bundle;
  fairsync::Catalog catalog;
  std::vector<fairsync::ShardIndex> shards;
  std::unique_ptr<fairsync::Coordinator> coordinator;
  std::int64_t cursor = 0;
  std::int64_t horizon = 0;
};

extern "C" {

const char* fs_version(void) { return "1.0.0"; }

const char* fs_last_error(void) { return g_last_error.c_str(); }

void fs_string_free(char* s) { std::free(s); }

fs_status fs_corpus_synth(const char* synth_config_json, fs_corpus** out) {
  if (auto s = require_arg(synth_config_json && out, "null argument")) return s;
  return guarded([&] {
    fairsync::ExperimentConfig probe;
    const std::string text = std::string("{\"corpus\":{\"synthetic\":") +
                             synth_config_json + "}}";
    probe = fairsync::parse_experiment_config(text);
    auto bundle = std::make_shared<fairsync::CorpusBundle>(
        fairsync::synth_corpus(*probe.corpus.synthetic));
    *out = new fs_corpus{std::move(bundle)};
    return FS_OK;
  });
}

fs_status fs_corpus_extreme(uint64_t seed, fs_corpus** out) {
  if (auto s = require_arg(out != nullptr, "null argument")) return s;
  return guarded([&] {
    auto bundle =
        std::make_shared<fairsync::CorpusBundle>(fairsync::extreme_case_corpus(seed));
    *out = new fs_corpus{std::move(bundle)};
    return FS_OK;
  });
}

fs_status fs_corpus_open_dir(const char* dir, fs_corpus** out) {
  if (auto s = require_arg(dir && out, "null argument")) return s;
  return guarded([&] {
    auto bundle = std::make_shared<fairsync::CorpusBundle>(fairsync::load_corpus_dir(dir));
    *out = new fs_corpus{std::move(bundle)};
    return FS_OK;
  });
}

fs_status fs_corpus_open_files(const char* items_path, const char* users_path,
                               const char* groups_path, const char* interactions_path,
                               int min_group_size, fs_corpus** out) {
  if (auto s = require_arg(items_path && users_path && groups_path && interactions_path &&
                               out,
                           "null argument"))
    return s;
  return guarded([&] {
    fairsync::LoadOptions options;
    options.min_group_size = min_group_size;
    auto bundle = std::make_shared<fairsync::CorpusBundle>(fairsync::load_corpus(
        items_path, users_path, groups_path, interactions_path, options));
    *out = new fs_corpus{std::move(bundle)};
    return FS_OK;
  });
}

fs_status fs_corpus_write(const fs_corpus* corpus, const char* dir) {
  if (auto s = require_arg(corpus && dir, "null argument")) return s;
  return guarded([&] {
    fairsync::write_corpus(dir, *corpus->bundle);
    return FS_OK;
  });
}

fs_status fs_corpus_info(const fs_corpus* corpus, int64_t* item_count,
                         int64_t* user_count, int32_t* group_count, int32_t* dim) {
  if (auto s = require_arg(corpus != nullptr, "null argument")) return s;
  const auto& bundle = *corpus->bundle;
  if (item_count) *item_count = static_cast<int64_t>(bundle.catalog.items.size());
  if (user_count) *user_count = static_cast<int64_t>(bundle.stream.size());
  if (group_count) *group_count = bundle.catalog.group_count;
  if (dim) *dim = static_cast<int32_t>(bundle.catalog.dim());
  return FS_OK;
}

void fs_corpus_free(fs_corpus* corpus) { delete corpus; }

fs_status fs_engine_create(const fs_corpus* corpus, const char* config_json,
                           fs_engine** out) {
  if (auto s = require_arg(corpus && config_json && out, "null argument")) return s;
  return guarded([&] {
    // Engine configs carry run fields only; corpus and out entries are
    // dropped and a placeholder source satisfies the parser.
    auto obj = std::string(config_json);
    fairsync::ExperimentConfig config;
    {
      using nlohmann::json;
      json parsed;
      try {
        parsed = json::parse(obj);
      } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
      }
      parsed.erase("corpus");
      parsed.erase("out");
      parsed["corpus"] = {{"extreme", {{"seed", 0}}}};
      config = fairsync::parse_experiment_config(parsed.dump());
    }

    auto engine = std::make_unique<fs_engine>();
    engine->bundle = corpus->bundle;
    engine->catalog = engine->bundle->catalog;
    fairsync::reshard(engine->catalog, config.run.shard_count, config.partitioning);
    engine->shards = fairsync::build_all_indexes(engine->catalog);
    fairsync::FairnessSpec spec = fairsync::build_fairness_spec(
        config, engine->catalog.group_count,
        static_cast<std::int64_t>(engine->bundle->stream.size()));
    if (!spec.feasible())
      throw fairsync::InfeasibleError("infeasible m-profile: sum of m_g exceeds T*K");
    fairsync::RunConfig run = config.run;
    run.horizon = spec.horizon;
    engine->horizon = spec.horizon;
    engine->coordinator = std::make_unique<fairsync::Coordinator>(
        engine->catalog, engine->shards, spec, run);
    *out = engine.release();
    return FS_OK;
  });
}

fs_status fs_engine_step(fs_engine* engine, int64_t* out_user_id, int64_t* item_ids,
                         int32_t* group_ids, double* scores, int32_t capacity,
                         int32_t* out_k) {
  if (auto s = require_arg(engine != nullptr, "null argument")) return s;
  return guarded([&] {
    const auto& stream = engine->bundle->stream;
    if (engine->cursor >= static_cast<std::int64_t>(stream.size()) ||
        engine->cursor >= engine->horizon)
      throw std::invalid_argument("engine: stream exhausted");
    const fairsync::StreamUser& user = stream[static_cast<std::size_t>(engine->cursor)];
    const fairsync::CandidateList list = engine->coordinator->step(user);
    ++engine->cursor;
    if (capacity < static_cast<int32_t>(list.entries.size()))
      throw std::invalid_argument("engine: capacity smaller than K");
    for (std::size_t i = 0; i < list.entries.size(); ++i) {
      if (item_ids) item_ids[i] = list.entries[i].item_id;
      if (group_ids) group_ids[i] = list.entries[i].group_id;
      if (scores) scores[i] = list.entries[i].score;
    }
    if (out_user_id) *out_user_id = list.user_id;
    if (out_k) *out_k = static_cast<int32_t>(list.entries.size());
    return FS_OK;
  });
}

fs_status fs_engine_exposures(const fs_engine* engine, int64_t* counts,
                              int32_t capacity) {
  if (auto s = require_arg(engine && counts, "null argument")) return s;
  const auto& ledger = engine->coordinator->ledger();
  if (capacity < static_cast<int32_t>(ledger.counts.size()))
    return fail(FS_ERR_INVALID_ARGUMENT, "engine: capacity smaller than group count");
  for (std::size_t g = 0; g < ledger.counts.size(); ++g) counts[g] = ledger.counts[g];
  return FS_OK;
}

fs_status fs_engine_mu(const fs_engine* engine, double* mu, int32_t capacity) {
  if (auto s = require_arg(engine && mu, "null argument")) return s;
  const auto& current = engine->coordinator->mu();
  if (capacity < static_cast<int32_t>(current.size()))
    return fail(FS_ERR_INVALID_ARGUMENT, "engine: capacity smaller than group count");
  for (std::size_t g = 0; g < current.size(); ++g) mu[g] = current[g];
  return FS_OK;
}

void fs_engine_free(fs_engine* engine) { delete engine; }

namespace {

fs_status with_config(const char* config_json, const char* out_dir,
                      fs_status (*run)(fairsync::ExperimentConfig&, const char*)) {
  if (auto s = require_arg(config_json != nullptr, "null argument")) return s;
  return guarded([&] {
    fairsync::ExperimentConfig config = fairsync::parse_experiment_config(config_json);
    if (out_dir && out_dir[0] != '\0') config.out = out_dir;
    return run(config, out_dir);
  });
}

}  // namespace

fs_status fs_run(const char* experiment_config_json, const char* out_dir) {
  return with_config(experiment_config_json, out_dir,
                     [](fairsync::ExperimentConfig& config, const char*) {
                       fairsync::run_experiment(config);
                       return FS_OK;
                     });
}

fs_status fs_sweep(const char* experiment_config_json, const char* sweep_json,
                   const char* out_dir) {
  if (auto s = require_arg(experiment_config_json && sweep_json, "null argument"))
    return s;
  return guarded([&] {
    fairsync::ExperimentConfig config =
        fairsync::parse_experiment_config(experiment_config_json);
    if (out_dir && out_dir[0] != '\0') config.out = out_dir;
    const fairsync::SweepSpec spec = fairsync::parse_sweep_spec(sweep_json);
    fairsync::run_sweep(config, spec);
    return FS_OK;
  });
}

fs_status fs_gen(const char* experiment_config_json, const char* out_dir) {
  return with_config(experiment_config_json, out_dir,
                     [](fairsync::ExperimentConfig& config, const char*) {
                       fairsync::generate_corpus(config);
                       return FS_OK;
                     });
}

fs_status fs_verify(const char* verify_config_json, char** out_report) {
  if (auto s = require_arg(verify_config_json != nullptr, "null argument")) return s;
  return guarded([&] {
    const fairsync::VerifyConfig config =
        fairsync::parse_verify_config(verify_config_json);
    const fairsync::VerifyReport report = fairsync::run_verify(config);
    if (out_report) *out_report = dup_string(report.text);
    if (!report.passed) return fail(FS_ERR_VERIFY_FAILED, "verification failed");
    return FS_OK;
  });
}

}  // extern "C"
