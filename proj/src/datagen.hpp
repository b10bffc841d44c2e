#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core.hpp"
#include "metrics.hpp"

namespace fairsync {

struct SynthConfig {
  int group_count = 5;
  int items_per_group = 200;
  int dim = 32;
  double center_spread = 1.0;  // norm of each group's cluster center
  double noise = 0.25;         // RMS of the within-cluster offset
  std::int64_t user_count = 2000;
  std::vector<double> group_affinity;  // draw weights for a user's home group
  int relevant_per_user = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

struct CorpusBundle {
  Catalog catalog;
  std::vector<StreamUser> stream;
  RelevanceSets relevance;
  std::vector<std::string> group_labels;  // dense id -> original label
};

// Group-clustered items with affinity-weighted users; relevance is the exact
// top-R of each user by base distance.
CorpusBundle synth_corpus(const SynthConfig& cfg);

// Two groups of five items, 10k users; per-user base distances to group-0
// items fall in [0, 0.4) and to group-1 items in [0.4, 1.0]. Group 0 is what
// every user wants; the relevance set is its five items.
CorpusBundle extreme_case_corpus(std::uint64_t seed = 20240229);

struct LoadOptions {
  int min_group_size = 0;  // groups smaller than this merge into one
};

// Raw layout: embeddings + groups + timestamped interactions. Interactions
// are split 80/10/10 by timestamp; the test portion forms the stream and the
// relevance sets.
CorpusBundle load_corpus(const std::string& items_path, const std::string& users_path,
                         const std::string& groups_path,
                         const std::string& interactions_path,
                         const LoadOptions& options = {});

// Direct layout written by write_corpus (manifest.json + fseb/csv files).
CorpusBundle load_corpus_dir(const std::string& dir);
void write_corpus(const std::string& dir, const CorpusBundle& bundle);

// FSEB: "FSEB" magic, u32 LE count, u32 LE dim, then count*dim f32 LE
// row-major. Values are promoted to double on load.
void write_fseb(const std::string& path, const std::vector<Embedding>& rows);
std::vector<Embedding> read_fseb(const std::string& path);

// CSV alternative with header id,v0..v{d-1}; ids must be dense 0..n-1.
std::vector<Embedding> read_embeddings_csv(const std::string& path);

// Reads either format, by magic.
std::vector<Embedding> read_embeddings(const std::string& path);

double quantize_f32(double v);

}  // namespace fairsync
