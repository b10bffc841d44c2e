#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "common.hpp"

namespace fairsync {

using Embedding = std::vector<double>;
using DualVector = std::vector<double>;

struct CatalogItem {
  std::int64_t item_id = 0;
  Embedding embedding;
  int group_id = 0;
  int shard_id = 0;
};

// Item corpus with one group and one shard per item. The item-group
// adjacency is stored implicitly: group_id is the position of the 1 in the
// one-hot tail of the augmented embedding.
struct Catalog {
  std::vector<CatalogItem> items;
  int group_count = 0;
  int shard_count = 1;

  std::size_t dim() const { return items.empty() ? 0 : items[0].embedding.size(); }
  void validate() const;
};

// Item embedding concatenated with its one-hot group tail (dimension d + |G|).
struct AugmentedItem {
  std::int64_t item_id = 0;
  int group_id = 0;
  std::vector<double> h;
};

// Cumulative per-group exposure counts over the processed stream.
struct ExposureLedger {
  std::vector<std::int64_t> counts;
  std::int64_t steps_seen = 0;

  explicit ExposureLedger(int group_count = 0) : counts(group_count, 0) {}
  std::int64_t total() const;
};

// Minimum exposure requirements m_g with the horizon they apply over.
struct FairnessSpec {
  std::vector<std::int64_t> min_exposure;
  std::int64_t horizon = 0;
  int k = 0;

  int group_count() const { return static_cast<int>(min_exposure.size()); }
  std::int64_t total_slots() const { return horizon * k; }
  std::int64_t min_exposure_sum() const;
  bool feasible() const { return min_exposure_sum() <= total_slots(); }
};

struct ScoredItem {
  std::int64_t item_id = 0;
  int group_id = 0;
  double score = 0.0;  // dual distance; smaller is better
};

// One arrival in the online user stream.
struct StreamUser {
  std::int64_t user_id = 0;
  Embedding embedding;
};

// Top-K retrieval result for one user, ascending by (score, item_id).
struct CandidateList {
  std::int64_t user_id = 0;
  std::vector<ScoredItem> entries;
};

enum class Algorithm { FairSync, RegularizedFair, Ipw, KNeighbor, Uncalibrated, Plain };
enum class GradientScaling { PerStep, FullHorizon };
enum class BufferReduce { Mean, Sum };
enum class OptimizerKind { Adam, Sgd };
enum class Partitioning { RoundRobin, HashId };

struct RunConfig {
  int k = 20;
  std::int64_t horizon = 0;  // 0 = whole stream
  int batch_size = 1;
  double eta = 1e-3;
  int shard_count = 1;
  Algorithm algorithm = Algorithm::FairSync;
  double lambda = 0.1;
  std::uint64_t seed = 0;
  GradientScaling scaling = GradientScaling::PerStep;
  BufferReduce reduce = BufferReduce::Mean;
  OptimizerKind optimizer = OptimizerKind::Adam;

  void validate() const;
};

const char* algorithm_name(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

// d(e_u, e_i) = -e_u . e_i
double base_distance(const Embedding& e_u, const Embedding& e_i);

AugmentedItem augment_item(std::int64_t item_id, const Embedding& e_i, int group_id,
                           int group_count);

// q = e_u || -mu
std::vector<double> build_query(const Embedding& e_u, const DualVector& mu);

// d_dual(q, h) = -q . h = d(e_u, e_i) + mu_g
double dual_distance(std::span<const double> q, std::span<const double> h);

void record_exposures(ExposureLedger& ledger, const CandidateList& list);

}  // namespace fairsync
