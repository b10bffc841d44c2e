#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "core.hpp"

namespace fairsync {

// Exact-scan index over the augmented item embeddings of one shard.
// Immutable after build; any number of concurrent queries may run against it.
struct ShardIndex {
  int shard_id = 0;
  std::size_t dim = 0;  // d + |G|
  std::vector<std::int64_t> item_ids;
  std::vector<int> group_ids;
  std::vector<double> rows;  // row-major, size() * dim

  std::size_t size() const { return item_ids.size(); }
  std::span<const double> row(std::size_t i) const {
    return {rows.data() + i * dim, dim};
  }
};

int assign_shard(std::int64_t item_id, std::int64_t position, int shard_count,
                 Partitioning partitioning);

// Reassigns every item's shard; merged retrieval results must not depend on
// the partitioning chosen here.
void reshard(Catalog& catalog, int shard_count, Partitioning partitioning);

ShardIndex build_index(const Catalog& catalog, int shard_id);
std::vector<ShardIndex> build_all_indexes(const Catalog& catalog);

// Smallest-k by (dual distance, item_id); returns min(k, size) entries.
std::vector<ScoredItem> local_topk(const ShardIndex& index, std::span<const double> q,
                                   int k);

// local_topk restricted to items whose group is in allowed_groups.
std::vector<ScoredItem> filtered_topk(const ShardIndex& index, std::span<const double> q,
                                      int k, const std::vector<int>& allowed_groups);

}  // namespace fairsync
