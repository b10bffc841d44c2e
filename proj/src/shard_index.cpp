#include "shard_index.hpp"

#include <algorithm>

namespace fairsync {

namespace {

bool scored_less(const ScoredItem& a, const ScoredItem& b) {
  if (a.score != b.score) return a.score < b.score;
  return a.item_id < b.item_id;
}

std::vector<ScoredItem> select_topk(std::vector<ScoredItem>& scored, int k) {
  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), scored.size());
  if (keep < scored.size())
    std::nth_element(scored.begin(), scored.begin() + keep, scored.end(), scored_less);
  scored.resize(keep);
  std::sort(scored.begin(), scored.end(), scored_less);
  return std::move(scored);
}

}  // namespace

int assign_shard(std::int64_t item_id, std::int64_t position, int shard_count,
                 Partitioning partitioning) {
  require(shard_count >= 1, "assign_shard: shard_count must be >= 1");
  if (partitioning == Partitioning::RoundRobin)
    return static_cast<int>(position % shard_count);
  std::uint64_t h = static_cast<std::uint64_t>(item_id);
  h = splitmix64(h);
  return static_cast<int>(h % static_cast<std::uint64_t>(shard_count));
}

void reshard(Catalog& catalog, int shard_count, Partitioning partitioning) {
  require(shard_count >= 1, "reshard: shard_count must be >= 1");
  catalog.shard_count = shard_count;
  for (std::size_t pos = 0; pos < catalog.items.size(); ++pos)
    catalog.items[pos].shard_id = assign_shard(
        catalog.items[pos].item_id, static_cast<std::int64_t>(pos), shard_count,
        partitioning);
}

ShardIndex build_index(const Catalog& catalog, int shard_id) {
  require(shard_id >= 0 && shard_id < catalog.shard_count,
          "build_index: shard_id out of range");
  ShardIndex index;
  index.shard_id = shard_id;
  index.dim = catalog.dim() + static_cast<std::size_t>(catalog.group_count);
  for (const auto& item : catalog.items) {
    if (item.shard_id != shard_id) continue;
    AugmentedItem aug =
        augment_item(item.item_id, item.embedding, item.group_id, catalog.group_count);
    index.item_ids.push_back(aug.item_id);
    index.group_ids.push_back(aug.group_id);
    index.rows.insert(index.rows.end(), aug.h.begin(), aug.h.end());
  }
  return index;
}

std::vector<ShardIndex> build_all_indexes(const Catalog& catalog) {
  std::vector<ShardIndex> shards;
  shards.reserve(static_cast<std::size_t>(catalog.shard_count));
  for (int s = 0; s < catalog.shard_count; ++s) shards.push_back(build_index(catalog, s));
  return shards;
}

std::vector<ScoredItem> local_topk(const ShardIndex& index, std::span<const double> q,
                                   int k) {
  require(k >= 1, "local_topk: k must be >= 1");
  require(index.size() == 0 || q.size() == index.dim, "local_topk: dimension mismatch");
  std::vector<ScoredItem> scored;
  scored.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i)
    scored.push_back({index.item_ids[i], index.group_ids[i], dual_distance(q, index.row(i))});
  return select_topk(scored, k);
}

std::vector<ScoredItem> filtered_topk(const ShardIndex& index, std::span<const double> q,
                                      int k, const std::vector<int>& allowed_groups) {
  require(!allowed_groups.empty(), "filtered_topk: allowed_groups must be non-empty");
  require(k >= 1, "filtered_topk: k must be >= 1");
  require(index.size() == 0 || q.size() == index.dim,
          "filtered_topk: dimension mismatch");
  int max_group = 0;
  for (int g : allowed_groups) max_group = std::max(max_group, g);
  std::vector<char> allowed(static_cast<std::size_t>(max_group) + 1, 0);
  for (int g : allowed_groups) {
    require(g >= 0, "filtered_topk: negative group id");
    allowed[static_cast<std::size_t>(g)] = 1;
  }
  std::vector<ScoredItem> scored;
  for (std::size_t i = 0; i < index.size(); ++i) {
    const int g = index.group_ids[i];
    if (g > max_group || !allowed[static_cast<std::size_t>(g)]) continue;
    scored.push_back({index.item_ids[i], g, dual_distance(q, index.row(i))});
  }
  return select_topk(scored, k);
}

}  // namespace fairsync
