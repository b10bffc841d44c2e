#include "baselines.hpp"

#include <algorithm>
#include <unordered_set>

#include "coordinator.hpp"

namespace fairsync {

DualVector regfair_mu(const ExposureLedger& ledger, double lambda) {
  require(lambda >= 0.0, "regfair: lambda must be >= 0");
  require(!ledger.counts.empty(), "regfair: empty ledger");
  const std::int64_t lowest = *std::min_element(ledger.counts.begin(), ledger.counts.end());
  DualVector mu(ledger.counts.size());
  for (std::size_t g = 0; g < mu.size(); ++g)
    mu[g] = lambda * static_cast<double>(ledger.counts[g] - lowest);
  return mu;
}

DualVector ipw_mu(const ExposureLedger& ledger, double lambda) {
  require(lambda >= 0.0, "ipw: lambda must be >= 0");
  require(!ledger.counts.empty(), "ipw: empty ledger");
  DualVector mu(ledger.counts.size());
  for (std::size_t g = 0; g < mu.size(); ++g)
    mu[g] = -lambda / static_cast<double>(ledger.counts[g] + 1);
  return mu;
}

std::vector<int> kneighbor_allowed_groups(const ExposureLedger& ledger, int k) {
  require(k >= 1, "kneighbor: k must be >= 1");
  const int groups = static_cast<int>(ledger.counts.size());
  std::vector<int> order(static_cast<std::size_t>(groups));
  for (int g = 0; g < groups; ++g) order[static_cast<std::size_t>(g)] = g;
  if (groups <= k) return order;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (ledger.counts[a] != ledger.counts[b]) return ledger.counts[a] < ledger.counts[b];
    return a < b;
  });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<int> uncalibrated_unsatisfied_groups(const ExposureLedger& ledger,
                                                 const FairnessSpec& spec) {
  require(static_cast<int>(ledger.counts.size()) == spec.group_count(),
          "uncalibrated: ledger/spec size mismatch");
  std::vector<int> out;
  for (int g = 0; g < spec.group_count(); ++g)
    if (ledger.counts[g] < spec.min_exposure[g]) out.push_back(g);
  return out;
}

CandidateList retrieve_filtered(const Embedding& e_u, std::span<const ShardIndex> shards,
                                int k, const std::vector<int>& allowed_groups,
                                std::int64_t* fallback_fills) {
  require(!shards.empty(), "retrieve_filtered: no shards");
  const DualVector zero(shards[0].dim - e_u.size(), 0.0);
  const std::vector<double> q = build_query(e_u, zero);
  std::vector<std::vector<ScoredItem>> partials;
  partials.reserve(shards.size());
  for (const ShardIndex& shard : shards)
    partials.push_back(filtered_topk(shard, q, k, allowed_groups));
  CandidateList list;
  list.entries = merge_topk_upto(partials, k);
  if (static_cast<int>(list.entries.size()) < k) {
    // Not enough items in the allowed groups: top up from the full corpus.
    std::unordered_set<std::int64_t> taken;
    for (const auto& e : list.entries) taken.insert(e.item_id);
    std::vector<std::vector<ScoredItem>> full;
    full.reserve(shards.size());
    for (const ShardIndex& shard : shards) full.push_back(local_topk(shard, q, k));
    for (const ScoredItem& item : merge_topk(full, k)) {
      if (static_cast<int>(list.entries.size()) >= k) break;
      if (taken.count(item.item_id)) continue;
      list.entries.push_back(item);
      if (fallback_fills) ++*fallback_fills;
    }
    require(static_cast<int>(list.entries.size()) == k,
            "retrieve_filtered: corpus smaller than k");
    std::sort(list.entries.begin(), list.entries.end(),
              [](const ScoredItem& a, const ScoredItem& b) {
                if (a.score != b.score) return a.score < b.score;
                return a.item_id < b.item_id;
              });
  }
  return list;
}

CandidateList retrieve_regularized_fair(const Embedding& e_u, const ExposureLedger& ledger,
                                        double lambda, std::span<const ShardIndex> shards,
                                        int k) {
  return retrieve(e_u, regfair_mu(ledger, lambda), shards, k);
}

CandidateList retrieve_ipw(const Embedding& e_u, const ExposureLedger& ledger,
                           double lambda, std::span<const ShardIndex> shards, int k) {
  return retrieve(e_u, ipw_mu(ledger, lambda), shards, k);
}

CandidateList retrieve_k_neighbor(const Embedding& e_u, const ExposureLedger& ledger,
                                  std::span<const ShardIndex> shards, int k,
                                  std::int64_t* fallback_fills) {
  return retrieve_filtered(e_u, shards, k, kneighbor_allowed_groups(ledger, k),
                           fallback_fills);
}

CandidateList retrieve_uncalibrated(const Embedding& e_u, const ExposureLedger& ledger,
                                    const FairnessSpec& spec,
                                    std::span<const ShardIndex> shards, int k,
                                    std::int64_t* fallback_fills) {
  const std::vector<int> unsatisfied = uncalibrated_unsatisfied_groups(ledger, spec);
  if (unsatisfied.empty()) {
    const DualVector zero(static_cast<std::size_t>(spec.group_count()), 0.0);
    return retrieve(e_u, zero, shards, k);
  }
  return retrieve_filtered(e_u, shards, k, unsatisfied, fallback_fills);
}

}  // namespace fairsync
