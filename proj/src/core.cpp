#include "core.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace fairsync {

void Catalog::validate() const {
  require(group_count >= 1, "catalog: group_count must be >= 1");
  require(shard_count >= 1, "catalog: shard_count must be >= 1");
  std::unordered_set<std::int64_t> seen;
  std::vector<std::int64_t> group_sizes(group_count, 0);
  const std::size_t d = dim();
  for (const auto& item : items) {
    require(seen.insert(item.item_id).second, "catalog: duplicate item_id");
    require(item.group_id >= 0 && item.group_id < group_count,
            "catalog: group_id out of range");
    require(item.shard_id >= 0 && item.shard_id < shard_count,
            "catalog: shard_id out of range");
    require(item.embedding.size() == d, "catalog: inconsistent embedding dimension");
    for (double v : item.embedding)
      require(std::isfinite(v), "catalog: non-finite embedding entry");
    ++group_sizes[item.group_id];
  }
  for (std::int64_t n : group_sizes)
    require(n > 0, "catalog: every group must be non-empty");
}

std::int64_t ExposureLedger::total() const {
  std::int64_t sum = 0;
  for (auto c : counts) sum += c;
  return sum;
}

std::int64_t FairnessSpec::min_exposure_sum() const {
  std::int64_t sum = 0;
  for (auto m : min_exposure) sum += m;
  return sum;
}

void RunConfig::validate() const {
  require(k >= 1, "config: K must be >= 1");
  require(batch_size >= 1, "config: B must be >= 1");
  require(shard_count >= 1, "config: M must be >= 1");
  require(eta > 0.0, "config: eta must be > 0");
  require(lambda >= 0.0, "config: lambda must be >= 0");
  require(horizon >= 0, "config: T must be >= 0");
}

const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::FairSync: return "fairsync";
    case Algorithm::RegularizedFair: return "regfair";
    case Algorithm::Ipw: return "ipw";
    case Algorithm::KNeighbor: return "kneighbor";
    case Algorithm::Uncalibrated: return "uncalibrated";
    case Algorithm::Plain: return "plain";
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "fairsync") return Algorithm::FairSync;
  if (name == "regfair") return Algorithm::RegularizedFair;
  if (name == "ipw") return Algorithm::Ipw;
  if (name == "kneighbor") return Algorithm::KNeighbor;
  if (name == "uncalibrated") return Algorithm::Uncalibrated;
  if (name == "plain") return Algorithm::Plain;
  throw std::invalid_argument("unknown algorithm tag: " + name);
}

double base_distance(const Embedding& e_u, const Embedding& e_i) {
  require(e_u.size() == e_i.size(), "base_distance: dimension mismatch");
  double dot = 0.0;
  for (std::size_t j = 0; j < e_u.size(); ++j) dot += e_u[j] * e_i[j];
  return -dot;
}

AugmentedItem augment_item(std::int64_t item_id, const Embedding& e_i, int group_id,
                           int group_count) {
  require(group_count >= 1, "augment_item: group_count must be >= 1");
  require(group_id >= 0 && group_id < group_count, "augment_item: group_id out of range");
  AugmentedItem out;
  out.item_id = item_id;
  out.group_id = group_id;
  out.h.resize(e_i.size() + static_cast<std::size_t>(group_count), 0.0);
  std::copy(e_i.begin(), e_i.end(), out.h.begin());
  out.h[e_i.size() + static_cast<std::size_t>(group_id)] = 1.0;
  return out;
}

std::vector<double> build_query(const Embedding& e_u, const DualVector& mu) {
  std::vector<double> q(e_u.size() + mu.size());
  std::copy(e_u.begin(), e_u.end(), q.begin());
  for (std::size_t g = 0; g < mu.size(); ++g) q[e_u.size() + g] = -mu[g];
  return q;
}

double dual_distance(std::span<const double> q, std::span<const double> h) {
  require(q.size() == h.size(), "dual_distance: dimension mismatch");
  // Fixed reduction order: scan results must be bit-identical across shards.
  double dot = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) dot += q[j] * h[j];
  return -dot;
}

void record_exposures(ExposureLedger& ledger, const CandidateList& list) {
  for (const auto& entry : list.entries) {
    require(entry.group_id >= 0 &&
                entry.group_id < static_cast<int>(ledger.counts.size()),
            "ledger: group_id out of range");
    ++ledger.counts[entry.group_id];
  }
  ++ledger.steps_seen;
}

}  // namespace fairsync
