#include "metrics.hpp"

#include <algorithm>
#include <cmath>

namespace fairsync {

namespace {

// Mean of a per-user statistic over users that have a relevance set.
template <typename Fn>
double mean_over_users(const RunReport& report, const RelevanceSets& rels, Fn per_user,
                       std::int64_t* evaluated = nullptr,
                       std::int64_t* skipped = nullptr) {
  double sum = 0.0;
  std::int64_t n = 0, miss = 0;
  for (const CandidateList& list : report.candidates) {
    const auto* rel = rels.find(list.user_id);
    if (!rel) {
      ++miss;
      continue;
    }
    sum += per_user(list, *rel);
    ++n;
  }
  if (evaluated) *evaluated = n;
  if (skipped) *skipped = miss;
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

double user_recall(const CandidateList& list,
                   const std::unordered_set<std::int64_t>& rel) {
  std::int64_t hits = 0;
  for (const auto& e : list.entries) hits += rel.count(e.item_id) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(rel.size());
}

double user_hr(const CandidateList& list, const std::unordered_set<std::int64_t>& rel) {
  for (const auto& e : list.entries)
    if (rel.count(e.item_id)) return 1.0;
  return 0.0;
}

double user_ndcg(const CandidateList& list, const std::unordered_set<std::int64_t>& rel) {
  double dcg = 0.0;
  for (std::size_t pos = 0; pos < list.entries.size(); ++pos)
    if (rel.count(list.entries[pos].item_id))
      dcg += 1.0 / std::log2(static_cast<double>(pos + 2));
  const std::size_t ideal_hits = std::min(rel.size(), list.entries.size());
  double idcg = 0.0;
  for (std::size_t pos = 0; pos < ideal_hits; ++pos)
    idcg += 1.0 / std::log2(static_cast<double>(pos + 2));
  return idcg == 0.0 ? 0.0 : dcg / idcg;
}

}  // namespace

double recall_at_n(const RunReport& report, const RelevanceSets& rels) {
  return mean_over_users(report, rels, user_recall);
}

double hr_at_n(const RunReport& report, const RelevanceSets& rels) {
  return mean_over_users(report, rels, user_hr);
}

double ndcg_at_n(const RunReport& report, const RelevanceSets& rels) {
  return mean_over_users(report, rels, user_ndcg);
}

double esp(const RunReport& report, const FairnessSpec& spec, bool at_least) {
  const int groups = spec.group_count();
  require(static_cast<int>(report.ledger.counts.size()) == groups,
          "esp: ledger/spec size mismatch");
  if (groups == 0) return 0.0;
  int satisfied = 0;
  for (int g = 0; g < groups; ++g) {
    const std::int64_t e = report.ledger.counts[g];
    const std::int64_t m = spec.min_exposure[g];
    if (at_least ? (e >= m) : (e > m)) ++satisfied;
  }
  return static_cast<double>(satisfied) / static_cast<double>(groups);
}

MetricsResult evaluate(const RunReport& report, const RelevanceSets& rels,
                       const FairnessSpec& spec, bool esp_at_least) {
  MetricsResult out;
  out.recall = mean_over_users(report, rels, user_recall, &out.evaluated_users,
                               &out.skipped_users);
  out.hr = hr_at_n(report, rels);
  out.ndcg = ndcg_at_n(report, rels);
  out.esp = esp(report, spec, esp_at_least);
  return out;
}

}  // namespace fairsync
