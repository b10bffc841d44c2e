#pragma once

#include <cstdint>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "coordinator.hpp"
#include "core.hpp"

namespace fairsync {

// Ground-truth relevant items per user id. Users without a (non-empty) set
// are skipped by the accuracy metrics and counted as skipped.
struct RelevanceSets {
  std::unordered_map<std::int64_t, std::unordered_set<std::int64_t>> by_user;

  void add(std::int64_t user_id, std::int64_t item_id) { by_user[user_id].insert(item_id); }
  const std::unordered_set<std::int64_t>* find(std::int64_t user_id) const {
    auto it = by_user.find(user_id);
    if (it == by_user.end() || it->second.empty()) return nullptr;
    return &it->second;
  }
};

struct MetricsResult {
  double recall = 0.0;
  double hr = 0.0;
  double ndcg = 0.0;
  double esp = 0.0;
  std::int64_t evaluated_users = 0;
  std::int64_t skipped_users = 0;
};

double recall_at_n(const RunReport& report, const RelevanceSets& rels);
double hr_at_n(const RunReport& report, const RelevanceSets& rels);
double ndcg_at_n(const RunReport& report, const RelevanceSets& rels);

// Fraction of groups whose cumulative exposure exceeds m_g. The printed
// indicator is strict; at_least switches to the >= reading.
double esp(const RunReport& report, const FairnessSpec& spec, bool at_least = false);

MetricsResult evaluate(const RunReport& report, const RelevanceSets& rels,
                       const FairnessSpec& spec, bool esp_at_least = false);

}  // namespace fairsync
