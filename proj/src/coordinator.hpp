#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "core.hpp"
#include "optimizer.hpp"
#include "shard_index.hpp"

namespace fairsync {

// Buffered per-step subgradients between dual updates.
struct GradientBuffer {
  std::vector<std::vector<double>> grads;
  int capacity = 1;

  explicit GradientBuffer(int capacity_ = 1) : capacity(capacity_) {}
  void push(std::vector<double> g);
  bool full() const { return static_cast<int>(grads.size()) >= capacity; }
  std::vector<double> reduce(BufferReduce mode) const;
  void clear() { grads.clear(); }
};

struct MuSnapshot {
  std::int64_t step = 0;  // users processed when the snapshot was taken
  DualVector mu;
};

struct RunReport {
  std::vector<CandidateList> candidates;
  ExposureLedger ledger;
  std::vector<MuSnapshot> mu_trace;
  std::vector<std::int64_t> step_nanos;
  std::int64_t fallback_fills = 0;  // entries filled from disallowed groups
  std::int64_t processed = 0;
  bool incomplete = false;  // stream ended before the requested horizon
};

// Gather half of the distributed retrieval: globally smallest k under
// (score, item_id) from per-shard sorted partial lists.
std::vector<ScoredItem> merge_topk(const std::vector<std::vector<ScoredItem>>& partials,
                                   int k);

// Merge without the size contract; used by fallback fills.
std::vector<ScoredItem> merge_topk_upto(
    const std::vector<std::vector<ScoredItem>>& partials, int k);

// Scatter/gather exact top-K in dual space over all shards.
CandidateList retrieve(const Embedding& e_u, const DualVector& mu,
                       std::span<const ShardIndex> shards, int k);

// Analytic subgradient of the dual objective at mu for one candidate list,
// with full-horizon magnitudes: for g != argmax(mu), s_g = m_g - exp_g; for
// the argmax coordinate, s = (T*K - sum_{g != argmax} m_g) - exp. Ties in
// argmax break to the lowest group id.
std::vector<double> subgradient(const CandidateList& list, const DualVector& mu,
                                const FairnessSpec& spec);

// Same shape with per-step shares (m_g/T and K) instead of full-horizon
// magnitudes; the unbiased per-arrival estimate.
std::vector<double> subgradient_scaled(const CandidateList& list, const DualVector& mu,
                                       const FairnessSpec& spec, GradientScaling scaling);

std::vector<std::int64_t> group_exposures(const CandidateList& list, int group_count);

// Online loop (retrieval, exposure accounting, buffered dual updates) for
// FairSync and all baseline policies.
class Coordinator {
 public:
  Coordinator(const Catalog& catalog, std::span<const ShardIndex> shards,
              FairnessSpec spec, RunConfig config);

  // Serves one arrival; updates ledger, buffer and (at batch boundaries) mu.
  CandidateList step(const StreamUser& user);

  RunReport run(std::span<const StreamUser> stream);

  const DualVector& mu() const { return mu_; }
  const ExposureLedger& ledger() const { return ledger_; }

 private:
  CandidateList retrieve_for_policy(const StreamUser& user);
  void maybe_update();

  std::span<const ShardIndex> shards_;
  FairnessSpec spec_;
  RunConfig config_;
  DualVector mu_;
  ExposureLedger ledger_;
  GradientBuffer buffer_;
  DualOptimizer optimizer_;
  DualVector last_policy_mu_;
  std::vector<MuSnapshot> trace_;
  std::vector<std::int64_t> step_nanos_;
  std::int64_t fallback_fills_ = 0;
  std::int64_t processed_ = 0;
};

}  // namespace fairsync
