#include "coordinator.hpp"

#include <algorithm>
#include <chrono>
#include <queue>

#include "baselines.hpp"

namespace fairsync {

void GradientBuffer::push(std::vector<double> g) {
  require(!full(), "gradient buffer: capacity exceeded");
  grads.push_back(std::move(g));
}

std::vector<double> GradientBuffer::reduce(BufferReduce mode) const {
  require(!grads.empty(), "gradient buffer: reduce on empty buffer");
  std::vector<double> out(grads[0].size(), 0.0);
  for (const auto& g : grads)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += g[i];
  if (mode == BufferReduce::Mean) {
    const double inv = 1.0 / static_cast<double>(grads.size());
    for (double& v : out) v *= inv;
  }
  return out;
}

namespace {

struct MergeCursor {
  double score;
  std::int64_t item_id;
  std::size_t list;
  std::size_t pos;
};

struct CursorGreater {
  bool operator()(const MergeCursor& a, const MergeCursor& b) const {
    if (a.score != b.score) return a.score > b.score;
    return a.item_id > b.item_id;
  }
};

}  // namespace

std::vector<ScoredItem> merge_topk_upto(
    const std::vector<std::vector<ScoredItem>>& partials, int k) {
  require(k >= 1, "merge_topk: k must be >= 1");
  std::priority_queue<MergeCursor, std::vector<MergeCursor>, CursorGreater> heap;
  for (std::size_t l = 0; l < partials.size(); ++l)
    if (!partials[l].empty())
      heap.push({partials[l][0].score, partials[l][0].item_id, l, 0});
  std::vector<ScoredItem> out;
  out.reserve(static_cast<std::size_t>(k));
  while (!heap.empty() && out.size() < static_cast<std::size_t>(k)) {
    MergeCursor top = heap.top();
    heap.pop();
    out.push_back(partials[top.list][top.pos]);
    if (top.pos + 1 < partials[top.list].size()) {
      const ScoredItem& next = partials[top.list][top.pos + 1];
      heap.push({next.score, next.item_id, top.list, top.pos + 1});
    }
  }
  return out;
}

std::vector<ScoredItem> merge_topk(const std::vector<std::vector<ScoredItem>>& partials,
                                   int k) {
  std::vector<ScoredItem> out = merge_topk_upto(partials, k);
  require(out.size() == static_cast<std::size_t>(k),
          "merge_topk: fewer than k entries across partials");
  return out;
}

CandidateList retrieve(const Embedding& e_u, const DualVector& mu,
                       std::span<const ShardIndex> shards, int k) {
  require(!shards.empty(), "retrieve: no shards");
  const std::vector<double> q = build_query(e_u, mu);
  std::vector<std::vector<ScoredItem>> partials;
  partials.reserve(shards.size());
  for (const ShardIndex& shard : shards) partials.push_back(local_topk(shard, q, k));
  CandidateList list;
  list.entries = merge_topk(partials, k);
  return list;
}

std::vector<std::int64_t> group_exposures(const CandidateList& list, int group_count) {
  std::vector<std::int64_t> exp(static_cast<std::size_t>(group_count), 0);
  for (const auto& entry : list.entries) {
    require(entry.group_id >= 0 && entry.group_id < group_count,
            "group_exposures: group_id out of range");
    ++exp[static_cast<std::size_t>(entry.group_id)];
  }
  return exp;
}

namespace {

std::vector<double> subgradient_impl(const CandidateList& list, const DualVector& mu,
                                     const FairnessSpec& spec, double scale_div) {
  const int groups = spec.group_count();
  require(static_cast<int>(mu.size()) == groups, "subgradient: mu size mismatch");
  require(static_cast<int>(list.entries.size()) == spec.k,
          "subgradient: list must have exactly K entries");
  const std::vector<std::int64_t> exp = group_exposures(list, groups);
  std::size_t top = 0;
  for (std::size_t g = 1; g < mu.size(); ++g)
    if (mu[g] > mu[top]) top = g;  // ties break to the lowest group id
  const double slots =
      static_cast<double>(spec.total_slots()) / scale_div;
  double m_sum = 0.0;
  std::vector<double> s(static_cast<std::size_t>(groups));
  for (std::size_t g = 0; g < s.size(); ++g) {
    const double m_g = static_cast<double>(spec.min_exposure[g]) / scale_div;
    m_sum += m_g;
    s[g] = m_g - static_cast<double>(exp[g]);
  }
  s[top] += slots - m_sum;
  return s;
}

}  // namespace

std::vector<double> subgradient(const CandidateList& list, const DualVector& mu,
                                const FairnessSpec& spec) {
  return subgradient_impl(list, mu, spec, 1.0);
}

std::vector<double> subgradient_scaled(const CandidateList& list, const DualVector& mu,
                                       const FairnessSpec& spec,
                                       GradientScaling scaling) {
  if (scaling == GradientScaling::FullHorizon) return subgradient_impl(list, mu, spec, 1.0);
  require(spec.horizon > 0, "subgradient: per-step scaling needs a positive horizon");
  return subgradient_impl(list, mu, spec, static_cast<double>(spec.horizon));
}

Coordinator::Coordinator(const Catalog& catalog, std::span<const ShardIndex> shards,
                         FairnessSpec spec, RunConfig config)
    : shards_(shards),
      spec_(std::move(spec)),
      config_(config),
      mu_(static_cast<std::size_t>(catalog.group_count), 0.0),
      ledger_(catalog.group_count),
      buffer_(config.batch_size),
      optimizer_(config.optimizer, catalog.group_count, config.eta) {
  config_.validate();
  require(spec_.group_count() == catalog.group_count,
          "coordinator: fairness spec group count mismatch");
  require(spec_.k == config_.k, "coordinator: spec K must equal config K");
}

CandidateList Coordinator::retrieve_for_policy(const StreamUser& user) {
  switch (config_.algorithm) {
    case Algorithm::Plain: {
      last_policy_mu_.assign(mu_.size(), 0.0);
      return retrieve(user.embedding, last_policy_mu_, shards_, config_.k);
    }
    case Algorithm::FairSync: {
      last_policy_mu_ = mu_;
      return retrieve(user.embedding, mu_, shards_, config_.k);
    }
    case Algorithm::RegularizedFair: {
      last_policy_mu_ = regfair_mu(ledger_, config_.lambda);
      return retrieve(user.embedding, last_policy_mu_, shards_, config_.k);
    }
    case Algorithm::Ipw: {
      last_policy_mu_ = ipw_mu(ledger_, config_.lambda);
      return retrieve(user.embedding, last_policy_mu_, shards_, config_.k);
    }
    case Algorithm::KNeighbor: {
      last_policy_mu_.assign(mu_.size(), 0.0);
      std::int64_t fills = 0;
      CandidateList list = retrieve_k_neighbor(user.embedding, ledger_, shards_,
                                               config_.k, &fills);
      fallback_fills_ += fills;
      return list;
    }
    case Algorithm::Uncalibrated: {
      last_policy_mu_.assign(mu_.size(), 0.0);
      std::int64_t fills = 0;
      CandidateList list = retrieve_uncalibrated(user.embedding, ledger_, spec_, shards_,
                                                 config_.k, &fills);
      fallback_fills_ += fills;
      return list;
    }
  }
  throw std::invalid_argument("coordinator: unknown algorithm");
}

void Coordinator::maybe_update() {
  if (config_.algorithm == Algorithm::FairSync) {
    if (buffer_.full()) {
      mu_ = optimizer_.step(mu_, buffer_.reduce(config_.reduce));
      buffer_.clear();
      trace_.push_back({processed_, mu_});
    }
    return;
  }
  if (processed_ % config_.batch_size == 0) trace_.push_back({processed_, last_policy_mu_});
}

CandidateList Coordinator::step(const StreamUser& user) {
  require(processed_ < spec_.horizon, "coordinator: stream index exceeds horizon");
  const auto start = std::chrono::steady_clock::now();
  CandidateList list = retrieve_for_policy(user);
  list.user_id = user.user_id;
  record_exposures(ledger_, list);
  if (config_.algorithm == Algorithm::FairSync)
    buffer_.push(subgradient_scaled(list, mu_, spec_, config_.scaling));
  ++processed_;
  maybe_update();
  const auto stop = std::chrono::steady_clock::now();
  step_nanos_.push_back(
      std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count());
  return list;
}

RunReport Coordinator::run(std::span<const StreamUser> stream) {
  if (!spec_.feasible())
    throw InfeasibleError("infeasible m-profile: sum of m_g exceeds T*K");
  RunReport report;
  report.ledger = ExposureLedger(spec_.group_count());
  trace_.clear();
  trace_.push_back({0, mu_});
  const std::int64_t planned = spec_.horizon;
  const std::int64_t available =
      std::min<std::int64_t>(planned, static_cast<std::int64_t>(stream.size()));
  for (std::int64_t t = 0; t < available; ++t)
    report.candidates.push_back(step(stream[static_cast<std::size_t>(t)]));
  report.ledger = ledger_;
  report.mu_trace = trace_;
  report.step_nanos = step_nanos_;
  report.fallback_fills = fallback_fills_;
  report.processed = processed_;
  report.incomplete = processed_ < planned;
  return report;
}

}  // namespace fairsync
