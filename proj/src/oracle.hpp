#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "common.hpp"
#include "core.hpp"

namespace fairsync::oracle {

// Enumerable allocation instance: per-step relevance scores, one group per
// item, per-group minimums, list size k. Hard-capped small so exhaustive
// search stays exhaustive.
struct TinyInstance {
  std::vector<std::vector<double>> scores;  // T x |I|, r_{u_t,i}
  std::vector<int> groups;                  // per item
  std::vector<std::int64_t> min_exposure;   // per group
  int k = 1;

  int horizon() const { return static_cast<int>(scores.size()); }
  int item_count() const { return static_cast<int>(groups.size()); }
  int group_count() const { return static_cast<int>(min_exposure.size()); }
  std::int64_t total_slots() const { return static_cast<std::int64_t>(horizon()) * k; }
  std::int64_t min_exposure_sum() const;
  void validate() const;
};

struct PrimalResult {
  bool feasible = false;
  double value = 0.0;
};

// Exact maximum of the constrained allocation by dynamic programming over
// per-step K-subsets and exposure-count states (lossless enumeration).
PrimalResult primal_optimum(const TinyInstance& inst);

// W_dual(mu) = sum_t topK(r_t - A mu) + sum_g m_g mu_g + max(mu) (TK - sum m).
double dual_objective(const DualVector& mu, const TinyInstance& inst);

// Single-arrival dual objective with externally supplied horizon magnitudes;
// its gradient is the coordinator's per-list subgradient.
double step_dual_objective(const DualVector& mu, const std::vector<double>& row_scores,
                           const std::vector<int>& groups, const FairnessSpec& spec);

struct DualSearchResult {
  double value = 0.0;
  DualVector mu;
  bool budget_exhausted = false;
};

// Approximate min of the dual objective: coordinate grid refinement plus
// subgradient polishing. Deliberately solver-free.
DualSearchResult dual_optimum(const TinyInstance& inst, int grid_rounds = 10,
                              int polish_iters = 3000);

// Closed form of max sum_g mu_g e_g over integer e >= m with sum e = total.
double knapsack_closed_form(const DualVector& mu, const std::vector<std::int64_t>& m,
                            std::int64_t total);

// The same maximum by explicit integer enumeration.
double knapsack_enumerate(const DualVector& mu, const std::vector<std::int64_t>& m,
                          std::int64_t total);

double topk_sum(const std::vector<double>& values, int k);

bool topk_concavity_check(const std::vector<double>& x, const std::vector<double>& y,
                          double lambda, int k, double tolerance = 1e-12);

struct FdCheckResult {
  bool degenerate = false;        // rejected: tied argmax or tied K-th rank
  double max_rel_error = 0.0;
  int worst_coordinate = -1;
  std::vector<double> analytic;
  std::vector<double> finite_difference;
};

// Central finite differences of dual_objective against the analytic
// subgradient assembled from the coordinator's per-list formula (penalty
// terms counted once across the horizon). printed_sign reproduces the
// uncorrected exposure sign for negative-control runs.
FdCheckResult fd_subgradient_check(const DualVector& mu, const TinyInstance& inst,
                                   double h, bool printed_sign = false);

struct InstanceOptions {
  int max_items = 8;
  int max_horizon = 4;
  int max_k = 3;
  int max_groups = 4;
  bool tight_minimums = true;  // bias m_g toward the achievable caps
};

TinyInstance random_feasible_instance(Rng& rng, const InstanceOptions& opt = {});

}  // namespace fairsync::oracle
