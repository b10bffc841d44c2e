#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "coordinator.hpp"

namespace fairsync::oracle {

namespace {

constexpr int kMaxItems = 8;
constexpr int kMaxHorizon = 4;
constexpr int kMaxK = 3;
constexpr int kCountBits = 4;  // per-group exposure fits in 4 bits (TK <= 12)

std::vector<double> adjusted_scores(const std::vector<double>& row,
                                    const std::vector<int>& groups,
                                    const DualVector& mu) {
  std::vector<double> a(row.size());
  for (std::size_t i = 0; i < row.size(); ++i)
    a[i] = row[i] - mu[static_cast<std::size_t>(groups[i])];
  return a;
}

// Indices of the k largest adjusted scores, ties to the lowest item index.
std::vector<int> topk_items(const std::vector<double>& adjusted, int k) {
  std::vector<int> order(adjusted.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (adjusted[a] != adjusted[b]) return adjusted[a] > adjusted[b];
    return a < b;
  });
  order.resize(static_cast<std::size_t>(std::min<int>(k, static_cast<int>(order.size()))));
  return order;
}

double penalty_terms(const DualVector& mu, const std::vector<std::int64_t>& m,
                     std::int64_t total_slots) {
  double value = 0.0;
  double mu_max = mu.empty() ? 0.0 : mu[0];
  std::int64_t m_sum = 0;
  for (std::size_t g = 0; g < mu.size(); ++g) {
    value += static_cast<double>(m[g]) * mu[g];
    mu_max = std::max(mu_max, mu[g]);
    m_sum += m[g];
  }
  return value + mu_max * static_cast<double>(total_slots - m_sum);
}

}  // namespace

std::int64_t TinyInstance::min_exposure_sum() const {
  std::int64_t sum = 0;
  for (auto m : min_exposure) sum += m;
  return sum;
}

void TinyInstance::validate() const {
  require(item_count() >= 1 && item_count() <= kMaxItems,
          "tiny instance: item count outside enumerable bounds");
  require(horizon() >= 1 && horizon() <= kMaxHorizon,
          "tiny instance: horizon outside enumerable bounds");
  require(k >= 1 && k <= kMaxK, "tiny instance: k outside enumerable bounds");
  require(k <= item_count(), "tiny instance: k exceeds item count");
  require(group_count() >= 1, "tiny instance: no groups");
  std::vector<int> sizes(static_cast<std::size_t>(group_count()), 0);
  for (int g : groups) {
    require(g >= 0 && g < group_count(), "tiny instance: group out of range");
    ++sizes[static_cast<std::size_t>(g)];
  }
  for (int n : sizes) require(n > 0, "tiny instance: empty group");
  for (const auto& row : scores)
    require(static_cast<int>(row.size()) == item_count(),
            "tiny instance: ragged score matrix");
  for (auto m : min_exposure) require(m >= 0, "tiny instance: negative minimum");
}

PrimalResult primal_optimum(const TinyInstance& inst) {
  inst.validate();
  const int items = inst.item_count();
  const int groups = inst.group_count();

  // Per-step options: every K-subset as (score, packed group counts).
  struct Option {
    double score;
    std::uint64_t counts;
  };
  std::vector<std::vector<Option>> options(static_cast<std::size_t>(inst.horizon()));
  std::vector<int> pick(static_cast<std::size_t>(inst.k));
  for (int t = 0; t < inst.horizon(); ++t) {
    auto& opts = options[static_cast<std::size_t>(t)];
    // Enumerate combinations of item indices in lexicographic order.
    for (int i = 0; i < inst.k; ++i) pick[static_cast<std::size_t>(i)] = i;
    while (true) {
      double score = 0.0;
      std::uint64_t counts = 0;
      for (int idx : pick) {
        score += inst.scores[static_cast<std::size_t>(t)][static_cast<std::size_t>(idx)];
        counts += std::uint64_t{1}
                  << (kCountBits * inst.groups[static_cast<std::size_t>(idx)]);
      }
      opts.push_back({score, counts});
      int j = inst.k - 1;
      while (j >= 0 && pick[static_cast<std::size_t>(j)] == items - inst.k + j) --j;
      if (j < 0) break;
      ++pick[static_cast<std::size_t>(j)];
      for (int l = j + 1; l < inst.k; ++l)
        pick[static_cast<std::size_t>(l)] = pick[static_cast<std::size_t>(l - 1)] + 1;
    }
  }

  std::unordered_map<std::uint64_t, double> best;
  best[0] = 0.0;
  for (const auto& opts : options) {
    std::unordered_map<std::uint64_t, double> next;
    next.reserve(best.size() * opts.size());
    for (const auto& [state, value] : best) {
      for (const Option& opt : opts) {
        const std::uint64_t key = state + opt.counts;  // 4-bit lanes cannot carry
        const double candidate = value + opt.score;
        auto [it, inserted] = next.try_emplace(key, candidate);
        if (!inserted && candidate > it->second) it->second = candidate;
      }
    }
    best = std::move(next);
  }

  PrimalResult result;
  for (const auto& [state, value] : best) {
    bool ok = true;
    for (int g = 0; g < groups; ++g) {
      const auto count = (state >> (kCountBits * g)) & 0xF;
      if (static_cast<std::int64_t>(count) < inst.min_exposure[static_cast<std::size_t>(g)]) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    if (!result.feasible || value > result.value) {
      result.feasible = true;
      result.value = value;
    }
  }
  return result;
}

double topk_sum(const std::vector<double>& values, int k) {
  require(k >= 0 && k <= static_cast<int>(values.size()), "topk_sum: k out of range");
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double sum = 0.0;
  for (int i = 0; i < k; ++i) sum += sorted[static_cast<std::size_t>(i)];
  return sum;
}

double dual_objective(const DualVector& mu, const TinyInstance& inst) {
  require(static_cast<int>(mu.size()) == inst.group_count(),
          "dual_objective: mu size mismatch");
  double value = 0.0;
  for (const auto& row : inst.scores)
    value += topk_sum(adjusted_scores(row, inst.groups, mu), inst.k);
  return value + penalty_terms(mu, inst.min_exposure, inst.total_slots());
}

double step_dual_objective(const DualVector& mu, const std::vector<double>& row_scores,
                           const std::vector<int>& groups, const FairnessSpec& spec) {
  require(static_cast<int>(mu.size()) == spec.group_count(),
          "step_dual_objective: mu size mismatch");
  const double top = topk_sum(adjusted_scores(row_scores, groups, mu), spec.k);
  return top + penalty_terms(mu, spec.min_exposure, spec.total_slots());
}

namespace {

// Analytic subgradient of dual_objective at mu (oracle-side derivation,
// used only to steer the polish phase).
std::vector<double> instance_subgradient(const DualVector& mu, const TinyInstance& inst) {
  std::vector<double> g(mu.size(), 0.0);
  for (const auto& row : inst.scores) {
    const auto adjusted = adjusted_scores(row, inst.groups, mu);
    for (int idx : topk_items(adjusted, inst.k))
      g[static_cast<std::size_t>(inst.groups[static_cast<std::size_t>(idx)])] -= 1.0;
  }
  std::size_t top = 0;
  std::int64_t m_sum = 0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu[i] > mu[top]) top = i;
    m_sum += inst.min_exposure[i];
    g[i] += static_cast<double>(inst.min_exposure[i]);
  }
  g[top] += static_cast<double>(inst.total_slots() - m_sum);
  return g;
}

}  // namespace

DualSearchResult dual_optimum(const TinyInstance& inst, int grid_rounds,
                              int polish_iters) {
  inst.validate();
  const int groups = inst.group_count();
  require(groups <= 5, "dual_optimum: too many groups for grid search");
  double r_max = 0.0;
  for (const auto& row : inst.scores)
    for (double v : row) r_max = std::max(r_max, std::abs(v));

  // The objective is invariant under uniform shifts of mu, so the search can
  // live in [0, hi]^G.
  const double hi = 4.0 * r_max + 1.0;
  DualVector center(static_cast<std::size_t>(groups), hi / 2.0);
  double width = hi / 2.0;
  DualVector best_mu = center;
  double best_value = dual_objective(center, inst);

  constexpr int kPointsPerDim = 7;
  std::vector<int> digit(static_cast<std::size_t>(groups), 0);
  DualVector point(static_cast<std::size_t>(groups));
  for (int round = 0; round < grid_rounds; ++round) {
    std::fill(digit.begin(), digit.end(), 0);
    DualVector round_best_mu = best_mu;
    double round_best = best_value;
    while (true) {
      for (int g = 0; g < groups; ++g) {
        const double frac =
            static_cast<double>(digit[static_cast<std::size_t>(g)]) / (kPointsPerDim - 1);
        point[static_cast<std::size_t>(g)] =
            center[static_cast<std::size_t>(g)] - width + 2.0 * width * frac;
      }
      const double value = dual_objective(point, inst);
      if (value < round_best) {
        round_best = value;
        round_best_mu = point;
      }
      int g = 0;
      while (g < groups && ++digit[static_cast<std::size_t>(g)] == kPointsPerDim) {
        digit[static_cast<std::size_t>(g)] = 0;
        ++g;
      }
      if (g == groups) break;
    }
    best_value = round_best;
    best_mu = round_best_mu;
    center = best_mu;
    width *= 0.55;
  }

  // Subgradient polish with diminishing steps; keeps the best point seen.
  DualVector mu = best_mu;
  for (int j = 1; j <= polish_iters; ++j) {
    const auto g = instance_subgradient(mu, inst);
    double norm = 0.0;
    for (double v : g) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) break;
    const double step = (0.5 * r_max + 0.1) / (std::sqrt(static_cast<double>(j)) * norm);
    for (std::size_t i = 0; i < mu.size(); ++i) mu[i] -= step * g[i];
    const double value = dual_objective(mu, inst);
    if (value < best_value) {
      best_value = value;
      best_mu = mu;
    }
  }

  DualSearchResult result;
  result.value = best_value;
  result.mu = best_mu;
  result.budget_exhausted = width > 0.02 * (1.0 + r_max);
  return result;
}

double knapsack_closed_form(const DualVector& mu, const std::vector<std::int64_t>& m,
                            std::int64_t total) {
  require(mu.size() == m.size(), "knapsack: size mismatch");
  require(!mu.empty(), "knapsack: empty instance");
  std::int64_t m_sum = 0;
  for (auto v : m) m_sum += v;
  require(m_sum <= total, "knapsack: infeasible (sum m > total)");
  return penalty_terms(mu, m, total);
}

namespace {

double knapsack_enumerate_rec(const DualVector& mu, const std::vector<std::int64_t>& m,
                              std::size_t g, std::int64_t remaining, double acc) {
  if (g + 1 == mu.size()) {
    // Last group absorbs the remainder; feasibility guarantees remaining >= m.
    return acc + mu[g] * static_cast<double>(remaining);
  }
  std::int64_t tail_min = 0;
  for (std::size_t j = g + 1; j < m.size(); ++j) tail_min += m[j];
  double best = -std::numeric_limits<double>::infinity();
  for (std::int64_t e = m[g]; e <= remaining - tail_min; ++e) {
    best = std::max(best, knapsack_enumerate_rec(mu, m, g + 1, remaining - e,
                                                 acc + mu[g] * static_cast<double>(e)));
  }
  return best;
}

}  // namespace

double knapsack_enumerate(const DualVector& mu, const std::vector<std::int64_t>& m,
                          std::int64_t total) {
  require(mu.size() == m.size(), "knapsack: size mismatch");
  require(!mu.empty(), "knapsack: empty instance");
  std::int64_t m_sum = 0;
  for (auto v : m) m_sum += v;
  require(m_sum <= total, "knapsack: infeasible (sum m > total)");
  return knapsack_enumerate_rec(mu, m, 0, total, 0.0);
}

bool topk_concavity_check(const std::vector<double>& x, const std::vector<double>& y,
                          double lambda, int k, double tolerance) {
  require(x.size() == y.size(), "concavity: size mismatch");
  require(k >= 1 && k <= static_cast<int>(x.size()), "concavity: k out of range");
  require(lambda >= 0.0 && lambda <= 1.0, "concavity: lambda outside [0,1]");
  std::vector<double> blend(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    blend[i] = lambda * x[i] + (1.0 - lambda) * y[i];
  const double lhs = topk_sum(blend, k);
  const double rhs = lambda * topk_sum(x, k) + (1.0 - lambda) * topk_sum(y, k);
  return lhs <= rhs + tolerance;
}

FdCheckResult fd_subgradient_check(const DualVector& mu, const TinyInstance& inst,
                                   double h, bool printed_sign) {
  inst.validate();
  require(h > 0.0, "fd check: h must be positive");
  require(static_cast<int>(mu.size()) == inst.group_count(), "fd check: mu size mismatch");
  FdCheckResult result;

  // Reject instances where a +-h perturbation could change the argmax of mu
  // or the per-step top-K membership: the subgradient set is not a singleton
  // near such points.
  if (mu.size() > 1) {
    std::vector<double> sorted = mu;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    if (sorted[0] - sorted[1] < 10.0 * h) {
      result.degenerate = true;
      return result;
    }
  }
  for (const auto& row : inst.scores) {
    const auto adjusted = adjusted_scores(row, inst.groups, mu);
    if (inst.k >= static_cast<int>(adjusted.size())) continue;
    std::vector<double> sorted = adjusted;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    if (sorted[static_cast<std::size_t>(inst.k - 1)] -
            sorted[static_cast<std::size_t>(inst.k)] <
        10.0 * h) {
      result.degenerate = true;
      return result;
    }
  }

  // Assemble the analytic gradient from the coordinator's per-list formula;
  // the horizon-level penalty terms are counted once, not per step.
  FairnessSpec spec;
  spec.min_exposure = inst.min_exposure;
  spec.horizon = inst.horizon();
  spec.k = inst.k;
  std::vector<double> analytic(mu.size(), 0.0);
  for (const auto& row : inst.scores) {
    const auto adjusted = adjusted_scores(row, inst.groups, mu);
    CandidateList list;
    for (int idx : topk_items(adjusted, inst.k))
      list.entries.push_back({idx, inst.groups[static_cast<std::size_t>(idx)],
                              -adjusted[static_cast<std::size_t>(idx)]});
    auto s = subgradient(list, mu, spec);
    if (printed_sign) {
      // Negative control: re-add the exposure counts with the sign used by
      // the uncorrected formula.
      const auto exp = group_exposures(list, inst.group_count());
      for (std::size_t g = 0; g < s.size(); ++g)
        s[g] += 2.0 * static_cast<double>(exp[g]);
    }
    for (std::size_t g = 0; g < s.size(); ++g) analytic[g] += s[g];
  }
  std::size_t top = 0;
  std::int64_t m_sum = 0;
  for (std::size_t g = 0; g < mu.size(); ++g) {
    if (mu[g] > mu[top]) top = g;
    m_sum += inst.min_exposure[g];
  }
  const double over = static_cast<double>(inst.horizon() - 1);
  for (std::size_t g = 0; g < mu.size(); ++g)
    analytic[g] -= over * static_cast<double>(inst.min_exposure[g]);
  analytic[top] -= over * static_cast<double>(inst.total_slots() - m_sum);

  result.analytic = analytic;
  result.finite_difference.resize(mu.size());
  for (std::size_t g = 0; g < mu.size(); ++g) {
    DualVector plus = mu, minus = mu;
    plus[g] += h;
    minus[g] -= h;
    const double fd = (dual_objective(plus, inst) - dual_objective(minus, inst)) / (2.0 * h);
    result.finite_difference[g] = fd;
    const double err = std::abs(analytic[g] - fd) / std::max(1.0, std::abs(fd));
    if (err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_coordinate = static_cast<int>(g);
    }
  }
  return result;
}

TinyInstance random_feasible_instance(Rng& rng, const InstanceOptions& opt) {
  TinyInstance inst;
  const int items = static_cast<int>(rng.range(2, opt.max_items));
  const int horizon = static_cast<int>(rng.range(1, opt.max_horizon));
  inst.k = static_cast<int>(rng.range(1, std::min(opt.max_k, items)));
  const int groups = static_cast<int>(rng.range(2, std::min(opt.max_groups, items)));

  inst.groups.resize(static_cast<std::size_t>(items));
  for (int i = 0; i < items; ++i)
    inst.groups[static_cast<std::size_t>(i)] =
        i < groups ? i : static_cast<int>(rng.bounded(static_cast<std::uint64_t>(groups)));

  inst.scores.assign(static_cast<std::size_t>(horizon), {});
  for (auto& row : inst.scores) {
    row.resize(static_cast<std::size_t>(items));
    for (double& v : row) v = rng.uniform(-1.0, 1.0);
  }

  std::vector<int> sizes(static_cast<std::size_t>(groups), 0);
  for (int g : inst.groups) ++sizes[static_cast<std::size_t>(g)];
  inst.min_exposure.resize(static_cast<std::size_t>(groups));
  const std::int64_t slots = static_cast<std::int64_t>(horizon) * inst.k;
  std::int64_t m_sum = 0;
  for (int g = 0; g < groups; ++g) {
    const std::int64_t cap = static_cast<std::int64_t>(horizon) *
                             std::min<std::int64_t>(inst.k, sizes[static_cast<std::size_t>(g)]);
    std::int64_t m = rng.range(0, cap);
    if (!opt.tight_minimums && m > 0 && rng.uniform() < 0.5) m = m / 2;
    inst.min_exposure[static_cast<std::size_t>(g)] = m;
    m_sum += m;
  }
  // Trim until the counting bound holds; the per-group caps keep it feasible.
  while (m_sum > slots) {
    const auto g = rng.bounded(static_cast<std::uint64_t>(groups));
    if (inst.min_exposure[g] > 0) {
      --inst.min_exposure[g];
      --m_sum;
    }
  }
  return inst;
}

}  // namespace fairsync::oracle
