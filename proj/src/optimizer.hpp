#pragma once

#include <cstdint>
#include <vector>

#include "core.hpp"

namespace fairsync {

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double eta = 1e-3;

  explicit AdamState(int size = 0, double eta_ = 1e-3)
      : first_moment(size, 0.0), second_moment(size, 0.0), eta(eta_) {}
};

// One bias-corrected Adam step minimizing over mu: positive gradient
// coordinates decrease.
DualVector adam_step(AdamState& state, const DualVector& mu,
                     const std::vector<double>& grad);

DualVector sgd_step(double eta, const DualVector& mu, const std::vector<double>& grad);

// Adam and plain SGD behind one interface; SGD exists for ablations and the
// finite-difference sanity suite.
class DualOptimizer {
 public:
  DualOptimizer(OptimizerKind kind, int size, double eta)
      : kind_(kind), eta_(eta), adam_(size, eta) {}

  DualVector step(const DualVector& mu, const std::vector<double>& grad) {
    if (kind_ == OptimizerKind::Adam) return adam_step(adam_, mu, grad);
    return sgd_step(eta_, mu, grad);
  }

  const AdamState& adam_state() const { return adam_; }

 private:
  OptimizerKind kind_;
  double eta_;
  AdamState adam_;
};

}  // namespace fairsync
