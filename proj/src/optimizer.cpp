#include "optimizer.hpp"

#include <cmath>

namespace fairsync {

DualVector adam_step(AdamState& state, const DualVector& mu,
                     const std::vector<double>& grad) {
  require(mu.size() == grad.size(), "adam_step: size mismatch");
  require(state.first_moment.size() == mu.size(), "adam_step: state size mismatch");
  for (double g : grad)
    require(std::isfinite(g), "adam_step: non-finite gradient");
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  DualVector out(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * grad[i];
    v = state.beta2 * v + (1.0 - state.beta2) * grad[i] * grad[i];
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    out[i] = mu[i] - state.eta * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
  return out;
}

DualVector sgd_step(double eta, const DualVector& mu, const std::vector<double>& grad) {
  require(mu.size() == grad.size(), "sgd_step: size mismatch");
  for (double g : grad)
    require(std::isfinite(g), "sgd_step: non-finite gradient");
  DualVector out(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) out[i] = mu[i] - eta * grad[i];
  return out;
}

}  // namespace fairsync
