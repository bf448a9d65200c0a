#include "psopdf/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace psopdf::optim {

void DecaySchedule::validate() const {
  if (!(a >= 0.0) || !std::isfinite(a)) throw std::invalid_argument("schedule: a must be >= 0");
  if (!(b > 0.0 && b < 1.0)) throw std::invalid_argument("schedule: b must lie in (0, 1)");
  if (s == 0) throw std::invalid_argument("schedule: s must be >= 1");
  if (!(delta_min >= 0.0) || !std::isfinite(delta_min)) {
    throw std::invalid_argument("schedule: delta_min must be >= 0");
  }
}

double lr_at(const DecaySchedule& schedule, std::uint64_t t) {
  const auto steps = static_cast<double>(t / schedule.s);
  return schedule.a * std::pow(schedule.b, steps) + schedule.delta_min;
}

void AdamConfig::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("adam: beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("adam: beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("adam: epsilon must be > 0");
}

AdamState AdamState::fresh(std::size_t param_count, AdamConfig config) {
  config.validate();
  const auto n = static_cast<Eigen::Index>(param_count);
  return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0, config};
}

void adam_step_inplace(AdamState& state, Eigen::VectorXd& theta, const Eigen::VectorXd& grad,
                       double lr) {
  if (grad.size() != theta.size() || state.m.size() != theta.size() ||
      state.v.size() != theta.size()) {
    throw std::invalid_argument("adam: gradient/state length does not match param count");
  }
  if (!grad.allFinite()) throw std::domain_error("adam: non-finite gradient");
  const AdamConfig& c = state.config;
  state.t += 1;
  state.m = c.beta1 * state.m + (1.0 - c.beta1) * grad;
  state.v = c.beta2 * state.v + (1.0 - c.beta2) * grad.cwiseAbs2();
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  theta.array() -= lr * (state.m.array() / correction1) /
                   ((state.v.array() / correction2).sqrt() + c.epsilon);
}

std::pair<AdamState, nn::NetworkParams> adam_step(const AdamState& state,
                                                  const nn::NetworkParams& params,
                                                  const Eigen::VectorXd& grad, double lr) {
  AdamState next = state;
  Eigen::VectorXd theta = params.theta();
  adam_step_inplace(next, theta, grad, lr);
  return {std::move(next), nn::NetworkParams(params.topology(), std::move(theta))};
}

}  // namespace psopdf::optim
