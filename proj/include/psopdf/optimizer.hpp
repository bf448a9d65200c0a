#pragma once

#include <cstdint>
#include <utility>

#include "psopdf/nn.hpp"

namespace psopdf::optim {

/// Exponential step decay: lr(t) = a * b^floor(t / s) + delta_min.
struct DecaySchedule {
  double a = 1e-3;
  double b = 0.5;
  std::uint64_t s = 20000;
  double delta_min = 1e-7;

  void validate() const;

  /// Full-scale values: s = 200000.
  static DecaySchedule paper() { return {1e-3, 0.5, 200000, 1e-7}; }
  /// Desk-scale default, s scaled down tenfold.
  static DecaySchedule desk() { return {1e-3, 0.5, 20000, 1e-7}; }
};

double lr_at(const DecaySchedule& schedule, std::uint64_t t);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::uint64_t t = 0;
  AdamConfig config;

  static AdamState fresh(std::size_t param_count, AdamConfig config = {});
};

/// One bias-corrected Adam update. Throws std::domain_error on a non-finite
/// gradient and std::invalid_argument on a length mismatch.
std::pair<AdamState, nn::NetworkParams> adam_step(const AdamState& state,
                                                  const nn::NetworkParams& params,
                                                  const Eigen::VectorXd& grad, double lr);

/// In-place variant used by the training loop; same arithmetic.
void adam_step_inplace(AdamState& state, Eigen::VectorXd& theta, const Eigen::VectorXd& grad,
                       double lr);

}  // namespace psopdf::optim
