#pragma once

#include <span>
#include <vector>

#include "psopdf/nn.hpp"
#include "psopdf/random.hpp"

namespace psopdf::testing {

// Fan-in init followed by a random shift of every parameter.
inline nn::NetworkParams random_net(const nn::Topology& topology, std::uint64_t seed,
                                    double jitter = 0.3) {
  nn::NetworkParams base = nn::init_params(topology, seed);
  RandomStream stream(seed, 77);
  Eigen::VectorXd theta = base.theta();
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] += stream.uniform(-jitter, jitter);
  return nn::NetworkParams(topology, theta);
}

inline nn::PointMatrix uniform_points(std::size_t dim, std::size_t count, double low, double high,
                                      RandomStream& stream) {
  nn::PointMatrix out(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(count));
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    for (Eigen::Index d = 0; d < out.rows(); ++d) out(d, j) = stream.uniform(low, high);
  }
  return out;
}

inline std::span<const double> column(const nn::PointMatrix& m, Eigen::Index j) {
  return {m.col(j).data(), static_cast<std::size_t>(m.rows())};
}

// Second forward implementation reading theta by index, in long double.
inline long double reference_forward(const nn::Topology& topology, const Eigen::VectorXd& theta,
                              std::span<const double> x) {
  const std::vector<std::size_t> widths = topology.widths();
  std::vector<long double> act(x.begin(), x.end());
  std::size_t at = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t fan_in = widths[l];
    const std::size_t fan_out = widths[l + 1];
    const std::size_t bias_at = at + fan_in * fan_out;
    std::vector<long double> next(fan_out);
    for (std::size_t r = 0; r < fan_out; ++r) {
      long double z = theta[static_cast<Eigen::Index>(bias_at + r)];
      for (std::size_t c = 0; c < fan_in; ++c) {
        z += static_cast<long double>(theta[static_cast<Eigen::Index>(at + r * fan_in + c)]) * act[c];
      }
      const bool last = l + 2 == widths.size();
      next[r] = last ? z : (z > 0 ? z : 0);
    }
    at = bias_at + fan_out;
    act = std::move(next);
  }
  return act[0];
}

inline Eigen::VectorXd finite_difference(const nn::NetworkParams& params, std::span<const double> x,
                                  double h) {
  Eigen::VectorXd grad(static_cast<Eigen::Index>(params.param_count()));
  Eigen::VectorXd theta = params.theta();
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double keep = theta[i];
    theta[i] = keep + h;
    const long double up = reference_forward(params.topology(), theta, x);
    theta[i] = keep - h;
    const long double down = reference_forward(params.topology(), theta, x);
    theta[i] = keep;
    grad[i] = static_cast<double>((up - down) / (2.0L * h));
  }
  return grad;
}

}  // namespace psopdf::testing
