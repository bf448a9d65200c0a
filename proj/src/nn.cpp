#include "psopdf/nn.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <type_traits>

#include "psopdf/random.hpp"

namespace psopdf::nn {

namespace {

void check_dim(const NetworkParams& params, std::size_t got) {
  if (got != params.input_dim()) {
    throw std::invalid_argument("input dimension mismatch: network expects " +
                                std::to_string(params.input_dim()) + ", got " +
                                std::to_string(got));
  }
}

void check_finite(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite network input");
  }
}

}  // namespace

std::vector<std::size_t> Topology::widths() const {
  std::vector<std::size_t> w;
  w.reserve(hidden.size() + 2);
  w.push_back(input_dim);
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(1);
  return w;
}

std::size_t Topology::param_count() const {
  const auto w = widths();
  std::size_t count = 0;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) count += w[l] * w[l + 1] + w[l + 1];
  return count;
}

void Topology::validate() const {
  if (input_dim == 0) throw std::invalid_argument("topology: input_dim must be >= 1");
  if (hidden.empty()) throw std::invalid_argument("topology: at least one hidden layer required");
  for (std::size_t h : hidden) {
    if (h == 0) throw std::invalid_argument("topology: hidden widths must be positive");
  }
}

NetworkParams::NetworkParams(Topology topology, Eigen::VectorXd theta)
    : topology_(std::move(topology)), theta_(std::move(theta)) {
  topology_.validate();
  widths_ = topology_.widths();
  if (static_cast<std::size_t>(theta_.size()) != topology_.param_count()) {
    throw std::invalid_argument("theta length " + std::to_string(theta_.size()) +
                                " does not match topology param count " +
                                std::to_string(topology_.param_count()));
  }
  if (!theta_.allFinite()) throw std::invalid_argument("theta contains non-finite entries");
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    offsets_.push_back(offset);
    offset += widths_[l] * widths_[l + 1] + widths_[l + 1];
  }
}

ConstWeightMap NetworkParams::weights(std::size_t layer) const {
  return ConstWeightMap(theta_.data() + offsets_[layer],
                        static_cast<Eigen::Index>(widths_[layer + 1]),
                        static_cast<Eigen::Index>(widths_[layer]));
}

ConstBiasMap NetworkParams::bias(std::size_t layer) const {
  return ConstBiasMap(theta_.data() + offsets_[layer] + widths_[layer] * widths_[layer + 1],
                      static_cast<Eigen::Index>(widths_[layer + 1]));
}

NetworkParams init_params(const Topology& topology, std::uint64_t seed) {
  topology.validate();
  const auto widths = topology.widths();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(topology.param_count()));
  RandomStream rng(seed);
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t fan_in = widths[l];
    const std::size_t count = widths[l] * widths[l + 1];
    const double half_width = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i) {
      theta[static_cast<Eigen::Index>(offset + i)] = rng.uniform(-half_width, half_width);
    }
    offset += count + widths[l + 1];
  }
  return NetworkParams(topology, std::move(theta));
}

ForwardResult forward(const NetworkParams& params, std::span<const double> x) {
  check_dim(params, x.size());
  check_finite(x);
  ForwardResult result;
  auto& trace = result.trace;
  trace.activations.emplace_back(
      Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())));
  const std::size_t layers = params.layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::VectorXd z = params.weights(l) * trace.activations.back() + params.bias(l);
    trace.pre_activations.push_back(z);
    if (l + 1 < layers) trace.activations.push_back(z.cwiseMax(0.0));
  }
  result.value = trace.pre_activations.back()[0];
  return result;
}

double evaluate(const NetworkParams& params, std::span<const double> x) {
  check_dim(params, x.size());
  Eigen::VectorXd a =
      Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  const std::size_t layers = params.layer_count();
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    a = (params.weights(l) * a + params.bias(l)).cwiseMax(0.0);
  }
  return params.weights(layers - 1).row(0).dot(a) + params.bias(layers - 1)[0];
}

Eigen::VectorXd grad_params(const NetworkParams& params, std::span<const double> x) {
  const ForwardResult fwd = forward(params, x);
  const auto& acts = fwd.trace.activations;
  const auto widths = params.topology().widths();
  const std::size_t layers = params.layer_count();

  Eigen::VectorXd grad(static_cast<Eigen::Index>(params.param_count()));
  Eigen::VectorXd delta = Eigen::VectorXd::Ones(1);  // d f / d z_out
  for (std::size_t l = layers; l-- > 0;) {
    const auto fan_in = static_cast<Eigen::Index>(widths[l]);
    const auto fan_out = static_cast<Eigen::Index>(widths[l + 1]);
    const auto offset = static_cast<Eigen::Index>(params.weight_offset(l));
    Eigen::Map<RowMajorMatrix>(grad.data() + offset, fan_out, fan_in).noalias() =
        delta * acts[l].transpose();
    grad.segment(offset + fan_out * fan_in, fan_out) = delta;
    if (l > 0) {
      Eigen::VectorXd back = params.weights(l).transpose() * delta;
      // ReLU subgradient at exactly zero is zero.
      delta = (fwd.trace.pre_activations[l - 1].array() > 0.0).select(back, 0.0);
    }
  }
  return grad;
}

double gradient_similarity(const NetworkParams& params, std::span<const double> x1,
                           std::span<const double> x2) {
  const Eigen::VectorXd g1 = grad_params(params, x1);
  const Eigen::VectorXd g2 = grad_params(params, x2);
  // Plain sequential sum; symmetric in the arguments bit for bit.
  double sum = 0.0;
  for (Eigen::Index i = 0; i < g1.size(); ++i) sum += g1[i] * g2[i];
  return sum;
}

NetworkParams apply_update(const NetworkParams& params, const Eigen::VectorXd& direction,
                           double scale) {
  if (static_cast<std::size_t>(direction.size()) != params.param_count()) {
    throw std::invalid_argument("update direction length does not match param count");
  }
  if (!direction.allFinite() || !std::isfinite(scale)) {
    throw std::invalid_argument("update direction or scale is non-finite");
  }
  return NetworkParams(params.topology(), params.theta() + scale * direction);
}

template <typename Scalar>
const Scalar* BatchEvaluator<Scalar>::load_theta(const NetworkParams& params) {
  if constexpr (std::is_same_v<Scalar, double>) {
    return params.theta().data();
  } else {
    theta_ = params.theta().template cast<Scalar>();
    return theta_.data();
  }
}

template <typename Scalar>
const typename BatchEvaluator<Scalar>::Row& BatchEvaluator<Scalar>::forward(
    const NetworkParams& params, const Matrix& points) {
  using WeightMap = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using BiasMap = Eigen::Map<const Vector>;
  check_dim(params, static_cast<std::size_t>(points.rows()));
  theta_ptr_ = load_theta(params);
  const auto widths = params.topology().widths();
  const std::size_t layers = params.layer_count();
  activations_.resize(layers);
  activations_[0] = points;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto fan_in = static_cast<Eigen::Index>(widths[l]);
    const auto fan_out = static_cast<Eigen::Index>(widths[l + 1]);
    const Scalar* block = theta_ptr_ + params.weight_offset(l);
    WeightMap w(block, fan_out, fan_in);
    BiasMap b(block + fan_out * fan_in, fan_out);
    if (l + 1 < layers) {
      auto& next = activations_[l + 1];
      next.noalias() = w * activations_[l];
      next.colwise() += b;
      next = next.cwiseMax(Scalar(0));
    } else {
      output_.noalias() = w * activations_[l];
      output_.array() += b[0];
    }
  }
  return output_;
}

template <typename Scalar>
void BatchEvaluator<Scalar>::backward(const NetworkParams& params, const Row& coefficients,
                                      Eigen::VectorXd& grad) {
  using WeightMap = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using GradMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  const std::size_t layers = params.layer_count();
  if (activations_.size() != layers || coefficients.size() != output_.size() ||
      theta_ptr_ == nullptr) {
    throw std::logic_error("BatchEvaluator::backward without a matching forward pass");
  }
  const auto widths = params.topology().widths();
  grad_.resize(static_cast<Eigen::Index>(params.param_count()));

  // Output layer: its delta is the coefficient row itself.
  {
    const std::size_t l = layers - 1;
    const auto fan_in = static_cast<Eigen::Index>(widths[l]);
    const auto offset = static_cast<Eigen::Index>(params.weight_offset(l));
    WeightMap w(theta_ptr_ + offset, 1, fan_in);
    grad_.segment(offset, fan_in).noalias() = activations_[l] * coefficients.transpose();
    grad_[offset + fan_in] = coefficients.sum();
    delta_.noalias() = w.transpose() * coefficients;
    delta_ = (activations_[l].array() > Scalar(0)).select(delta_, Scalar(0));
  }
  for (std::size_t l = layers - 1; l-- > 0;) {
    const auto fan_in = static_cast<Eigen::Index>(widths[l]);
    const auto fan_out = static_cast<Eigen::Index>(widths[l + 1]);
    const auto offset = static_cast<Eigen::Index>(params.weight_offset(l));
    GradMap(grad_.data() + offset, fan_out, fan_in).noalias() =
        delta_ * activations_[l].transpose();
    grad_.segment(offset + fan_out * fan_in, fan_out).noalias() = delta_.rowwise().sum();
    if (l > 0) {
      WeightMap w(theta_ptr_ + offset, fan_out, fan_in);
      delta_prev_.noalias() = w.transpose() * delta_;
      // ReLU subgradient at exactly zero is zero.
      delta_ = (activations_[l].array() > Scalar(0)).select(delta_prev_, Scalar(0));
    }
  }
  grad = grad_.template cast<double>();
}

template class BatchEvaluator<double>;
template class BatchEvaluator<float>;

Eigen::VectorXd evaluate_batch(const NetworkParams& params, const PointMatrix& points) {
  BatchEvaluator<double> evaluator;
  return evaluator.forward(params, points).transpose();
}

}  // namespace psopdf::nn
