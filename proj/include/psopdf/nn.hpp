#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace psopdf::nn {

/// Points are stored one per column: a batch of N points in R^n is n x N.
using PointMatrix = Eigen::MatrixXd;
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeightMap = Eigen::Map<const RowMajorMatrix>;
using ConstBiasMap = Eigen::Map<const Eigen::VectorXd>;

/// Fully connected ReLU stack with a single linear output unit.
struct Topology {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden;

  /// input_dim, hidden..., 1
  std::vector<std::size_t> widths() const;
  std::size_t layer_count() const { return hidden.size() + 1; }
  std::size_t param_count() const;
  /// Throws std::invalid_argument on an empty hidden list or a zero width.
  void validate() const;

  bool operator==(const Topology&) const = default;
};

/// Topology plus the flat parameter vector theta.
///
/// Layout (part of the model file contract): for each layer in order, the
/// weight matrix in row-major order (fan_out rows by fan_in columns), then
/// that layer's bias vector.
class NetworkParams {
public:
  NetworkParams(Topology topology, Eigen::VectorXd theta);

  const Topology& topology() const { return topology_; }
  const Eigen::VectorXd& theta() const { return theta_; }
  std::size_t param_count() const { return static_cast<std::size_t>(theta_.size()); }
  std::size_t input_dim() const { return topology_.input_dim; }
  std::size_t layer_count() const { return topology_.layer_count(); }

  ConstWeightMap weights(std::size_t layer) const;
  ConstBiasMap bias(std::size_t layer) const;
  /// Offset of a layer's weight block inside theta; its bias follows
  /// immediately after fan_out * fan_in entries.
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }

private:
  Topology topology_;
  Eigen::VectorXd theta_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> widths_;
};

/// Pre-activations and activations of every layer for one input. The last
/// pre-activation is the scalar network output.
struct ForwardTrace {
  std::vector<Eigen::VectorXd> pre_activations;
  std::vector<Eigen::VectorXd> activations;  // activations[0] is the input
};

struct ForwardResult {
  double value = 0.0;
  ForwardTrace trace;
};

/// Fan-in scaled uniform weights, half-width sqrt(6 / fan_in); zero biases.
NetworkParams init_params(const Topology& topology, std::uint64_t seed);

ForwardResult forward(const NetworkParams& params, std::span<const double> x);

/// forward() without materialising the trace.
double evaluate(const NetworkParams& params, std::span<const double> x);

/// d f(x; theta) / d theta by reverse-mode accumulation.
Eigen::VectorXd grad_params(const NetworkParams& params, std::span<const double> x);

/// g(x1, x2, theta): inner product of the parameter gradients at two points.
double gradient_similarity(const NetworkParams& params, std::span<const double> x1,
                           std::span<const double> x2);

/// theta + scale * direction. Throws on length mismatch or non-finite input.
NetworkParams apply_update(const NetworkParams& params, const Eigen::VectorXd& direction,
                           double scale);

/// Batched forward/backward pass with reusable buffers.
///
/// backward() computes sum_i c_i * d f(x_i) / d theta for per-column
/// coefficients c, which is all any loss in this library needs. With
/// Scalar = float the pass runs in single precision on a rounded copy of
/// theta; the returned gradient is always double.
template <typename Scalar>
class BatchEvaluator {
public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Row = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  /// f(x_i; theta) for every column of points. Keeps activations for a
  /// subsequent backward() on the same params.
  const Row& forward(const NetworkParams& params, const Matrix& points);

  void backward(const NetworkParams& params, const Row& coefficients, Eigen::VectorXd& grad);

  const Row& output() const { return output_; }

private:
  const Scalar* load_theta(const NetworkParams& params);

  Vector theta_;  // rounded copy, unused for double
  const Scalar* theta_ptr_ = nullptr;
  std::vector<Matrix> activations_;  // post-ReLU, [0] = input
  Row output_;
  Matrix delta_;
  Matrix delta_prev_;
  Vector grad_;
};

extern template class BatchEvaluator<double>;
extern template class BatchEvaluator<float>;

/// Convenience: f at every column of points.
Eigen::VectorXd evaluate_batch(const NetworkParams& params, const PointMatrix& points);

}  // namespace psopdf::nn
