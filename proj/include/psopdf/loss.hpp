#pragma once

#include <span>
#include <string>
#include <string_view>
#include <variant>

#include "psopdf/densities.hpp"
#include "psopdf/nn.hpp"
#include "psopdf/random.hpp"

namespace psopdf::loss {

/// -f(X_U) p_D(X_U) + f(X_D) [f(X_D)], the bracket being a magnitude-only
/// coefficient. Its stationary point is f = p_U.
struct PdfLoss {};
/// PdfLoss with each up term scaled by [sign(p_max - f(X_U))], which caps
/// the surface height at p_max.
struct SupportSafe {
  double p_max = 0.0;
};
/// -f(X_U) p_D(X_U) + f(X_D)^2 / 2: same gradient as PdfLoss, and its value
/// is the convergence monitor.
struct NoStopGrad {};
/// -f(X_U) + f(X_D). Has no force balance and diverges.
struct SimpleLoss {};
/// The single-point experiment: up/down pushes at one location occur with
/// probabilities p_up and p_down, so the surface settles at p_up / p_down.
struct PointLoss {
  double p_up = 0.0;
  double p_down = 0.0;
};

using LossKind = std::variant<PdfLoss, SupportSafe, NoStopGrad, SimpleLoss, PointLoss>;

void validate(const LossKind& kind);
std::string loss_name(const LossKind& kind);

/// Batch gradient plus diagnostics. For every batch loss except SimpleLoss
/// the monitor is the stop-gradient-free value -mean(p_D f(X_U)) +
/// mean(f(X_D)^2 / 2); SimpleLoss reports its own value mean(f(X_D) - f(X_U)).
/// monitor = up_term + down_term.
struct LossGrad {
  Eigen::VectorXd grad;
  double monitor = 0.0;
  double up_term = 0.0;
  double down_term = 0.0;
};

/// Batched loss assembly on top of one forward and one backward pass over
/// the concatenated up and down batches.
///
/// proposal_at_up holds p_D at every up sample; it is ignored by SimpleLoss.
template <typename Scalar>
class BatchLoss {
public:
  using Matrix = typename nn::BatchEvaluator<Scalar>::Matrix;

  LossGrad compute(const LossKind& kind, const nn::NetworkParams& params,
                   const nn::PointMatrix& up, const nn::PointMatrix& down,
                   const Eigen::VectorXd& proposal_at_up);

private:
  nn::BatchEvaluator<Scalar> evaluator_;
  Matrix combined_;
  typename nn::BatchEvaluator<Scalar>::Row coefficients_;
};

extern template class BatchLoss<double>;
extern template class BatchLoss<float>;

LossGrad pdf_loss_grad(const nn::NetworkParams& params, const nn::PointMatrix& up,
                       const nn::PointMatrix& down, const density::DensitySpec& proposal);

LossGrad support_safe_grad(const nn::NetworkParams& params, const nn::PointMatrix& up,
                           const nn::PointMatrix& down, const density::DensitySpec& proposal,
                           double p_max);

/// Differentiates the stop-gradient-free loss directly.
LossGrad no_stop_grad_grad(const nn::NetworkParams& params, const nn::PointMatrix& up,
                           const nn::PointMatrix& down, const density::DensitySpec& proposal);

LossGrad simple_loss_grad(const nn::NetworkParams& params, const nn::PointMatrix& up,
                          const nn::PointMatrix& down);

/// Draws the two Bernoulli indicators from stream and returns
/// (-1_U + 1_D f(x)) * grad f(x).
LossGrad point_loss_step(const nn::NetworkParams& params, double p_up, double p_down,
                         std::span<const double> point, RandomStream& stream);

/// Value of the stop-gradient-free loss on a batch.
double monitor_value(const nn::NetworkParams& params, const nn::PointMatrix& up,
                     const nn::PointMatrix& down, const density::DensitySpec& proposal);

/// p_D at every up sample; throws std::domain_error where it is zero.
Eigen::VectorXd proposal_density_at(const density::DensitySpec& proposal,
                                    const nn::PointMatrix& up);

}  // namespace psopdf::loss
