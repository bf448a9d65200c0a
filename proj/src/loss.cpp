#include "psopdf/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace psopdf::loss {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

double sign(double v) { return static_cast<double>((0.0 < v) - (v < 0.0)); }

void check_batches(const nn::NetworkParams& params, const nn::PointMatrix& up,
                   const nn::PointMatrix& down) {
  if (up.cols() == 0 || up.cols() != down.cols()) {
    throw std::invalid_argument("up and down batches must be non-empty and of equal size");
  }
  if (static_cast<std::size_t>(up.rows()) != params.input_dim() ||
      static_cast<std::size_t>(down.rows()) != params.input_dim()) {
    throw std::invalid_argument("batch dimension does not match network input");
  }
}

}  // namespace

void validate(const LossKind& kind) {
  std::visit(Overloaded{
                 [](const SupportSafe& s) {
                   if (!(s.p_max > 0.0) || !std::isfinite(s.p_max)) {
                     throw std::invalid_argument("support-safe loss needs p_max > 0");
                   }
                 },
                 [](const PointLoss& p) {
                   auto ok = [](double v) { return v > 0.0 && v <= 1.0; };
                   if (!ok(p.p_up) || !ok(p.p_down)) {
                     throw std::invalid_argument("point loss probabilities must lie in (0, 1]");
                   }
                 },
                 [](const auto&) {},
             },
             kind);
}

std::string loss_name(const LossKind& kind) {
  return std::visit(Overloaded{
                        [](const PdfLoss&) { return std::string("pdf"); },
                        [](const SupportSafe&) { return std::string("support-safe"); },
                        [](const NoStopGrad&) { return std::string("no-stop-grad"); },
                        [](const SimpleLoss&) { return std::string("simple"); },
                        [](const PointLoss&) { return std::string("point"); },
                    },
                    kind);
}

Eigen::VectorXd proposal_density_at(const density::DensitySpec& proposal,
                                    const nn::PointMatrix& up) {
  Eigen::VectorXd p = density::pdf_eval_batch(proposal, up);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0)) {
      throw std::domain_error("proposal density is zero at an up sample: the proposal " +
                              proposal.name() + " does not wrap the target support");
    }
  }
  return p;
}

template <typename Scalar>
LossGrad BatchLoss<Scalar>::compute(const LossKind& kind, const nn::NetworkParams& params,
                                    const nn::PointMatrix& up, const nn::PointMatrix& down,
                                    const Eigen::VectorXd& proposal_at_up) {
  check_batches(params, up, down);
  if (std::holds_alternative<PointLoss>(kind)) {
    throw std::invalid_argument("point loss is not a batch loss; use point_loss_step");
  }
  validate(kind);
  const bool simple = std::holds_alternative<SimpleLoss>(kind);
  const Eigen::Index n = up.cols();
  if (!simple && proposal_at_up.size() != n) {
    throw std::invalid_argument("proposal density vector does not match the up batch");
  }

  combined_.resize(up.rows(), 2 * n);
  combined_.leftCols(n) = up.template cast<Scalar>();
  combined_.rightCols(n) = down.template cast<Scalar>();
  const auto& f = evaluator_.forward(params, combined_);

  const double inv_n = 1.0 / static_cast<double>(n);
  const auto* safe = std::get_if<SupportSafe>(&kind);
  coefficients_.resize(2 * n);
  LossGrad out;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double fu = static_cast<double>(f[i]);
    const double fd = static_cast<double>(f[n + i]);
    if (simple) {
      coefficients_[i] = static_cast<Scalar>(-inv_n);
      coefficients_[n + i] = static_cast<Scalar>(inv_n);
      out.up_term -= fu;
      out.down_term += fd;
      continue;
    }
    const double magnitude = safe ? sign(safe->p_max - fu) : 1.0;
    coefficients_[i] = static_cast<Scalar>(-proposal_at_up[i] * magnitude * inv_n);
    coefficients_[n + i] = static_cast<Scalar>(fd * inv_n);
    out.up_term -= proposal_at_up[i] * fu;
    out.down_term += 0.5 * fd * fd;
  }
  out.up_term *= inv_n;
  out.down_term *= inv_n;
  out.monitor = out.up_term + out.down_term;
  evaluator_.backward(params, coefficients_, out.grad);
  return out;
}

template class BatchLoss<double>;
template class BatchLoss<float>;

LossGrad pdf_loss_grad(const nn::NetworkParams& params, const nn::PointMatrix& up,
                       const nn::PointMatrix& down, const density::DensitySpec& proposal) {
  check_batches(params, up, down);
  BatchLoss<double> loss;
  return loss.compute(PdfLoss{}, params, up, down, proposal_density_at(proposal, up));
}

LossGrad support_safe_grad(const nn::NetworkParams& params, const nn::PointMatrix& up,
                           const nn::PointMatrix& down, const density::DensitySpec& proposal,
                           double p_max) {
  check_batches(params, up, down);
  BatchLoss<double> loss;
  return loss.compute(SupportSafe{p_max}, params, up, down, proposal_density_at(proposal, up));
}

LossGrad no_stop_grad_grad(const nn::NetworkParams& params, const nn::PointMatrix& up,
                           const nn::PointMatrix& down, const density::DensitySpec& proposal) {
  check_batches(params, up, down);
  BatchLoss<double> loss;
  return loss.compute(NoStopGrad{}, params, up, down, proposal_density_at(proposal, up));
}

LossGrad simple_loss_grad(const nn::NetworkParams& params, const nn::PointMatrix& up,
                          const nn::PointMatrix& down) {
  check_batches(params, up, down);
  BatchLoss<double> loss;
  return loss.compute(SimpleLoss{}, params, up, down, Eigen::VectorXd());
}

LossGrad point_loss_step(const nn::NetworkParams& params, double p_up, double p_down,
                         std::span<const double> point, RandomStream& stream) {
  validate(PointLoss{p_up, p_down});
  const bool up_hit = stream.bernoulli(p_up);
  const bool down_hit = stream.bernoulli(p_down);
  LossGrad out;
  const double f = nn::evaluate(params, point);
  out.up_term = up_hit ? -f : 0.0;
  out.down_term = down_hit ? 0.5 * f * f : 0.0;
  out.monitor = out.up_term + out.down_term;
  const double coefficient = (up_hit ? -1.0 : 0.0) + (down_hit ? f : 0.0);
  if (coefficient == 0.0) {
    out.grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.param_count()));
  } else {
    out.grad = coefficient * nn::grad_params(params, point);
  }
  return out;
}

double monitor_value(const nn::NetworkParams& params, const nn::PointMatrix& up,
                     const nn::PointMatrix& down, const density::DensitySpec& proposal) {
  check_batches(params, up, down);
  const Eigen::VectorXd pd = proposal_density_at(proposal, up);
  const Eigen::VectorXd fu = nn::evaluate_batch(params, up);
  const Eigen::VectorXd fd = nn::evaluate_batch(params, down);
  return (-(pd.array() * fu.array()).sum() + 0.5 * fd.squaredNorm()) /
         static_cast<double>(up.cols());
}

}  // namespace psopdf::loss
