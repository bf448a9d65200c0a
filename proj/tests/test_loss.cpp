#include <doctest.h>

#include <cmath>
#include <limits>

#include "psopdf/loss.hpp"
#include "support.hpp"

using namespace psopdf;
using density::DensitySpec;
using testing::column;
using testing::random_net;
using testing::uniform_points;

namespace {

const DensitySpec kProposal = density::proposal_for(DensitySpec::cosine(), 0.0);

// Batch value of the stop-gradient-free loss, written out from per-point
// evaluations.
double monitor_scalar(const nn::NetworkParams& params, const nn::PointMatrix& up,
                      const nn::PointMatrix& down) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < up.cols(); ++i) {
    const double fu = nn::evaluate(params, column(up, i));
    const double fd = nn::evaluate(params, column(down, i));
    total += -density::pdf_eval(kProposal, column(up, i)) * fu + 0.5 * fd * fd;
  }
  return total / static_cast<double>(up.cols());
}

Eigen::VectorXd monitor_fd(const nn::NetworkParams& params, const nn::PointMatrix& up,
                           const nn::PointMatrix& down, double h) {
  Eigen::VectorXd theta = params.theta();
  Eigen::VectorXd grad(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double keep = theta[i];
    theta[i] = keep + h;
    const double plus = monitor_scalar(nn::NetworkParams(params.topology(), theta), up, down);
    theta[i] = keep - h;
    const double minus = monitor_scalar(nn::NetworkParams(params.topology(), theta), up, down);
    theta[i] = keep;
    grad[i] = (plus - minus) / (2.0 * h);
  }
  return grad;
}

// The loss with the magnitude bracket differentiated as well.
Eigen::VectorXd fully_differentiated(const nn::NetworkParams& params, const nn::PointMatrix& up,
                                     const nn::PointMatrix& down) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.param_count()));
  for (Eigen::Index i = 0; i < up.cols(); ++i) {
    const double pd = density::pdf_eval(kProposal, column(up, i));
    const double fd = nn::evaluate(params, column(down, i));
    grad += -pd * nn::grad_params(params, column(up, i)) + 2.0 * fd * nn::grad_params(params, column(down, i));
  }
  return grad / static_cast<double>(up.cols());
}

nn::NetworkParams with_output_bias(const nn::NetworkParams& params, double shift) {
  Eigen::VectorXd theta = params.theta();
  theta[theta.size() - 1] += shift;
  return {params.topology(), theta};
}

}  // namespace

TEST_CASE("pdf loss gradient equals the derivative of the monitor") {
  const nn::Topology t{2, {16, 16}};
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto params = random_net(t, seed);
    RandomStream s(seed + 100);
    const auto up = uniform_points(2, 32, -2.0, 2.0, s);
    const auto down = uniform_points(2, 32, -2.0, 2.0, s);
    const auto lg = loss::pdf_loss_grad(params, up, down, kProposal);
    const auto fd = monitor_fd(params, up, down, 1e-5);
    CHECK((lg.grad - fd).norm() / fd.norm() < 1e-6);
    CHECK(lg.monitor == doctest::Approx(monitor_scalar(params, up, down)).epsilon(1e-12));
    CHECK(lg.monitor == doctest::Approx(lg.up_term + lg.down_term).epsilon(1e-14));

    const auto direct = loss::no_stop_grad_grad(params, up, down, kProposal);
    CHECK((direct.grad - lg.grad).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(loss::monitor_value(params, up, down, kProposal) == doctest::Approx(lg.monitor).epsilon(1e-12));
  }
}

TEST_CASE("magnitude factor carries no gradient") {
  const nn::Topology t{2, {16, 16}};
  const auto params = random_net(t, 4);
  RandomStream s(5);
  const auto up = uniform_points(2, 8, -2.0, 2.0, s);
  const auto down = uniform_points(2, 8, -2.0, 2.0, s);
  REQUIRE(nn::evaluate_batch(params, down).cwiseAbs().minCoeff() > 0.0);
  const auto lg = loss::pdf_loss_grad(params, up, down, kProposal);
  const auto wrong = fully_differentiated(params, up, down);
  CHECK((lg.grad - wrong).norm() > 1e-3 * wrong.norm());
}

TEST_CASE("zero network: only the up push acts, through the output bias") {
  const nn::Topology t{2, {8}};
  const nn::NetworkParams zero(t, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(t.param_count())));
  RandomStream s(6);
  const auto up = uniform_points(2, 10, -2.0, 2.0, s);
  const auto down = uniform_points(2, 10, -2.0, 2.0, s);
  const auto lg = loss::pdf_loss_grad(zero, up, down, kProposal);
  CHECK(lg.down_term == 0.0);
  CHECK(lg.grad.head(lg.grad.size() - 1).isZero(0.0));
  CHECK(lg.grad[lg.grad.size() - 1] == doctest::Approx(-1.0 / 16.0));
}

TEST_CASE("co-located single pair gives (f - p_D) grad f") {
  const nn::Topology t{2, {16}};
  const auto params = random_net(t, 7);
  nn::PointMatrix x(2, 1);
  x << 0.3, -1.1;
  const auto lg = loss::pdf_loss_grad(params, x, x, kProposal);
  const double f = nn::evaluate(params, column(x, 0));
  const Eigen::VectorXd expected = (f - 1.0 / 16.0) * nn::grad_params(params, column(x, 0));
  CHECK((lg.grad - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("support-safe loss") {
  const nn::Topology t{2, {16}};
  const auto params = random_net(t, 8);
  RandomStream s(9);
  const auto up = uniform_points(2, 16, -2.0, 2.0, s);
  const auto down = uniform_points(2, 16, -2.0, 2.0, s);
  const double top = nn::evaluate_batch(params, up).maxCoeff();
  const auto pdf = loss::pdf_loss_grad(params, up, down, kProposal);
  const auto capped_high = loss::support_safe_grad(params, up, down, kProposal, top + 1.0);
  CHECK(capped_high.grad == pdf.grad);

  nn::PointMatrix u(2, 1);
  u << 0.5, 0.5;
  nn::PointMatrix d(2, 1);
  d << -1.0, 1.5;
  const auto lifted = with_output_bias(params, 2.0);
  REQUIRE(nn::evaluate(lifted, column(u, 0)) > 0.05);
  const auto plain = loss::pdf_loss_grad(lifted, u, d, kProposal);
  const auto safe = loss::support_safe_grad(lifted, u, d, kProposal, 0.05);
  const Eigen::VectorXd reversal = 2.0 / 16.0 * nn::grad_params(lifted, column(u, 0));
  CHECK((safe.grad - plain.grad - reversal).cwiseAbs().maxCoeff() < 1e-14);
  CHECK_THROWS(loss::support_safe_grad(params, up, down, kProposal, 0.0));
}

TEST_CASE("simple loss") {
  const nn::Topology t{2, {16, 16}};
  const auto params = random_net(t, 10);
  RandomStream s(11);
  const auto x = uniform_points(2, 12, -2.0, 2.0, s);
  CHECK(loss::simple_loss_grad(params, x, x).grad.cwiseAbs().maxCoeff() < 1e-14);

  // Find a pair where the push condition on gradient similarity holds.
  bool tested = false;
  for (int attempt = 0; attempt < 50 && !tested; ++attempt) {
    const auto u = uniform_points(2, 1, -2.0, 2.0, s);
    const auto d = uniform_points(2, 1, -2.0, 2.0, s);
    const double guu = nn::gradient_similarity(params, column(u, 0), column(u, 0));
    const double gdd = nn::gradient_similarity(params, column(d, 0), column(d, 0));
    const double gud = nn::gradient_similarity(params, column(u, 0), column(d, 0));
    if (!(gud < guu && gud < gdd)) continue;
    const auto lg = loss::simple_loss_grad(params, u, d);
    CHECK(lg.up_term == doctest::Approx(-nn::evaluate(params, column(u, 0))));
    CHECK(lg.down_term == doctest::Approx(nn::evaluate(params, column(d, 0))));
    const auto stepped = nn::apply_update(params, lg.grad, -1e-4);
    CHECK(nn::evaluate(stepped, column(u, 0)) > nn::evaluate(params, column(u, 0)));
    CHECK(nn::evaluate(stepped, column(d, 0)) < nn::evaluate(params, column(d, 0)));
    tested = true;
  }
  CHECK(tested);
}

TEST_CASE("point loss") {
  const nn::Topology t{2, {4}};
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(t.param_count()));
  const std::vector<double> z{0.0, 0.0};

  RandomStream quiet(12);
  const nn::NetworkParams any = random_net(t, 13);
  for (int i = 0; i < 100; ++i) {
    CHECK(loss::point_loss_step(any, 1e-12, 1e-12, z, quiet).grad.isZero(0.0));
  }

  // At f = p_up / p_down the mean push vanishes; below it the surface rises.
  auto mean_push = [&](double height) {
    theta[theta.size() - 1] = height;
    const nn::NetworkParams p(t, theta);
    RandomStream s(14);
    const int n = 400000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += loss::point_loss_step(p, 0.9, 0.15, z, s).grad[theta.size() - 1];
    return sum / n;
  };
  // Per-step coefficient -1_U + 1_D f has standard deviation below 2.5 at f = 6.
  CHECK(std::abs(mean_push(6.0)) < 5.0 * 2.5 / std::sqrt(400000.0));
  CHECK(mean_push(5.0) == doctest::Approx(-0.9 + 0.15 * 5.0).epsilon(0.05));
  CHECK(mean_push(7.0) > 0.0);

  RandomStream s(15);
  CHECK_THROWS(loss::point_loss_step(any, 0.0, 0.5, z, s));
  CHECK_THROWS(loss::point_loss_step(any, 0.5, 1.5, z, s));
}

TEST_CASE("validation and names") {
  CHECK_THROWS(loss::validate(loss::SupportSafe{-1.0}));
  CHECK_THROWS(loss::validate(loss::PointLoss{0.5, 0.0}));
  CHECK_NOTHROW(loss::validate(loss::PointLoss{1.0, 1.0}));
  CHECK(loss::loss_name(loss::PdfLoss{}) == "pdf");
  CHECK(loss::loss_name(loss::SupportSafe{0.1}) == "support-safe");
  CHECK(loss::loss_name(loss::SimpleLoss{}) == "simple");
}

TEST_CASE("proposal must wrap the up samples") {
  const nn::Topology t{2, {4}};
  const auto params = random_net(t, 16);
  nn::PointMatrix up(2, 2);
  up << 0.0, 3.0, 0.0, 0.0;
  const nn::PointMatrix down = nn::PointMatrix::Zero(2, 2);
  CHECK_THROWS_AS(loss::pdf_loss_grad(params, up, down, kProposal), std::domain_error);
  CHECK_THROWS_AS(loss::pdf_loss_grad(params, up, nn::PointMatrix::Zero(2, 3), kProposal),
                  std::invalid_argument);
}

TEST_CASE("single precision batch loss tracks double") {
  const nn::Topology t{2, {64, 64}};
  const auto params = random_net(t, 17, 0.05);
  RandomStream s(18);
  const auto up = uniform_points(2, 200, -2.0, 2.0, s);
  const auto down = uniform_points(2, 200, -2.0, 2.0, s);
  const Eigen::VectorXd pd = loss::proposal_density_at(kProposal, up);
  loss::BatchLoss<double> exact;
  loss::BatchLoss<float> single;
  const auto a = exact.compute(loss::PdfLoss{}, params, up, down, pd);
  const auto b = single.compute(loss::PdfLoss{}, params, up, down, pd);
  CHECK((a.grad - b.grad).norm() < 1e-4 * a.grad.norm());
  CHECK(std::abs(a.monitor - b.monitor) < 1e-5 * std::max(1.0, std::abs(a.monitor)));
}
