#include "psopdf/kde.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace psopdf::kde {

namespace {

const double kLogMinPositive = std::log(std::numeric_limits<double>::denorm_min());

double log_normalizer(std::size_t dim, double h) {
  return -0.5 * static_cast<double>(dim) * std::log(2.0 * std::numbers::pi * h * h);
}

double select_best(std::span<const double> candidates, const std::vector<double>& scores) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  if (!std::isfinite(scores[best])) {
    throw std::runtime_error("kde: every bandwidth candidate gives zero heldout likelihood");
  }
  return candidates[best];
}

void check_candidates(std::span<const double> candidates) {
  if (candidates.empty()) throw std::invalid_argument("kde: no bandwidth candidates");
  for (double h : candidates) {
    if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("kde: bandwidths must be positive");
  }
}

}  // namespace

KdeModel::KdeModel(nn::PointMatrix samples, double bandwidth)
    : samples_(std::move(samples)), bandwidth_(bandwidth) {
  if (samples_.cols() < 1 || samples_.rows() < 1) throw std::invalid_argument("kde: no samples");
  if (!(bandwidth_ > 0.0) || !std::isfinite(bandwidth_)) {
    throw std::invalid_argument("kde: bandwidth must be positive");
  }
}

double kde_pdf(const KdeModel& model, std::span<const double> x) {
  if (x.size() != model.dim()) throw std::invalid_argument("kde: query dimension mismatch");
  const Eigen::Map<const Eigen::VectorXd> q(x.data(), static_cast<Eigen::Index>(x.size()));
  const double h = model.bandwidth();
  const double scale = -0.5 / (h * h);
  const Eigen::ArrayXd d2 = (model.samples().colwise() - q).colwise().squaredNorm().transpose().array();
  const double sum = (d2 * scale).exp().sum();
  return sum * std::exp(log_normalizer(model.dim(), h)) / static_cast<double>(model.size());
}

Eigen::VectorXd kde_pdf_batch(const KdeModel& model, const nn::PointMatrix& queries) {
  Eigen::VectorXd out(queries.cols());
  for (Eigen::Index i = 0; i < queries.cols(); ++i) {
    out[i] = kde_pdf(model, std::span<const double>(queries.col(i).data(),
                                                    static_cast<std::size_t>(queries.rows())));
  }
  return out;
}

std::vector<double> heldout_log_likelihood(const nn::PointMatrix& samples,
                                           std::span<const double> bandwidths,
                                           const nn::PointMatrix& heldout) {
  if (samples.cols() < 1 || heldout.cols() < 1) {
    throw std::invalid_argument("kde: samples and heldout must be non-empty");
  }
  if (samples.rows() != heldout.rows()) throw std::invalid_argument("kde: heldout dimension mismatch");
  const auto dim = static_cast<std::size_t>(samples.rows());
  const double log_m = std::log(static_cast<double>(samples.cols()));
  std::vector<double> totals(bandwidths.size(), 0.0);
  Eigen::ArrayXd d2(samples.cols());
  for (Eigen::Index j = 0; j < heldout.cols(); ++j) {
    d2 = (samples.colwise() - heldout.col(j)).colwise().squaredNorm().transpose().array();
    const double d2_min = d2.minCoeff();
    for (std::size_t c = 0; c < bandwidths.size(); ++c) {
      const double h = bandwidths[c];
      const double scale = -0.5 / (h * h);
      // log sum exp(scale * d2), shifted by the largest term.
      const double log_sum = scale * d2_min + std::log(((d2 - d2_min) * scale).exp().sum());
      const double log_p = log_sum - log_m + log_normalizer(dim, h);
      // A density that kde_pdf itself would return as 0 scores -inf.
      totals[c] += log_p < kLogMinPositive ? -std::numeric_limits<double>::infinity() : log_p;
    }
  }
  for (double& t : totals) t /= static_cast<double>(heldout.cols());
  return totals;
}

double fit_bandwidth(const nn::PointMatrix& samples, std::span<const double> candidates,
                     const nn::PointMatrix& heldout) {
  check_candidates(candidates);
  return select_best(candidates, heldout_log_likelihood(samples, candidates, heldout));
}

std::vector<double> log_spaced(double low, double high, std::size_t count) {
  if (count == 0 || !(low > 0.0) || !(high >= low)) {
    throw std::invalid_argument("log_spaced: need count >= 1 and 0 < low <= high");
  }
  if (count == 1) return {low};
  std::vector<double> out(count);
  const double step = std::log(high / low) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) out[i] = low * std::exp(step * static_cast<double>(i));
  out.back() = high;
  return out;
}

std::vector<double> default_bandwidth_grid() { return log_spaced(1e-2, 1.0, 20); }

KdeFit fit_with_holdout(const nn::PointMatrix& samples, std::span<const double> candidates,
                        double heldout_fraction, RandomStream& stream) {
  check_candidates(candidates);
  if (!(heldout_fraction > 0.0 && heldout_fraction < 1.0)) {
    throw std::invalid_argument("kde: heldout fraction must lie in (0, 1)");
  }
  const Eigen::Index m = samples.cols();
  const auto heldout_count = static_cast<Eigen::Index>(std::llround(heldout_fraction * static_cast<double>(m)));
  if (heldout_count < 1 || heldout_count >= m) {
    throw std::invalid_argument("kde: too few samples for a heldout split");
  }
  // Fisher-Yates shuffle of column indices.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::swap(order[i], order[stream.below(i + 1)]);
  }
  nn::PointMatrix heldout(samples.rows(), heldout_count);
  nn::PointMatrix fit(samples.rows(), m - heldout_count);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto src = order[static_cast<std::size_t>(i)];
    if (i < heldout_count) {
      heldout.col(i) = samples.col(src);
    } else {
      fit.col(i - heldout_count) = samples.col(src);
    }
  }
  std::vector<double> scores = heldout_log_likelihood(fit, candidates, heldout);
  const double h = select_best(candidates, scores);
  return {KdeModel(samples, h), {candidates.begin(), candidates.end()}, std::move(scores)};
}

}  // namespace psopdf::kde
