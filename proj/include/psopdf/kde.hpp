#pragma once

#include <span>
#include <vector>

#include "psopdf/nn.hpp"
#include "psopdf/random.hpp"

namespace psopdf::kde {

/// Isotropic Gaussian kernel density estimate over a fixed sample set.
/// Queries are naive O(M) sums.
class KdeModel {
public:
  /// samples: one point per column. Throws unless bandwidth > 0 and M >= 1.
  KdeModel(nn::PointMatrix samples, double bandwidth);

  double bandwidth() const { return bandwidth_; }
  const nn::PointMatrix& samples() const { return samples_; }
  std::size_t dim() const { return static_cast<std::size_t>(samples_.rows()); }
  std::size_t size() const { return static_cast<std::size_t>(samples_.cols()); }

private:
  nn::PointMatrix samples_;
  double bandwidth_;
};

double kde_pdf(const KdeModel& model, std::span<const double> x);
Eigen::VectorXd kde_pdf_batch(const KdeModel& model, const nn::PointMatrix& queries);

/// Mean log kde_pdf over heldout for each bandwidth. The kernel sum is taken
/// in log space; a heldout point whose density is below the smallest
/// positive double contributes -inf, matching kde_pdf returning 0 there.
std::vector<double> heldout_log_likelihood(const nn::PointMatrix& samples,
                                           std::span<const double> bandwidths,
                                           const nn::PointMatrix& heldout);

/// Candidate with the highest mean heldout log-likelihood (first one on
/// ties). Throws std::runtime_error if every candidate scores -inf.
double fit_bandwidth(const nn::PointMatrix& samples, std::span<const double> candidates,
                     const nn::PointMatrix& heldout);

/// count values log-spaced over [low, high].
std::vector<double> log_spaced(double low, double high, std::size_t count);
/// 20 candidates from 1e-2 to 1.
std::vector<double> default_bandwidth_grid();

struct KdeFit {
  KdeModel model;
  std::vector<double> candidates;
  std::vector<double> scores;
};

/// Random heldout split of the given fraction, bandwidth search on it, then
/// a final fit on all samples with the chosen bandwidth.
KdeFit fit_with_holdout(const nn::PointMatrix& samples, std::span<const double> candidates,
                        double heldout_fraction, RandomStream& stream);

}  // namespace psopdf::kde
