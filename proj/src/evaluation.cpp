#include "psopdf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace psopdf::eval {

BatchPdf as_batch(const density::DensitySpec& spec) {
  return [spec](const nn::PointMatrix& points) { return density::pdf_eval_batch(spec, points); };
}

BatchPdf as_batch(const train::PdfModel& model) {
  return [&model](const nn::PointMatrix& points) { return train::proxy_pdf_batch(model, points); };
}

GridSpec GridSpec::regular(const density::SupportBox& box, std::size_t per_dim) {
  GridSpec grid{std::vector<std::size_t>(box.dim(), per_dim), box};
  grid.validate();
  return grid;
}

void GridSpec::validate() const {
  box.validate();
  if (counts.size() != box.dim()) throw std::invalid_argument("grid: counts/box dimension mismatch");
  for (std::size_t c : counts) {
    if (c < 2) throw std::invalid_argument("grid: need at least 2 points per dimension");
  }
}

std::size_t GridSpec::size() const {
  std::size_t total = 1;
  for (std::size_t c : counts) total *= c;
  return total;
}

nn::PointMatrix GridSpec::points() const {
  validate();
  const std::size_t total = size();
  nn::PointMatrix out(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(total));
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t rest = i;
    for (std::size_t d = dim(); d-- > 0;) {
      const std::size_t k = rest % counts[d];
      rest /= counts[d];
      const double t = static_cast<double>(k) / static_cast<double>(counts[d] - 1);
      // Pin the last point to the exact upper bound.
      out(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(i)) =
          k + 1 == counts[d] ? box.high[d] : box.low[d] + (box.high[d] - box.low[d]) * t;
    }
  }
  return out;
}

Eigen::VectorXd GridSpec::trapezoid_weights() const {
  validate();
  const std::size_t total = size();
  Eigen::VectorXd w(static_cast<Eigen::Index>(total));
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t rest = i;
    double weight = 1.0;
    for (std::size_t d = dim(); d-- > 0;) {
      const std::size_t k = rest % counts[d];
      rest /= counts[d];
      const double h = (box.high[d] - box.low[d]) / static_cast<double>(counts[d] - 1);
      weight *= (k == 0 || k + 1 == counts[d]) ? 0.5 * h : h;
    }
    w[static_cast<Eigen::Index>(i)] = weight;
  }
  return w;
}

std::size_t grid_points_for(std::string_view preset, std::size_t dim) {
  if (preset == "paper-grid") return 257;
  if (preset == "desk") return dim >= 3 ? 33 : 65;
  throw std::invalid_argument("unknown grid preset '" + std::string(preset) +
                              "' (expected desk or paper-grid)");
}

namespace {

Eigen::VectorXd checked_eval(const BatchPdf& estimator, const nn::PointMatrix& points) {
  Eigen::VectorXd values = estimator(points);
  if (values.size() != points.cols()) throw std::logic_error("estimator returned wrong length");
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      std::ostringstream msg;
      msg << "estimator is non-finite at grid point " << i;
      throw std::domain_error(msg.str());
    }
  }
  return values;
}

void check_inside(const GridSpec& grid, const density::SupportBox& support) {
  if (grid.dim() != support.dim()) throw std::invalid_argument("grid dimension does not match density");
  for (std::size_t d = 0; d < grid.dim(); ++d) {
    if (grid.box.low[d] < support.low[d] || grid.box.high[d] > support.high[d]) {
      throw std::invalid_argument("grid extends outside the density's support box");
    }
  }
}

}  // namespace

double l2_on_grid(const BatchPdf& estimator, const density::DensitySpec& truth,
                  const GridSpec& grid) {
  check_inside(grid, truth.support());
  const nn::PointMatrix points = grid.points();
  const Eigen::VectorXd estimate = checked_eval(estimator, points);
  const Eigen::VectorXd exact = density::pdf_eval_batch(truth, points);
  return (exact - estimate).squaredNorm() / static_cast<double>(points.cols());
}

double integral_on_grid(const BatchPdf& estimator, const GridSpec& grid) {
  const Eigen::VectorXd values = checked_eval(estimator, grid.points());
  return grid.trapezoid_weights().dot(values);
}

EvalReport evaluate_on_grid(const BatchPdf& estimator, const density::DensitySpec& truth,
                            const GridSpec& grid, std::string estimator_id) {
  check_inside(grid, truth.support());
  EvalReport report;
  report.grid = grid;
  report.points = grid.points();
  report.estimate = checked_eval(estimator, report.points);
  report.truth = density::pdf_eval_batch(truth, report.points);
  const Eigen::VectorXd residual = report.truth - report.estimate;
  report.l2 = residual.squaredNorm() / static_cast<double>(residual.size());
  report.integral = grid.trapezoid_weights().dot(report.estimate);
  report.min_residual = residual.minCoeff();
  report.max_residual = residual.maxCoeff();
  report.estimator_id = std::move(estimator_id);
  report.truth_id = truth.name();
  return report;
}

std::string EvalReport::summary_line() const {
  std::ostringstream out;
  out.precision(10);
  out << "l2=" << l2 << " integral=" << integral;
  return out.str();
}

void EvalReport::write_csv(std::ostream& out, bool gnuplot) const {
  const char sep = gnuplot ? ' ' : ',';
  const auto dim = static_cast<std::size_t>(points.rows());
  if (gnuplot) out << "# ";
  for (std::size_t d = 0; d < dim; ++d) out << 'x' << d << sep;
  out << "truth" << sep << "estimate" << sep << "residual\n";
  out.precision(12);
  const std::size_t scan = grid.counts.back();
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    for (std::size_t d = 0; d < dim; ++d) out << points(static_cast<Eigen::Index>(d), i) << sep;
    out << truth[i] << sep << estimate[i] << sep << truth[i] - estimate[i] << '\n';
    if (gnuplot && (static_cast<std::size_t>(i) + 1) % scan == 0) out << '\n';
  }
  out << "# estimator=" << estimator_id << " truth=" << truth_id << " l2=" << l2
      << " integral=" << integral << '\n';
}

DifferentialStats differential_check(const nn::NetworkParams& params, Push push,
                                     std::span<const double> pushed,
                                     const nn::PointMatrix& probes, double delta) {
  if (!(delta >= 0.0 && delta <= 1e-2)) {
    throw std::invalid_argument("differential_check: delta must lie in [0, 1e-2]");
  }
  const double sign = push == Push::Down ? 1.0 : -1.0;
  const Eigen::VectorXd grad_pushed = nn::grad_params(params, pushed);
  const nn::NetworkParams stepped = nn::apply_update(params, grad_pushed, -sign * delta);

  DifferentialStats stats;
  std::vector<double> errors;
  for (Eigen::Index i = 0; i < probes.cols(); ++i) {
    const std::span<const double> probe(probes.col(i).data(), static_cast<std::size_t>(probes.rows()));
    const double before = nn::evaluate(params, probe);
    const double after = nn::evaluate(stepped, probe);
    const double predicted = -sign * delta * nn::grad_params(params, probe).dot(grad_pushed);
    const double measured = after - before;
    stats.predicted.push_back(predicted);
    stats.measured.push_back(measured);
    if (std::abs(predicted) < 1e-12) {
      ++stats.excluded;
      continue;
    }
    errors.push_back(std::abs(measured - predicted) / std::abs(predicted));
  }
  stats.used = errors.size();
  if (!errors.empty()) {
    stats.max_rel_error = *std::max_element(errors.begin(), errors.end());
    const auto mid = errors.begin() + static_cast<std::ptrdiff_t>(errors.size() / 2);
    std::nth_element(errors.begin(), mid, errors.end());
    if (errors.size() % 2 == 1) {
      stats.median_rel_error = *mid;
    } else {
      const double upper = *mid;
      const double lower = *std::max_element(errors.begin(), mid);
      stats.median_rel_error = 0.5 * (lower + upper);
    }
  }
  return stats;
}

ForceField force_field(const nn::NetworkParams& params, const density::DensitySpec& target,
                       const density::DensitySpec& proposal, const GridSpec& grid) {
  const nn::PointMatrix points = grid.points();
  const Eigen::VectorXd p_up = density::pdf_eval_batch(target, points);
  const Eigen::VectorXd p_down = density::pdf_eval_batch(proposal, points);
  const Eigen::VectorXd f = nn::evaluate_batch(params, points);
  ForceField field;
  field.up = p_up.cwiseProduct(p_down);
  field.down = p_down.cwiseProduct(f);
  field.total = field.up - field.down;
  return field;
}

DivergenceVerdict divergence_probe(train::TrainConfig config, double factor) {
  if (!(factor > 0.0)) throw std::invalid_argument("divergence factor must be positive");
  config.divergence_factor = factor;
  DivergenceVerdict verdict;
  try {
    train::TrainResult result = train::train(config);
    verdict.report = std::move(result.report);
    verdict.iteration = verdict.report.records.empty() ? 0 : verdict.report.records.back().iteration;
    verdict.max_abs_f = verdict.report.records.empty() ? 0.0 : verdict.report.records.back().max_abs_f;
    verdict.reason = "max |f| stayed within " + std::to_string(factor) + "x the target peak";
  } catch (const train::NumericalAbort& abort) {
    verdict.diverged = true;
    verdict.iteration = abort.iteration();
    verdict.max_abs_f = abort.max_abs_f();
    verdict.reason = abort.what();
    verdict.report = abort.report();
  }
  return verdict;
}

}  // namespace psopdf::eval
