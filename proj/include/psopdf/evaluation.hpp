#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "psopdf/densities.hpp"
#include "psopdf/nn.hpp"
#include "psopdf/trainer.hpp"

namespace psopdf::eval {

/// Any pdf estimate evaluated on a batch of points (one per column).
using BatchPdf = std::function<Eigen::VectorXd(const nn::PointMatrix&)>;

BatchPdf as_batch(const density::DensitySpec& spec);
BatchPdf as_batch(const train::PdfModel& model);

/// Regular lattice over a box with counts[d] points along dimension d,
/// endpoints included. Points are enumerated with the last dimension
/// varying fastest.
struct GridSpec {
  std::vector<std::size_t> counts;
  density::SupportBox box;

  static GridSpec regular(const density::SupportBox& box, std::size_t per_dim);

  void validate() const;
  std::size_t dim() const { return counts.size(); }
  std::size_t size() const;
  nn::PointMatrix points() const;
  /// Product trapezoid weights; their sum equals the box volume.
  Eigen::VectorXd trapezoid_weights() const;
};

/// Points per dimension for a named grid preset: "desk" gives 65 in 2D and
/// 33 in 3D, "paper-grid" gives 257.
std::size_t grid_points_for(std::string_view preset, std::size_t dim);

/// Mean squared residual between estimator and truth over the grid. The
/// grid must lie inside the truth's support box.
double l2_on_grid(const BatchPdf& estimator, const density::DensitySpec& truth,
                  const GridSpec& grid);

/// Trapezoid-rule integral of the estimator over the grid box.
double integral_on_grid(const BatchPdf& estimator, const GridSpec& grid);

struct EvalReport {
  GridSpec grid;
  nn::PointMatrix points;
  Eigen::VectorXd truth;
  Eigen::VectorXd estimate;
  double l2 = 0.0;
  double integral = 0.0;
  double min_residual = 0.0;  // min of truth - estimate
  double max_residual = 0.0;
  std::string estimator_id;
  std::string truth_id;

  /// CSV rows x0..x{n-1},truth,estimate,residual and a trailing
  /// "# l2=...,integral=..." summary line. With gnuplot set, whitespace
  /// separated with a blank line after every scan line (splot-ready).
  void write_csv(std::ostream& out, bool gnuplot = false) const;
  std::string summary_line() const;
};

EvalReport evaluate_on_grid(const BatchPdf& estimator, const density::DensitySpec& truth,
                            const GridSpec& grid, std::string estimator_id = "estimate");

enum class Push { Down, Up };

struct DifferentialStats {
  double median_rel_error = 0.0;
  double max_rel_error = 0.0;
  std::size_t used = 0;
  std::size_t excluded = 0;  // |predicted| < 1e-12
  std::vector<double> predicted;
  std::vector<double> measured;
};

/// One plain gradient step of size delta on L = f(pushed) (Push::Down) or
/// L = -f(pushed) (Push::Up), then compares the measured height change at
/// every probe with the first-order prediction -/+ delta * g(probe, pushed).
/// Requires 0 <= delta <= 1e-2.
DifferentialStats differential_check(const nn::NetworkParams& params, Push push,
                                     std::span<const double> pushed,
                                     const nn::PointMatrix& probes, double delta);

/// F_U = p_U p_D, F_D = p_D f and F_T = F_U - F_D at every grid point.
struct ForceField {
  Eigen::VectorXd up;
  Eigen::VectorXd down;
  Eigen::VectorXd total;
};

ForceField force_field(const nn::NetworkParams& params, const density::DensitySpec& target,
                       const density::DensitySpec& proposal, const GridSpec& grid);

struct DivergenceVerdict {
  bool diverged = false;
  std::uint64_t iteration = 0;  // where training stopped
  double max_abs_f = 0.0;
  std::string reason;
  train::TrainReport report;
};

/// Trains with config while watching max |f| on the probe grid; diverged
/// when it exceeds factor times the target peak or a value goes non-finite.
DivergenceVerdict divergence_probe(train::TrainConfig config, double factor = 10.0);

}  // namespace psopdf::eval
