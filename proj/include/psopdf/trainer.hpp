#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "psopdf/densities.hpp"
#include "psopdf/loss.hpp"
#include "psopdf/nn.hpp"
#include "psopdf/optimizer.hpp"

namespace psopdf::train {

using ConfigDigest = std::array<std::uint8_t, 16>;

enum class Precision { Float32, Float64 };

/// Where up samples come from: the analytic sampler of a density, or a fixed
/// pool drawn with replacement.
class SampleSource {
public:
  static SampleSource from_density(density::DensitySpec spec);
  static SampleSource from_pool(nn::PointMatrix pool);

  std::size_t dim() const;
  void draw(RandomStream& stream, nn::PointMatrix& out) const;
  bool is_pool() const { return std::holds_alternative<nn::PointMatrix>(source_); }
  const nn::PointMatrix* pool() const { return std::get_if<nn::PointMatrix>(&source_); }

private:
  explicit SampleSource(std::variant<density::DensitySpec, nn::PointMatrix> source)
      : source_(std::move(source)) {}

  std::variant<density::DensitySpec, nn::PointMatrix> source_;
};

/// One point per line, comma separated; blank lines and '#' comments skipped.
nn::PointMatrix load_samples_csv(const std::filesystem::path& path, std::size_t dim);

struct TrainConfig {
  density::DensitySpec target = density::DensitySpec::cosine();
  double proposal_margin = 0.0;
  std::size_t batch_size = 1000;
  std::uint64_t iterations = 200000;
  loss::LossKind loss = loss::PdfLoss{};
  nn::Topology topology{2, {128, 128, 128}};
  optim::DecaySchedule schedule = optim::DecaySchedule::desk();
  optim::AdamConfig adam;
  std::uint64_t seed = 1;
  std::uint64_t monitor_every = 1000;
  std::uint64_t checkpoint_every = 10000;
  /// 0: fresh target samples every iteration; otherwise a pool of this many
  /// target samples is drawn once and resampled with replacement.
  std::size_t pool_size = 0;
  /// Explicit up-sample pool (e.g. from a file); overrides pool_size.
  std::optional<nn::PointMatrix> samples;
  /// Abort once max |f| on the probe grid exceeds this multiple of the target
  /// peak. 0 disables the check.
  double divergence_factor = 0.0;
  /// Stop after this many monitor windows without a new best monitor value.
  /// 0 disables early stopping.
  std::uint64_t early_stop_patience = 0;
  Precision precision = Precision::Float32;

  void validate() const;
  /// Canonical key=value description; the digest is taken over this text.
  std::string describe() const;
};

ConfigDigest config_digest(const TrainConfig& config);

struct TrainRecord {
  std::uint64_t iteration = 0;
  double lr = 0.0;
  /// Mean per-iteration monitor over the window ending at iteration.
  double monitor = 0.0;
  double max_abs_f = 0.0;
  double max_ratio = 0.0;
};

struct TrainReport {
  std::vector<TrainRecord> records;
  bool stopped_early = false;

  /// Header: iteration,lr,monitor,max_abs_f,max_ratio
  void write_csv(std::ostream& out) const;
  void write_csv(const std::filesystem::path& path) const;
};

/// Trained surface plus the proposal it was trained against.
struct PdfModel {
  nn::NetworkParams params;
  density::DensitySpec proposal;
  ConfigDigest config_hash{};
  double final_monitor = 0.0;

  const density::SupportBox& support() const { return proposal.support(); }
};

/// max(f(x), 0) inside the proposal support, 0 outside it.
double proxy_pdf(const PdfModel& model, std::span<const double> x);
Eigen::VectorXd proxy_pdf_batch(const PdfModel& model, const nn::PointMatrix& points);

/// Training stopped on a non-finite value or a runaway surface.
class NumericalAbort : public std::runtime_error {
public:
  enum class Reason { NonFinite, Diverged };

  NumericalAbort(Reason reason, const std::string& message, std::uint64_t iteration,
                 double max_abs_f, TrainReport report,
                 std::optional<nn::NetworkParams> checkpoint);

  Reason reason() const { return reason_; }
  std::uint64_t iteration() const { return iteration_; }
  double max_abs_f() const { return max_abs_f_; }
  const TrainReport& report() const { return report_; }
  /// Last checkpoint with finite parameters, if any was taken.
  const std::optional<nn::NetworkParams>& checkpoint() const { return checkpoint_; }

private:
  Reason reason_;
  std::uint64_t iteration_;
  double max_abs_f_;
  TrainReport report_;
  std::optional<nn::NetworkParams> checkpoint_;
};

struct TrainResult {
  PdfModel model;
  TrainReport report;
};

/// The batch training loop: per iteration draw N up and N down samples,
/// assemble the configured loss gradient and take one Adam step at lr_at(t).
/// Throws NumericalAbort on instability.
TrainResult train(const TrainConfig& config);

/// 33^n lattice over a box, used for max |f| diagnostics.
nn::PointMatrix probe_grid(const density::SupportBox& box, std::size_t per_dim = 33);

struct PointDemoConfig {
  double p_up = 0.9;
  double p_down = 0.15;
  std::vector<double> point{0.0, 0.0};
  nn::Topology topology{2, {16}};
  optim::DecaySchedule schedule{1e-2, 0.5, 5000, 1e-6};
  optim::AdamConfig adam;
  std::uint64_t iterations = 50000;
  std::uint64_t record_every = 10;
  std::uint64_t seed = 1;
};

struct PointDemoReport {
  std::vector<std::pair<std::uint64_t, double>> series;  // (iteration, f(x_z))
  double final_value = 0.0;

  /// Header: iteration,f
  void write_csv(std::ostream& out) const;
};

/// Adam on the single-point loss; the surface at the point settles at
/// p_up / p_down.
PointDemoReport train_point(const PointDemoConfig& config);

/// A model file that is missing, truncated or malformed.
class ModelFormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

void save_model(const PdfModel& model, const std::filesystem::path& path);
/// Throws ModelFormatError naming the defect on an unreadable file.
PdfModel load_model(const std::filesystem::path& path);

}  // namespace psopdf::train
