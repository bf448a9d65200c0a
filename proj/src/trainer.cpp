#include "psopdf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace psopdf::train {

SampleSource SampleSource::from_density(density::DensitySpec spec) {
  return SampleSource(std::move(spec));
}

SampleSource SampleSource::from_pool(nn::PointMatrix pool) {
  if (pool.cols() == 0 || pool.rows() == 0) throw std::invalid_argument("sample pool is empty");
  return SampleSource(std::move(pool));
}

std::size_t SampleSource::dim() const {
  if (const auto* spec = std::get_if<density::DensitySpec>(&source_)) return spec->dim();
  return static_cast<std::size_t>(std::get<nn::PointMatrix>(source_).rows());
}

void SampleSource::draw(RandomStream& stream, nn::PointMatrix& out) const {
  if (const auto* spec = std::get_if<density::DensitySpec>(&source_)) {
    density::sample_into(*spec, stream, out);
    return;
  }
  const auto& pool = std::get<nn::PointMatrix>(source_);
  const auto size = static_cast<std::uint64_t>(pool.cols());
  for (Eigen::Index i = 0; i < out.cols(); ++i) {
    out.col(i) = pool.col(static_cast<Eigen::Index>(stream.below(size)));
  }
}

nn::PointMatrix load_samples_csv(const std::filesystem::path& path, std::size_t dim) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open samples file " + path.string());
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::stringstream row(line);
    std::string cell;
    std::size_t count = 0;
    while (std::getline(row, cell, ',')) {
      std::size_t used = 0;
      double value = 0.0;
      try {
        value = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || cell.find_first_not_of(" \t\r", used) != std::string::npos) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                 ": not a number: '" + cell + "'");
      }
      values.push_back(value);
      ++count;
    }
    if (count != dim) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(dim) + " values, got " + std::to_string(count));
    }
  }
  if (values.empty()) throw std::runtime_error("samples file " + path.string() + " is empty");
  nn::PointMatrix out(static_cast<Eigen::Index>(dim),
                      static_cast<Eigen::Index>(values.size() / dim));
  std::copy(values.begin(), values.end(), out.data());
  return out;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
  if (iterations == 0) throw std::invalid_argument("iterations must be >= 1");
  if (monitor_every == 0) throw std::invalid_argument("monitor_every must be >= 1");
  if (checkpoint_every == 0) throw std::invalid_argument("checkpoint_every must be >= 1");
  topology.validate();
  if (topology.input_dim != target.dim()) {
    throw std::invalid_argument("network input dimension " + std::to_string(topology.input_dim) +
                                " does not match target dimension " +
                                std::to_string(target.dim()));
  }
  schedule.validate();
  adam.validate();
  loss::validate(loss);
  if (std::holds_alternative<loss::PointLoss>(loss)) {
    throw std::invalid_argument("the point loss is trained with train_point, not train");
  }
  if (!(divergence_factor >= 0.0)) throw std::invalid_argument("divergence_factor must be >= 0");
  if (!(proposal_margin >= 0.0)) throw std::invalid_argument("proposal margin must be >= 0");
  if (samples && static_cast<std::size_t>(samples->rows()) != target.dim()) {
    throw std::invalid_argument("sample file dimension does not match target");
  }
}

std::string TrainConfig::describe() const {
  std::ostringstream out;
  out.precision(17);
  out << "target=" << target.name() << '\n';
  out << "target_params=";
  for (double v : target.parameters()) out << v << ';';
  out << '\n';
  out << "proposal_margin=" << proposal_margin << '\n';
  out << "batch_size=" << batch_size << '\n';
  out << "iterations=" << iterations << '\n';
  out << "loss=" << loss::loss_name(loss) << '\n';
  if (const auto* s = std::get_if<loss::SupportSafe>(&loss)) out << "p_max=" << s->p_max << '\n';
  out << "hidden=";
  for (std::size_t h : topology.hidden) out << h << ';';
  out << '\n';
  out << "schedule=" << schedule.a << ';' << schedule.b << ';' << schedule.s << ';'
      << schedule.delta_min << '\n';
  out << "adam=" << adam.beta1 << ';' << adam.beta2 << ';' << adam.epsilon << '\n';
  out << "seed=" << seed << '\n';
  out << "pool_size=" << pool_size << '\n';
  out << "samples=" << (samples ? std::to_string(samples->cols()) : std::string("none")) << '\n';
  out << "precision=" << (precision == Precision::Float32 ? "float32" : "float64") << '\n';
  return out.str();
}

ConfigDigest config_digest(const TrainConfig& config) {
  // 128-bit FNV-1a.
  using u128 = unsigned __int128;
  const u128 prime = (u128{1} << 88) + 0x13B;
  u128 hash = (u128{0x6c62272e07bb0142ull} << 64) | 0x62b821756295c58dull;
  for (unsigned char c : config.describe()) {
    hash ^= c;
    hash *= prime;
  }
  ConfigDigest digest{};
  for (std::size_t i = 0; i < digest.size(); ++i) {
    digest[i] = static_cast<std::uint8_t>(hash >> (8 * (15 - i)));
  }
  return digest;
}

void TrainReport::write_csv(std::ostream& out) const {
  out << "iteration,lr,monitor,max_abs_f,max_ratio\n";
  out.precision(10);
  for (const auto& r : records) {
    out << r.iteration << ',' << r.lr << ',' << r.monitor << ',' << r.max_abs_f << ','
        << r.max_ratio << '\n';
  }
}

void TrainReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_csv(out);
}

double proxy_pdf(const PdfModel& model, std::span<const double> x) {
  if (density::pdf_eval(model.proposal, x) == 0.0) return 0.0;
  const double f = nn::evaluate(model.params, x);
  return f < 0.0 ? 0.0 : f;
}

Eigen::VectorXd proxy_pdf_batch(const PdfModel& model, const nn::PointMatrix& points) {
  Eigen::VectorXd f = nn::evaluate_batch(model.params, points);
  const density::SupportBox& box = model.support();
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const std::span<const double> x(points.col(i).data(), box.dim());
    if (f[i] < 0.0 || !box.contains(x)) f[i] = 0.0;
  }
  return f;
}

NumericalAbort::NumericalAbort(Reason reason, const std::string& message, std::uint64_t iteration,
                               double max_abs_f, TrainReport report,
                               std::optional<nn::NetworkParams> checkpoint)
    : std::runtime_error(message),
      reason_(reason),
      iteration_(iteration),
      max_abs_f_(max_abs_f),
      report_(std::move(report)),
      checkpoint_(std::move(checkpoint)) {}

nn::PointMatrix probe_grid(const density::SupportBox& box, std::size_t per_dim) {
  box.validate();
  if (per_dim < 2) throw std::invalid_argument("probe grid needs >= 2 points per dimension");
  const std::size_t dim = box.dim();
  std::size_t total = 1;
  for (std::size_t d = 0; d < dim; ++d) total *= per_dim;
  nn::PointMatrix grid(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(total));
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t rest = i;
    for (std::size_t d = dim; d-- > 0;) {
      const std::size_t k = rest % per_dim;
      rest /= per_dim;
      grid(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(i)) =
          box.low[d] + (box.high[d] - box.low[d]) * static_cast<double>(k) /
                           static_cast<double>(per_dim - 1);
    }
  }
  return grid;
}

namespace {

template <typename Scalar>
TrainResult run_training(const TrainConfig& config) {
  const density::DensitySpec proposal = density::proposal_for(config.target, config.proposal_margin);

  RandomStream root(config.seed);
  RandomStream up_stream = root.split(1);
  RandomStream down_stream = root.split(2);

  std::optional<SampleSource> source;
  if (config.samples) {
    source = SampleSource::from_pool(*config.samples);
  } else if (config.pool_size > 0) {
    RandomStream pool_stream = root.split(3);
    source = SampleSource::from_pool(
        density::sample_batch(config.target, config.pool_size, pool_stream));
  } else {
    source = SampleSource::from_density(config.target);
  }

  nn::NetworkParams params = nn::init_params(config.topology, config.seed);
  Eigen::VectorXd theta = params.theta();
  optim::AdamState adam = optim::AdamState::fresh(params.param_count(), config.adam);
  loss::BatchLoss<Scalar> batch_loss;

  const auto n = static_cast<Eigen::Index>(config.batch_size);
  const auto dim = static_cast<Eigen::Index>(config.target.dim());
  nn::PointMatrix up(dim, n);
  nn::PointMatrix down(dim, n);

  const nn::PointMatrix probes = probe_grid(proposal.support());
  const Eigen::VectorXd probe_proposal = density::pdf_eval_batch(proposal, probes);
  nn::BatchEvaluator<Scalar> probe_evaluator;
  const typename nn::BatchEvaluator<Scalar>::Matrix probes_cast = probes.template cast<Scalar>();
  const double divergence_limit = config.divergence_factor * config.target.peak();

  TrainReport report;
  std::optional<nn::NetworkParams> checkpoint;
  double window_sum = 0.0;
  std::uint64_t window_count = 0;
  double best_monitor = std::numeric_limits<double>::infinity();
  std::uint64_t windows_since_best = 0;
  double last_max_abs = 0.0;

  auto fail = [&](NumericalAbort::Reason reason, const std::string& what, std::uint64_t iteration) {
    throw NumericalAbort(reason,
                         what + " at iteration " + std::to_string(iteration) +
                             " (max |f| on probe grid " + std::to_string(last_max_abs) + ")",
                         iteration, last_max_abs, report, checkpoint);
  };

  for (std::uint64_t t = 0; t < config.iterations; ++t) {
    source->draw(up_stream, up);
    density::sample_into(proposal, down_stream, down);
    const Eigen::VectorXd proposal_at_up =
        std::holds_alternative<loss::SimpleLoss>(config.loss)
            ? Eigen::VectorXd()
            : loss::proposal_density_at(proposal, up);
    const loss::LossGrad lg = batch_loss.compute(config.loss, params, up, down, proposal_at_up);
    if (!std::isfinite(lg.monitor) || !lg.grad.allFinite()) {
      fail(NumericalAbort::Reason::NonFinite, "non-finite loss or gradient", t);
    }
    const double lr = optim::lr_at(config.schedule, t);
    optim::adam_step_inplace(adam, theta, lg.grad, lr);
    if (!theta.allFinite()) fail(NumericalAbort::Reason::NonFinite, "non-finite parameters", t + 1);
    params = nn::NetworkParams(config.topology, theta);

    window_sum += lg.monitor;
    ++window_count;
    const std::uint64_t done = t + 1;
    if (done % config.checkpoint_every == 0) checkpoint = params;
    if (done % config.monitor_every == 0 || done == config.iterations) {
      const auto& f = probe_evaluator.forward(params, probes_cast);
      double max_abs = 0.0;
      double max_ratio = 0.0;
      for (Eigen::Index i = 0; i < f.size(); ++i) {
        const double v = static_cast<double>(f[i]);
        max_abs = std::max(max_abs, std::abs(v));
        if (probe_proposal[i] > 0.0) max_ratio = std::max(max_ratio, v / probe_proposal[i]);
      }
      last_max_abs = max_abs;
      const double monitor = window_sum / static_cast<double>(window_count);
      report.records.push_back({done, lr, monitor, max_abs, max_ratio});
      window_sum = 0.0;
      window_count = 0;
      if (!std::isfinite(max_abs)) fail(NumericalAbort::Reason::NonFinite, "non-finite surface", done);
      if (divergence_limit > 0.0 && max_abs > divergence_limit) {
        fail(NumericalAbort::Reason::Diverged, "surface diverged", done);
      }
      if (config.early_stop_patience > 0) {
        if (monitor < best_monitor) {
          best_monitor = monitor;
          windows_since_best = 0;
        } else if (++windows_since_best >= config.early_stop_patience) {
          report.stopped_early = true;
          break;
        }
      }
    }
  }

  PdfModel model{params, proposal, config_digest(config),
                 report.records.empty() ? 0.0 : report.records.back().monitor};
  return {std::move(model), std::move(report)};
}

}  // namespace

TrainResult train(const TrainConfig& config) {
  config.validate();
  if (config.target.kind() == density::Kind::Cosine2D) density::verify_cosine_normalizer();
  if (config.precision == Precision::Float64) return run_training<double>(config);
  return run_training<float>(config);
}

void PointDemoReport::write_csv(std::ostream& out) const {
  out << "iteration,f\n";
  out.precision(10);
  for (const auto& [iteration, value] : series) out << iteration << ',' << value << '\n';
}

PointDemoReport train_point(const PointDemoConfig& config) {
  loss::validate(loss::PointLoss{config.p_up, config.p_down});
  config.schedule.validate();
  if (config.iterations == 0 || config.record_every == 0) {
    throw std::invalid_argument("point demo needs iterations >= 1 and record_every >= 1");
  }
  if (config.point.size() != config.topology.input_dim) {
    throw std::invalid_argument("point dimension does not match network input");
  }
  RandomStream root(config.seed);
  RandomStream indicator_stream = root.split(1);
  nn::NetworkParams params = nn::init_params(config.topology, config.seed);
  Eigen::VectorXd theta = params.theta();
  optim::AdamState adam = optim::AdamState::fresh(params.param_count(), config.adam);

  PointDemoReport report;
  report.series.emplace_back(0, nn::evaluate(params, config.point));
  for (std::uint64_t t = 0; t < config.iterations; ++t) {
    const loss::LossGrad lg =
        loss::point_loss_step(params, config.p_up, config.p_down, config.point, indicator_stream);
    optim::adam_step_inplace(adam, theta, lg.grad, optim::lr_at(config.schedule, t));
    if (!theta.allFinite()) throw std::runtime_error("point demo: non-finite parameters");
    params = nn::NetworkParams(config.topology, theta);
    if ((t + 1) % config.record_every == 0 || t + 1 == config.iterations) {
      report.series.emplace_back(t + 1, nn::evaluate(params, config.point));
    }
  }
  report.final_value = report.series.back().second;
  return report;
}

}  // namespace psopdf::train
