#include "psopdf/cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "psopdf/config.hpp"
#include "psopdf/evaluation.hpp"
#include "psopdf/kde.hpp"

namespace psopdf::cli {

namespace fs = std::filesystem;
using config::ConfigError;
using config::RunConfig;

namespace {

struct Io {
  std::ostream& out;
  std::ostream& err;
};

std::ofstream open_output(const fs::path& path) {
  std::ofstream file(path);
  if (!file) throw std::runtime_error("cannot write " + path.string());
  return file;
}

fs::path prepare_out_dir(const RunConfig& rc) {
  const fs::path dir = rc.get("run.out_dir");
  fs::create_directories(dir);
  return dir;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

// Resolved config next to a sidecar holding everything that varies per run.
void write_run_files(const fs::path& dir, const RunConfig& rc, std::string_view command) {
  open_output(dir / "run_config.ini") << rc.to_ini();
  auto meta = open_output(dir / "run_meta.txt");
  meta << "command=" << command << '\n';
  meta << "started=" << utc_timestamp() << '\n';
}

train::PdfModel model_from(const nn::NetworkParams& params, const train::TrainConfig& tc) {
  return {params, density::proposal_for(tc.target, tc.proposal_margin), train::config_digest(tc),
          std::numeric_limits<double>::quiet_NaN()};
}

eval::GridSpec grid_for(const RunConfig& rc, const density::DensitySpec& truth) {
  const std::size_t per_dim = eval::grid_points_for(rc.get("eval.grid"), truth.dim());
  return eval::GridSpec::regular(truth.support(), per_dim);
}

int cmd_train(const RunConfig& rc, Io io) {
  const train::TrainConfig tc = config::train_config_of(rc);
  const fs::path dir = prepare_out_dir(rc);
  write_run_files(dir, rc, "train");
  std::optional<train::TrainResult> trained;
  try {
    trained = train::train(tc);
  } catch (const train::NumericalAbort& abort) {
    abort.report().write_csv(dir / "train_report.csv");
    if (abort.checkpoint()) save_model(model_from(*abort.checkpoint(), tc), dir / "checkpoint.psopdf");
    io.err << "numerical abort at iteration " << abort.iteration() << ": " << abort.what()
           << " (max |f| = " << abort.max_abs_f() << ")\n";
    return kExitNumerical;
  }
  const train::TrainResult& result = *trained;
  train::save_model(result.model, dir / "model.psopdf");
  result.report.write_csv(dir / "train_report.csv");

  const auto& records = result.report.records;
  if (!records.empty()) {
    io.out << "monitor first=" << records.front().monitor << " last=" << records.back().monitor
           << (result.report.stopped_early ? " (stopped early)" : "") << '\n';
  }
  const eval::EvalReport report =
      eval::evaluate_on_grid(eval::as_batch(result.model), tc.target, grid_for(rc, tc.target));
  io.out << report.summary_line() << '\n';
  io.out << "model written to " << (dir / "model.psopdf").string() << '\n';
  return kExitOk;
}

int cmd_eval(const RunConfig& rc, const std::string& model_path, bool truth_self, Io io) {
  const density::DensitySpec truth = config::target_of(rc);
  std::optional<train::PdfModel> model;
  eval::BatchPdf estimator;
  std::string estimator_id;
  if (truth_self) {
    estimator = eval::as_batch(truth);
    estimator_id = truth.name();
  } else {
    if (model_path.empty()) throw ConfigError("eval needs --model or --truth-self");
    model = train::load_model(model_path);
    if (model->params.topology().input_dim != truth.dim()) {
      throw ConfigError("model input dimension " + std::to_string(model->params.topology().input_dim) +
                        " does not match density '" + truth.name() + "'");
    }
    estimator = eval::as_batch(*model);
    estimator_id = fs::path(model_path).filename().string();
  }
  const eval::EvalReport report =
      eval::evaluate_on_grid(estimator, truth, grid_for(rc, truth), estimator_id);
  const fs::path dir = prepare_out_dir(rc);
  const bool gnuplot = rc.flag("eval.gnuplot");
  auto file = open_output(dir / (gnuplot ? "eval.dat" : "eval.csv"));
  report.write_csv(file, gnuplot);
  io.out << report.summary_line() << '\n';
  return kExitOk;
}

int cmd_compare(const RunConfig& rc, Io io) {
  const std::uint64_t budget = rc.count("compare.budget");
  if (budget == 0) throw ConfigError("compare.budget must be >= 1");
  train::TrainConfig tc = config::train_config_of(rc);
  const double fraction = rc.real("kde.heldout_fraction");
  const std::vector<double> bandwidths =
      kde::log_spaced(rc.real("kde.bandwidth_min"), rc.real("kde.bandwidth_max"),
                      rc.count("kde.bandwidth_count"));

  RandomStream root(tc.seed);
  RandomStream pool_stream = root.split(4);
  RandomStream split_stream = root.split(5);
  const nn::PointMatrix pool = density::sample_batch(tc.target, budget, pool_stream);
  tc.samples = pool;
  tc.pool_size = 0;

  const fs::path dir = prepare_out_dir(rc);
  write_run_files(dir, rc, "compare");
  const train::TrainResult trained = train::train(tc);
  train::save_model(trained.model, dir / "model.psopdf");
  trained.report.write_csv(dir / "train_report.csv");

  const kde::KdeFit fit = kde::fit_with_holdout(pool, bandwidths, fraction, split_stream);
  const eval::GridSpec grid = grid_for(rc, tc.target);
  const eval::EvalReport deep =
      eval::evaluate_on_grid(eval::as_batch(trained.model), tc.target, grid, "deeppdf");
  const eval::EvalReport kde_report = eval::evaluate_on_grid(
      [&fit](const nn::PointMatrix& points) { return kde::kde_pdf_batch(fit.model, points); },
      tc.target, grid, "kde");

  auto file = open_output(dir / "compare.csv");
  file.precision(10);
  file << "estimator,l2,integral,bandwidth\n";
  file << "deeppdf," << deep.l2 << ',' << deep.integral << ",\n";
  file << "kde," << kde_report.l2 << ',' << kde_report.integral << ',' << fit.model.bandwidth() << '\n';

  io.out << "deeppdf " << deep.summary_line() << '\n';
  io.out << "kde " << kde_report.summary_line() << " bandwidth=" << fit.model.bandwidth() << '\n';
  io.out << "ratio kde/deeppdf=" << kde_report.l2 / deep.l2 << '\n';
  return kExitOk;
}

int cmd_point_demo(const RunConfig& rc, Io io) {
  const train::PointDemoConfig pc = config::point_config_of(rc);
  const train::PointDemoReport report = train::train_point(pc);
  const fs::path dir = prepare_out_dir(rc);
  write_run_files(dir, rc, "point-demo");
  auto file = open_output(dir / "point_demo.csv");
  report.write_csv(file);
  io.out << "final f=" << report.final_value << " expected=" << pc.p_up / pc.p_down << '\n';
  return kExitOk;
}

int cmd_diverge_demo(const RunConfig& rc, Io io) {
  const train::TrainConfig tc = config::train_config_of(rc);
  const double factor = rc.real("diverge.factor");
  std::vector<train::TrainConfig> runs{tc};
  if (!std::holds_alternative<loss::PdfLoss>(tc.loss)) {
    train::TrainConfig companion = tc;
    companion.loss = loss::PdfLoss{};
    runs.push_back(companion);
  }
  const fs::path dir = prepare_out_dir(rc);
  write_run_files(dir, rc, "diverge-demo");
  for (const auto& run : runs) {
    const std::string name = loss::loss_name(run.loss);
    const eval::DivergenceVerdict verdict = eval::divergence_probe(run, factor);
    verdict.report.write_csv(dir / ("diverge_" + name + ".csv"));
    io.out << name << ": " << (verdict.diverged ? "diverged" : "converged") << " at iteration "
           << verdict.iteration << " max|f|=" << verdict.max_abs_f << " (" << verdict.reason << ")\n";
  }
  return kExitOk;
}

int cmd_diff_check(const RunConfig& rc, Io io) {
  const density::DensitySpec target = config::target_of(rc);
  const nn::Topology topology{target.dim(), rc.counts("network.hidden")};
  const std::uint64_t seed = rc.count("run.seed");
  const nn::NetworkParams params = nn::init_params(topology, seed);
  const density::DensitySpec box = density::DensitySpec::uniform_box(target.support());
  RandomStream stream = RandomStream(seed).split(6);
  const nn::PointMatrix pushed = density::sample_batch(box, 1, stream);
  const std::uint64_t count = rc.count("diffcheck.probes");
  if (count == 0) throw ConfigError("diffcheck.probes must be >= 1");
  const nn::PointMatrix probes = density::sample_batch(box, count, stream);
  const eval::Push push = rc.get("diffcheck.push") == "up" ? eval::Push::Up : eval::Push::Down;
  const eval::DifferentialStats stats = eval::differential_check(
      params, push, std::span<const double>(pushed.data(), target.dim()), probes,
      rc.real("diffcheck.delta"));

  const fs::path dir = prepare_out_dir(rc);
  write_run_files(dir, rc, "diff-check");
  auto file = open_output(dir / "diff_check.csv");
  file.precision(12);
  for (std::size_t d = 0; d < target.dim(); ++d) file << 'x' << d << ',';
  file << "predicted,measured\n";
  for (Eigen::Index i = 0; i < probes.cols(); ++i) {
    for (Eigen::Index d = 0; d < probes.rows(); ++d) file << probes(d, i) << ',';
    const auto k = static_cast<std::size_t>(i);
    file << stats.predicted[k] << ',' << stats.measured[k] << '\n';
  }
  io.out << "median_rel_error=" << stats.median_rel_error << " max_rel_error=" << stats.max_rel_error
         << " used=" << stats.used << " excluded=" << stats.excluded << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Density estimation by probabilistic surface optimization", "psopdf"};
  app.require_subcommand(1);

  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> assignments;
  app.add_option("--config", config_path, "INI config file");
  app.add_option("--preset", preset, "embedded preset")
      ->check(CLI::IsMember(config::preset_names()));
  app.add_option("--seed", seed, "random seed");
  app.add_option("--out-dir", out_dir, "output directory");
  app.add_option("--set", assignments, "override section.key=value (repeatable)");

  auto* train_cmd = app.add_subcommand("train", "train a density model");
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a model on a grid");
  auto* compare_cmd = app.add_subcommand("compare", "DeepPDF against KDE on one sample budget");
  auto* point_cmd = app.add_subcommand("point-demo", "single-point surface experiment");
  auto* diverge_cmd = app.add_subcommand("diverge-demo", "divergence probe with a companion pdf-loss run");
  auto* diff_cmd = app.add_subcommand("diff-check", "first-order height-change check");

  std::string model_path;
  std::string density_name;
  std::string grid_name;
  bool truth_self = false;
  bool gnuplot = false;
  eval_cmd->add_option("--model", model_path, "model file");
  eval_cmd->add_option("--density", density_name, "truth density");
  eval_cmd->add_option("--grid", grid_name, "grid preset: desk or paper-grid");
  eval_cmd->add_flag("--truth-self", truth_self, "evaluate the truth against itself");
  eval_cmd->add_flag("--gnuplot", gnuplot, "whitespace separated output with scan-line breaks");

  std::optional<std::string> budget;
  compare_cmd->add_option("--budget", budget, "number of target samples");

  std::optional<std::string> p_up;
  std::optional<std::string> p_down;
  point_cmd->add_option("--p-up", p_up, "up probability at the point");
  point_cmd->add_option("--p-down", p_down, "down probability at the point");

  std::optional<std::string> delta;
  std::optional<std::string> push;
  diff_cmd->add_option("--delta", delta, "step size");
  diff_cmd->add_option("--push", push, "down or up");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  Io io{out, err};
  try {
    RunConfig rc = RunConfig::defaults();
    std::string base = preset;
    if (base.empty()) {
      if (*compare_cmd) base = "columns-desk";
      if (*point_cmd) base = "point-demo";
      if (*diverge_cmd) base = "diverge-demo";
    }
    if (!base.empty()) rc.apply_ini(config::preset_text(base), "preset " + base);
    if (!config_path.empty()) rc.apply_file(config_path);
    for (const auto& a : assignments) rc.apply_assignment(a);
    if (seed) rc.set("run.seed", std::to_string(*seed));
    if (!out_dir.empty()) rc.set("run.out_dir", out_dir);
    if (!density_name.empty()) rc.set("density.name", density_name);
    if (!grid_name.empty()) rc.set("eval.grid", grid_name);
    if (gnuplot) rc.set("eval.gnuplot", "true");
    if (budget) rc.set("compare.budget", *budget);
    if (p_up) rc.set("point.p_up", *p_up);
    if (p_down) rc.set("point.p_down", *p_down);
    if (delta) rc.set("diffcheck.delta", *delta);
    if (push) rc.set("diffcheck.push", *push);

    if (*train_cmd) return cmd_train(rc, io);
    if (*eval_cmd) return cmd_eval(rc, model_path, truth_self, io);
    if (*compare_cmd) return cmd_compare(rc, io);
    if (*point_cmd) return cmd_point_demo(rc, io);
    if (*diverge_cmd) return cmd_diverge_demo(rc, io);
    if (*diff_cmd) return cmd_diff_check(rc, io);
  } catch (const train::NumericalAbort& e) {
    err << "numerical abort: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const train::ModelFormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "invalid setting: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::domain_error& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace psopdf::cli
