#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <variant>

#include "psopdf/config.hpp"

using namespace psopdf;
using config::ConfigError;
using config::RunConfig;

TEST_CASE("defaults") {
  const auto c = RunConfig::defaults();
  CHECK(c.count("run.seed") == 1);
  CHECK(c.get("density.name") == "cosine");
  CHECK(c.counts("network.hidden") == std::vector<std::size_t>{128, 128, 128});
  CHECK(c.real("optimizer.a") == 1e-3);
  CHECK(c.count("train.iterations") == 200000);
  CHECK(c.reals("point.x") == std::vector<double>{0.0, 0.0});
  CHECK_FALSE(c.flag("eval.gnuplot"));
  CHECK_THROWS_AS(c.get("train.nonsense"), ConfigError);
}

TEST_CASE("ini parsing") {
  auto c = RunConfig::defaults();
  c.apply_ini("# comment\n[train]\nbatch_size = 64 ; trailing\n\n[network]\nhidden=8, 8\n", "text");
  CHECK(c.count("train.batch_size") == 64);
  CHECK(c.counts("network.hidden") == std::vector<std::size_t>{8, 8});
  c.apply_ini("[train]\niterations = 2e5\n", "text");
  CHECK(c.count("train.iterations") == 200000);

  CHECK_THROWS_AS(c.apply_ini("[train]\nbogus = 1\n", "text"), ConfigError);
  CHECK_THROWS_AS(c.apply_ini("batch_size = 1\n", "text"), ConfigError);
  CHECK_THROWS_AS(c.apply_ini("[train\n", "text"), ConfigError);
  CHECK_THROWS_AS(c.apply_ini("[train]\nbatch_size\n", "text"), ConfigError);
  CHECK_THROWS_AS(c.apply_ini("[train]\nbatch_size = 1\nbatch_size = 2\n", "text"), ConfigError);
  CHECK_THROWS_AS(c.apply_ini("[train]\nbatch_size = -3\n", "text"), ConfigError);
  CHECK_THROWS_AS(c.apply_ini("[train]\niterations = 2.5\n", "text"), ConfigError);
  CHECK_THROWS_AS(c.apply_ini("[optimizer]\na = nan\n", "text"), ConfigError);
  CHECK_THROWS_AS(c.apply_ini("[density]\nname = gaussian\n", "text"), ConfigError);
  CHECK_THROWS_AS(c.apply_ini("[network]\nhidden = 8,0\n", "text"), ConfigError);
  CHECK_THROWS_AS(c.apply_ini("[eval]\ngnuplot = maybe\n", "text"), ConfigError);
  try {
    c.apply_ini("\n\n[train]\nbogus = 1\n", "cfg.ini");
    FAIL("accepted an unknown key");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("cfg.ini:4") != std::string::npos);
  }
}

TEST_CASE("assignments and round trip") {
  auto c = RunConfig::defaults();
  c.apply_assignment("loss.kind = support-safe");
  c.apply_assignment("loss.p_max=0.07");
  CHECK(std::holds_alternative<loss::SupportSafe>(config::loss_of(c)));
  CHECK(std::get<loss::SupportSafe>(config::loss_of(c)).p_max == 0.07);
  CHECK_THROWS_AS(c.apply_assignment("loss.kind"), ConfigError);
  CHECK_THROWS_AS(c.apply_assignment("nope.key=1"), ConfigError);

  auto copy = RunConfig::defaults();
  copy.apply_ini(c.to_ini(), "round trip");
  CHECK(copy.to_ini() == c.to_ini());
}

TEST_CASE("config file") {
  const auto path = std::filesystem::temp_directory_path() / "psopdf_test_config.ini";
  {
    std::ofstream out(path);
    out << "[run]\nseed = 9\n";
  }
  auto c = RunConfig::defaults();
  c.apply_file(path.string());
  CHECK(c.count("run.seed") == 9);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(c.apply_file(path.string()), ConfigError);
}

TEST_CASE("presets parse and convert") {
  const auto names = config::preset_names();
  CHECK(names.size() == 6);
  for (const auto& name : names) {
    CAPTURE(name);
    auto c = RunConfig::defaults();
    CHECK_NOTHROW(c.apply_ini(config::preset_text(name), name));
    CHECK_NOTHROW(config::point_config_of(c));
    if (name != "point-demo") CHECK_NOTHROW(config::train_config_of(c));
  }
  CHECK_THROWS_AS(config::preset_text("cosine"), ConfigError);

  auto cosine = RunConfig::defaults();
  cosine.apply_ini(config::preset_text("cosine-desk"), "cosine-desk");
  const auto tc = config::train_config_of(cosine);
  CHECK(tc.iterations == 200000);
  CHECK(tc.batch_size == 1000);
  CHECK(tc.topology.hidden == std::vector<std::size_t>{128, 128, 128});
  CHECK(tc.schedule.s == 20000);
  CHECK(tc.target.name() == "cosine");

  auto point = RunConfig::defaults();
  point.apply_ini(config::preset_text("point-demo"), "point-demo");
  const auto pc = config::point_config_of(point);
  CHECK(pc.p_up == 0.9);
  CHECK(pc.p_down == 0.15);
  CHECK(pc.topology.input_dim == 2);
  CHECK(pc.topology.hidden == std::vector<std::size_t>{16});

  auto diverge = RunConfig::defaults();
  diverge.apply_ini(config::preset_text("diverge-demo"), "diverge-demo");
  const auto dc = config::train_config_of(diverge);
  CHECK(std::holds_alternative<loss::SimpleLoss>(dc.loss));
  CHECK(optim::lr_at(dc.schedule, 0) == doctest::Approx(1e-3));
  CHECK(optim::lr_at(dc.schedule, 99999) == doctest::Approx(1e-3));
}

TEST_CASE("precedence follows application order") {
  auto c = RunConfig::defaults();
  c.apply_ini(config::preset_text("columns-desk"), "preset");
  CHECK(c.get("density.name") == "columns");
  c.apply_ini("[density]\nname = rangemsr\n", "file");
  c.apply_assignment("train.batch_size=32");
  CHECK(config::train_config_of(c).target.name() == "rangemsr");
  CHECK(config::train_config_of(c).topology.input_dim == 3);
  CHECK(config::train_config_of(c).batch_size == 32);
}

TEST_CASE("training config validation surfaces as ConfigError") {
  auto c = RunConfig::defaults();
  c.set("train.batch_size", "0");
  CHECK_THROWS_AS(config::train_config_of(c), ConfigError);
  auto missing = RunConfig::defaults();
  missing.set("train.samples_file", "/nonexistent/samples.csv");
  CHECK_THROWS_AS(config::train_config_of(missing), ConfigError);
}
