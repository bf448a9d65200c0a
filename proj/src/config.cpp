#include "psopdf/config.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

namespace psopdf::config {

namespace {

enum class Type { Count, Real, Text, Flag, CountList, RealList };

struct KeySpec {
  std::string_view key;
  Type type;
  std::string_view fallback;
  std::string_view choices;  // '|' separated, empty when free-form
};

constexpr std::array kSchema{
    KeySpec{"run.seed", Type::Count, "1", ""},
    KeySpec{"run.out_dir", Type::Text, "out", ""},
    KeySpec{"density.name", Type::Text, "cosine", "cosine|columns|rangemsr"},
    KeySpec{"proposal.margin", Type::Real, "0", ""},
    KeySpec{"network.hidden", Type::CountList, "128,128,128", ""},
    KeySpec{"loss.kind", Type::Text, "pdf", "pdf|support-safe|no-stop-grad|simple"},
    KeySpec{"loss.p_max", Type::Real, "0.05", ""},
    KeySpec{"optimizer.a", Type::Real, "1e-3", ""},
    KeySpec{"optimizer.b", Type::Real, "0.5", ""},
    KeySpec{"optimizer.s", Type::Count, "20000", ""},
    KeySpec{"optimizer.delta_min", Type::Real, "1e-7", ""},
    KeySpec{"optimizer.beta1", Type::Real, "0.9", ""},
    KeySpec{"optimizer.beta2", Type::Real, "0.999", ""},
    KeySpec{"optimizer.epsilon", Type::Real, "1e-8", ""},
    KeySpec{"train.batch_size", Type::Count, "1000", ""},
    KeySpec{"train.iterations", Type::Count, "200000", ""},
    KeySpec{"train.monitor_every", Type::Count, "1000", ""},
    KeySpec{"train.checkpoint_every", Type::Count, "10000", ""},
    KeySpec{"train.pool_size", Type::Count, "0", ""},
    KeySpec{"train.samples_file", Type::Text, "", ""},
    KeySpec{"train.divergence_factor", Type::Real, "0", ""},
    KeySpec{"train.early_stop_patience", Type::Count, "0", ""},
    KeySpec{"train.precision", Type::Text, "float32", "float32|float64"},
    KeySpec{"eval.grid", Type::Text, "desk", "desk|paper-grid"},
    KeySpec{"eval.gnuplot", Type::Flag, "false", ""},
    KeySpec{"kde.heldout_fraction", Type::Real, "0.2", ""},
    KeySpec{"kde.bandwidth_min", Type::Real, "1e-2", ""},
    KeySpec{"kde.bandwidth_max", Type::Real, "1", ""},
    KeySpec{"kde.bandwidth_count", Type::Count, "20", ""},
    KeySpec{"compare.budget", Type::Count, "100000", ""},
    KeySpec{"point.p_up", Type::Real, "0.9", ""},
    KeySpec{"point.p_down", Type::Real, "0.15", ""},
    KeySpec{"point.x", Type::RealList, "0,0", ""},
    KeySpec{"point.record_every", Type::Count, "10", ""},
    KeySpec{"diffcheck.delta", Type::Real, "1e-4", ""},
    KeySpec{"diffcheck.probes", Type::Count, "100", ""},
    KeySpec{"diffcheck.push", Type::Text, "down", "down|up"},
    KeySpec{"diverge.factor", Type::Real, "10", ""},
};

const KeySpec* find_key(std::string_view key) {
  for (const auto& spec : kSchema) {
    if (spec.key == key) return &spec;
  }
  return nullptr;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> items;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    items.push_back(trim(text.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return items;
}

bool parse_real(const std::string& text, double& out) {
  if (text.empty()) return false;
  std::size_t used = 0;
  try {
    out = std::stod(text, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == text.size() && std::isfinite(out);
}

bool parse_count(const std::string& text, std::uint64_t& out) {
  if (text.empty() || !std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    // Allow scientific notation for whole numbers, e.g. 2e5.
    double value = 0.0;
    if (!parse_real(text, value) || value < 0.0 || value != std::floor(value) || value > 1.8e19) {
      return false;
    }
    out = static_cast<std::uint64_t>(value);
    return true;
  }
  try {
    out = std::stoull(text);
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

bool parse_flag(const std::string& text, bool& out) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") {
    out = true;
    return true;
  }
  if (text == "false" || text == "0" || text == "no" || text == "off") {
    out = false;
    return true;
  }
  return false;
}

void check_value(const KeySpec& spec, const std::string& value) {
  auto reject = [&](std::string_view expected) {
    throw ConfigError(std::string(spec.key) + ": '" + value + "' is not " + std::string(expected));
  };
  double real = 0.0;
  std::uint64_t whole = 0;
  bool flag = false;
  switch (spec.type) {
    case Type::Count:
      if (!parse_count(value, whole)) reject("a non-negative integer");
      break;
    case Type::Real:
      if (!parse_real(value, real)) reject("a finite number");
      break;
    case Type::Flag:
      if (!parse_flag(value, flag)) reject("true or false");
      break;
    case Type::CountList:
      for (const auto& item : split_list(value)) {
        if (!parse_count(item, whole) || whole == 0) reject("a comma separated list of positive integers");
      }
      break;
    case Type::RealList:
      for (const auto& item : split_list(value)) {
        if (!parse_real(item, real)) reject("a comma separated list of numbers");
      }
      break;
    case Type::Text:
      break;
  }
  if (!spec.choices.empty()) {
    std::string_view rest = spec.choices;
    while (true) {
      const auto bar = rest.find('|');
      if (rest.substr(0, bar) == value) return;
      if (bar == std::string_view::npos) break;
      rest.remove_prefix(bar + 1);
    }
    reject("one of " + std::string(spec.choices));
  }
}

constexpr std::string_view kCosineDesk = R"(
[density]
name = cosine
[network]
hidden = 128,128,128
[train]
batch_size = 1000
iterations = 200000
[optimizer]
a = 1e-3
b = 0.5
s = 20000
delta_min = 1e-7
)";

constexpr std::string_view kColumnsDesk = R"(
[density]
name = columns
[network]
hidden = 128,128,128
[train]
batch_size = 1000
iterations = 100000
pool_size = 100000
[optimizer]
a = 1e-3
b = 0.5
s = 10000
delta_min = 1e-7
[compare]
budget = 100000
)";

constexpr std::string_view kRangeMsrDesk = R"(
[density]
name = rangemsr
[network]
hidden = 128,128,128
[train]
batch_size = 1000
iterations = 100000
[optimizer]
a = 1e-3
b = 0.5
s = 10000
delta_min = 1e-7
)";

constexpr std::string_view kPaper = R"(
[network]
hidden = 1024,1024,1024
[train]
batch_size = 1000
iterations = 6000000
checkpoint_every = 100000
precision = float64
[optimizer]
a = 1e-3
b = 0.5
s = 200000
delta_min = 1e-7
[eval]
grid = paper-grid
[compare]
budget = 100000000
)";

constexpr std::string_view kPointDemo = R"(
[network]
hidden = 16
[train]
iterations = 50000
[optimizer]
a = 1e-2
b = 0.5
s = 5000
delta_min = 1e-6
[point]
p_up = 0.9
p_down = 0.15
x = 0,0
record_every = 10
)";

constexpr std::string_view kDivergeDemo = R"(
[density]
name = cosine
[loss]
kind = simple
[network]
hidden = 128,128,128
[train]
batch_size = 256
iterations = 100000
divergence_factor = 10
[optimizer]
a = 0
delta_min = 1e-3
[diverge]
factor = 10
)";

struct Preset {
  std::string_view name;
  std::string_view text;
};

constexpr std::array kPresets{
    Preset{"cosine-desk", kCosineDesk},   Preset{"columns-desk", kColumnsDesk},
    Preset{"rangemsr-desk", kRangeMsrDesk}, Preset{"paper", kPaper},
    Preset{"point-demo", kPointDemo},     Preset{"diverge-demo", kDivergeDemo},
};

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig config;
  for (const auto& spec : kSchema) config.values_.emplace(spec.key, spec.fallback);
  return config;
}

void RunConfig::set(std::string_view key, std::string value) {
  const KeySpec* spec = find_key(key);
  if (spec == nullptr) throw ConfigError("unknown config key '" + std::string(key) + "'");
  check_value(*spec, value);
  values_[std::string(key)] = std::move(value);
}

void RunConfig::apply_ini(std::string_view text, std::string_view origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  std::vector<std::string> seen;
  auto fail = [&](const std::string& why) {
    throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find_first_of("#;");
    const std::string body = trim(std::string_view(line).substr(0, comment));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') fail("unterminated section header");
      section = trim(std::string_view(body).substr(1, body.size() - 2));
      if (section.empty()) fail("empty section name");
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    if (section.empty()) fail("key outside of any [section]");
    const std::string key = section + "." + trim(std::string_view(body).substr(0, eq));
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) fail("duplicate key '" + key + "'");
    seen.push_back(key);
    try {
      set(key, trim(std::string_view(body).substr(eq + 1)));
    } catch (const ConfigError& e) {
      fail(e.what());
    }
  }
}

void RunConfig::apply_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  apply_ini(text.str(), path);
}

void RunConfig::apply_assignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

const std::string& RunConfig::get(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  return it->second;
}

double RunConfig::real(std::string_view key) const {
  double value = 0.0;
  if (!parse_real(get(key), value)) throw ConfigError(std::string(key) + " is not a number");
  return value;
}

std::uint64_t RunConfig::count(std::string_view key) const {
  std::uint64_t value = 0;
  if (!parse_count(get(key), value)) throw ConfigError(std::string(key) + " is not an integer");
  return value;
}

bool RunConfig::flag(std::string_view key) const {
  bool value = false;
  if (!parse_flag(get(key), value)) throw ConfigError(std::string(key) + " is not true/false");
  return value;
}

std::vector<double> RunConfig::reals(std::string_view key) const {
  std::vector<double> out;
  for (const auto& item : split_list(get(key))) {
    double value = 0.0;
    if (!parse_real(item, value)) throw ConfigError(std::string(key) + " is not a list of numbers");
    out.push_back(value);
  }
  return out;
}

std::vector<std::size_t> RunConfig::counts(std::string_view key) const {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(get(key))) {
    std::uint64_t value = 0;
    if (!parse_count(item, value)) throw ConfigError(std::string(key) + " is not a list of integers");
    out.push_back(static_cast<std::size_t>(value));
  }
  return out;
}

std::string RunConfig::to_ini() const {
  std::ostringstream out;
  std::string section;
  for (const auto& spec : kSchema) {
    const auto dot = spec.key.find('.');
    const std::string_view head = spec.key.substr(0, dot);
    if (head != section) {
      if (!section.empty()) out << '\n';
      section = std::string(head);
      out << '[' << section << "]\n";
    }
    out << spec.key.substr(dot + 1) << " = " << get(spec.key) << '\n';
  }
  return out.str();
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& p : kPresets) names.emplace_back(p.name);
  return names;
}

std::string_view preset_text(std::string_view name) {
  for (const auto& p : kPresets) {
    if (p.name == name) return p.text;
  }
  std::string known;
  for (const auto& p : kPresets) known += (known.empty() ? "" : ", ") + std::string(p.name);
  throw ConfigError("unknown preset '" + std::string(name) + "' (known: " + known + ")");
}

density::DensitySpec target_of(const RunConfig& config) {
  return density::target_by_name(config.get("density.name"));
}

loss::LossKind loss_of(const RunConfig& config) {
  const std::string& kind = config.get("loss.kind");
  if (kind == "support-safe") return loss::SupportSafe{config.real("loss.p_max")};
  if (kind == "no-stop-grad") return loss::NoStopGrad{};
  if (kind == "simple") return loss::SimpleLoss{};
  return loss::PdfLoss{};
}

optim::DecaySchedule schedule_of(const RunConfig& config) {
  return {config.real("optimizer.a"), config.real("optimizer.b"), config.count("optimizer.s"),
          config.real("optimizer.delta_min")};
}

namespace {

optim::AdamConfig adam_of(const RunConfig& config) {
  return {config.real("optimizer.beta1"), config.real("optimizer.beta2"),
          config.real("optimizer.epsilon")};
}

}  // namespace

train::TrainConfig train_config_of(const RunConfig& config) {
  train::TrainConfig out;
  out.target = target_of(config);
  out.proposal_margin = config.real("proposal.margin");
  out.batch_size = config.count("train.batch_size");
  out.iterations = config.count("train.iterations");
  out.loss = loss_of(config);
  out.topology = nn::Topology{out.target.dim(), config.counts("network.hidden")};
  out.schedule = schedule_of(config);
  out.adam = adam_of(config);
  out.seed = config.count("run.seed");
  out.monitor_every = config.count("train.monitor_every");
  out.checkpoint_every = config.count("train.checkpoint_every");
  out.pool_size = config.count("train.pool_size");
  out.divergence_factor = config.real("train.divergence_factor");
  out.early_stop_patience = config.count("train.early_stop_patience");
  out.precision = config.get("train.precision") == "float64" ? train::Precision::Float64
                                                            : train::Precision::Float32;
  if (const std::string& file = config.get("train.samples_file"); !file.empty()) {
    try {
      out.samples = train::load_samples_csv(file, out.target.dim());
    } catch (const std::runtime_error& e) {
      throw ConfigError(e.what());
    }
  }
  try {
    out.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return out;
}

train::PointDemoConfig point_config_of(const RunConfig& config) {
  train::PointDemoConfig out;
  out.p_up = config.real("point.p_up");
  out.p_down = config.real("point.p_down");
  out.point = config.reals("point.x");
  out.topology = nn::Topology{out.point.size(), config.counts("network.hidden")};
  out.schedule = schedule_of(config);
  out.adam = adam_of(config);
  out.iterations = config.count("train.iterations");
  out.record_every = config.count("point.record_every");
  out.seed = config.count("run.seed");
  return out;
}

}  // namespace psopdf::config
