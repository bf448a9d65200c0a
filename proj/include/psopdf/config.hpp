#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "psopdf/densities.hpp"
#include "psopdf/trainer.hpp"

namespace psopdf::config {

/// Bad syntax, unknown key or out-of-schema value.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Flat "section.key" -> value map. Every key is declared in a fixed schema
/// with a default and a type; anything else is rejected.
class RunConfig {
public:
  /// All schema keys at their default values.
  static RunConfig defaults();

  /// Applies "[section]" / "key = value" text. '#' and ';' start comments.
  /// origin names the source in error messages.
  void apply_ini(std::string_view text, std::string_view origin);
  void apply_file(const std::string& path);
  /// "section.key=value".
  void apply_assignment(std::string_view assignment);
  void set(std::string_view key, std::string value);

  const std::string& get(std::string_view key) const;
  double real(std::string_view key) const;
  std::uint64_t count(std::string_view key) const;
  bool flag(std::string_view key) const;
  std::vector<double> reals(std::string_view key) const;
  std::vector<std::size_t> counts(std::string_view key) const;

  /// Canonical INI text with every key, sections in schema order.
  std::string to_ini() const;

private:
  std::map<std::string, std::string, std::less<>> values_;
};

std::vector<std::string> preset_names();
/// INI text of an embedded preset. Throws ConfigError for an unknown name.
std::string_view preset_text(std::string_view name);

density::DensitySpec target_of(const RunConfig& config);
loss::LossKind loss_of(const RunConfig& config);
optim::DecaySchedule schedule_of(const RunConfig& config);

/// Training settings; a non-empty train.samples_file is loaded here.
train::TrainConfig train_config_of(const RunConfig& config);
train::PointDemoConfig point_config_of(const RunConfig& config);

}  // namespace psopdf::config
