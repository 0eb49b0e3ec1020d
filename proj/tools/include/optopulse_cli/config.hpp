#pragma once

// Versioned JSON run configurations. Every key must be recognized; errors
// carry the dotted path of the offending field.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "optopulse/measurement.hpp"
#include "optopulse/protocol.hpp"
#include "optopulse/pulse_dynamics.hpp"
#include "optopulse/tomography.hpp"

namespace optopulse::cli {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Strict reader over one JSON object.
class Fields {
 public:
  Fields(const nlohmann::json& j, std::string path);

  bool has(std::string_view key) const;
  std::string path_of(std::string_view key) const;

  double number(std::string_view key);
  double number_or(std::string_view key, double fallback);
  std::uint64_t count(std::string_view key);
  std::uint64_t count_or(std::string_view key, std::uint64_t fallback);
  std::string text(std::string_view key);
  std::string text_or(std::string_view key, std::string fallback);
  Fields object(std::string_view key);
  const nlohmann::json& array(std::string_view key);

  /// Throws for any key that was never read.
  void finish() const;

 private:
  const nlohmann::json& require(std::string_view key);

  const nlohmann::json* j_;
  std::string path_;
  std::set<std::string, std::less<>> used_;
};

nlohmann::json load_json(const std::filesystem::path& file);

struct PulseConfig {
  pulse::PhysicalParams physical;
  double n_photons = 0.0;
  double eta = 1.0;
  std::string drive = "optimal";  ///< optimal | gaussian | square | exponential | file
  double drive_width = 0.0;       ///< in units of 1 / kappa
  std::filesystem::path drive_file;
  std::size_t grid_points = 4096;
  double grid_span = 10.0;
  std::uint64_t seed = 0;
};

struct TomographyConfig {
  enum class Mode { Exact, Sampled };
  enum class KernelSource { Exact, Calibrated };

  protocol::InitialState state;
  measurement::MeasurementSpec spec;
  std::size_t angles = 24;
  Mode mode = Mode::Exact;
  std::size_t shots = 0;
  std::size_t bins = 201;
  KernelSource kernel = KernelSource::Exact;
  std::size_t kernel_shots = 200000;
  double regularization = 1e-4;
  tomography::ReconstructOptions reconstruction;
  std::uint64_t seed = 0;
};

struct ProtocolConfig {
  enum class Mode { Sequence, Purify };

  Mode mode = Mode::Sequence;
  protocol::SequenceConfig sequence;
  double nbar = 0.0;
  double chi = 0.0;
  double omega = 0.0;
  std::optional<gaussian::BathSpec> bath;
};

/// `base` resolves relative file references.
PulseConfig parse_pulse_config(const nlohmann::json& j, const std::filesystem::path& base = {});
TomographyConfig parse_tomography_config(const nlohmann::json& j);
ProtocolConfig parse_protocol_config(const nlohmann::json& j);

}  // namespace optopulse::cli
