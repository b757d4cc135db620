#pragma once

// Experiment configuration: JSON schema with unit-suffixed field names,
// strict-key validation, the built-in default setup, and a stable hash used
// to tie output files to the configuration that produced them.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "fwm/fiber.hpp"
#include "fwm/jsa.hpp"
#include "fwm/source.hpp"

namespace fwm {

struct CorrelationConfig {
  std::int64_t bin_width_ps = 1400;
  std::int64_t bins_per_side = 7143;
  std::int64_t window_half_ps = 2100;
  int side_peaks = 10;
};

struct SweepConfig {
  double pressure_bar_min = 1.0;
  double pressure_bar_max = 6.0;
  double pressure_bar_step = 0.25;
};

struct Config {
  FiberSpec fiber;
  GasState gas;
  PumpSpec pump;
  FilterSpec filter_signal;
  FilterSpec filter_idler;
  int jsa_grid = 256;
  double jsa_span_filter_widths = 4.0;
  SourceModel source;
  std::vector<DetectorSpec> detectors;  // [signal, idler]
  CorrelationConfig correlation;
  SweepConfig sweep;
};

// The built-in configuration modeling the reference experiment.
Config default_config();

Config config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const Config& config);

// Reads a config file; an empty path yields default_config().
Config load_config(const std::string& path);

// FNV-1a hash of the canonical serialization, as 16 hex digits.
std::string config_hash(const Config& config);

}  // namespace fwm
