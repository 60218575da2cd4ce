#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "pact/forward.hpp"
#include "pact/losses.hpp"

namespace pact {

/// Every tunable of the pipeline. Acquisition defaults follow the reference
/// simulation setup (18 mm ring, 1480 m/s, 2.5 MHz at 110 % bandwidth,
/// 26 mm field of view); network and dataset defaults are desk scale.
struct Settings {
  Index grid = 32;
  double extent_m = 0.026;
  double ring_radius_m = 0.018;
  Index num_elements = 32;
  Index input_channels = 8;
  double sampling_rate_hz = 40e6;
  double sound_speed_mps = 1480.0;
  double center_frequency_hz = 2.5e6;
  double fractional_bandwidth = 1.1;
  double duration_s = 30e-6;
  double noise_std = 0.0;
  LossWeights weights;
  bool enable_response = true;
  bool enable_overlay = true;
  int residual_sign = 1;
  double tau_fraction = 0.1;
  int epochs = 200;
  int batch = 4;
  double lr = 1e-3;
  std::uint64_t seed = 0;

  Acquisition acquisition() const;
};

/// Applies one `key = value` assignment; throws DataError for unknown keys or
/// unparsable values.
void apply_setting(Settings& settings, const std::string& key, const std::string& value);

/// Parses `key = value` lines (`#` starts a comment). Unknown or duplicate
/// keys and bad values are rejected with the offending line number.
Settings parse_config_text(const std::string& text, const std::string& source = "<config>");
Settings parse_config(const std::filesystem::path& path);

/// All recognised keys in file order.
const std::vector<std::string>& config_keys();

}  // namespace pact
