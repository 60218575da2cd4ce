#include "pact/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace pact {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out))
    throw DataError("bad value for " + key + ": '" + v + "' is not a number");
  return out;
}

long long to_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw DataError("bad value for " + key + ": '" + v + "' is not an integer");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw DataError("bad value for " + key + ": '" + v + "' is not a boolean");
}

using Setter = std::function<void(Settings&, const std::string&, const std::string&)>;

const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table = {
      {"grid", [](Settings& s, const std::string& k, const std::string& v) { s.grid = to_integer(k, v); }},
      {"extent_m", [](Settings& s, const std::string& k, const std::string& v) { s.extent_m = to_double(k, v); }},
      {"ring_radius_m",
       [](Settings& s, const std::string& k, const std::string& v) { s.ring_radius_m = to_double(k, v); }},
      {"num_elements",
       [](Settings& s, const std::string& k, const std::string& v) { s.num_elements = to_integer(k, v); }},
      {"input_channels",
       [](Settings& s, const std::string& k, const std::string& v) { s.input_channels = to_integer(k, v); }},
      {"sampling_rate_hz",
       [](Settings& s, const std::string& k, const std::string& v) { s.sampling_rate_hz = to_double(k, v); }},
      {"sound_speed_mps",
       [](Settings& s, const std::string& k, const std::string& v) { s.sound_speed_mps = to_double(k, v); }},
      {"center_frequency_hz",
       [](Settings& s, const std::string& k, const std::string& v) { s.center_frequency_hz = to_double(k, v); }},
      {"fractional_bandwidth",
       [](Settings& s, const std::string& k, const std::string& v) { s.fractional_bandwidth = to_double(k, v); }},
      {"duration_s", [](Settings& s, const std::string& k, const std::string& v) { s.duration_s = to_double(k, v); }},
      {"noise_std", [](Settings& s, const std::string& k, const std::string& v) { s.noise_std = to_double(k, v); }},
      {"lambda_re",
       [](Settings& s, const std::string& k, const std::string& v) { s.weights.lambda_re = to_double(k, v); }},
      {"lambda_ov",
       [](Settings& s, const std::string& k, const std::string& v) { s.weights.lambda_ov = to_double(k, v); }},
      {"lambda_tex",
       [](Settings& s, const std::string& k, const std::string& v) { s.weights.lambda_tex = to_double(k, v); }},
      {"lambda_rec",
       [](Settings& s, const std::string& k, const std::string& v) { s.weights.lambda_rec = to_double(k, v); }},
      {"enable_response",
       [](Settings& s, const std::string& k, const std::string& v) { s.enable_response = to_bool(k, v); }},
      {"enable_overlay",
       [](Settings& s, const std::string& k, const std::string& v) { s.enable_overlay = to_bool(k, v); }},
      {"residual_sign",
       [](Settings& s, const std::string& k, const std::string& v) {
         const auto sign = to_integer(k, v);
         if (sign != 1 && sign != -1) throw DataError("bad value for residual_sign: must be 1 or -1");
         s.residual_sign = static_cast<int>(sign);
       }},
      {"tau_fraction",
       [](Settings& s, const std::string& k, const std::string& v) { s.tau_fraction = to_double(k, v); }},
      {"epochs",
       [](Settings& s, const std::string& k, const std::string& v) { s.epochs = static_cast<int>(to_integer(k, v)); }},
      {"batch",
       [](Settings& s, const std::string& k, const std::string& v) { s.batch = static_cast<int>(to_integer(k, v)); }},
      {"lr", [](Settings& s, const std::string& k, const std::string& v) { s.lr = to_double(k, v); }},
      {"seed",
       [](Settings& s, const std::string& k, const std::string& v) {
         const auto seed = to_integer(k, v);
         if (seed < 0) throw DataError("bad value for seed: must be >= 0");
         s.seed = static_cast<std::uint64_t>(seed);
       }},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, setter] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

void apply_setting(Settings& settings, const std::string& key, const std::string& value) {
  for (const auto& [name, setter] : setters()) {
    if (name == key) {
      setter(settings, key, value);
      return;
    }
  }
  throw DataError("unknown config key '" + key + "'");
}

Settings parse_config_text(const std::string& text, const std::string& source) {
  Settings settings;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const std::string where = source + ":" + std::to_string(number) + ": ";
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw DataError(where + "expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (!seen.insert(key).second) throw DataError(where + "duplicate key '" + key + "'");
    try {
      apply_setting(settings, key, value);
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
  }
  return settings;
}

Settings parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path.string());
}

Acquisition Settings::acquisition() const {
  Acquisition a;
  a.geometry.num_elements = num_elements;
  a.geometry.ring_radius = ring_radius_m;
  a.grid = {grid, grid, extent_m};
  a.sampling_rate = sampling_rate_hz;
  a.sound_speed = sound_speed_mps;
  a.center_frequency = center_frequency_hz;
  a.fractional_bandwidth = fractional_bandwidth;
  a.duration = duration_s;
  a.noise_std = noise_std;
  return a;
}

}  // namespace pact
