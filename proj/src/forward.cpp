#include "pact/forward.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "pact/rng.hpp"

namespace pact {

double envelope_sigma(double center_frequency, double fractional_bandwidth) {
  const double bandwidth = fractional_bandwidth * center_frequency;
  return std::sqrt(2.0 * std::numbers::ln2) / (std::numbers::pi * bandwidth);
}

TransducerResponse build_impulse_response(double center_frequency, double fractional_bandwidth,
                                          double sampling_rate) {
  if (!(sampling_rate > 0.0)) throw DataError("impulse response: sampling_rate must be positive");
  if (!(fractional_bandwidth > 0.0)) throw DataError("impulse response: fractional_bandwidth must be positive");
  if (!(center_frequency > 0.0) || center_frequency >= 0.5 * sampling_rate)
    throw DataError("impulse response: center_frequency must lie in (0, sampling_rate/2)");

  TransducerResponse r;
  r.center_frequency = center_frequency;
  r.fractional_bandwidth = fractional_bandwidth;
  r.sampling_rate = sampling_rate;
  r.sigma_t = envelope_sigma(center_frequency, fractional_bandwidth);

  const auto half = static_cast<Index>(std::floor(4.0 * r.sigma_t * sampling_rate));
  r.kernel.resize(2 * half + 1);
  for (Index j = -half; j <= half; ++j) {
    const double t = static_cast<double>(j) / sampling_rate;
    r.kernel(j + half) = std::exp(-t * t / (2.0 * r.sigma_t * r.sigma_t)) *
                         std::cos(2.0 * std::numbers::pi * center_frequency * t);
  }
  return r;
}

Index Acquisition::samples() const {
  return static_cast<Index>(std::ceil(duration * sampling_rate));
}

Index required_samples(const DelayTable& delays, const TransducerResponse& response, double sound_speed) {
  const double max_tau = delays.distances.maxCoeff() / sound_speed * response.sampling_rate;
  return static_cast<Index>(std::floor(max_tau)) + 2 + response.half_length();
}

SignalSet simulate_signals(const PressureMap& p0, const ArrayGeometry& geometry,
                           const DelayTable& delays, const TransducerResponse& response,
                           double sampling_rate, double sound_speed, double duration) {
  geometry.validate();
  if (!(sound_speed > 0.0)) throw DataError("simulate: sound_speed must be positive");
  if (sampling_rate != response.sampling_rate)
    throw DataError("simulate: response was built for a different sampling rate");
  if (delays.channels() != geometry.num_elements || delays.distances.cols() != p0.values.size())
    throw DataError("simulate: delay table does not match geometry and grid");
  if (!p0.values.allFinite()) throw DataError("simulate: non-finite initial pressure");

  const auto length = static_cast<Index>(std::ceil(duration * sampling_rate));
  const Index needed = required_samples(delays, response, sound_speed);
  if (length < needed) {
    throw DataError("simulate: duration too short, need at least " + std::to_string(needed) +
                    " samples (" + std::to_string(static_cast<double>(needed) / sampling_rate) +
                    " s), got " + std::to_string(length));
  }

  const double r_min = p0.grid.pitch();
  const Index half = response.half_length();
  const Eigen::Map<const Eigen::VectorXd> source(p0.values.data(), p0.values.size());

  SignalSet out{RowMatrixXd::Zero(geometry.num_elements, length), sampling_rate, sound_speed, geometry};
  Eigen::VectorXd impulses(length);
  for (Index i = 0; i < geometry.num_elements; ++i) {
    impulses.setZero();
    for (Index p = 0; p < source.size(); ++p) {
      const double amp = source(p);
      if (amp == 0.0) continue;
      const double r = delays.distances(i, p);
      const double tau = r / sound_speed * sampling_rate;
      const auto n0 = static_cast<Index>(std::floor(tau));
      const double frac = tau - static_cast<double>(n0);
      const double a = amp * spreading(r, r_min);
      impulses(n0) += a * (1.0 - frac);
      impulses(n0 + 1) += a * frac;
    }
    // Centred convolution with the symmetric kernel.
    auto trace = out.samples.row(i);
    for (Index n = 0; n < length; ++n) {
      const double v = impulses(n);
      if (v == 0.0) continue;
      const Index lo = std::max<Index>(0, n - half);
      const Index hi = std::min<Index>(length - 1, n + half);
      for (Index t = lo; t <= hi; ++t) trace(t) += v * response.kernel(t - n + half);
    }
  }
  return out;
}

SignalSet simulate_signals(const PressureMap& p0, const Acquisition& acq) {
  const auto delays = build_delay_table(acq.geometry, p0.grid);
  const auto response =
      build_impulse_response(acq.center_frequency, acq.fractional_bandwidth, acq.sampling_rate);
  return simulate_signals(p0, acq.geometry, delays, response, acq.sampling_rate, acq.sound_speed,
                          acq.duration);
}

void add_white_noise(SignalSet& signals, double stddev, std::uint64_t seed) {
  if (stddev < 0.0) throw DataError("noise: standard deviation must be >= 0");
  if (stddev == 0.0) return;
  Rng rng(seed);
  for (Index i = 0; i < signals.samples.rows(); ++i)
    for (Index t = 0; t < signals.samples.cols(); ++t) signals.samples(i, t) += stddev * rng.normal();
}

}  // namespace pact
