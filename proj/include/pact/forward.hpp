#pragma once

#include <cstdint>
#include <optional>

#include "pact/geometry.hpp"
#include "pact/phantom.hpp"

namespace pact {

/// Gaussian-modulated cosine pulse standing in for the transducer's
/// band-pass response. `kernel` is sampled on t = (j - half_length) / fs.
struct TransducerResponse {
  double center_frequency = 2.5e6;
  double fractional_bandwidth = 1.1;
  double sampling_rate = 40e6;
  double sigma_t = 0.0;
  Eigen::VectorXd kernel;

  Index half_length() const { return (kernel.size() - 1) / 2; }
};

/// Envelope standard deviation whose amplitude spectrum has a full width at
/// half maximum of fractional_bandwidth * center_frequency.
double envelope_sigma(double center_frequency, double fractional_bandwidth);

TransducerResponse build_impulse_response(double center_frequency, double fractional_bandwidth,
                                          double sampling_rate);

/// Raw detector traces, C x T.
struct SignalSet {
  RowMatrixXd samples;
  double sampling_rate = 40e6;
  double sound_speed = 1480.0;
  ArrayGeometry geometry;

  Index channels() const { return samples.rows(); }
  Index length() const { return samples.cols(); }
};

/// Everything needed to simulate and beamform one acquisition.
struct Acquisition {
  ArrayGeometry geometry;
  ImageGrid grid;
  double sampling_rate = 40e6;
  double sound_speed = 1480.0;
  double center_frequency = 2.5e6;
  double fractional_bandwidth = 1.1;
  double duration = 30e-6;
  double noise_std = 0.0;

  Index samples() const;
};

/// Cylindrical spreading 1/sqrt(max(r, r_min)).
inline double spreading(double r, double r_min) { return 1.0 / std::sqrt(std::max(r, r_min)); }

/// Samples needed to hold every arrival plus the kernel tail.
Index required_samples(const DelayTable& delays, const TransducerResponse& response, double sound_speed);

/// Time-of-flight forward operator: each pixel deposits
/// p0 * spreading(r) at fractional sample r/c*fs with linear interpolation,
/// and each channel's impulse train is convolved with the pulse kernel.
SignalSet simulate_signals(const PressureMap& p0, const ArrayGeometry& geometry,
                           const DelayTable& delays, const TransducerResponse& response,
                           double sampling_rate, double sound_speed, double duration);

SignalSet simulate_signals(const PressureMap& p0, const Acquisition& acq);

/// Adds zero-mean Gaussian noise with the given standard deviation.
void add_white_noise(SignalSet& signals, double stddev, std::uint64_t seed);

}  // namespace pact
