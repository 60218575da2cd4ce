#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pact/config.hpp"
#include "pact/losses.hpp"
#include "pact/model.hpp"
#include "pact/postproc.hpp"

namespace pact {

struct TrainConfig {
  ArchConfig arch;
  int epochs = 200;
  int batch = 4;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  LossWeights weights;
  bool enable_response = true;
  bool enable_overlay = true;
  int residual_sign = 1;
  double tau_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  Index total_channels() const { return arch.input_channels + arch.output_channels; }
  ThresholdConfig threshold() const { return {tau_fraction, polarity_for_residual_sign(residual_sign)}; }
};

TrainConfig train_config(const Settings& settings);

/// One supervised example. All arrays are divided by `scale`, the peak
/// magnitude of the full-view DAS image, so every sample has |y| <= 1.
struct TrainingSample {
  PositionWiseStack x;  // input view, channels [0, input_channels)
  DasImage x_image;     // superposition of x
  RowMatrixXd target;   // true delayed data of the remaining channels
  RowMatrixXd y;        // full-view DAS image
  RowMatrixXd p0;       // phantom (unscaled)
  double scale = 1.0;
};

/// Simulates and beamforms phantoms with a fixed acquisition; the delay
/// table and pulse are built once.
class SampleBuilder {
 public:
  SampleBuilder(const Acquisition& acquisition, Index input_channels);

  TrainingSample build(const PressureMap& p0, std::uint64_t noise_seed = 0) const;

  const Acquisition& acquisition() const { return acq_; }
  const DelayTable& delays() const { return delays_; }
  const TransducerResponse& response() const { return response_; }
  SignalSet simulate(const PressureMap& p0, std::uint64_t noise_seed = 0) const;

 private:
  Acquisition acq_;
  Index input_channels_;
  DelayTable delays_;
  TransducerResponse response_;
};

/// Loads and prepares every sample of one split of a dataset manifest.
std::vector<TrainingSample> load_split(const Manifest& manifest, const std::string& split,
                                       const SampleBuilder& builder);

struct LossEvaluation {
  LossParts parts;
  double total = 0.0;
};

/// Batch-mean losses. When `grads` is non-null the gradient of `total` with
/// respect to every parameter is added to it. Disabled losses contribute
/// neither value nor gradient.
LossEvaluation evaluate_batch(const ModelParams& model, std::span<const TrainingSample* const> batch,
                              const TrainConfig& config, ModelParams* grads);

struct EpochLog {
  int epoch = 0;
  double total = 0.0;
  LossParts parts;
};

struct TrainResult {
  ModelParams model;
  std::vector<EpochLog> log;
};

/// Adaptive-moment descent over the samples in their given order.
TrainResult train(ModelParams model, const std::vector<TrainingSample>& samples, const TrainConfig& config);

/// Runs the model on one prepared sample.
InferenceBundle infer(const ModelParams& model, const TrainingSample& sample, int residual_sign);

struct AblationCase {
  std::string name;
  bool enable_response = false;
  bool enable_overlay = false;
  TrainResult result;
  InferenceBundle bundle;  // first evaluation sample
  double object_mean = 0.0;
  double background_mean = 0.0;
};

struct AblationResult {
  std::array<AblationCase, 4> cases;
  std::string report() const;
};

/// Four trainings that differ only in which of the response and overlay
/// losses are enabled. Means of sum(G(x)) over the phantom support and the
/// background are averaged over `eval`.
AblationResult ablate(const std::vector<TrainingSample>& train_samples, const std::vector<TrainingSample>& eval,
                      const TrainConfig& config);

// MDL1 checkpoint, little-endian: "MDL1" | u32 version | u32 count |
// per tensor: u16 name length | name | u32 rank | u32 dims[rank] | f64 payload
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, ModelParams& model);
std::vector<std::uint8_t> encode_checkpoint(ModelParams& model);
/// Rebuilds the architecture from the stored tensor shapes.
ModelParams load_checkpoint(const std::filesystem::path& path);

/// CSV with header `epoch,total,response,overlay,texture,rec`.
void write_loss_log(const std::filesystem::path& path, const std::vector<EpochLog>& log);
std::string format_loss_log(const std::vector<EpochLog>& log);

}  // namespace pact
