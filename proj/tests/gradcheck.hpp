#pragma once

// Finite-difference checks of every layer and of the end-to-end training
// loss, shared by the unit tests and the acceptance binary.

#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pact/layers.hpp"
#include "pact/losses.hpp"
#include "pact/trainer.hpp"

namespace pact::gradcheck {

struct Probe {
  std::string name;
  double* data;
  Index size;
  Eigen::VectorXd analytic;
};

struct ProbeError {
  std::string name;
  double error;
};

inline Eigen::VectorXd as_vector(const Tensor4& t) { return t.flat(); }
inline Eigen::VectorXd as_vector(const RowMatrixXd& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

inline std::vector<ProbeError> run(const std::function<double()>& f, std::vector<Probe>& probes) {
  std::vector<ProbeError> out;
  for (auto& p : probes)
    out.push_back({p.name, oracle::relative_error(p.analytic, oracle::numeric_gradient(f, p.data, p.size))});
  return out;
}

inline double worst(const std::vector<ProbeError>& errors) {
  double w = 0.0;
  for (const auto& e : errors) w = std::max(w, e.error);
  return w;
}

/// Objective sum(weights * layer(input)), whose output gradient is `weights`.
inline double weighted_sum(const Tensor4& weights, const Tensor4& out) { return weights.flat().dot(out.flat()); }

inline Conv2dParams random_conv(Index out, Index in, Index k, Rng& rng) {
  return {oracle::random_tensor(out, in, k, k, rng), oracle::random_matrix(out, 1, rng)};
}

inline std::vector<ProbeError> conv(std::uint64_t seed, Index stride = 1, Padding padding = Padding::same) {
  Rng rng(seed);
  Tensor4 x = oracle::random_tensor(1, 2, 5, 5, rng);
  Conv2dParams p = random_conv(3, 2, 3, rng);
  const Tensor4 out = conv2d_forward(x, p, stride, padding);
  const Tensor4 r = oracle::random_tensor(out.batch(), out.channels(), out.height(), out.width(), rng);
  const auto g = conv2d_backward(x, p, r, stride, padding);
  std::vector<Probe> probes{{"input", x.flat().data(), x.size(), as_vector(g.input)},
                            {"kernels", p.kernels.flat().data(), p.kernels.size(), as_vector(g.params.kernels)},
                            {"bias", p.bias.data(), p.bias.size(), g.params.bias}};
  return run([&] { return weighted_sum(r, conv2d_forward(x, p, stride, padding)); }, probes);
}

inline std::vector<ProbeError> pool(std::uint64_t seed, const PoolSpec& spec) {
  Rng rng(seed);
  Tensor4 x = oracle::random_tensor(2, 2, 6, 6, rng);
  const Tensor4 out = pool2d_forward(x, spec);
  const Tensor4 r = oracle::random_tensor(out.batch(), out.channels(), out.height(), out.width(), rng);
  std::vector<Probe> probes{{"input", x.flat().data(), x.size(), as_vector(pool2d_backward(x, spec, r))}};
  return run([&] { return weighted_sum(r, pool2d_forward(x, spec)); }, probes);
}

inline std::vector<ProbeError> leaky(std::uint64_t seed) {
  Rng rng(seed);
  Tensor4 x = oracle::random_tensor(1, 3, 4, 4, rng);
  const Tensor4 r = oracle::random_tensor(1, 3, 4, 4, rng);
  std::vector<Probe> probes{{"input", x.flat().data(), x.size(), as_vector(leaky_relu_backward(x, r))}};
  return run([&] { return weighted_sum(r, leaky_relu_forward(x)); }, probes);
}

inline std::vector<ProbeError> sctm(std::uint64_t seed, Index batch = 1) {
  Rng rng(seed);
  Tensor4 x = oracle::random_tensor(batch, 2, 4, 4, rng);
  SctmParams p{oracle::random_matrix(2, 16, rng), oracle::random_matrix(2, 16, rng)};
  const Tensor4 r = oracle::random_tensor(batch, 2, 4, 4, rng);
  const auto g = sctm_backward(x, p, r);
  std::vector<Probe> probes{{"input", x.flat().data(), x.size(), as_vector(g.input)},
                            {"w_max", p.w_max.data(), p.w_max.size(), as_vector(g.params.w_max)},
                            {"w_avg", p.w_avg.data(), p.w_avg.size(), as_vector(g.params.w_avg)}};
  return run([&] { return weighted_sum(r, sctm_forward(x, p)); }, probes);
}

inline std::vector<ProbeError> rgc(std::uint64_t seed, Index batch = 1) {
  Rng rng(seed);
  Tensor4 x = oracle::random_tensor(batch, 3, 4, 4, rng);
  RgcParams p{oracle::random_matrix(3, 1, rng), oracle::random_matrix(2, 3, rng), oracle::random_matrix(2, 1, rng),
              oracle::random_matrix(3, 2, rng), oracle::random_matrix(3, 1, rng)};
  const Tensor4 r = oracle::random_tensor(batch, 3, 4, 4, rng);
  const auto g = rgc_backward(x, p, r);
  std::vector<Probe> probes{{"input", x.flat().data(), x.size(), as_vector(g.input)},
                            {"attention", p.attention.data(), p.attention.size(), g.params.attention},
                            {"w1", p.w1.data(), p.w1.size(), as_vector(g.params.w1)},
                            {"b1", p.b1.data(), p.b1.size(), g.params.b1},
                            {"w2", p.w2.data(), p.w2.size(), as_vector(g.params.w2)},
                            {"b2", p.b2.data(), p.b2.size(), g.params.b2}};
  return run([&] { return weighted_sum(r, rgc_forward(x, p)); }, probes);
}

inline std::vector<ProbeError> upsample_conv(std::uint64_t seed) {
  Rng rng(seed);
  Tensor4 x = oracle::random_tensor(1, 2, 3, 3, rng);
  Conv2dParams p = random_conv(2, 2, 3, rng);
  const Tensor4 r = oracle::random_tensor(1, 2, 6, 6, rng);
  const auto g = upsample_conv_backward(x, p, r);
  std::vector<Probe> probes{{"input", x.flat().data(), x.size(), as_vector(g.input)},
                            {"kernels", p.kernels.flat().data(), p.kernels.size(), as_vector(g.params.kernels)},
                            {"bias", p.bias.data(), p.bias.size(), g.params.bias}};
  return run([&] { return weighted_sum(r, upsample_conv_forward(x, p)); }, probes);
}

using LossFn = std::function<LossResult<double>(const RowMatrixXd&, const RowMatrixXd&)>;

inline double loss(const LossFn& fn, Index rows, Index cols, std::uint64_t seed) {
  Rng rng(seed);
  RowMatrixXd a = oracle::random_matrix(rows, cols, rng);
  const RowMatrixXd b = oracle::random_matrix(rows, cols, rng);
  const RowMatrixXd analytic = fn(a, b).gradient;
  return oracle::relative_error(as_vector(analytic),
                                oracle::numeric_gradient([&] { return fn(a, b).value; }, a.data(), a.size()));
}

inline const std::vector<std::pair<std::string, LossFn>>& loss_functions() {
  static const std::vector<std::pair<std::string, LossFn>> fns{
      {"response", [](const RowMatrixXd& a, const RowMatrixXd& b) { return response_loss(a, b); }},
      {"overlay", [](const RowMatrixXd& a, const RowMatrixXd& b) { return overlay_loss(a, b); }},
      {"texture", [](const RowMatrixXd& a, const RowMatrixXd& b) { return texture_loss(a, b); }},
      {"rec", [](const RowMatrixXd& a, const RowMatrixXd& b) { return rec_loss(a, b); }}};
  return fns;
}

/// 16x16 grid, 4 input and 12 output channels, narrow layers.
inline TrainConfig micro_config() {
  TrainConfig cfg;
  cfg.arch = ArchConfig{16, 4, 12, 4, 6, 3, 2, 2};
  cfg.batch = 2;
  cfg.epochs = 1;
  return cfg;
}

inline std::vector<TrainingSample> micro_samples(const TrainConfig& cfg, int count, std::uint64_t seed) {
  Acquisition acq;
  acq.grid = {cfg.arch.grid, cfg.arch.grid, 0.026};
  acq.geometry.num_elements = cfg.total_channels();
  const SampleBuilder builder(acq, cfg.arch.input_channels);
  std::vector<TrainingSample> out;
  for (int i = 0; i < count; ++i)
    out.push_back(builder.build(gen_discs(acq.grid, derive_seed(seed, static_cast<std::uint64_t>(i)), 3)));
  return out;
}

/// Norm-wise relative error of d(total)/d(tensor) for every parameter tensor.
inline std::vector<ProbeError> end_to_end(const TrainConfig& cfg, const std::vector<TrainingSample>& samples,
                                          std::uint64_t model_seed) {
  ModelParams model = build_model(cfg.arch, model_seed);
  std::vector<const TrainingSample*> batch;
  for (const auto& s : samples) batch.push_back(&s);
  ModelParams grads = ModelParams::zeros(cfg.arch);
  evaluate_batch(model, batch, cfg, &grads);
  auto refs = model.tensors();
  auto grad_refs = grads.tensors();
  std::vector<Probe> probes;
  for (std::size_t i = 0; i < refs.size(); ++i)
    probes.push_back({refs[i].name, refs[i].data, refs[i].size,
                      Eigen::Map<const Eigen::VectorXd>(grad_refs[i].data, grad_refs[i].size)});
  return run([&] { return evaluate_batch(model, batch, cfg, nullptr).total; }, probes);
}

}  // namespace pact::gradcheck
