#include "pact/trainer.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "pact/io.hpp"
#include "pact/rng.hpp"

namespace pact {

void TrainConfig::validate() const {
  arch.validate();
  if (epochs < 1) throw DataError("train: epochs must be >= 1");
  if (batch < 1) throw DataError("train: batch must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw DataError("train: lr must be finite and >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0))
    throw DataError("train: invalid moment coefficients");
  if (residual_sign != 1 && residual_sign != -1) throw DataError("train: residual_sign must be +1 or -1");
  weights.validate();
  threshold().validate();
}

TrainConfig train_config(const Settings& s) {
  if (s.input_channels < 1 || s.input_channels >= s.num_elements)
    throw DataError("config: input_channels must lie in [1, num_elements)");
  TrainConfig c;
  c.arch.grid = s.grid;
  c.arch.input_channels = s.input_channels;
  c.arch.output_channels = s.num_elements - s.input_channels;
  c.epochs = s.epochs;
  c.batch = s.batch;
  c.lr = s.lr;
  c.weights = s.weights;
  c.enable_response = s.enable_response;
  c.enable_overlay = s.enable_overlay;
  c.residual_sign = s.residual_sign;
  c.tau_fraction = s.tau_fraction;
  c.seed = s.seed;
  c.validate();
  return c;
}

SampleBuilder::SampleBuilder(const Acquisition& acquisition, Index input_channels)
    : acq_(acquisition),
      input_channels_(input_channels),
      delays_(build_delay_table(acquisition.geometry, acquisition.grid)),
      response_(build_impulse_response(acquisition.center_frequency, acquisition.fractional_bandwidth,
                                       acquisition.sampling_rate)) {
  if (input_channels < 1 || input_channels >= acquisition.geometry.num_elements)
    throw DataError("samples: input channel count must lie in [1, num_elements)");
}

SignalSet SampleBuilder::simulate(const PressureMap& p0, std::uint64_t noise_seed) const {
  SignalSet s = simulate_signals(p0, acq_.geometry, delays_, response_, acq_.sampling_rate, acq_.sound_speed,
                                 acq_.duration);
  add_white_noise(s, acq_.noise_std, noise_seed);
  return s;
}

TrainingSample SampleBuilder::build(const PressureMap& p0, std::uint64_t noise_seed) const {
  if (p0.values.rows() != acq_.grid.height || p0.values.cols() != acq_.grid.width)
    throw DataError("samples: phantom grid does not match acquisition grid");
  const SignalSet signals = simulate(p0, noise_seed);
  const Index total = acq_.geometry.num_elements;
  const PositionWiseStack full = position_wise(signals, acq_.grid, delays_, view_mask(acq_.geometry, 0, total));

  TrainingSample s;
  const RowMatrixXd y = superpose(full).values;
  const double peak = y.cwiseAbs().maxCoeff();
  s.scale = peak > 0.0 ? peak : 1.0;
  s.x = {full.data.topRows(input_channels_) / s.scale, view_mask(acq_.geometry, 0, input_channels_), acq_.grid};
  s.x_image = superpose(s.x);
  s.target = full.data.bottomRows(total - input_channels_) / s.scale;
  s.y = y / s.scale;
  s.p0 = p0.values;
  return s;
}

std::vector<TrainingSample> load_split(const Manifest& manifest, const std::string& split,
                                       const SampleBuilder& builder) {
  std::vector<TrainingSample> out;
  std::uint64_t index = 0;
  for (const auto& path : manifest.files(split)) {
    out.push_back(builder.build(load_image(path), derive_seed(0x6e6f697365ULL, index++)));
  }
  return out;
}

namespace {

void require_finite(double value, const char* component) {
  if (!std::isfinite(value))
    throw NumericError(std::string("train: non-finite ") + component + " loss, aborting");
}

}  // namespace

LossEvaluation evaluate_batch(const ModelParams& model, std::span<const TrainingSample* const> batch,
                              const TrainConfig& config, ModelParams* grads) {
  if (batch.empty()) throw DataError("train: empty batch");
  const ArchConfig& arch = model.arch;
  const Index b = static_cast<Index>(batch.size());
  const Index grid = arch.grid;

  Tensor4 stacks(b, arch.input_channels, grid, grid);
  Tensor4 images(b, 1, grid, grid);
  for (Index i = 0; i < b; ++i) {
    const TrainingSample& s = *batch[static_cast<std::size_t>(i)];
    if (s.x.data.rows() != arch.input_channels || s.target.rows() != arch.output_channels ||
        s.y.rows() != grid || s.y.cols() != grid)
      throw DataError("train: sample shapes do not match the model architecture");
    stacks.item(i) = s.x.data;
    images.plane(i, 0) = s.x_image.values;
  }
  const ForwardCache cache = model_forward(model, stacks, images);

  Tensor4 grad_g(b, arch.output_channels, grid, grid);
  Tensor4 grad_y0(b, 1, grid, grid);
  const double inv_b = 1.0 / static_cast<double>(b);
  const double sign = static_cast<double>(config.residual_sign);
  const LossWeights& w = config.weights;

  LossEvaluation eval;
  for (Index i = 0; i < b; ++i) {
    const TrainingSample& s = *batch[static_cast<std::size_t>(i)];
    const auto g = cache.compensated.item(i);
    const auto y0 = cache.image_out.plane(i, 0);
    const RowMatrixXd sum_g = superpose_rows(g, s.x.grid);
    const RowMatrixXd y_hat = y0 - sign * sum_g;

    auto gg = grad_g.item(i);
    LossParts parts;
    if (config.enable_response) {
      const auto r = response_loss(g, s.target);
      parts.response = r.value;
      gg += (w.lambda_re * inv_b) * r.gradient;
    }
    if (config.enable_overlay) {
      const auto o = overlay_loss(g, s.target);
      parts.overlay = o.value;
      gg += (w.lambda_ov * inv_b) * o.gradient;
    }
    const auto tex = texture_loss(y0, s.y);
    const auto rec = rec_loss(y_hat, s.y);
    parts.texture = tex.value;
    parts.rec = rec.value;

    grad_y0.plane(i, 0) = (w.lambda_tex * inv_b) * tex.gradient + (w.lambda_rec * inv_b) * rec.gradient;
    const RowMatrixXd d_sum = (-sign * w.lambda_rec * inv_b) * rec.gradient;
    const Eigen::Map<const Eigen::RowVectorXd> d_flat(d_sum.data(), d_sum.size());
    gg.rowwise() += d_flat;

    eval.parts.response += parts.response * inv_b;
    eval.parts.overlay += parts.overlay * inv_b;
    eval.parts.texture += parts.texture * inv_b;
    eval.parts.rec += parts.rec * inv_b;
    eval.total += overall_loss(parts, w) * inv_b;
  }

  require_finite(eval.parts.response, "response");
  require_finite(eval.parts.overlay, "overlay");
  require_finite(eval.parts.texture, "texture");
  require_finite(eval.parts.rec, "rec");

  if (grads != nullptr) model_backward(model, cache, grad_g, grad_y0, *grads);
  return eval;
}

TrainResult train(ModelParams model, const std::vector<TrainingSample>& samples, const TrainConfig& config) {
  config.validate();
  if (samples.empty()) throw DataError("train: no training samples");
  if (model.arch.grid != config.arch.grid || model.arch.input_channels != config.arch.input_channels ||
      model.arch.output_channels != config.arch.output_channels)
    throw DataError("train: model architecture does not match config");

  ModelParams first_moment = ModelParams::zeros(model.arch);
  ModelParams second_moment = ModelParams::zeros(model.arch);
  auto params = model.tensors();
  auto m1 = first_moment.tensors();
  auto m2 = second_moment.tensors();

  TrainResult result;
  std::int64_t step = 0;
  const std::size_t n = samples.size();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochLog entry;
    entry.epoch = epoch;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(config.batch));
      std::vector<const TrainingSample*> batch;
      for (std::size_t k = start; k < stop; ++k) batch.push_back(&samples[k]);

      ModelParams grads = ModelParams::zeros(model.arch);
      const LossEvaluation eval = evaluate_batch(model, batch, config, &grads);
      const double share = static_cast<double>(stop - start) / static_cast<double>(n);
      entry.total += eval.total * share;
      entry.parts.response += eval.parts.response * share;
      entry.parts.overlay += eval.parts.overlay * share;
      entry.parts.texture += eval.parts.texture * share;
      entry.parts.rec += eval.parts.rec * share;

      ++step;
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      auto g = grads.tensors();
      for (std::size_t t = 0; t < params.size(); ++t) {
        for (Index k = 0; k < params[t].size; ++k) {
          const double gk = g[t].data[k];
          double& a = m1[t].data[k];
          double& v = m2[t].data[k];
          a = config.beta1 * a + (1.0 - config.beta1) * gk;
          v = config.beta2 * v + (1.0 - config.beta2) * gk * gk;
          params[t].data[k] -= config.lr * (a / c1) / (std::sqrt(v / c2) + config.epsilon);
        }
      }
    }
    result.log.push_back(entry);
  }
  result.model = std::move(model);
  return result;
}

InferenceBundle infer(const ModelParams& model, const TrainingSample& sample, int residual_sign) {
  return forward_pass(model, sample.x, sample.x_image, residual_sign);
}

AblationResult ablate(const std::vector<TrainingSample>& train_samples, const std::vector<TrainingSample>& eval,
                      const TrainConfig& config) {
  if (eval.empty()) throw DataError("ablate: no evaluation samples");
  static constexpr std::array<std::pair<bool, bool>, 4> kFlags{{{false, false}, {false, true}, {true, false}, {true, true}}};
  static constexpr std::array<const char*, 4> kNames{"no response, no overlay", "overlay only", "response only",
                                                     "response and overlay"};
  AblationResult out;
  for (std::size_t c = 0; c < 4; ++c) {
    AblationCase& ac = out.cases[c];
    ac.name = kNames[c];
    ac.enable_response = kFlags[c].first;
    ac.enable_overlay = kFlags[c].second;
    TrainConfig cfg = config;
    cfg.enable_response = ac.enable_response;
    cfg.enable_overlay = ac.enable_overlay;
    ac.result = train(build_model(cfg.arch, cfg.seed), train_samples, cfg);

    double object_sum = 0.0;
    double background_sum = 0.0;
    for (std::size_t i = 0; i < eval.size(); ++i) {
      InferenceBundle bundle = infer(ac.result.model, eval[i], cfg.residual_sign);
      const MaskMatrix support = eval[i].p0.array() > 0.0;
      const auto n_obj = support.count();
      const auto n_bg = support.size() - n_obj;
      if (n_obj > 0) object_sum += support.select(bundle.sum_g.values, 0.0).sum() / static_cast<double>(n_obj);
      if (n_bg > 0) background_sum += (!support.array()).matrix().select(bundle.sum_g.values, 0.0).sum() /
                                      static_cast<double>(n_bg);
      if (i == 0) ac.bundle = std::move(bundle);
    }
    ac.object_mean = object_sum / static_cast<double>(eval.size());
    ac.background_mean = background_sum / static_cast<double>(eval.size());
  }
  return out;
}

std::string AblationResult::report() const {
  std::ostringstream os;
  os.precision(12);
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const auto& ac = cases[c];
    os << "[case " << c + 1 << ": " << ac.name << "]\n";
    os << "enable_response = " << (ac.enable_response ? "true" : "false") << '\n';
    os << "enable_overlay = " << (ac.enable_overlay ? "true" : "false") << '\n';
    os << "final_total_loss = " << ac.result.log.back().total << '\n';
    os << "object_mean_sum_g = " << ac.object_mean << '\n';
    os << "background_mean_sum_g = " << ac.background_mean << '\n';
    os << "object_sign = " << (ac.object_mean < 0.0 ? "negative" : "non-negative") << "\n\n";
  }
  return os.str();
}

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_f64(std::vector<std::uint8_t>& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class CheckpointReader {
 public:
  CheckpointReader(const std::vector<std::uint8_t>& bytes, std::string source)
      : bytes_(bytes), source_(std::move(source)) {}
  std::uint64_t uint(int width) {
    if (pos_ + static_cast<std::size_t>(width) > bytes_.size())
      throw TruncatedPayloadError(source_ + ": checkpoint truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::string text(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw TruncatedPayloadError(source_ + ": checkpoint truncated");
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

struct StoredTensor {
  std::vector<Index> shape;
  std::vector<double> values;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(ModelParams& model) {
  std::vector<std::uint8_t> out{'M', 'D', 'L', '1'};
  auto refs = model.tensors();
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(refs.size()));
  for (const auto& t : refs) {
    put_u16(out, static_cast<std::uint16_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (Index d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (Index k = 0; k < t.size; ++k) put_f64(out, t.data[k]);
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, ModelParams& model) {
  write_bytes(path, encode_checkpoint(model));
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  const std::string where = path.string();
  CheckpointReader r(bytes, where);
  if (bytes.size() < 4 || r.text(4) != "MDL1") throw BadMagicError(where + ": bad magic (expected MDL1)");
  const auto version = r.uint(4);
  if (version != kCheckpointVersion)
    throw VersionMismatchError(where + ": checkpoint version " + std::to_string(version));
  const auto count = r.uint(4);
  std::map<std::string, StoredTensor> stored;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = static_cast<std::size_t>(r.uint(2));
    std::string name = r.text(len);
    StoredTensor t;
    const auto rank = r.uint(4);
    Index size = 1;
    for (std::uint64_t k = 0; k < rank; ++k) {
      t.shape.push_back(static_cast<Index>(r.uint(4)));
      size *= t.shape.back();
    }
    t.values.resize(static_cast<std::size_t>(size));
    for (auto& v : t.values) v = std::bit_cast<double>(r.uint(8));
    stored.emplace(std::move(name), std::move(t));
  }
  if (!r.done()) throw DataError(where + ": trailing bytes after checkpoint");

  auto shape_of = [&](const std::string& name) -> const std::vector<Index>& {
    const auto it = stored.find(name);
    if (it == stored.end()) throw DataError(where + ": checkpoint lacks tensor " + name);
    return it->second.shape;
  };
  ArchConfig arch;
  arch.input_channels = shape_of("encoder1.kernels").at(1);
  arch.encoder_width1 = shape_of("encoder1.kernels").at(0);
  arch.encoder_width2 = shape_of("encoder2.kernels").at(0);
  arch.grid = 4 * shape_of("sctm.w_max").at(1);
  arch.output_channels = shape_of("head.kernels").at(0);
  arch.image_width = shape_of("image_stem.kernels").at(0);
  Index blocks = 0;
  while (stored.count("rgc" + std::to_string(blocks) + ".w1")) ++blocks;
  arch.rgc_blocks = blocks;
  arch.rgc_hidden = blocks > 0 ? shape_of("rgc0.w1").at(0) : 1;

  ModelParams model = ModelParams::zeros(arch);
  auto refs = model.tensors();
  if (refs.size() != stored.size()) throw DataError(where + ": unexpected tensor set in checkpoint");
  for (auto& t : refs) {
    const StoredTensor& s = stored.at(t.name);
    if (s.shape != t.shape) throw DataError(where + ": tensor " + t.name + " has inconsistent shape");
    std::copy(s.values.begin(), s.values.end(), t.data);
  }
  return model;
}

std::string format_loss_log(const std::vector<EpochLog>& log) {
  std::string out = "epoch,total,response,overlay,texture,rec\n";
  char line[256];
  for (const auto& e : log) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.total, e.parts.response,
                  e.parts.overlay, e.parts.texture, e.parts.rec);
    out += line;
  }
  return out;
}

void write_loss_log(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
  const std::string text = format_loss_log(log);
  write_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace pact
