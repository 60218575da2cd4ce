#include "pact/model.hpp"

#include <algorithm>
#include <cmath>

#include "pact/rng.hpp"

namespace pact {

void ArchConfig::validate() const {
  if (grid < 4 || grid % 4 != 0)
    throw DataError("model: grid " + std::to_string(grid) + " must be a positive multiple of 4");
  if (input_channels < 1 || output_channels < 1) throw DataError("model: channel counts must be >= 1");
  if (encoder_width1 < 1 || encoder_width2 < 1 || image_width < 1 || rgc_hidden < 1 || rgc_blocks < 0)
    throw DataError("model: layer widths must be >= 1");
}

namespace {

Conv2dParams conv_zeros(Index out, Index in, Index k) { return {Tensor4(out, in, k, k), Eigen::VectorXd::Zero(out)}; }

void add_conv(std::vector<TensorRef>& refs, const std::string& name, Conv2dParams& p) {
  refs.push_back({name + ".kernels", {p.out_channels(), p.in_channels(), p.kernel_size(), p.kernel_size()},
                  p.kernels.flat().data(), p.kernels.size()});
  refs.push_back({name + ".bias", {p.bias.size()}, p.bias.data(), p.bias.size()});
}

void add_matrix(std::vector<TensorRef>& refs, const std::string& name, RowMatrixXd& m,
                std::vector<Index> shape) {
  refs.push_back({name, std::move(shape), m.data(), m.size()});
}

void add_vector(std::vector<TensorRef>& refs, const std::string& name, Eigen::VectorXd& v) {
  refs.push_back({name, {v.size()}, v.data(), v.size()});
}

}  // namespace

std::vector<TensorRef> ModelParams::tensors() {
  std::vector<TensorRef> refs;
  add_conv(refs, "encoder1", encoder1);
  add_conv(refs, "encoder2", encoder2);
  const Index n = sctm.side();
  add_matrix(refs, "sctm.w_max", sctm.w_max, {sctm.channels(), n, n});
  add_matrix(refs, "sctm.w_avg", sctm.w_avg, {sctm.channels(), n, n});
  add_conv(refs, "decoder1", decoder1);
  add_conv(refs, "decoder2", decoder2);
  add_conv(refs, "head", head);
  add_conv(refs, "image_stem", image_stem);
  for (std::size_t i = 0; i < rgc.size(); ++i) {
    const std::string prefix = "rgc" + std::to_string(i);
    RgcParams& r = rgc[i];
    add_vector(refs, prefix + ".attention", r.attention);
    add_matrix(refs, prefix + ".w1", r.w1, {r.w1.rows(), r.w1.cols()});
    add_vector(refs, prefix + ".b1", r.b1);
    add_matrix(refs, prefix + ".w2", r.w2, {r.w2.rows(), r.w2.cols()});
    add_vector(refs, prefix + ".b2", r.b2);
  }
  add_conv(refs, "image_head", image_head);
  return refs;
}

Index ModelParams::parameter_count() {
  Index total = 0;
  for (const auto& t : tensors()) total += t.size;
  return total;
}

ModelParams ModelParams::zeros(const ArchConfig& arch) {
  arch.validate();
  ModelParams m;
  m.arch = arch;
  m.encoder1 = conv_zeros(arch.encoder_width1, arch.input_channels, 3);
  m.encoder2 = conv_zeros(arch.encoder_width2, arch.encoder_width1, 3);
  m.sctm = SctmParams::zeros(arch.encoder_width2, arch.bottleneck_side());
  m.decoder1 = conv_zeros(arch.encoder_width1, arch.encoder_width2, 3);
  m.decoder2 = conv_zeros(arch.encoder_width1, arch.encoder_width1, 3);
  m.head = conv_zeros(arch.output_channels, arch.encoder_width1, 1);
  m.image_stem = conv_zeros(arch.image_width, 1, 3);
  m.rgc.assign(static_cast<std::size_t>(arch.rgc_blocks), RgcParams::zeros(arch.image_width, arch.rgc_hidden));
  m.image_head = conv_zeros(1, arch.image_width, 1);
  return m;
}

namespace {

// Inputs feeding one output of each tensor.
Index fan_in(const TensorRef& t) {
  const auto& name = t.name;
  auto ends_with = [&](const char* s) {
    const std::string suffix(s);
    return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with(".kernels")) return t.shape[1] * t.shape[2] * t.shape[3];
  if (name.rfind("sctm.", 0) == 0) return 2;
  if (ends_with(".w1") || ends_with(".w2")) return t.shape[1];
  return 0;
}

}  // namespace

ModelParams build_model(const ArchConfig& arch, std::uint64_t seed) {
  ModelParams model = ModelParams::zeros(arch);
  Rng rng(seed);
  auto refs = model.tensors();
  for (std::size_t i = 0; i < refs.size(); ++i) {
    auto& t = refs[i];
    Index fan = fan_in(t);
    // Biases take the fan-in of the weight they follow; attention kernels use their length.
    if (fan == 0) fan = (i == 0 || t.name.ends_with(".attention")) ? t.size : fan_in(refs[i - 1]);
    const double bound = std::sqrt(1.0 / static_cast<double>(fan));
    for (Index k = 0; k < t.size; ++k) t.data[k] = rng.uniform(-bound, bound);
  }
  return model;
}

namespace {

constexpr PoolSpec kDownsample{PoolKind::avg, 2, 2, 0};

}  // namespace

ForwardCache model_forward(const ModelParams& m, const Tensor4& stacks, const Tensor4& images) {
  const ArchConfig& a = m.arch;
  if (stacks.channels() != a.input_channels || stacks.height() != a.grid || stacks.width() != a.grid)
    throw DataError("model: stack batch " + stacks.shape_string() + " does not match architecture (" +
                    std::to_string(a.input_channels) + " channels, grid " + std::to_string(a.grid) + ")");
  if (images.channels() != 1 || images.batch() != stacks.batch() || images.height() != a.grid ||
      images.width() != a.grid)
    throw DataError("model: image batch " + images.shape_string() + " does not match stack batch");

  ForwardCache c;
  c.input = stacks;
  c.enc1_pre = conv2d_forward(c.input, m.encoder1);
  c.enc1_act = leaky_relu_forward(c.enc1_pre);
  c.enc1_pool = pool2d_forward(c.enc1_act, kDownsample);
  c.enc2_pre = conv2d_forward(c.enc1_pool, m.encoder2);
  c.enc2_act = leaky_relu_forward(c.enc2_pre);
  c.enc2_pool = pool2d_forward(c.enc2_act, kDownsample);
  c.sctm_out = sctm_forward(c.enc2_pool, m.sctm);
  c.dec1_pre = upsample_conv_forward(c.sctm_out, m.decoder1);
  c.dec1_act = leaky_relu_forward(c.dec1_pre);
  c.dec2_pre = upsample_conv_forward(c.dec1_act, m.decoder2);
  c.dec2_act = leaky_relu_forward(c.dec2_pre);
  c.compensated = conv2d_forward(c.dec2_act, m.head);

  c.image_input = images;
  c.stem_pre = conv2d_forward(c.image_input, m.image_stem);
  c.stem_act = leaky_relu_forward(c.stem_pre);
  Tensor4 current = c.stem_act;
  for (const auto& block : m.rgc) {
    c.rgc_inputs.push_back(current);
    current = rgc_forward(current, block);
  }
  c.rgc_out = current;
  c.image_out = conv2d_forward(c.rgc_out, m.image_head);
  return c;
}

namespace {

void accumulate(Conv2dParams& into, const Conv2dParams& g) {
  into.kernels.flat() += g.kernels.flat();
  into.bias += g.bias;
}

}  // namespace

void model_backward(const ModelParams& m, const ForwardCache& c, const Tensor4& grad_compensated,
                    const Tensor4& grad_image_out, ModelParams& grads) {
  // Compensator.
  auto head = conv2d_backward(c.dec2_act, m.head, grad_compensated);
  accumulate(grads.head, head.params);
  auto dec2 = upsample_conv_backward(c.dec1_act, m.decoder2, leaky_relu_backward(c.dec2_pre, head.input));
  accumulate(grads.decoder2, dec2.params);
  auto dec1 = upsample_conv_backward(c.sctm_out, m.decoder1, leaky_relu_backward(c.dec1_pre, dec2.input));
  accumulate(grads.decoder1, dec1.params);
  auto sctm = sctm_backward(c.enc2_pool, m.sctm, dec1.input);
  grads.sctm.w_max += sctm.params.w_max;
  grads.sctm.w_avg += sctm.params.w_avg;
  const Tensor4 d_enc2_act = pool2d_backward(c.enc2_act, kDownsample, sctm.input);
  auto enc2 = conv2d_backward(c.enc1_pool, m.encoder2, leaky_relu_backward(c.enc2_pre, d_enc2_act));
  accumulate(grads.encoder2, enc2.params);
  const Tensor4 d_enc1_act = pool2d_backward(c.enc1_act, kDownsample, enc2.input);
  auto enc1 = conv2d_backward(c.input, m.encoder1, leaky_relu_backward(c.enc1_pre, d_enc1_act));
  accumulate(grads.encoder1, enc1.params);

  // Image path.
  auto ihead = conv2d_backward(c.rgc_out, m.image_head, grad_image_out);
  accumulate(grads.image_head, ihead.params);
  Tensor4 d = ihead.input;
  for (std::size_t i = m.rgc.size(); i-- > 0;) {
    auto r = rgc_backward(c.rgc_inputs[i], m.rgc[i], d);
    RgcParams& g = grads.rgc[i];
    g.attention += r.params.attention;
    g.w1 += r.params.w1;
    g.b1 += r.params.b1;
    g.w2 += r.params.w2;
    g.b2 += r.params.b2;
    d = std::move(r.input);
  }
  auto stem = conv2d_backward(c.image_input, m.image_stem, leaky_relu_backward(c.stem_pre, d));
  accumulate(grads.image_stem, stem.params);
}

InferenceBundle forward_pass(const ModelParams& model, const PositionWiseStack& x, const DasImage& x_image,
                             int residual_sign) {
  if (residual_sign != 1 && residual_sign != -1) throw DataError("forward_pass: residual_sign must be +1 or -1");
  const ImageGrid& grid = x.grid;
  if (x_image.values.rows() != grid.height || x_image.values.cols() != grid.width)
    throw DataError("forward_pass: image does not match stack grid");
  const Tensor4 stacks = Tensor4::from_item(x.data, grid.height, grid.width);
  Tensor4 images(1, 1, grid.height, grid.width);
  images.plane(0, 0) = x_image.values;
  const ForwardCache cache = model_forward(model, stacks, images);

  const Index total = model.arch.input_channels + model.arch.output_channels;
  std::vector<Index> complement;
  for (Index ch = 0; ch < total; ++ch)
    if (std::find(x.channel_ids.begin(), x.channel_ids.end(), ch) == x.channel_ids.end()) complement.push_back(ch);
  if (static_cast<Index>(complement.size()) != model.arch.output_channels)
    throw DataError("forward_pass: input channel ids are not a subset of 0.." + std::to_string(total - 1));

  InferenceBundle out;
  out.g_out = {RowMatrixXd(cache.compensated.item(0)), complement, grid};
  out.sum_g = superpose(out.g_out);
  out.y0 = {RowMatrixXd(cache.image_out.plane(0, 0)), x_image.channel_ids};
  out.y_hat = {out.y0.values - static_cast<double>(residual_sign) * out.sum_g.values, {}};
  return out;
}

}  // namespace pact
