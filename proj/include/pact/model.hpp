#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pact/das.hpp"
#include "pact/layers.hpp"

namespace pact {

/// Layer widths of the desk-scale network. The compensator halves the grid
/// twice, so `grid` must be divisible by 4; the SCTM bottleneck is then
/// encoder_width2 channels of side grid/4.
struct ArchConfig {
  Index grid = 32;
  Index input_channels = 8;
  Index output_channels = 24;
  Index encoder_width1 = 16;
  Index encoder_width2 = 32;
  Index image_width = 8;
  Index rgc_hidden = 4;
  Index rgc_blocks = 3;

  void validate() const;
  Index bottleneck_side() const { return grid / 4; }
};

/// Mutable view of one named parameter tensor.
struct TensorRef {
  std::string name;
  std::vector<Index> shape;
  double* data;
  Index size;
};

/// All trainable tensors. Compensator: two conv+pool encoder stages, SCTM,
/// two upsample-conv decoder stages and a linear 1x1 head. Image path: 3x3
/// stem, residual global-context blocks and a 1x1 head.
struct ModelParams {
  ArchConfig arch;
  Conv2dParams encoder1;
  Conv2dParams encoder2;
  SctmParams sctm;
  Conv2dParams decoder1;
  Conv2dParams decoder2;
  Conv2dParams head;
  Conv2dParams image_stem;
  std::vector<RgcParams> rgc;
  Conv2dParams image_head;

  /// Every tensor in a fixed order; names are unique.
  std::vector<TensorRef> tensors();
  Index parameter_count();

  /// Same architecture, all values zero.
  static ModelParams zeros(const ArchConfig& arch);
};

/// Uniform(-sqrt(1/fan_in), sqrt(1/fan_in)) initialisation from one seeded stream.
ModelParams build_model(const ArchConfig& arch, std::uint64_t seed);

/// Intermediate activations kept for the reverse pass.
struct ForwardCache {
  Tensor4 input;
  Tensor4 enc1_pre, enc1_act, enc1_pool;
  Tensor4 enc2_pre, enc2_act, enc2_pool;
  Tensor4 sctm_out;
  Tensor4 dec1_pre, dec1_act;
  Tensor4 dec2_pre, dec2_act;
  Tensor4 compensated;  // b x out x H x W

  Tensor4 image_input;
  Tensor4 stem_pre, stem_act;
  std::vector<Tensor4> rgc_inputs;
  Tensor4 rgc_out;
  Tensor4 image_out;  // b x 1 x H x W
};

/// Runs both paths on a batch. `stacks` is b x input_channels x H x W and
/// `images` is b x 1 x H x W.
ForwardCache model_forward(const ModelParams& model, const Tensor4& stacks, const Tensor4& images);

/// Accumulates parameter gradients given d(loss)/d(compensated) and
/// d(loss)/d(image_out).
void model_backward(const ModelParams& model, const ForwardCache& cache, const Tensor4& grad_compensated,
                    const Tensor4& grad_image_out, ModelParams& grads);

/// Compensator output, image-path output and the residual combination.
struct InferenceBundle {
  PositionWiseStack g_out;
  DasImage y0;
  DasImage y_hat;
  DasImage sum_g;
};

/// y_hat = y0 - residual_sign * sum(G(x)).
InferenceBundle forward_pass(const ModelParams& model, const PositionWiseStack& x, const DasImage& x_image,
                             int residual_sign = 1);

}  // namespace pact
