#pragma once

#include "pact/tensor.hpp"

namespace pact {

enum class Padding { same, valid };

/// Kernels are out_channels x in_channels x k x k, k odd.
struct Conv2dParams {
  Tensor4 kernels;
  Eigen::VectorXd bias;

  Index out_channels() const { return kernels.batch(); }
  Index in_channels() const { return kernels.channels(); }
  Index kernel_size() const { return kernels.height(); }
};

struct Conv2dGrads {
  Tensor4 input;
  Conv2dParams params;
};

/// Cross-correlation with zero padding ("same" pads k/2 on each side).
Tensor4 conv2d_forward(const Tensor4& input, const Conv2dParams& params, Index stride = 1,
                       Padding padding = Padding::same);
Conv2dGrads conv2d_backward(const Tensor4& input, const Conv2dParams& params, const Tensor4& grad_output,
                            Index stride = 1, Padding padding = Padding::same);

enum class PoolKind { max, avg };

/// Window positions outside the input are skipped: max ignores them and avg
/// divides by the count of in-bounds entries.
struct PoolSpec {
  PoolKind kind = PoolKind::max;
  Index window = 2;
  Index stride = 2;
  Index padding = 0;
};

Tensor4 pool2d_forward(const Tensor4& input, const PoolSpec& spec);
/// Max routes each output gradient to the first maximal entry in row-major order.
Tensor4 pool2d_backward(const Tensor4& input, const PoolSpec& spec, const Tensor4& grad_output);

inline constexpr double kLeakySlope = 0.1;

Tensor4 leaky_relu_forward(const Tensor4& input, double slope = kLeakySlope);
Tensor4 leaky_relu_backward(const Tensor4& input, const Tensor4& grad_output, double slope = kLeakySlope);

/// Spatial fusion of 3x3 stride-1 max and average pooled maps with one weight
/// per channel per position for each branch: 2 m n^2 scalars in total.
struct SctmParams {
  RowMatrixXd w_max;  // m x (n*n)
  RowMatrixXd w_avg;  // m x (n*n)

  Index channels() const { return w_max.rows(); }
  Index side() const;
  Index parameter_count() const { return w_max.size() + w_avg.size(); }
  static SctmParams zeros(Index m, Index n);
};

struct SctmGrads {
  Tensor4 input;
  SctmParams params;
};

Tensor4 sctm_forward(const Tensor4& input, const SctmParams& params);
SctmGrads sctm_backward(const Tensor4& input, const SctmParams& params, const Tensor4& grad_output);

/// Residual global-context block: softmax attention over positions from a
/// 1x1 kernel, context = attention-weighted channel vector, then
/// w2 * leaky(w1 * context + b1) + b2 added to every position.
struct RgcParams {
  Eigen::VectorXd attention;  // C
  RowMatrixXd w1;             // hidden x C
  Eigen::VectorXd b1;         // hidden
  RowMatrixXd w2;             // C x hidden
  Eigen::VectorXd b2;         // C

  Index channels() const { return attention.size(); }
  Index hidden() const { return w1.rows(); }
  static RgcParams zeros(Index channels, Index hidden);
};

struct RgcGrads {
  Tensor4 input;
  RgcParams params;
};

Tensor4 rgc_forward(const Tensor4& input, const RgcParams& params);
RgcGrads rgc_backward(const Tensor4& input, const RgcParams& params, const Tensor4& grad_output);

/// Nearest-neighbour repeat by `factor` in both spatial directions.
Tensor4 upsample_nearest(const Tensor4& input, Index factor = 2);
Tensor4 upsample_nearest_backward(const Tensor4& grad_output, Index factor = 2);

/// 2x nearest upsample followed by a same-padded stride-1 convolution.
Tensor4 upsample_conv_forward(const Tensor4& input, const Conv2dParams& params, Index factor = 2);
Conv2dGrads upsample_conv_backward(const Tensor4& input, const Conv2dParams& params,
                                   const Tensor4& grad_output, Index factor = 2);

}  // namespace pact
