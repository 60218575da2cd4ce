#include "pact/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pact {
namespace {

struct ConvGeometry {
  Index k;
  Index pad;
  Index out_h;
  Index out_w;
};

ConvGeometry conv_geometry(const Tensor4& input, const Conv2dParams& params, Index stride, Padding padding) {
  const Index k = params.kernel_size();
  if (k % 2 == 0 || params.kernels.width() != k) throw DataError("conv2d: kernel must be square with odd size");
  if (params.in_channels() != input.channels())
    throw DataError("conv2d: kernel expects " + std::to_string(params.in_channels()) + " input channels, got " +
                    std::to_string(input.channels()));
  if (params.bias.size() != params.out_channels()) throw DataError("conv2d: bias size mismatch");
  if (stride < 1) throw DataError("conv2d: stride must be >= 1");
  const Index pad = padding == Padding::same ? k / 2 : 0;
  const Index out_h = (input.height() + 2 * pad - k) / stride + 1;
  const Index out_w = (input.width() + 2 * pad - k) / stride + 1;
  if (out_h < 1 || out_w < 1) throw DataError("conv2d: input smaller than kernel");
  return {k, pad, out_h, out_w};
}

// Column matrix (C*k*k) x (out_h*out_w) of one batch item.
RowMatrixXd im2col(const Tensor4& input, Index b, const ConvGeometry& g, Index stride) {
  const Index channels = input.channels();
  RowMatrixXd cols = RowMatrixXd::Zero(channels * g.k * g.k, g.out_h * g.out_w);
  for (Index c = 0; c < channels; ++c) {
    const auto plane = input.plane(b, c);
    for (Index ki = 0; ki < g.k; ++ki) {
      for (Index kj = 0; kj < g.k; ++kj) {
        const Index row = (c * g.k + ki) * g.k + kj;
        for (Index oh = 0; oh < g.out_h; ++oh) {
          const Index ih = oh * stride + ki - g.pad;
          if (ih < 0 || ih >= input.height()) continue;
          for (Index ow = 0; ow < g.out_w; ++ow) {
            const Index iw = ow * stride + kj - g.pad;
            if (iw < 0 || iw >= input.width()) continue;
            cols(row, oh * g.out_w + ow) = plane(ih, iw);
          }
        }
      }
    }
  }
  return cols;
}

void col2im_add(const RowMatrixXd& cols, Tensor4& grad_input, Index b, const ConvGeometry& g, Index stride) {
  for (Index c = 0; c < grad_input.channels(); ++c) {
    auto plane = grad_input.plane(b, c);
    for (Index ki = 0; ki < g.k; ++ki) {
      for (Index kj = 0; kj < g.k; ++kj) {
        const Index row = (c * g.k + ki) * g.k + kj;
        for (Index oh = 0; oh < g.out_h; ++oh) {
          const Index ih = oh * stride + ki - g.pad;
          if (ih < 0 || ih >= grad_input.height()) continue;
          for (Index ow = 0; ow < g.out_w; ++ow) {
            const Index iw = ow * stride + kj - g.pad;
            if (iw < 0 || iw >= grad_input.width()) continue;
            plane(ih, iw) += cols(row, oh * g.out_w + ow);
          }
        }
      }
    }
  }
}

Eigen::Map<const RowMatrixXd> kernel_matrix(const Conv2dParams& p) {
  return {p.kernels.flat().data(), p.out_channels(), p.in_channels() * p.kernel_size() * p.kernel_size()};
}

void require_shape(const Tensor4& t, const Tensor4& expected, const char* what) {
  if (!t.same_shape(expected))
    throw DataError(std::string(what) + ": gradient shape " + t.shape_string() + " does not match " +
                    expected.shape_string());
}

}  // namespace

Tensor4 conv2d_forward(const Tensor4& input, const Conv2dParams& params, Index stride, Padding padding) {
  const auto g = conv_geometry(input, params, stride, padding);
  Tensor4 out(input.batch(), params.out_channels(), g.out_h, g.out_w);
  const auto kernels = kernel_matrix(params);
  for (Index b = 0; b < input.batch(); ++b) {
    auto item = out.item(b);
    item.noalias() = kernels * im2col(input, b, g, stride);
    item.colwise() += params.bias;
  }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor4& input, const Conv2dParams& params, const Tensor4& grad_output,
                            Index stride, Padding padding) {
  const auto g = conv_geometry(input, params, stride, padding);
  require_shape(grad_output, Tensor4(input.batch(), params.out_channels(), g.out_h, g.out_w), "conv2d_backward");

  Conv2dGrads grads{Tensor4(input.batch(), input.channels(), input.height(), input.width()),
                    {Tensor4(params.out_channels(), params.in_channels(), g.k, g.k),
                     Eigen::VectorXd::Zero(params.out_channels())}};
  const auto kernels = kernel_matrix(params);
  Eigen::Map<RowMatrixXd> grad_kernels(grads.params.kernels.flat().data(), kernels.rows(), kernels.cols());
  for (Index b = 0; b < input.batch(); ++b) {
    const auto gout = grad_output.item(b);
    const RowMatrixXd cols = im2col(input, b, g, stride);
    grad_kernels.noalias() += gout * cols.transpose();
    grads.params.bias += gout.rowwise().sum();
    const RowMatrixXd grad_cols = kernels.transpose() * gout;
    col2im_add(grad_cols, grads.input, b, g, stride);
  }
  return grads;
}

namespace {

Index pooled_size(Index in, const PoolSpec& s) { return (in + 2 * s.padding - s.window) / s.stride + 1; }

void check_pool(const Tensor4& input, const PoolSpec& s) {
  if (s.window < 1 || s.stride < 1 || s.padding < 0 || s.padding >= s.window)
    throw DataError("pool2d: invalid window/stride/padding");
  if (pooled_size(input.height(), s) < 1 || pooled_size(input.width(), s) < 1)
    throw DataError("pool2d: input smaller than window");
}

}  // namespace

Tensor4 pool2d_forward(const Tensor4& input, const PoolSpec& s) {
  check_pool(input, s);
  const Index oh_n = pooled_size(input.height(), s);
  const Index ow_n = pooled_size(input.width(), s);
  Tensor4 out(input.batch(), input.channels(), oh_n, ow_n);
  for (Index b = 0; b < input.batch(); ++b) {
    for (Index c = 0; c < input.channels(); ++c) {
      const auto in = input.plane(b, c);
      auto o = out.plane(b, c);
      for (Index oh = 0; oh < oh_n; ++oh) {
        for (Index ow = 0; ow < ow_n; ++ow) {
          double best = -std::numeric_limits<double>::infinity();
          double sum = 0.0;
          Index count = 0;
          for (Index i = 0; i < s.window; ++i) {
            const Index ih = oh * s.stride + i - s.padding;
            if (ih < 0 || ih >= input.height()) continue;
            for (Index j = 0; j < s.window; ++j) {
              const Index iw = ow * s.stride + j - s.padding;
              if (iw < 0 || iw >= input.width()) continue;
              best = std::max(best, in(ih, iw));
              sum += in(ih, iw);
              ++count;
            }
          }
          o(oh, ow) = s.kind == PoolKind::max ? best : sum / static_cast<double>(count);
        }
      }
    }
  }
  return out;
}

Tensor4 pool2d_backward(const Tensor4& input, const PoolSpec& s, const Tensor4& grad_output) {
  check_pool(input, s);
  const Index oh_n = pooled_size(input.height(), s);
  const Index ow_n = pooled_size(input.width(), s);
  require_shape(grad_output, Tensor4(input.batch(), input.channels(), oh_n, ow_n), "pool2d_backward");
  Tensor4 grad(input.batch(), input.channels(), input.height(), input.width());
  for (Index b = 0; b < input.batch(); ++b) {
    for (Index c = 0; c < input.channels(); ++c) {
      const auto in = input.plane(b, c);
      const auto go = grad_output.plane(b, c);
      auto gi = grad.plane(b, c);
      for (Index oh = 0; oh < oh_n; ++oh) {
        for (Index ow = 0; ow < ow_n; ++ow) {
          const Index h0 = std::max<Index>(0, oh * s.stride - s.padding);
          const Index w0 = std::max<Index>(0, ow * s.stride - s.padding);
          const Index h1 = std::min(input.height(), oh * s.stride - s.padding + s.window);
          const Index w1 = std::min(input.width(), ow * s.stride - s.padding + s.window);
          if (s.kind == PoolKind::avg) {
            const double share = go(oh, ow) / static_cast<double>((h1 - h0) * (w1 - w0));
            gi.block(h0, w0, h1 - h0, w1 - w0).array() += share;
            continue;
          }
          Index bh = h0;
          Index bw = w0;
          for (Index ih = h0; ih < h1; ++ih)
            for (Index iw = w0; iw < w1; ++iw)
              if (in(ih, iw) > in(bh, bw)) {
                bh = ih;
                bw = iw;
              }
          gi(bh, bw) += go(oh, ow);
        }
      }
    }
  }
  return grad;
}

Tensor4 leaky_relu_forward(const Tensor4& input, double slope) {
  Tensor4 out = input;
  out.flat() = input.flat().unaryExpr([slope](double v) { return v >= 0.0 ? v : slope * v; });
  return out;
}

Tensor4 leaky_relu_backward(const Tensor4& input, const Tensor4& grad_output, double slope) {
  require_shape(grad_output, input, "leaky_relu_backward");
  Tensor4 out = grad_output;
  out.flat() = input.flat().binaryExpr(grad_output.flat(),
                                       [slope](double v, double g) { return v >= 0.0 ? g : slope * g; });
  return out;
}

Index SctmParams::side() const {
  const auto n = static_cast<Index>(std::lround(std::sqrt(static_cast<double>(w_max.cols()))));
  return n;
}

SctmParams SctmParams::zeros(Index m, Index n) {
  return {RowMatrixXd::Zero(m, n * n), RowMatrixXd::Zero(m, n * n)};
}

namespace {

constexpr PoolSpec kSctmMax{PoolKind::max, 3, 1, 1};
constexpr PoolSpec kSctmAvg{PoolKind::avg, 3, 1, 1};

void check_sctm(const Tensor4& input, const SctmParams& p) {
  const Index n = p.side();
  if (p.w_avg.rows() != p.w_max.rows() || p.w_avg.cols() != p.w_max.cols() || n * n != p.w_max.cols())
    throw DataError("sctm: malformed parameters");
  if (input.channels() != p.channels() || input.height() != n || input.width() != n)
    throw DataError("sctm: input " + input.shape_string() + " does not match parameters m=" +
                    std::to_string(p.channels()) + " n=" + std::to_string(n));
}

}  // namespace

Tensor4 sctm_forward(const Tensor4& input, const SctmParams& params) {
  check_sctm(input, params);
  const Tensor4 mp = pool2d_forward(input, kSctmMax);
  const Tensor4 ap = pool2d_forward(input, kSctmAvg);
  Tensor4 out(input.batch(), input.channels(), input.height(), input.width());
  for (Index b = 0; b < input.batch(); ++b) {
    out.item(b) = params.w_max.cwiseProduct(mp.item(b)) + params.w_avg.cwiseProduct(ap.item(b));
  }
  return out;
}

SctmGrads sctm_backward(const Tensor4& input, const SctmParams& params, const Tensor4& grad_output) {
  check_sctm(input, params);
  require_shape(grad_output, input, "sctm_backward");
  const Tensor4 mp = pool2d_forward(input, kSctmMax);
  const Tensor4 ap = pool2d_forward(input, kSctmAvg);
  SctmGrads grads{Tensor4(), SctmParams::zeros(params.channels(), params.side())};
  Tensor4 grad_mp(input.batch(), input.channels(), input.height(), input.width());
  Tensor4 grad_ap = grad_mp;
  for (Index b = 0; b < input.batch(); ++b) {
    const auto go = grad_output.item(b);
    grads.params.w_max += go.cwiseProduct(mp.item(b));
    grads.params.w_avg += go.cwiseProduct(ap.item(b));
    grad_mp.item(b) = go.cwiseProduct(params.w_max);
    grad_ap.item(b) = go.cwiseProduct(params.w_avg);
  }
  grads.input = pool2d_backward(input, kSctmMax, grad_mp);
  grads.input.flat() += pool2d_backward(input, kSctmAvg, grad_ap).flat();
  return grads;
}

RgcParams RgcParams::zeros(Index channels, Index hidden) {
  return {Eigen::VectorXd::Zero(channels), RowMatrixXd::Zero(hidden, channels), Eigen::VectorXd::Zero(hidden),
          RowMatrixXd::Zero(channels, hidden), Eigen::VectorXd::Zero(channels)};
}

namespace {

struct RgcCache {
  Eigen::RowVectorXd attention;  // softmax weights over positions
  Eigen::VectorXd context;
  Eigen::VectorXd pre_hidden;
  Eigen::VectorXd hidden;
  Eigen::VectorXd transform;
};

void check_rgc(const Tensor4& input, const RgcParams& p) {
  const Index c = p.channels();
  const Index r = p.hidden();
  if (p.w1.cols() != c || p.b1.size() != r || p.w2.rows() != c || p.w2.cols() != r || p.b2.size() != c)
    throw DataError("rgc: malformed parameters");
  if (input.channels() != c)
    throw DataError("rgc: input has " + std::to_string(input.channels()) + " channels, block expects " +
                    std::to_string(c));
}

RgcCache rgc_item(const Eigen::Map<const RowMatrixXd>& x, const RgcParams& p) {
  RgcCache cache;
  const Eigen::RowVectorXd logits = p.attention.transpose() * x;
  const Eigen::RowVectorXd e = (logits.array() - logits.maxCoeff()).exp();
  cache.attention = e / e.sum();
  cache.context = x * cache.attention.transpose();
  cache.pre_hidden = p.w1 * cache.context + p.b1;
  cache.hidden = cache.pre_hidden.unaryExpr([](double v) { return v >= 0.0 ? v : kLeakySlope * v; });
  cache.transform = p.w2 * cache.hidden + p.b2;
  return cache;
}

}  // namespace

Tensor4 rgc_forward(const Tensor4& input, const RgcParams& params) {
  check_rgc(input, params);
  Tensor4 out = input;
  for (Index b = 0; b < input.batch(); ++b) {
    const RgcCache cache = rgc_item(input.item(b), params);
    out.item(b).colwise() += cache.transform;
  }
  return out;
}

RgcGrads rgc_backward(const Tensor4& input, const RgcParams& params, const Tensor4& grad_output) {
  check_rgc(input, params);
  require_shape(grad_output, input, "rgc_backward");
  RgcGrads grads{grad_output, RgcParams::zeros(params.channels(), params.hidden())};
  for (Index b = 0; b < input.batch(); ++b) {
    const auto x = input.item(b);
    const auto go = grad_output.item(b);
    const RgcCache cache = rgc_item(x, params);

    const Eigen::VectorXd d_transform = go.rowwise().sum();
    grads.params.w2 += d_transform * cache.hidden.transpose();
    grads.params.b2 += d_transform;
    const Eigen::VectorXd d_hidden = params.w2.transpose() * d_transform;
    const Eigen::VectorXd d_pre = d_hidden.binaryExpr(
        cache.pre_hidden, [](double g, double v) { return v >= 0.0 ? g : kLeakySlope * g; });
    grads.params.w1 += d_pre * cache.context.transpose();
    grads.params.b1 += d_pre;
    const Eigen::VectorXd d_context = params.w1.transpose() * d_pre;

    const Eigen::RowVectorXd d_attention = d_context.transpose() * x;
    const double mean = d_attention.dot(cache.attention);
    const Eigen::RowVectorXd d_logits =
        cache.attention.array() * (d_attention.array() - mean);
    grads.params.attention += x * d_logits.transpose();

    auto gi = grads.input.item(b);
    gi.noalias() += d_context * cache.attention;
    gi.noalias() += params.attention * d_logits;
  }
  return grads;
}

Tensor4 upsample_nearest(const Tensor4& input, Index factor) {
  if (factor < 1) throw DataError("upsample: factor must be >= 1");
  Tensor4 out(input.batch(), input.channels(), input.height() * factor, input.width() * factor);
  for (Index b = 0; b < input.batch(); ++b)
    for (Index c = 0; c < input.channels(); ++c) {
      const auto in = input.plane(b, c);
      auto o = out.plane(b, c);
      for (Index h = 0; h < o.rows(); ++h)
        for (Index w = 0; w < o.cols(); ++w) o(h, w) = in(h / factor, w / factor);
    }
  return out;
}

Tensor4 upsample_nearest_backward(const Tensor4& grad_output, Index factor) {
  if (factor < 1 || grad_output.height() % factor != 0 || grad_output.width() % factor != 0)
    throw DataError("upsample_backward: gradient shape not divisible by factor");
  Tensor4 grad(grad_output.batch(), grad_output.channels(), grad_output.height() / factor,
               grad_output.width() / factor);
  for (Index b = 0; b < grad_output.batch(); ++b)
    for (Index c = 0; c < grad_output.channels(); ++c) {
      const auto go = grad_output.plane(b, c);
      auto gi = grad.plane(b, c);
      for (Index h = 0; h < go.rows(); ++h)
        for (Index w = 0; w < go.cols(); ++w) gi(h / factor, w / factor) += go(h, w);
    }
  return grad;
}

Tensor4 upsample_conv_forward(const Tensor4& input, const Conv2dParams& params, Index factor) {
  return conv2d_forward(upsample_nearest(input, factor), params, 1, Padding::same);
}

Conv2dGrads upsample_conv_backward(const Tensor4& input, const Conv2dParams& params, const Tensor4& grad_output,
                                   Index factor) {
  Conv2dGrads grads = conv2d_backward(upsample_nearest(input, factor), params, grad_output, 1, Padding::same);
  grads.input = upsample_nearest_backward(grads.input, factor);
  return grads;
}

}  // namespace pact
