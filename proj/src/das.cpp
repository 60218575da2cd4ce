#include "pact/das.hpp"

#include <cmath>
#include <string>

namespace pact {

void PositionWiseStack::validate() const {
  if (static_cast<Index>(channel_ids.size()) != data.rows())
    throw DataError("stack: channel id count does not match data rows");
  if (data.cols() != grid.pixels()) throw DataError("stack: data columns do not match grid");
  for (std::size_t k = 1; k < channel_ids.size(); ++k)
    if (channel_ids[k] <= channel_ids[k - 1]) throw DataError("stack: channel ids must be strictly increasing");
  if (!data.allFinite()) throw DataError("stack: non-finite values");
}

PositionWiseStack position_wise(const SignalSet& signals, const ImageGrid& grid,
                                const DelayTable& delays, const std::vector<Index>& channels) {
  if (delays.distances.cols() != grid.pixels() || delays.grid.height != grid.height ||
      delays.grid.width != grid.width)
    throw DataError("position_wise: delay table does not match grid");
  if (delays.channels() != signals.channels())
    throw DataError("position_wise: delay table has " + std::to_string(delays.channels()) +
                    " channels, signals have " + std::to_string(signals.channels()));
  for (std::size_t k = 0; k < channels.size(); ++k) {
    if (channels[k] < 0 || channels[k] >= signals.channels())
      throw DataError("position_wise: channel " + std::to_string(channels[k]) + " out of range");
    if (k > 0 && channels[k] <= channels[k - 1])
      throw DataError("position_wise: channels must be strictly increasing");
  }

  const Index length = signals.length();
  const double scale = signals.sampling_rate / signals.sound_speed;
  PositionWiseStack stack{RowMatrixXd::Zero(static_cast<Index>(channels.size()), grid.pixels()), channels, grid};
  for (Index c = 0; c < stack.channels(); ++c) {
    const Index ch = channels[static_cast<std::size_t>(c)];
    const auto trace = signals.samples.row(ch);
    for (Index p = 0; p < grid.pixels(); ++p) {
      const double tau = delays.distances(ch, p) * scale;
      if (tau < 0.0 || tau > static_cast<double>(length - 1)) continue;
      const auto n0 = static_cast<Index>(std::floor(tau));
      const double frac = tau - static_cast<double>(n0);
      const double lo = trace(n0);
      const double hi = n0 + 1 < length ? trace(n0 + 1) : 0.0;
      stack.data(c, p) = (1.0 - frac) * lo + frac * hi;
    }
  }
  return stack;
}

RowMatrixXd superpose_rows(const RowMatrixXd& stack, const ImageGrid& grid) {
  if (stack.rows() < 1) throw DataError("superpose: empty stack");
  if (stack.cols() != grid.pixels()) throw DataError("superpose: stack does not match grid");
  const Eigen::RowVectorXd sum = stack.colwise().sum();
  return Eigen::Map<const RowMatrixXd>(sum.data(), grid.height, grid.width);
}

DasImage superpose(const PositionWiseStack& stack) {
  return {superpose_rows(stack.data, stack.grid), stack.channel_ids};
}

Decomposition decompose(const PositionWiseStack& stack, const PressureMap& p0, int dilation) {
  const ImageGrid& g = stack.grid;
  if (p0.values.rows() != g.height || p0.values.cols() != g.width)
    throw DataError("decompose: pressure map grid does not match stack grid");
  if (dilation < 0) throw DataError("decompose: dilation must be >= 0");

  Decomposition d;
  d.support_mask.setConstant(g.height, g.width, false);
  for (Index h = 0; h < g.height; ++h) {
    for (Index w = 0; w < g.width; ++w) {
      if (!(p0.values(h, w) > 0.0)) continue;
      for (Index dh = -dilation; dh <= dilation; ++dh) {
        for (Index dw = -dilation; dw <= dilation; ++dw) {
          const Index hh = h + dh;
          const Index ww = w + dw;
          if (hh >= 0 && hh < g.height && ww >= 0 && ww < g.width) d.support_mask(hh, ww) = true;
        }
      }
    }
  }

  d.object_part = RowMatrixXd::Zero(stack.data.rows(), stack.data.cols());
  d.artifact_part = stack.data;
  for (Index p = 0; p < g.pixels(); ++p) {
    if (!d.support_mask(p / g.width, p % g.width)) continue;
    d.object_part.col(p) = stack.data.col(p);
    d.artifact_part.col(p).setZero();
  }
  return d;
}

DasImage delay_and_sum(const SignalSet& signals, const ImageGrid& grid, const DelayTable& delays,
                       const std::vector<Index>& channels) {
  return superpose(position_wise(signals, grid, delays, channels));
}

}  // namespace pact
