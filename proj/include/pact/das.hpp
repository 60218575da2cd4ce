#pragma once

#include <vector>

#include "pact/forward.hpp"

namespace pact {

/// Per-channel delayed data: row c is channel channel_ids[c] delayed onto
/// every pixel, flattened as h*W + w.
struct PositionWiseStack {
  RowMatrixXd data;
  std::vector<Index> channel_ids;
  ImageGrid grid;

  Index channels() const { return data.rows(); }
  /// Row c viewed as an H x W image.
  Eigen::Map<const RowMatrixXd> channel(Index c) const {
    return {data.row(c).data(), grid.height, grid.width};
  }
  void validate() const;
};

/// Signed beamformed image together with the channels that produced it.
struct DasImage {
  RowMatrixXd values;
  std::vector<Index> channel_ids;
};

/// Exact split of a stack into object-supported and off-support parts.
struct Decomposition {
  RowMatrixXd object_part;
  RowMatrixXd artifact_part;
  MaskMatrix support_mask;
};

/// d_i(h, w) = s_i(tau), tau = distance / c * fs, linearly interpolated;
/// zero when tau falls outside [0, T-1].
PositionWiseStack position_wise(const SignalSet& signals, const ImageGrid& grid,
                                const DelayTable& delays, const std::vector<Index>& channels);

/// Sum over channels.
DasImage superpose(const PositionWiseStack& stack);

/// Superposition of the raw matrix form, used where channel ids do not matter.
RowMatrixXd superpose_rows(const RowMatrixXd& stack, const ImageGrid& grid);

/// Splits `stack` on the support of p0 > 0 grown by `dilation` pixels
/// (8-neighbourhood).
Decomposition decompose(const PositionWiseStack& stack, const PressureMap& p0, int dilation = 1);

/// Full DAS image straight from signals (all listed channels).
DasImage delay_and_sum(const SignalSet& signals, const ImageGrid& grid, const DelayTable& delays,
                       const std::vector<Index>& channels);

}  // namespace pact
