#pragma once

#include <numbers>
#include <vector>

#include "pact/types.hpp"

namespace pact {

/// Circular (or arc) detector array. Element k sits at the midpoint of its
/// arc segment: angle_start + (k + 0.5) * angle_span / num_elements.
struct ArrayGeometry {
  Index num_elements = 128;
  double ring_radius = 0.018;
  double angle_start = 0.0;
  double angle_span = 2.0 * std::numbers::pi;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();

  void validate() const;
  double element_angle(Index k) const;
};

/// Square pixel grid centred on the ring centre. Pixel (h, w) has its centre
/// at x = (w + 0.5) * pitch - extent/2, y = extent/2 - (h + 0.5) * pitch.
struct ImageGrid {
  Index height = 64;
  Index width = 64;
  double extent = 0.026;

  void validate() const;
  double pitch() const { return extent / static_cast<double>(width); }
  Index pixels() const { return height * width; }
  Eigen::Vector2d pixel_center(Index h, Index w) const;
};

/// Element-to-pixel distances in metres, C x (H*W).
struct DelayTable {
  RowMatrixXd distances;
  ImageGrid grid;

  Index channels() const { return distances.rows(); }
};

std::vector<Eigen::Vector2d> element_positions(const ArrayGeometry& geometry);

DelayTable build_delay_table(const ArrayGeometry& geometry, const ImageGrid& grid);

/// Contiguous channel indices [first_channel, first_channel + count).
std::vector<Index> view_mask(const ArrayGeometry& geometry, Index first_channel, Index count);

}  // namespace pact
