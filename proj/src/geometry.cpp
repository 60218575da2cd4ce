#include "pact/geometry.hpp"

#include <cmath>
#include <string>

namespace pact {

void ArrayGeometry::validate() const {
  if (num_elements < 1) throw DataError("geometry: num_elements must be >= 1");
  if (!(ring_radius > 0.0) || !std::isfinite(ring_radius))
    throw DataError("geometry: ring_radius must be positive");
  if (!(angle_span > 0.0) || angle_span > 2.0 * std::numbers::pi + 1e-12)
    throw DataError("geometry: angle_span must lie in (0, 2*pi]");
  if (!std::isfinite(angle_start) || !center.allFinite())
    throw DataError("geometry: non-finite angle_start or center");
}

double ArrayGeometry::element_angle(Index k) const {
  return angle_start + (static_cast<double>(k) + 0.5) * angle_span / static_cast<double>(num_elements);
}

void ImageGrid::validate() const {
  if (height < 1 || width < 1) throw DataError("grid: height and width must be >= 1");
  if (!(extent > 0.0) || !std::isfinite(extent)) throw DataError("grid: extent must be positive");
}

Eigen::Vector2d ImageGrid::pixel_center(Index h, Index w) const {
  const double p = pitch();
  const double half_w = 0.5 * p * static_cast<double>(width);
  const double half_h = 0.5 * p * static_cast<double>(height);
  return {(static_cast<double>(w) + 0.5) * p - half_w, half_h - (static_cast<double>(h) + 0.5) * p};
}

std::vector<Eigen::Vector2d> element_positions(const ArrayGeometry& geometry) {
  geometry.validate();
  std::vector<Eigen::Vector2d> out;
  out.reserve(static_cast<std::size_t>(geometry.num_elements));
  for (Index k = 0; k < geometry.num_elements; ++k) {
    const double a = geometry.element_angle(k);
    out.emplace_back(geometry.center + geometry.ring_radius * Eigen::Vector2d(std::cos(a), std::sin(a)));
  }
  return out;
}

DelayTable build_delay_table(const ArrayGeometry& geometry, const ImageGrid& grid) {
  grid.validate();
  const auto elements = element_positions(geometry);
  DelayTable table{RowMatrixXd(geometry.num_elements, grid.pixels()), grid};
  for (Index i = 0; i < geometry.num_elements; ++i) {
    const Eigen::Vector2d& e = elements[static_cast<std::size_t>(i)];
    for (Index h = 0; h < grid.height; ++h) {
      for (Index w = 0; w < grid.width; ++w) {
        table.distances(i, h * grid.width + w) = (grid.pixel_center(h, w) + geometry.center - e).norm();
      }
    }
  }
  return table;
}

std::vector<Index> view_mask(const ArrayGeometry& geometry, Index first_channel, Index count) {
  if (first_channel < 0 || count < 1 || first_channel + count > geometry.num_elements) {
    throw DataError("view_mask: channel range [" + std::to_string(first_channel) + ", " +
                    std::to_string(first_channel + count) + ") outside 0.." +
                    std::to_string(geometry.num_elements));
  }
  std::vector<Index> ids(static_cast<std::size_t>(count));
  for (Index k = 0; k < count; ++k) ids[static_cast<std::size_t>(k)] = first_channel + k;
  return ids;
}

}  // namespace pact
