#pragma once

#include <array>
#include <string>

#include "pact/types.hpp"

namespace pact {

/// Dense batch x channels x height x width array, contiguous with width
/// fastest. A single (b, c) plane maps to a row-major H x W matrix and a
/// single batch item maps to a row-major C x (H*W) matrix.
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(Index batch, Index channels, Index height, Index width)
      : dims_{batch, channels, height, width}, data_(Eigen::VectorXd::Zero(batch * channels * height * width)) {
    if (batch < 1 || channels < 1 || height < 1 || width < 1)
      throw DataError("Tensor4: all dimensions must be >= 1");
  }

  Index batch() const { return dims_[0]; }
  Index channels() const { return dims_[1]; }
  Index height() const { return dims_[2]; }
  Index width() const { return dims_[3]; }
  Index size() const { return data_.size(); }
  const std::array<Index, 4>& dims() const { return dims_; }
  bool same_shape(const Tensor4& o) const { return dims_ == o.dims_; }

  double& operator()(Index b, Index c, Index h, Index w) { return data_(offset(b, c, h, w)); }
  double operator()(Index b, Index c, Index h, Index w) const { return data_(offset(b, c, h, w)); }

  Eigen::VectorXd& flat() { return data_; }
  const Eigen::VectorXd& flat() const { return data_; }

  Eigen::Map<RowMatrixXd> plane(Index b, Index c) {
    return {data_.data() + offset(b, c, 0, 0), dims_[2], dims_[3]};
  }
  Eigen::Map<const RowMatrixXd> plane(Index b, Index c) const {
    return {data_.data() + offset(b, c, 0, 0), dims_[2], dims_[3]};
  }
  /// Batch item b as C x (H*W).
  Eigen::Map<RowMatrixXd> item(Index b) {
    return {data_.data() + offset(b, 0, 0, 0), dims_[1], dims_[2] * dims_[3]};
  }
  Eigen::Map<const RowMatrixXd> item(Index b) const {
    return {data_.data() + offset(b, 0, 0, 0), dims_[1], dims_[2] * dims_[3]};
  }

  std::string shape_string() const {
    return std::to_string(dims_[0]) + "x" + std::to_string(dims_[1]) + "x" + std::to_string(dims_[2]) + "x" +
           std::to_string(dims_[3]);
  }

  /// Single-item tensor from a C x (H*W) matrix.
  static Tensor4 from_item(const RowMatrixXd& item, Index height, Index width) {
    Tensor4 t(1, item.rows(), height, width);
    t.item(0) = item;
    return t;
  }

 private:
  Index offset(Index b, Index c, Index h, Index w) const {
    return ((b * dims_[1] + c) * dims_[2] + h) * dims_[3] + w;
  }

  std::array<Index, 4> dims_{0, 0, 0, 0};
  Eigen::VectorXd data_;
};

}  // namespace pact
