#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace pact {

/// Row-major dense matrix. Images are H x W and position-wise stacks are
/// C x (H*W) with pixel index h*W + w, so both map onto Tensor4 planes
/// without copies.
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using RowMatrixXd = RowMatrix<double>;
using Index = Eigen::Index;
using MaskMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Invalid or inconsistent input data (shapes, files, ranges).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation produced a non-finite value or an undefined quantity.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pact
