#pragma once

#include <cmath>
#include <string>

#include "pact/types.hpp"

namespace pact {

/// Loss value and its gradient with respect to the first argument.
template <typename Scalar>
struct LossResult {
  Scalar value{0};
  RowMatrix<Scalar> gradient;
};

/// Relative weights of the four training losses.
struct LossWeights {
  double lambda_re = 130.0;
  double lambda_ov = 0.02;
  double lambda_tex = 42.0;
  double lambda_rec = 60.0;

  void validate() const;
};

/// The four loss components, in weight order.
struct LossParts {
  double response = 0.0;
  double overlay = 0.0;
  double texture = 0.0;
  double rec = 0.0;
};

namespace detail {
template <typename A, typename B>
void require_same_shape(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DataError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                    std::to_string(b.cols()) + ")");
  }
}
}  // namespace detail

/// Channel Gram matrix G = F F^T of an N x M vectorized stack.
template <typename Derived>
RowMatrix<typename Derived::Scalar> gram(const Eigen::MatrixBase<Derived>& features) {
  using Scalar = typename Derived::Scalar;
  RowMatrix<Scalar> g(features.rows(), features.rows());
  g.setZero();
  g.template selfadjointView<Eigen::Lower>().rankUpdate(features.derived().eval());
  return g.template selfadjointView<Eigen::Lower>();
}

/// L = 1/(4 N^2 M^2) sum_ij (G_ij - A_ij)^2 with G, A the Gram matrices of
/// `generated` and `target`. dL/dF = (G - A) F / (N^2 M^2).
template <typename DerivedA, typename DerivedB>
LossResult<typename DerivedA::Scalar> response_loss(const Eigen::MatrixBase<DerivedA>& generated,
                                                    const Eigen::MatrixBase<DerivedB>& target) {
  using Scalar = typename DerivedA::Scalar;
  detail::require_same_shape(generated, target, "response_loss");
  const auto n = static_cast<Scalar>(generated.rows());
  const auto m = static_cast<Scalar>(generated.cols());
  const RowMatrix<Scalar> diff = gram(generated) - gram(target);
  LossResult<Scalar> out;
  out.value = diff.squaredNorm() / (Scalar(4) * n * n * m * m);
  out.gradient = diff * generated / (n * n * m * m);
  return out;
}

enum class OverlayMode { closed_form, materialized };

/// Largest N*N*M the materialized overlay tensor may occupy.
inline constexpr Index kOverlayMaterializeBudget = 1'000'000;

/// Overlay loss over all channel pairs O_{nn'm} = F_nm + F_n'm:
/// L = 1/(4 N^4 M^2) sum_{n,n',m} (O - P)^2.
/// With D = generated - target the pair sum collapses per pixel to
/// 2N sum_n D_nm^2 + 2 (sum_n D_nm)^2, which is what closed_form evaluates.
template <typename DerivedA, typename DerivedB>
LossResult<typename DerivedA::Scalar> overlay_loss(const Eigen::MatrixBase<DerivedA>& generated,
                                                   const Eigen::MatrixBase<DerivedB>& target,
                                                   OverlayMode mode = OverlayMode::closed_form) {
  using Scalar = typename DerivedA::Scalar;
  detail::require_same_shape(generated, target, "overlay_loss");
  const Index rows = generated.rows();
  const Index cols = generated.cols();
  const auto n = static_cast<Scalar>(rows);
  const auto m = static_cast<Scalar>(cols);
  const Scalar norm = Scalar(4) * n * n * n * n * m * m;
  const RowMatrix<Scalar> d = generated - target;

  LossResult<Scalar> out;
  if (mode == OverlayMode::materialized) {
    if (rows * rows * cols > kOverlayMaterializeBudget)
      throw DataError("overlay_loss: materialized tensor of " + std::to_string(rows * rows * cols) +
                      " entries exceeds budget");
    out.gradient = RowMatrix<Scalar>::Zero(rows, cols);
    Scalar sum{0};
    for (Index a = 0; a < rows; ++a) {
      for (Index b = 0; b < rows; ++b) {
        for (Index k = 0; k < cols; ++k) {
          const Scalar o = generated(a, k) + generated(b, k);
          const Scalar p = target(a, k) + target(b, k);
          const Scalar e = o - p;
          sum += e * e;
          out.gradient(a, k) += Scalar(2) * e;
          out.gradient(b, k) += Scalar(2) * e;
        }
      }
    }
    out.value = sum / norm;
    out.gradient /= norm;
    return out;
  }

  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> column_sum = d.colwise().sum();
  out.value = (Scalar(2) * n * d.squaredNorm() + Scalar(2) * column_sum.squaredNorm()) / norm;
  out.gradient = (Scalar(4) * n * d).rowwise() + Scalar(4) * column_sum;
  out.gradient /= norm;
  return out;
}

/// Squared Frobenius distance ||y - y0||^2; gradient 2 (y0 - y) w.r.t. y0.
template <typename DerivedA, typename DerivedB>
LossResult<typename DerivedA::Scalar> texture_loss(const Eigen::MatrixBase<DerivedA>& y0,
                                                   const Eigen::MatrixBase<DerivedB>& y) {
  using Scalar = typename DerivedA::Scalar;
  detail::require_same_shape(y0, y, "texture_loss");
  LossResult<Scalar> out;
  out.gradient = Scalar(2) * (y0 - y);
  out.value = (y0 - y).squaredNorm();
  return out;
}

/// Same Frobenius form as texture_loss, applied to the residual result.
template <typename DerivedA, typename DerivedB>
LossResult<typename DerivedA::Scalar> rec_loss(const Eigen::MatrixBase<DerivedA>& y_hat,
                                               const Eigen::MatrixBase<DerivedB>& y) {
  return texture_loss(y_hat, y);
}

inline double overall_loss(const LossParts& parts, const LossWeights& weights) {
  return weights.lambda_re * parts.response + weights.lambda_ov * parts.overlay +
         weights.lambda_tex * parts.texture + weights.lambda_rec * parts.rec;
}

inline void LossWeights::validate() const {
  for (double v : {lambda_re, lambda_ov, lambda_tex, lambda_rec})
    if (!std::isfinite(v) || v < 0.0) throw DataError("loss weights must be finite and >= 0");
}

}  // namespace pact
