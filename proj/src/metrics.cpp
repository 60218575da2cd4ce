#include "pact/metrics.hpp"

#include <cmath>
#include <string>

namespace pact {

RowMatrixXd minmax_normalize(const RowMatrixXd& image) {
  if (!image.allFinite()) throw DataError("normalize: non-finite image");
  if (image.size() == 0) return image;
  const double lo = image.minCoeff();
  const double range = image.maxCoeff() - lo;
  if (range <= 0.0) return RowMatrixXd::Zero(image.rows(), image.cols());
  return (image.array() - lo) / range;
}

namespace {

void require_same(const RowMatrixXd& a, const RowMatrixXd& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DataError(std::string(what) + ": image shapes differ (" + std::to_string(a.rows()) + "x" +
                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()) +
                    ")");
}

RowMatrixXd gaussian_window(Index rows, Index cols, double sigma) {
  RowMatrixXd w(rows, cols);
  const double ch = 0.5 * static_cast<double>(rows - 1);
  const double cw = 0.5 * static_cast<double>(cols - 1);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) {
      const double dy = static_cast<double>(i) - ch;
      const double dx = static_cast<double>(j) - cw;
      w(i, j) = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    }
  return w / w.sum();
}

}  // namespace

double ssim(const RowMatrixXd& reference, const RowMatrixXd& test, const SsimOptions& o) {
  require_same(reference, test, "ssim");
  const RowMatrixXd x = minmax_normalize(reference);
  const RowMatrixXd y = minmax_normalize(test);
  const Index wr = std::min(o.window, x.rows());
  const Index wc = std::min(o.window, x.cols());
  const RowMatrixXd g = gaussian_window(wr, wc, o.sigma);
  const double c1 = (o.k1 * 1.0) * (o.k1 * 1.0);
  const double c2 = (o.k2 * 1.0) * (o.k2 * 1.0);

  double total = 0.0;
  Index count = 0;
  for (Index i = 0; i + wr <= x.rows(); ++i) {
    for (Index j = 0; j + wc <= x.cols(); ++j) {
      const auto bx = x.block(i, j, wr, wc);
      const auto by = y.block(i, j, wr, wc);
      const double mx = g.cwiseProduct(bx).sum();
      const double my = g.cwiseProduct(by).sum();
      const double sxx = g.cwiseProduct(bx.cwiseProduct(bx)).sum() - mx * mx;
      const double syy = g.cwiseProduct(by.cwiseProduct(by)).sum() - my * my;
      const double sxy = g.cwiseProduct(bx.cwiseProduct(by)).sum() - mx * my;
      const double num = (2.0 * mx * my + c1) * (2.0 * sxy + c2);
      const double den = (mx * mx + my * my + c1) * (sxx + syy + c2);
      total += num / den;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double psnr(const RowMatrixXd& reference, const RowMatrixXd& test) {
  require_same(reference, test, "psnr");
  const double mse = (minmax_normalize(reference) - minmax_normalize(test)).squaredNorm() /
                     static_cast<double>(reference.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double cnr(const RowMatrixXd& image, const MaskMatrix& roi, const MaskMatrix& background) {
  if (roi.rows() != image.rows() || roi.cols() != image.cols() || background.rows() != image.rows() ||
      background.cols() != image.cols())
    throw DataError("cnr: mask shape does not match image");
  if ((roi.array() && background.array()).any()) throw DataError("cnr: roi and background masks overlap");
  const auto n_roi = roi.count();
  const auto n_bg = background.count();
  if (n_roi == 0 || n_bg == 0) throw DataError("cnr: masks must be non-empty");

  const double mean_roi = roi.select(image, 0.0).sum() / static_cast<double>(n_roi);
  const double mean_bg = background.select(image, 0.0).sum() / static_cast<double>(n_bg);
  const double var_bg =
      background.select((image.array() - mean_bg).square().matrix(), 0.0).sum() / static_cast<double>(n_bg);
  const double std_bg = std::sqrt(var_bg);
  if (!(std_bg > 0.0)) throw NumericError("cnr: background standard deviation is zero, CNR undefined");
  return std::abs(mean_roi - mean_bg) / std_bg;
}

}  // namespace pact
