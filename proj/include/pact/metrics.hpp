#pragma once

#include <limits>
#include <string>

#include "pact/types.hpp"

namespace pact {

/// Linear map of the image's own [min, max] onto [0, 1]; constant images map to 0.
RowMatrixXd minmax_normalize(const RowMatrixXd& image);

struct SsimOptions {
  Index window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Mean structural similarity over all fully-contained Gaussian windows of
/// the min-max normalised images (dynamic range 1). Images smaller than the
/// window use a single window cropped to the image.
double ssim(const RowMatrixXd& reference, const RowMatrixXd& test, const SsimOptions& options = {});

/// 10 log10(1 / MSE) of the normalised images; +infinity when identical.
double psnr(const RowMatrixXd& reference, const RowMatrixXd& test);

inline bool is_perfect_psnr(double value) { return value == std::numeric_limits<double>::infinity(); }

/// |mean(roi) - mean(background)| / std(background), population std.
double cnr(const RowMatrixXd& image, const MaskMatrix& roi, const MaskMatrix& background);

struct MetricReport {
  std::string name;
  double value;
  std::string reference_id;
  std::string test_id;
  std::string parameters;
};

}  // namespace pact
