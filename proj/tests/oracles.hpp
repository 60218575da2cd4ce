#pragma once

// Independent reference computations for the test suites. Nothing here calls
// into the code paths it is used to check.

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <numbers>
#include <vector>

#include "pact/rng.hpp"
#include "pact/tensor.hpp"

namespace pact::oracle {

inline constexpr double kStep = 1e-5;

/// Central differences of f with respect to each of the `size` doubles at `data`.
inline Eigen::VectorXd numeric_gradient(const std::function<double()>& f, double* data, Index size,
                                        double step = kStep) {
  Eigen::VectorXd g(size);
  for (Index k = 0; k < size; ++k) {
    const double saved = data[k];
    data[k] = saved + step;
    const double up = f();
    data[k] = saved - step;
    const double down = f();
    data[k] = saved;
    g(k) = (up - down) / (2.0 * step);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||); 0 when both vanish.
inline double relative_error(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  const double scale = std::max(a.norm(), b.norm());
  if (scale == 0.0) return 0.0;
  return (a - b).norm() / scale;
}

inline RowMatrixXd random_matrix(Index rows, Index cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  RowMatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

inline Tensor4 random_tensor(Index b, Index c, Index h, Index w, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor4 t(b, c, h, w);
  for (Index k = 0; k < t.size(); ++k) t.flat()(k) = rng.uniform(lo, hi);
  return t;
}

inline RowMatrixXd naive_gram(const RowMatrixXd& f) {
  RowMatrixXd g(f.rows(), f.rows());
  for (Index i = 0; i < f.rows(); ++i)
    for (Index j = 0; j < f.rows(); ++j) {
      double s = 0.0;
      for (Index k = 0; k < f.cols(); ++k) s += f(i, k) * f(j, k);
      g(i, j) = s;
    }
  return g;
}

inline double naive_response_loss(const RowMatrixXd& generated, const RowMatrixXd& target) {
  const RowMatrixXd g = naive_gram(generated);
  const RowMatrixXd a = naive_gram(target);
  double s = 0.0;
  for (Index i = 0; i < g.rows(); ++i)
    for (Index j = 0; j < g.cols(); ++j) s += (g(i, j) - a(i, j)) * (g(i, j) - a(i, j));
  const auto n = static_cast<double>(generated.rows());
  const auto m = static_cast<double>(generated.cols());
  return s / (4.0 * n * n * m * m);
}

/// Builds both N x N x M overlay tensors element by element.
inline double materialized_overlay_loss(const RowMatrixXd& generated, const RowMatrixXd& target) {
  const Index n = generated.rows();
  const Index m = generated.cols();
  std::vector<double> o(static_cast<std::size_t>(n * n * m));
  std::vector<double> p(o.size());
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b)
      for (Index k = 0; k < m; ++k) {
        const auto idx = static_cast<std::size_t>((a * n + b) * m + k);
        o[idx] = generated(a, k) + generated(b, k);
        p[idx] = target(a, k) + target(b, k);
      }
  double s = 0.0;
  for (std::size_t i = 0; i < o.size(); ++i) s += (o[i] - p[i]) * (o[i] - p[i]);
  const auto nd = static_cast<double>(n);
  const auto md = static_cast<double>(m);
  return s / (4.0 * nd * nd * nd * nd * md * md);
}

/// Direct zero-padded cross-correlation, one output at a time.
inline Tensor4 direct_conv(const Tensor4& in, const Tensor4& k, const Eigen::VectorXd& bias) {
  const Index r = k.height() / 2;
  Tensor4 out(in.batch(), k.batch(), in.height(), in.width());
  for (Index b = 0; b < in.batch(); ++b)
    for (Index o = 0; o < k.batch(); ++o)
      for (Index h = 0; h < in.height(); ++h)
        for (Index w = 0; w < in.width(); ++w) {
          double s = bias(o);
          for (Index c = 0; c < in.channels(); ++c)
            for (Index i = 0; i < k.height(); ++i)
              for (Index j = 0; j < k.width(); ++j) {
                const Index hh = h + i - r;
                const Index ww = w + j - r;
                if (hh >= 0 && hh < in.height() && ww >= 0 && ww < in.width()) s += in(b, c, hh, ww) * k(o, c, i, j);
              }
          out(b, o, h, w) = s;
        }
  return out;
}

/// |DFT| of x at frequency f (Hz) for samples spaced 1/fs, centred index `center`.
inline double dft_magnitude(const Eigen::VectorXd& x, double f, double fs, Index center) {
  std::complex<double> acc{0.0, 0.0};
  for (Index n = 0; n < x.size(); ++n) {
    const double t = static_cast<double>(n - center) / fs;
    acc += x(n) * std::polar(1.0, -2.0 * std::numbers::pi * f * t);
  }
  return std::abs(acc);
}

/// Scalar SSIM: 11x11 Gaussian (sigma 1.5), valid windows, inputs already in [0, 1].
inline double reference_ssim(const RowMatrixXd& x, const RowMatrixXd& y) {
  const int win = 11;
  double weights[11][11];
  double total = 0.0;
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) {
      const double di = i - 5.0;
      const double dj = j - 5.0;
      weights[i][j] = std::exp(-(di * di + dj * dj) / (2.0 * 1.5 * 1.5));
      total += weights[i][j];
    }
  const double c1 = 0.0001;
  const double c2 = 0.0009;
  double sum = 0.0;
  int count = 0;
  for (Index r = 0; r + win <= x.rows(); ++r)
    for (Index c = 0; c + win <= x.cols(); ++c) {
      double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          const double w = weights[i][j] / total;
          const double a = x(r + i, c + j);
          const double b = y(r + i, c + j);
          mx += w * a;
          my += w * b;
          xx += w * a * a;
          yy += w * b * b;
          xy += w * a * b;
        }
      const double vx = xx - mx * mx;
      const double vy = yy - my * my;
      const double cov = xy - mx * my;
      sum += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return sum / count;
}

struct Pgm {
  long width = 0;
  long height = 0;
  long maxval = 0;
  std::vector<unsigned> samples;
};

/// Parses a binary graymap following the netpbm P5 grammar: magic, whitespace
/// (with '#' comments) separated width, height and maxval, exactly one
/// whitespace byte, then the raster with no trailing data.
inline Pgm parse_pgm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  auto fail = [](const char* what) { throw std::runtime_error(std::string("pgm: ") + what); };
  auto is_space = [](std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') fail("magic");
  pos = 2;
  auto number = [&]() {
    bool any_space = false;
    while (pos < bytes.size()) {
      if (is_space(bytes[pos])) {
        any_space = true;
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    if (!any_space) fail("missing whitespace");
    long v = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      v = v * 10 + (bytes[pos++] - '0');
      ++digits;
    }
    if (digits == 0) fail("expected a decimal number");
    return v;
  };
  Pgm out;
  out.width = number();
  out.height = number();
  out.maxval = number();
  if (out.width < 1 || out.height < 1 || out.maxval < 1 || out.maxval > 65535) fail("header values out of range");
  if (pos >= bytes.size() || !is_space(bytes[pos])) fail("missing raster separator");
  ++pos;
  const std::size_t per = out.maxval > 255 ? 2 : 1;
  const auto count = static_cast<std::size_t>(out.width * out.height);
  if (bytes.size() - pos != count * per) fail("raster length");
  for (std::size_t k = 0; k < count; ++k) {
    unsigned v = per == 2 ? (static_cast<unsigned>(bytes[pos]) << 8) | bytes[pos + 1] : bytes[pos];
    if (v > static_cast<unsigned>(out.maxval)) fail("sample above maxval");
    out.samples.push_back(v);
    pos += per;
  }
  return out;
}

}  // namespace pact::oracle
