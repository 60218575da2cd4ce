#pragma once

#include "pact/types.hpp"

namespace pact {

enum class Polarity { negative_object, positive_object };

struct ThresholdConfig {
  double tau_fraction = 0.1;
  Polarity polarity = Polarity::negative_object;

  void validate() const;
};

/// Keeps the object-polarity part above tau_fraction * max|v|, i.e.
/// max(0, -v - tau) for negative objects, then min-max normalises to [0, 1].
RowMatrixXd threshold_separate(const RowMatrixXd& sum_g, const ThresholdConfig& config = {});

/// Polarity matching the residual combination y_hat = y0 - sign * sum(G).
inline Polarity polarity_for_residual_sign(int residual_sign) {
  return residual_sign >= 0 ? Polarity::negative_object : Polarity::positive_object;
}

}  // namespace pact
