#include "pact/postproc.hpp"

#include <cmath>

#include "pact/metrics.hpp"

namespace pact {

void ThresholdConfig::validate() const {
  if (!(tau_fraction >= 0.0 && tau_fraction < 1.0)) throw DataError("threshold: tau_fraction must lie in [0, 1)");
}

RowMatrixXd threshold_separate(const RowMatrixXd& sum_g, const ThresholdConfig& config) {
  config.validate();
  if (!sum_g.allFinite()) throw DataError("threshold: non-finite image");
  if (sum_g.size() == 0) return sum_g;
  const double tau = config.tau_fraction * sum_g.cwiseAbs().maxCoeff();
  const double sign = config.polarity == Polarity::negative_object ? -1.0 : 1.0;
  const RowMatrixXd kept = (sign * sum_g.array() - tau).cwiseMax(0.0);
  return minmax_normalize(kept);
}

}  // namespace pact
