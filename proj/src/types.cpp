#include "gridop/types.hpp"

#include <cmath>
#include <string>

namespace gridop {

std::string_view to_string(OutputMode mode) {
  switch (mode) {
    case OutputMode::full: return "full";
    case OutputMode::incremental: return "incremental";
    case OutputMode::residual: return "residual";
  }
  return "unknown";
}

OutputMode output_mode_from_string(std::string_view name) {
  if (name == "full") return OutputMode::full;
  if (name == "incremental") return OutputMode::incremental;
  if (name == "residual") return OutputMode::residual;
  throw Error("unknown output mode '" + std::string(name) + "'");
}

InterfaceInput SensorWindow::at(double s) const {
  const Eigen::Index m = values.cols();
  if (m == 1 || s <= offsets[0]) return values.col(0);
  for (Eigen::Index k = 1; k < m; ++k) {
    if (s <= offsets[k]) {
      const double w = (s - offsets[k - 1]) / (offsets[k] - offsets[k - 1]);
      return values.col(k - 1) + w * (values.col(k) - values.col(k - 1));
    }
  }
  return values.col(m - 1);
}

void SensorWindow::validate(double h) const {
  if (values.cols() < 1 || offsets.size() != values.cols())
    throw Error("sensor window: need m >= 1 values with matching offsets");
  if (offsets[0] != 0.0) throw Error("sensor window: d_0 must be 0");
  for (Eigen::Index k = 1; k < offsets.size(); ++k) {
    if (!(offsets[k] > offsets[k - 1])) throw Error("sensor window: offsets must strictly increase");
  }
  if (offsets[offsets.size() - 1] > h) throw Error("sensor window: offset beyond step");
  if (!values.allFinite()) throw Error("sensor window: non-finite input");
}

}  // namespace gridop
