#include "gridop/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gridop {

TimePartition::TimePartition(Eigen::VectorXd points, double max_step)
    : points_(std::move(points)), max_step_(max_step) {
  if (points_.size() < 2) throw Error("time partition needs at least two points");
  if (!(max_step_ > 0.0)) throw Error("time partition max step must be positive");
  if (points_[0] != 0.0) throw Error("time partition must start at t_0 = 0");
  for (Eigen::Index n = 0; n + 1 < points_.size(); ++n) {
    const double h = points_[n + 1] - points_[n];
    // Uniform grids built as n*h can exceed h by an ulp.
    if (!(h > 0.0) || h > max_step_ * (1.0 + 1e-12))
      throw Error("time partition step " + std::to_string(n) + " outside (0, h]");
  }
}

TimePartition TimePartition::uniform(double t_end, double h) {
  if (!(h > 0.0) || !(t_end > 0.0)) throw Error("uniform partition needs t_end > 0 and h > 0");
  const auto steps = static_cast<Eigen::Index>(std::llround(t_end / h));
  if (steps < 1 || std::abs(static_cast<double>(steps) * h - t_end) > 1e-9 * t_end)
    throw Error("uniform partition: t_end must be a multiple of h");
  Eigen::VectorXd pts(steps + 1);
  for (Eigen::Index n = 0; n <= steps; ++n) pts[n] = static_cast<double>(n) * h;
  return TimePartition(std::move(pts), h);
}

bool TimePartition::matches(const TimePartition& other, double tol) const {
  if (points_.size() != other.points_.size()) return false;
  return ((points_ - other.points_).cwiseAbs().array() <= tol).all();
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::truth: return "truth";
    case Provenance::rollout_data_driven: return "rollout_data_driven";
    case Provenance::rollout_residual: return "rollout_residual";
    case Provenance::shadow: return "shadow";
  }
  return "unknown";
}

Provenance provenance_from_string(std::string_view name) {
  if (name == "truth") return Provenance::truth;
  if (name == "rollout_data_driven") return Provenance::rollout_data_driven;
  if (name == "rollout_residual") return Provenance::rollout_residual;
  if (name == "shadow") return Provenance::shadow;
  throw Error("unknown provenance '" + std::string(name) + "'");
}

Trajectory::Trajectory(TimePartition p, Provenance prov)
    : partition(std::move(p)), provenance(prov) {
  const Eigen::Index n = partition.points().size();
  states.resize(4, n);
  inputs.resize(2, n);
  states.setConstant(std::nan(""));
  inputs.setConstant(std::nan(""));
}

Eigen::RowVectorXd Trajectory::quantity(Eigen::Index q) const {
  if (q < 4) return states.row(q);
  return inputs.row(q - 4);
}

InterfaceInput Trajectory::input_at(double t) const {
  const auto& pts = partition.points();
  const Eigen::Index n = size();
  if (t <= pts[0]) return inputs.col(0);
  if (t >= pts[n - 1]) return inputs.col(n - 1);
  const auto* begin = pts.data();
  const auto* it = std::upper_bound(begin, begin + n, t);
  const Eigen::Index k = (it - begin) - 1;
  const double w = (t - pts[k]) / (pts[k + 1] - pts[k]);
  return inputs.col(k) + w * (inputs.col(k + 1) - inputs.col(k));
}

void Trajectory::truncate(Eigen::Index count) {
  states.conservativeResize(Eigen::NoChange, count);
  inputs.conservativeResize(Eigen::NoChange, count);
}

std::string_view quantity_name(Eigen::Index q) {
  static constexpr std::string_view names[] = {"delta", "omega", "e_d_prime",
                                               "e_q_prime", "i_d", "i_q"};
  if (q < 0 || q >= kQuantityCount) throw Error("quantity index out of range");
  return names[q];
}

}  // namespace gridop
