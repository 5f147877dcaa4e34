#pragma once

#include "gridop/types.hpp"

#include <Eigen/Core>

#include <string_view>

namespace gridop {

/// Time grid 0 = t_0 < t_1 < ... < t_M with every step in (0, max_step].
class TimePartition {
public:
  TimePartition() = default;
  TimePartition(Eigen::VectorXd points, double max_step);

  static TimePartition uniform(double t_end, double h);

  [[nodiscard]] const Eigen::VectorXd& points() const { return points_; }
  [[nodiscard]] double max_step() const { return max_step_; }
  [[nodiscard]] Eigen::Index steps() const { return points_.size() - 1; }
  [[nodiscard]] double t(Eigen::Index n) const { return points_[n]; }
  [[nodiscard]] double step(Eigen::Index n) const { return points_[n + 1] - points_[n]; }
  [[nodiscard]] double t_end() const { return points_[points_.size() - 1]; }

  /// Same number of points, each within tol.
  [[nodiscard]] bool matches(const TimePartition& other, double tol = 1e-12) const;

private:
  Eigen::VectorXd points_;
  double max_step_ = 0.0;
};

enum class Provenance { truth, rollout_data_driven, rollout_residual, shadow };

std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view name);

/// Recorded states and interface inputs, one column per partition point.
struct Trajectory {
  TimePartition partition;
  Eigen::Matrix<double, 4, Eigen::Dynamic> states;
  Eigen::Matrix<double, 2, Eigen::Dynamic> inputs;
  Provenance provenance = Provenance::truth;

  Trajectory() = default;
  Trajectory(TimePartition p, Provenance prov);

  /// Number of recorded points (may be less than the partition size for a truncated rollout).
  [[nodiscard]] Eigen::Index size() const { return states.cols(); }

  /// Row q of the stacked (delta, omega, E'd, E'q, I_d, I_q) series.
  [[nodiscard]] Eigen::RowVectorXd quantity(Eigen::Index q) const;

  /// Interface input at time t by linear interpolation between recorded points.
  [[nodiscard]] InterfaceInput input_at(double t) const;

  /// Drops points past `count`.
  void truncate(Eigen::Index count);
};

inline constexpr Eigen::Index kQuantityCount = 6;
std::string_view quantity_name(Eigen::Index q);

}  // namespace gridop
