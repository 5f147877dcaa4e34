#pragma once

#include "gridop/types.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace gridop {

/// One supervised triplet: (x(t_n), discretized input over the step), h_n, target.
struct DatasetSample {
  State x = State::Zero();
  SensorWindow sensors = SensorWindow::frozen(InterfaceInput::Zero());
  double h = 0.0;
  State label = State::Zero();

  /// 0 < h <= h_max, d_0 = 0, d_k strictly increasing and <= h, everything finite.
  void validate(double h_max = 0.25) const;
};

/// Branch-net features: (x, y) for a single sensor, (x, y_0..y_{m-1}, d_0..d_{m-1}) otherwise.
Eigen::VectorXd branch_features(const State& x, const SensorWindow& sensors);
Eigen::Index branch_feature_dim(Eigen::Index sensors);

/// Column-major training matrices, one sample per column.
struct TrainingData {
  Eigen::MatrixXd branch;
  Eigen::RowVectorXd step;
  Eigen::MatrixXd label;
  Eigen::MatrixXd state;

  [[nodiscard]] Eigen::Index size() const { return step.size(); }
};

/// Stacks samples and converts labels from `label_mode` to `target_mode` (full <-> incremental
/// via x_n; residual labels cannot be converted).
TrainingData make_training_data(std::span<const DatasetSample> samples, OutputMode label_mode,
                                OutputMode target_mode);

/// Per-dimension affine standardization with the standard deviation floored at 1e-8.
struct Standardizer {
  static constexpr double kStdFloor = 1e-8;

  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  static Standardizer identity(Eigen::Index dim);
  /// Population statistics of the given columns.
  static Standardizer fit(const Eigen::MatrixXd& samples);

  [[nodiscard]] Eigen::MatrixXd normalize(const Eigen::MatrixXd& v) const;
  [[nodiscard]] Eigen::MatrixXd denormalize(const Eigen::MatrixXd& v) const;
  [[nodiscard]] Eigen::Index dim() const { return mean.size(); }
};

}  // namespace gridop
