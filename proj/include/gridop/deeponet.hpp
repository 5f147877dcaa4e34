#pragma once

#include "gridop/dataset.hpp"
#include "gridop/mlp.hpp"
#include "gridop/types.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace gridop {

struct NormalizationStats {
  Standardizer branch;
  Standardizer trunk;
  Standardizer output;
};

/// Architecture knobs shared by the branch and trunk nets.
struct DeepONetConfig {
  std::vector<Eigen::Index> branch_hidden{60, 60, 60};
  std::vector<Eigen::Index> trunk_hidden{60, 60, 60};
  Activation activation = Activation::leaky_relu;
  double leaky_slope = 0.01;
  Architecture architecture = Architecture::modified_fc;
  Eigen::Index q = 20;
  Eigen::Index sensors = 1;
  OutputMode mode = OutputMode::incremental;
};

/// Branch net on (x, sensors), trunk net on h, prediction component i is
/// sum_j beta[i*q + j] * phi[i*q + j]. Parameters are stored flat as [branch | trunk].
class DeepONetModel {
public:
  DeepONetModel() = default;
  DeepONetModel(NetworkSpec branch, NetworkSpec trunk, Eigen::Index q, Eigen::Index sensors,
                OutputMode mode);

  /// Builds the nets from `cfg` and initializes parameters from `seed`; identity normalization.
  static DeepONetModel create(const DeepONetConfig& cfg, std::uint64_t seed);

  [[nodiscard]] const Mlp<double>& branch() const { return branch_; }
  [[nodiscard]] const Mlp<double>& trunk() const { return trunk_; }
  [[nodiscard]] Eigen::Index q() const { return q_; }
  [[nodiscard]] Eigen::Index n_x() const { return kStateDim; }
  [[nodiscard]] Eigen::Index sensors() const { return sensors_; }
  [[nodiscard]] OutputMode mode() const { return mode_; }

  [[nodiscard]] Eigen::VectorXd& parameters() { return params_; }
  [[nodiscard]] const Eigen::VectorXd& parameters() const { return params_; }
  [[nodiscard]] NormalizationStats& normalization() { return norm_; }
  [[nodiscard]] const NormalizationStats& normalization() const { return norm_; }

  /// Network output for normalized inputs, in normalized output units (one column per sample).
  [[nodiscard]] Eigen::MatrixXd forward_normalized(const Eigen::MatrixXd& branch_in,
                                                   const Eigen::RowVectorXd& step_in) const;
  [[nodiscard]] Eigen::MatrixXd branch_coefficients(const Eigen::MatrixXd& branch_in) const;
  [[nodiscard]] Eigen::MatrixXd trunk_basis(const Eigen::RowVectorXd& step_in) const;
  static Eigen::MatrixXd readout(const Eigen::MatrixXd& beta, const Eigen::MatrixXd& phi,
                                 Eigen::Index q);

  /// De-normalized raw output: next state, increment or residual depending on `mode()`.
  [[nodiscard]] State predict(const State& x, const SensorWindow& sensors, double h) const;

  void fit_normalization(const TrainingData& data, std::span<const Eigen::Index> columns);
  [[nodiscard]] TrainingData normalize(const TrainingData& data) const;
  /// Mean squared L2 error over the selected columns of normalized data.
  [[nodiscard]] double loss(const TrainingData& normalized,
                            std::span<const Eigen::Index> columns) const;
  /// As `loss`, writing the exact gradient with respect to `parameters()` into `grad`.
  double loss_and_gradient(const TrainingData& normalized, std::span<const Eigen::Index> columns,
                           Eigen::VectorXd& grad) const;

private:
  [[nodiscard]] Eigen::Map<const Eigen::VectorXd> branch_params() const;
  [[nodiscard]] Eigen::Map<const Eigen::VectorXd> trunk_params() const;

  Mlp<double> branch_;
  Mlp<double> trunk_;
  Eigen::Index q_ = 0;
  Eigen::Index sensors_ = 1;
  OutputMode mode_ = OutputMode::incremental;
  Eigen::VectorXd params_;
  NormalizationStats norm_;
};

/// Mean squared normalized error over samples whose labels are already in the model's mode.
double loss(const DeepONetModel& model, std::span<const DatasetSample> batch);

/// Gathers the selected columns.
Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& m, std::span<const Eigen::Index> columns);
Eigen::RowVectorXd gather_columns(const Eigen::RowVectorXd& m,
                                  std::span<const Eigen::Index> columns);

}  // namespace gridop
