#pragma once

#include "gridop/dataset.hpp"
#include "gridop/mlp.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace gridop {

/// Plain next-step baseline (x_n, y_n, h) -> x_{n+1}. Trained on full-state labels.
class FnnModel {
public:
  static constexpr Eigen::Index kFeatureDim = kStateDim + kInputDim + 1;

  FnnModel() = default;
  explicit FnnModel(NetworkSpec spec);

  static FnnModel create(const std::vector<Eigen::Index>& hidden, Activation activation,
                         double leaky_slope, std::uint64_t seed);

  [[nodiscard]] const Mlp<double>& net() const { return net_; }
  [[nodiscard]] Eigen::VectorXd& parameters() { return params_; }
  [[nodiscard]] const Eigen::VectorXd& parameters() const { return params_; }
  [[nodiscard]] Standardizer& input_norm() { return in_norm_; }
  [[nodiscard]] const Standardizer& input_norm() const { return in_norm_; }
  [[nodiscard]] Standardizer& output_norm() { return out_norm_; }
  [[nodiscard]] const Standardizer& output_norm() const { return out_norm_; }

  [[nodiscard]] State predict(const State& x, const InterfaceInput& y, double h) const;

  void fit_normalization(const TrainingData& data, std::span<const Eigen::Index> columns);
  /// Expects single-sensor data with full-state labels.
  [[nodiscard]] TrainingData normalize(const TrainingData& data) const;
  [[nodiscard]] double loss(const TrainingData& normalized,
                            std::span<const Eigen::Index> columns) const;
  double loss_and_gradient(const TrainingData& normalized, std::span<const Eigen::Index> columns,
                           Eigen::VectorXd& grad) const;

private:
  static Eigen::MatrixXd features(const TrainingData& data);

  Mlp<double> net_;
  Eigen::VectorXd params_;
  Standardizer in_norm_;
  Standardizer out_norm_;
};

}  // namespace gridop
