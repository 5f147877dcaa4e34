#include "gridop/dataset.hpp"

#include <string>

namespace gridop {

void DatasetSample::validate(double h_max) const {
  if (!(h > 0.0) || h > h_max) throw Error("dataset sample: h outside (0, h_max]");
  sensors.validate(h);
  if (!x.allFinite() || !label.allFinite()) throw Error("dataset sample: non-finite entry");
}

Eigen::Index branch_feature_dim(Eigen::Index sensors) {
  if (sensors < 1) throw Error("need at least one sensor");
  return sensors == 1 ? kStateDim + kInputDim : kStateDim + sensors * kInputDim + sensors;
}

Eigen::VectorXd branch_features(const State& x, const SensorWindow& sensors) {
  const Eigen::Index m = sensors.size();
  Eigen::VectorXd f(branch_feature_dim(m));
  f.head<4>() = x;
  for (Eigen::Index k = 0; k < m; ++k) f.segment<2>(4 + 2 * k) = sensors.values.col(k);
  if (m > 1) f.tail(m) = sensors.offsets;
  return f;
}

TrainingData make_training_data(std::span<const DatasetSample> samples, OutputMode label_mode,
                                OutputMode target_mode) {
  if (samples.empty()) throw Error("training data: no samples");
  if (label_mode != target_mode &&
      (label_mode == OutputMode::residual || target_mode == OutputMode::residual))
    throw Error("training data: cannot convert " + std::string(to_string(label_mode)) +
                " labels to " + std::string(to_string(target_mode)));
  const auto n = static_cast<Eigen::Index>(samples.size());
  const Eigen::Index m = samples.front().sensors.size();
  TrainingData d;
  d.branch.resize(branch_feature_dim(m), n);
  d.step.resize(n);
  d.label.resize(kStateDim, n);
  d.state.resize(kStateDim, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& s = samples[static_cast<std::size_t>(k)];
    if (s.sensors.size() != m) throw Error("training data: mixed sensor counts");
    d.branch.col(k) = branch_features(s.x, s.sensors);
    d.step[k] = s.h;
    d.state.col(k) = s.x;
    State label = s.label;
    if (label_mode == OutputMode::incremental && target_mode == OutputMode::full) label += s.x;
    if (label_mode == OutputMode::full && target_mode == OutputMode::incremental) label -= s.x;
    d.label.col(k) = label;
  }
  return d;
}

Standardizer Standardizer::identity(Eigen::Index dim) {
  return Standardizer{Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& samples) {
  if (samples.cols() < 1) throw Error("standardizer: no samples");
  Standardizer s;
  s.mean = samples.rowwise().mean();
  const Eigen::MatrixXd centered = samples.colwise() - s.mean;
  s.std = (centered.array().square().rowwise().sum() / static_cast<double>(samples.cols()))
              .sqrt()
              .max(kStdFloor)
              .matrix();
  return s;
}

Eigen::MatrixXd Standardizer::normalize(const Eigen::MatrixXd& v) const {
  return (v.colwise() - mean).array().colwise() / std.array();
}

Eigen::MatrixXd Standardizer::denormalize(const Eigen::MatrixXd& v) const {
  return (v.array().colwise() * std.array()).matrix().colwise() + mean;
}

}  // namespace gridop
