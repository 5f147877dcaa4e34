#include "gridop/fnn.hpp"

#include "gridop/deeponet.hpp"

namespace gridop {

FnnModel::FnnModel(NetworkSpec spec) {
  spec.validate();
  if (spec.input_dim != kFeatureDim || spec.output_dim != kStateDim)
    throw Error("fnn: expects 7 inputs and 4 outputs");
  net_ = Mlp<double>(std::move(spec));
  params_ = Eigen::VectorXd::Zero(net_.parameter_count());
  in_norm_ = Standardizer::identity(kFeatureDim);
  out_norm_ = Standardizer::identity(kStateDim);
}

FnnModel FnnModel::create(const std::vector<Eigen::Index>& hidden, Activation activation,
                          double leaky_slope, std::uint64_t seed) {
  NetworkSpec s;
  s.input_dim = kFeatureDim;
  s.output_dim = kStateDim;
  s.hidden_layers = hidden;
  s.activation = activation;
  s.leaky_slope = leaky_slope;
  FnnModel m(std::move(s));
  Rng rng(mix_seed(seed));
  m.net_.initialize(m.params_, rng);
  return m;
}

Eigen::MatrixXd FnnModel::features(const TrainingData& data) {
  if (data.branch.rows() != kStateDim + kInputDim) throw Error("fnn: needs single-sensor data");
  Eigen::MatrixXd f(kFeatureDim, data.size());
  f.topRows(kStateDim + kInputDim) = data.branch;
  f.bottomRows(1) = data.step;
  return f;
}

State FnnModel::predict(const State& x, const InterfaceInput& y, double h) const {
  Eigen::Matrix<double, kFeatureDim, 1> f;
  f << x, y, h;
  const State out = out_norm_.denormalize(net_.forward(in_norm_.normalize(f), params_));
  if (!out.allFinite()) throw Error("numerical blow-up");
  return out;
}

void FnnModel::fit_normalization(const TrainingData& data, std::span<const Eigen::Index> columns) {
  in_norm_ = Standardizer::fit(gather_columns(features(data), columns));
  out_norm_ = Standardizer::fit(gather_columns(data.label, columns));
}

TrainingData FnnModel::normalize(const TrainingData& data) const {
  TrainingData n;
  n.branch = in_norm_.normalize(features(data));
  n.step = Eigen::RowVectorXd::Zero(data.size());
  n.label = out_norm_.normalize(data.label);
  n.state = data.state;
  return n;
}

double FnnModel::loss(const TrainingData& normalized, std::span<const Eigen::Index> columns) const {
  const Eigen::MatrixXd err = net_.forward(gather_columns(normalized.branch, columns), params_) -
                              gather_columns(normalized.label, columns);
  return err.squaredNorm() / static_cast<double>(columns.size());
}

double FnnModel::loss_and_gradient(const TrainingData& normalized,
                                   std::span<const Eigen::Index> columns,
                                   Eigen::VectorXd& grad) const {
  Mlp<double>::Tape tape;
  const Eigen::MatrixXd err =
      net_.forward(gather_columns(normalized.branch, columns), params_, &tape) -
      gather_columns(normalized.label, columns);
  const double count = static_cast<double>(columns.size());
  grad.setZero(params_.size());
  net_.backward(tape, (2.0 / count) * err, params_, grad);
  return err.squaredNorm() / count;
}

}  // namespace gridop
