#include "gridop/deeponet.hpp"

#include <string>

namespace gridop {

DeepONetModel::DeepONetModel(NetworkSpec branch, NetworkSpec trunk, Eigen::Index q,
                             Eigen::Index sensors, OutputMode mode)
    : q_(q), sensors_(sensors), mode_(mode) {
  if (q < 1) throw Error("deeponet: q must be >= 1");
  branch.validate();
  trunk.validate();
  if (branch.input_dim != branch_feature_dim(sensors))
    throw Error("deeponet: branch input dim " + std::to_string(branch.input_dim) +
                " does not match " + std::to_string(sensors) + " sensors");
  if (trunk.input_dim != 1) throw Error("deeponet: trunk input dim must be 1");
  if (branch.output_dim != q * kStateDim || trunk.output_dim != q * kStateDim)
    throw Error("deeponet: branch and trunk output dims must equal q * n_x");
  branch_ = Mlp<double>(std::move(branch));
  trunk_ = Mlp<double>(std::move(trunk));
  params_ = Eigen::VectorXd::Zero(branch_.parameter_count() + trunk_.parameter_count());
  norm_ = {Standardizer::identity(branch_feature_dim(sensors)), Standardizer::identity(1),
           Standardizer::identity(kStateDim)};
}

DeepONetModel DeepONetModel::create(const DeepONetConfig& cfg, std::uint64_t seed) {
  auto spec = [&](Eigen::Index in, const std::vector<Eigen::Index>& hidden) {
    NetworkSpec s;
    s.input_dim = in;
    s.output_dim = cfg.q * kStateDim;
    s.hidden_layers = hidden;
    s.activation = cfg.activation;
    s.leaky_slope = cfg.leaky_slope;
    s.architecture = cfg.architecture;
    return s;
  };
  DeepONetModel m(spec(branch_feature_dim(cfg.sensors), cfg.branch_hidden),
                  spec(1, cfg.trunk_hidden), cfg.q, cfg.sensors, cfg.mode);
  Rng rng(mix_seed(seed));
  const Eigen::Index nb = m.branch_.parameter_count();
  m.branch_.initialize(m.params_.head(nb), rng);
  m.trunk_.initialize(m.params_.tail(m.trunk_.parameter_count()), rng);
  return m;
}

Eigen::Map<const Eigen::VectorXd> DeepONetModel::branch_params() const {
  return {params_.data(), branch_.parameter_count()};
}

Eigen::Map<const Eigen::VectorXd> DeepONetModel::trunk_params() const {
  return {params_.data() + branch_.parameter_count(), trunk_.parameter_count()};
}

Eigen::MatrixXd DeepONetModel::branch_coefficients(const Eigen::MatrixXd& branch_in) const {
  return branch_.forward(branch_in, branch_params());
}

Eigen::MatrixXd DeepONetModel::trunk_basis(const Eigen::RowVectorXd& step_in) const {
  return trunk_.forward(step_in, trunk_params());
}

Eigen::MatrixXd DeepONetModel::readout(const Eigen::MatrixXd& beta, const Eigen::MatrixXd& phi,
                                       Eigen::Index q) {
  const Eigen::MatrixXd p = beta.cwiseProduct(phi);
  const Eigen::Index n = p.rows() / q;
  Eigen::MatrixXd out(n, p.cols());
  for (Eigen::Index i = 0; i < n; ++i) out.row(i) = p.middleRows(i * q, q).colwise().sum();
  return out;
}

Eigen::MatrixXd DeepONetModel::forward_normalized(const Eigen::MatrixXd& branch_in,
                                                  const Eigen::RowVectorXd& step_in) const {
  return readout(branch_coefficients(branch_in), trunk_basis(step_in), q_);
}

State DeepONetModel::predict(const State& x, const SensorWindow& sensors, double h) const {
  if (sensors.size() != sensors_)
    throw Error("deeponet: model expects " + std::to_string(sensors_) + " sensors, got " +
                std::to_string(sensors.size()));
  const Eigen::MatrixXd b = norm_.branch.normalize(branch_features(x, sensors));
  Eigen::Matrix<double, 1, 1> hv(h);
  const Eigen::RowVectorXd s = norm_.trunk.normalize(hv);
  const Eigen::MatrixXd beta = branch_coefficients(b);
  const Eigen::MatrixXd phi = trunk_basis(s);
  if (!beta.allFinite() || !phi.allFinite()) throw Error("numerical blow-up");
  const State out = norm_.output.denormalize(readout(beta, phi, q_));
  if (!out.allFinite()) throw Error("numerical blow-up");
  return out;
}

void DeepONetModel::fit_normalization(const TrainingData& data,
                                      std::span<const Eigen::Index> columns) {
  norm_.branch = Standardizer::fit(gather_columns(data.branch, columns));
  norm_.trunk = Standardizer::fit(gather_columns(data.step, columns));
  norm_.output = Standardizer::fit(gather_columns(data.label, columns));
}

TrainingData DeepONetModel::normalize(const TrainingData& data) const {
  TrainingData n;
  n.branch = norm_.branch.normalize(data.branch);
  n.step = norm_.trunk.normalize(data.step);
  n.label = norm_.output.normalize(data.label);
  n.state = data.state;
  return n;
}

double DeepONetModel::loss(const TrainingData& normalized,
                           std::span<const Eigen::Index> columns) const {
  const Eigen::MatrixXd pred = forward_normalized(gather_columns(normalized.branch, columns),
                                                  gather_columns(normalized.step, columns));
  const Eigen::MatrixXd err = pred - gather_columns(normalized.label, columns);
  return err.squaredNorm() / static_cast<double>(columns.size());
}

double DeepONetModel::loss_and_gradient(const TrainingData& normalized,
                                        std::span<const Eigen::Index> columns,
                                        Eigen::VectorXd& grad) const {
  Mlp<double>::Tape bt, tt;
  const Eigen::MatrixXd beta =
      branch_.forward(gather_columns(normalized.branch, columns), branch_params(), &bt);
  const Eigen::MatrixXd phi =
      trunk_.forward(gather_columns(normalized.step, columns), trunk_params(), &tt);
  const Eigen::MatrixXd err = readout(beta, phi, q_) - gather_columns(normalized.label, columns);
  const double count = static_cast<double>(columns.size());

  const Eigen::MatrixXd g_out = (2.0 / count) * err;
  Eigen::MatrixXd g_p(beta.rows(), beta.cols());
  for (Eigen::Index i = 0; i < kStateDim; ++i)
    g_p.middleRows(i * q_, q_) = g_out.row(i).replicate(q_, 1);

  grad.setZero(params_.size());
  const Eigen::Index nb = branch_.parameter_count();
  branch_.backward(bt, g_p.cwiseProduct(phi), branch_params(), grad.head(nb));
  trunk_.backward(tt, g_p.cwiseProduct(beta), trunk_params(), grad.tail(trunk_.parameter_count()));
  return err.squaredNorm() / count;
}

double loss(const DeepONetModel& model, std::span<const DatasetSample> batch) {
  const TrainingData data = make_training_data(batch, model.mode(), model.mode());
  std::vector<Eigen::Index> all(batch.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = static_cast<Eigen::Index>(k);
  return model.loss(model.normalize(data), all);
}

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& m, std::span<const Eigen::Index> columns) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k)
    out.col(static_cast<Eigen::Index>(k)) = m.col(columns[k]);
  return out;
}

Eigen::RowVectorXd gather_columns(const Eigen::RowVectorXd& m,
                                  std::span<const Eigen::Index> columns) {
  Eigen::RowVectorXd out(static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) out[static_cast<Eigen::Index>(k)] = m[columns[k]];
  return out;
}

}  // namespace gridop
