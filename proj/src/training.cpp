#include "gridop/training.hpp"

namespace gridop {

void TrainingConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error("training: learning_rate must be > 0");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw Error("training: validation_fraction must lie in (0, 1)");
  if (epochs < 1) throw Error("training: epochs must be >= 1");
  if (batch_size < 1) throw Error("training: batch_size must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0))
    throw Error("training: invalid Adam constants");
  if (!(plateau.factor > 0.0 && plateau.factor < 1.0) || plateau.patience < 0 ||
      plateau.min_lr < 0.0)
    throw Error("training: invalid plateau scheduler");
}

double PlateauScheduler::step(double metric) {
  if (metric < best_ * (1.0 - cfg_.threshold)) {
    best_ = metric;
    bad_epochs_ = 0;
  } else if (++bad_epochs_ > cfg_.patience) {
    lr_ = std::max(lr_ * cfg_.factor, cfg_.min_lr);
    bad_epochs_ = 0;
  }
  return lr_;
}

Adam::Adam(Eigen::Index n, double beta1, double beta2, double epsilon)
    : m_(Eigen::VectorXd::Zero(n)),
      v_(Eigen::VectorXd::Zero(n)),
      beta1_(beta1),
      beta2_(beta2),
      eps_(epsilon) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

DataSplit split_indices(Eigen::Index n, double validation_fraction, Rng& rng) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  auto n_val = static_cast<Eigen::Index>(std::llround(validation_fraction * static_cast<double>(n)));
  n_val = std::clamp<Eigen::Index>(n_val, 1, n - 1);
  DataSplit s;
  s.validation.assign(idx.begin(), idx.begin() + n_val);
  s.train.assign(idx.begin() + n_val, idx.end());
  std::sort(s.validation.begin(), s.validation.end());
  return s;
}

}  // namespace gridop
