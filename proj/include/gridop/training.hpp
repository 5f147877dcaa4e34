#pragma once

#include "gridop/dataset.hpp"
#include "gridop/rng.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace gridop {

struct PlateauConfig {
  double factor = 0.5;
  int patience = 50;
  double min_lr = 1e-5;
  /// Relative improvement needed to reset the patience counter.
  double threshold = 1e-4;
};

struct TrainingConfig {
  double learning_rate = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 2000;
  Eigen::Index batch_size = 256;
  PlateauConfig plateau;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double learning_rate = 0.0;
};

struct TrainingReport {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_validation_loss = std::numeric_limits<double>::infinity();
  Eigen::Index train_count = 0;
  Eigen::Index validation_count = 0;
};

/// Thrown on a non-finite loss; carries the parameters from the start of the failing epoch.
class TrainingDiverged : public Error {
public:
  TrainingDiverged(int epoch, Eigen::VectorXd checkpoint)
      : Error("training diverged at epoch " + std::to_string(epoch)),
        epoch_(epoch),
        checkpoint_(std::move(checkpoint)) {}
  [[nodiscard]] int epoch() const { return epoch_; }
  [[nodiscard]] const Eigen::VectorXd& checkpoint() const { return checkpoint_; }

private:
  int epoch_;
  Eigen::VectorXd checkpoint_;
};

/// Reduce-on-plateau on a minimized metric.
class PlateauScheduler {
public:
  PlateauScheduler(double initial_lr, PlateauConfig cfg) : lr_(initial_lr), cfg_(cfg) {}
  /// Feeds one epoch's metric and returns the learning rate for the next epoch.
  double step(double metric);
  [[nodiscard]] double learning_rate() const { return lr_; }

private:
  double lr_;
  PlateauConfig cfg_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

class Adam {
public:
  Adam(Eigen::Index n, double beta1, double beta2, double epsilon);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);

private:
  Eigen::VectorXd m_, v_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

struct DataSplit {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> validation;
};

/// Seeded shuffle into training and validation index sets.
DataSplit split_indices(Eigen::Index n, double validation_fraction, Rng& rng);

template <typename M>
concept TrainableModel = requires(M& m, const M& cm, const TrainingData& d,
                                  std::span<const Eigen::Index> cols, Eigen::VectorXd& g) {
  { m.parameters() } -> std::same_as<Eigen::VectorXd&>;
  m.fit_normalization(d, cols);
  { cm.normalize(d) } -> std::same_as<TrainingData>;
  { cm.loss(d, cols) } -> std::convertible_to<double>;
  { cm.loss_and_gradient(d, cols, g) } -> std::convertible_to<double>;
};

inline constexpr Eigen::Index kMinTrainingSamples = 10;

/// Minibatch Adam from the model's current parameters. Normalization is refit on the training
/// split; the parameters with the lowest validation loss are left in the model.
template <TrainableModel M>
TrainingReport train(M& model, const TrainingData& data, const TrainingConfig& cfg,
                     const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  if (data.size() < kMinTrainingSamples)
    throw Error("training needs at least " + std::to_string(kMinTrainingSamples) + " samples");
  Rng rng(mix_seed(cfg.seed));
  DataSplit split = split_indices(data.size(), cfg.validation_fraction, rng);
  model.fit_normalization(data, split.train);
  const TrainingData norm = model.normalize(data);

  Eigen::VectorXd& params = model.parameters();
  Adam adam(params.size(), cfg.beta1, cfg.beta2, cfg.epsilon);
  PlateauScheduler scheduler(cfg.learning_rate, cfg.plateau);
  TrainingReport report;
  report.train_count = static_cast<Eigen::Index>(split.train.size());
  report.validation_count = static_cast<Eigen::Index>(split.validation.size());
  report.history.reserve(static_cast<std::size_t>(cfg.epochs));
  Eigen::VectorXd best = params;
  Eigen::VectorXd grad(params.size());
  std::vector<Eigen::Index> order = split.train;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const Eigen::VectorXd epoch_start = params;
    const double lr = scheduler.learning_rate();
    std::shuffle(order.begin(), order.end(), rng);
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t len = std::min(static_cast<std::size_t>(cfg.batch_size), order.size() - start);
      const std::span<const Eigen::Index> batch(order.data() + start, len);
      const double batch_loss = model.loss_and_gradient(norm, batch, grad);
      if (!std::isfinite(batch_loss) || !grad.allFinite()) {
        params = epoch_start;
        throw TrainingDiverged(epoch, epoch_start);
      }
      weighted += batch_loss * static_cast<double>(len);
      adam.step(params, grad, lr);
    }
    const double val = model.loss(norm, split.validation);
    if (!std::isfinite(val) || !params.allFinite()) {
      params = epoch_start;
      throw TrainingDiverged(epoch, epoch_start);
    }
    EpochRecord rec{epoch, weighted / static_cast<double>(order.size()), val, lr};
    report.history.push_back(rec);
    if (val < report.best_validation_loss) {
      report.best_validation_loss = val;
      report.best_epoch = epoch;
      best = params;
    }
    scheduler.step(val);
    if (on_epoch) on_epoch(rec);
  }
  params = best;
  return report;
}

}  // namespace gridop
