#pragma once

#include "gridop/data_generation.hpp"
#include "gridop/deeponet.hpp"
#include "gridop/rollout.hpp"
#include "gridop/training.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace gridop {

struct DaggerConfig {
  int n_iter = 5;
  int n_rollout = 10;
  double t_end = 5.0;
  double h = 0.05;
  /// Rollout starts are gamma-perturbed equilibria.
  Interval gamma{0.2, 1.5};
  TrainingConfig training;
  /// Later iterations continue from the previous parameters with a reduced epoch budget.
  bool warm_start = true;
  double warm_epoch_fraction = 0.5;
  LabelConfig label;
  RolloutOptions rollout;
  std::uint64_t seed = 0;

  void validate() const;
};

struct VisitedPoint {
  State x;
  InterfaceInput y;
  double h;
};

/// One tuple per executed step, carrying the rollout's own states and inputs.
std::vector<VisitedPoint> collect_visited(const Trajectory& trajectory);

/// Labels visited points with the true one-step operator in the given mode.
std::vector<DatasetSample> label_visited(std::span<const VisitedPoint> points, OutputMode mode,
                                         const GeneratorParams& gp, const LabelConfig& cfg);

struct DaggerIteration {
  int iteration = 0;
  DeepONetModel model;
  TrainingReport report;
  Eigen::Index aggregate_size = 0;  // samples the model was trained on
  Eigen::Index collected = 0;       // samples added after training
  Eigen::Index diverged = 0;
};

struct DaggerResult {
  DeepONetModel model;
  std::vector<DaggerIteration> iterations;
  std::vector<DatasetSample> aggregate;
};

/// Train, roll out from sampled starts in closed loop, label the visited points with the truth,
/// aggregate, repeat.
DaggerResult run_dagger(std::vector<DatasetSample> initial, const DeepONetModel& model_template,
                        const DaggerConfig& cfg, const GeneratorParams& gp, const GridParams& grid,
                        const State& x_star,
                        const std::function<void(const DaggerIteration&)>& on_iteration = {});

}  // namespace gridop
