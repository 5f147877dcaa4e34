#pragma once

#include "gridop/deeponet.hpp"
#include "gridop/fnn.hpp"
#include "gridop/grid_dynamics.hpp"
#include "gridop/rng.hpp"

#include <functional>
#include <string>
#include <variant>
#include <vector>

namespace gridop {

/// Predictions feed the network equations under the grid/fault schedule.
struct ClosedLoop {
  GridParams grid;
  std::vector<FaultEvent> faults;
};

/// Inputs replayed from a recorded trajectory; the network is never solved.
struct Recorded {
  Trajectory trajectory;
};

using InputProvider = std::variant<ClosedLoop, Recorded>;

/// Raw one-step output for (x_n, sensor window, h_n): next state, increment or residual.
using StepFunction = std::function<State(const State&, const SensorWindow&, double)>;

struct RolloutOptions {
  double approx_beta = 0.5;
  int approx_substeps = 16;
  /// Any |state component| above this aborts the rollout.
  double divergence_limit = 1e3;
};

/// Carries the points computed before the failing step.
class RolloutDiverged : public Error {
public:
  RolloutDiverged(Eigen::Index step, Trajectory partial)
      : Error("rollout diverged at step " + std::to_string(step)),
        step_(step),
        partial_(std::move(partial)) {}
  [[nodiscard]] Eigen::Index step() const { return step_; }
  [[nodiscard]] const Trajectory& partial() const { return partial_; }

private:
  Eigen::Index step_;
  Trajectory partial_;
};

/// Recursive prediction with a full or incremental one-step map.
Trajectory rollout_data_driven(const StepFunction& step, OutputMode mode, Eigen::Index sensors,
                               const State& x0, const TimePartition& partition,
                               const GeneratorParams& gp, const InputProvider& provider,
                               const RolloutOptions& opts = {});

/// Approximate-model step plus a learned residual.
Trajectory rollout_residual(const StepFunction& residual, Eigen::Index sensors, const State& x0,
                            const TimePartition& partition, const GeneratorParams& gp,
                            const InputProvider& provider, const RolloutOptions& opts = {});

/// Dispatches on the model's output mode.
Trajectory rollout(const DeepONetModel& model, const State& x0, const TimePartition& partition,
                   const GeneratorParams& gp, const InputProvider& provider,
                   const RolloutOptions& opts = {});

/// Closed-loop rollout of the next-step baseline.
Trajectory rollout_fnn(const FnnModel& model, const State& x0, const TimePartition& partition,
                       const GeneratorParams& gp, const InputProvider& provider,
                       const RolloutOptions& opts = {});

/// Pure approximate-model rollout (zero residual).
Trajectory rollout_approximate(const State& x0, const TimePartition& partition,
                               const GeneratorParams& gp, const InputProvider& provider,
                               const RolloutOptions& opts = {});

/// 0 followed by the sorted union of n_points - 1 uniform draws on (0, t_end) and t_end,
/// redrawn until every step is at most `max_step`.
TimePartition irregular_partition(double t_end, Eigen::Index n_points, Rng& rng,
                                  double max_step = 0.25);

}  // namespace gridop
