#pragma once

#include "gridop/data_generation.hpp"
#include "gridop/deeponet.hpp"
#include "gridop/fnn.hpp"
#include "gridop/rollout.hpp"

#include <array>
#include <functional>
#include <span>
#include <vector>

namespace gridop {

inline constexpr double kL2DenominatorFloor = 1e-12;

/// 100 * ||pred - truth||_2 / max(||truth||_2, 1e-12) over the sampled series.
double l2_relative_error(const Eigen::RowVectorXd& pred, const Eigen::RowVectorXd& truth);
/// Same for one quantity (0..3 states, 4..5 inputs); partitions must match.
double l2_relative_error(const Trajectory& pred, const Trajectory& truth, Eigen::Index quantity);

/// Per-quantity mean and population standard deviation of the L2-relative error (%).
struct ErrorTable {
  std::array<double, kQuantityCount> mean{};
  std::array<double, kQuantityCount> std{};
  Eigen::Index count = 0;
};

ErrorTable error_table(std::span<const Trajectory> pred, std::span<const Trajectory> truth);
/// Aggregates precomputed per-trajectory errors (rows = trajectories).
ErrorTable error_table(const Eigen::MatrixXd& per_trajectory);
Eigen::MatrixXd per_trajectory_errors(std::span<const Trajectory> pred,
                                      std::span<const Trajectory> truth);

/// Predictions over a test suite. Diverged rollouts are held at their last finite point so they
/// still count against the error table.
struct SuiteRollout {
  std::vector<Trajectory> predictions;
  std::vector<Eigen::Index> diverged;
};

using SuitePredictor = std::function<Trajectory(const TestCase&, const InputProvider&)>;

SuiteRollout rollout_suite(const SuitePredictor& predictor, std::span<const TestCase> suite,
                           const GridParams& grid);
SuiteRollout rollout_suite(const DeepONetModel& model, std::span<const TestCase> suite,
                           const GeneratorParams& gp, const GridParams& grid,
                           const RolloutOptions& opts = {});
SuiteRollout rollout_suite(const FnnModel& model, std::span<const TestCase> suite,
                           const GeneratorParams& gp, const GridParams& grid,
                           const RolloutOptions& opts = {});
std::vector<Trajectory> truths(std::span<const TestCase> suite);

/// Extends a truncated rollout to the full partition by repeating its last point.
Trajectory hold_last(const Trajectory& partial, const TimePartition& partition);

using VectorField = std::function<State(const State&, const InterfaceInput&)>;

/// max over probe pairs of the x- and y-difference quotients of f, times `inflation`.
double estimate_lipschitz(const VectorField& f, const SamplingRanges& ranges, Eigen::Index n_probe,
                          Rng& rng, double inflation = 2.0);
double estimate_lipschitz_f(const GeneratorParams& gp, const SamplingRanges& ranges,
                            Eigen::Index n_probe, Rng& rng, double inflation = 2.0);

struct BoundInputs {
  double lipschitz = 0.0;      // L
  double flow_lipschitz = 0.0; // L_Phi
  double eps = 0.0;
  double kappa = 0.0;
  double h = 0.05;
  Eigen::Index n = 0;

  void validate() const;
};

/// Sum_{k<n} r^k E + sum_{k<n} L_Phi^k eps with r = exp(L h), E = L h kappa exp(L h).
double cumulative_bound(const BoundInputs& b);

struct BoundConstants {
  double lipschitz = 0.0;
  double flow_lipschitz = 0.0;
  double eps = 0.0;
  double kappa = 0.0;
};

struct BoundRollout {
  double gamma = 1.0;
  Eigen::VectorXd error;  // ||x(t_n) - x_hat(t_n)||_2 per point
  Eigen::Index first_violation = -1;
  [[nodiscard]] bool satisfied() const { return first_violation < 0; }
};

struct BoundReport {
  BoundConstants constants;
  Eigen::VectorXd bound;  // cumulative_bound(n) per point
  std::vector<BoundRollout> rollouts;
  [[nodiscard]] Eigen::Index satisfied_count() const;
  [[nodiscard]] bool satisfied() const { return satisfied_count() == static_cast<Eigen::Index>(rollouts.size()); }
};

struct BoundConfig {
  Eigen::Index n_rollouts = 20;
  Eigen::Index lipschitz_probes = 1000;
  Eigen::Index eps_probes = 1000;
  double inflation = 2.0;
  int kappa_substeps = 8;
  TestSuiteConfig suite;
  LabelConfig label;
  RolloutOptions rollout;
};

/// Largest one-step flow sensitivity of the true frozen-input model over probe pairs.
double estimate_flow_lipschitz(const GeneratorParams& gp, const SamplingRanges& ranges, double h,
                               Eigen::Index n_probe, Rng& rng, int substeps = 16,
                               double inflation = 2.0);
/// max over steps of max_s ||y(s) - y(t_n)|| along the truth, re-solving the network inside each
/// step at `substeps` points.
double estimate_kappa(const Trajectory& truth, const GeneratorParams& gp, const GridParams& grid,
                      int substeps = 8);
/// Max raw-units error of the residual model against fresh residual labels.
double estimate_residual_eps(const DeepONetModel& model, const GeneratorParams& gp,
                             const GridParams& grid, const SamplingRanges& ranges,
                             Eigen::Index n_probe, std::uint64_t seed, const LabelConfig& label);

/// Closed-loop residual rollouts from gamma-perturbed starts compared against the cumulative bound.
BoundReport verify_bound(const DeepONetModel& model, const GeneratorParams& gp,
                         const GridParams& grid, const State& x_star,
                         const TimePartition& partition, const SamplingRanges& ranges,
                         std::uint64_t seed, const BoundConfig& cfg = {});

/// Bound check for given trajectories and constants (shared by verify_bound and its tests).
BoundReport check_bound(std::span<const Trajectory> truth, std::span<const Trajectory> pred,
                        const BoundConstants& c, double h);

}  // namespace gridop
