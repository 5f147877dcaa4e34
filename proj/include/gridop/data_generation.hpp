#pragma once

#include "gridop/dataset.hpp"
#include "gridop/grid_dynamics.hpp"
#include "gridop/rng.hpp"

#include <array>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <utility>
#include <vector>

namespace gridop {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

struct SamplingRanges {
  std::array<Interval, 4> state{{{-std::numbers::pi, 4.0 * std::numbers::pi},
                                 {0.0, std::numbers::pi / 2.0},
                                 {-1.0, 1.0},
                                 {0.0, 1.5}}};
  std::array<Interval, 2> input{{{-1.0, 3.0}, {-1.0, 1.0}}};
  double h_min = 1e-3;
  double h_max = 0.25;

  void validate() const;
};

enum class SensorRule { singleton, fixed_plus_uniform };

/// m sensors per step: the first at the step start, the rest uniform on (0, h).
struct SensorSpec {
  Eigen::Index m = 1;
  SensorRule rule = SensorRule::singleton;

  void validate() const;
};

enum class SamplingProcedure { state_input, network };

std::string_view to_string(SensorRule r);
std::string_view to_string(SamplingProcedure p);
SensorRule sensor_rule_from_string(std::string_view name);
SamplingProcedure sampling_procedure_from_string(std::string_view name);

struct LabelConfig {
  int substeps = 16;
  /// Damping fidelity of the approximate model behind residual labels.
  double approx_beta = 0.5;
};

State sample_state(const SamplingRanges& ranges, Rng& rng);
/// Independent uniform draws for the state and the interface input.
std::pair<State, InterfaceInput> sample_state_input(const SamplingRanges& ranges, Rng& rng);
/// Uniform state; the input solves the network equations for that state.
std::pair<State, InterfaceInput> sample_state_solve_network(const SamplingRanges& ranges,
                                                            const GeneratorParams& gp,
                                                            const GridParams& grid, Rng& rng);

/// Coupling that replays a sensor window (frozen input for a single sensor).
Coupling sensor_coupling(const SensorWindow& sensors);

/// Target over one step of length h from x. The true model uses `gp` as given; residual labels
/// subtract the same integration of `gp` with beta = cfg.approx_beta.
State make_label(const State& x, const SensorWindow& sensors, double h, OutputMode mode,
                 const GeneratorParams& gp, const LabelConfig& cfg = {});

/// Samples with labels in `target` mode: converted through the state where possible, otherwise
/// recomputed from the true model.
std::vector<DatasetSample> relabel(std::span<const DatasetSample> samples, OutputMode from,
                                   OutputMode target, const GeneratorParams& gp,
                                   const LabelConfig& cfg = {});

/// One step of the approximate (beta-scaled) model with a frozen input.
State approximate_step(const State& x, const InterfaceInput& y, double h,
                       const GeneratorParams& gp, const LabelConfig& cfg = {});

/// i.i.d. samples; sample k draws from its own substream of `seed` in the order
/// x, h, sensor offsets, sensor values.
std::vector<DatasetSample> build_training_set(Eigen::Index n_samples, SamplingProcedure procedure,
                                              OutputMode mode, const SensorSpec& sensors,
                                              const SamplingRanges& ranges,
                                              const GeneratorParams& gp, const GridParams& grid,
                                              std::uint64_t seed, const LabelConfig& cfg = {});

enum class SuiteKind { gamma_perturbed, fault };

std::string_view to_string(SuiteKind k);
SuiteKind suite_kind_from_string(std::string_view name);

struct TestSuiteConfig {
  Interval gamma{0.2, 1.5};
  double fault_time = 1.0;
  Interval fault_duration{0.05, 1.0};
  /// External reactance multiplier while the fault is active.
  double fault_xep_scale = 5.0;
  int substeps = 8;
};

struct TestCase {
  State x0 = State::Zero();
  /// Speed scaling of the start state; 1 for fault cases.
  double gamma = 1.0;
  std::vector<FaultEvent> faults;
  Trajectory truth;
};

/// gamma_perturbed: x0 = (delta*, gamma omega*, E'd*, E'q*); fault: x0 = x* with one fault.
std::vector<TestCase> build_test_suite(SuiteKind kind, Eigen::Index n_traj,
                                       const TimePartition& partition, const GeneratorParams& gp,
                                       const GridParams& grid, const State& x_star,
                                       std::uint64_t seed, const TestSuiteConfig& cfg = {});

/// Fault schedule for one fault case drawn from `rng`.
FaultEvent sample_fault(const GridParams& grid, const TestSuiteConfig& cfg, Rng& rng);

}  // namespace gridop
