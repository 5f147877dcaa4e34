#include "gridop/data_generation.hpp"

#include <algorithm>
#include <string>

namespace gridop {

void SamplingRanges::validate() const {
  for (const auto& i : state)
    if (!(i.lo < i.hi)) throw Error("sampling ranges: empty state interval");
  for (const auto& i : input)
    if (!(i.lo < i.hi)) throw Error("sampling ranges: empty input interval");
  if (!(h_min > 0.0 && h_min < h_max)) throw Error("sampling ranges: need 0 < h_min < h_max");
}

void SensorSpec::validate() const {
  if (m < 1) throw Error("sensor spec: m must be >= 1");
  if ((m == 1) != (rule == SensorRule::singleton))
    throw Error("sensor spec: the singleton rule goes with exactly one sensor");
}

std::string_view to_string(SensorRule r) {
  return r == SensorRule::singleton ? "singleton" : "fixed_plus_uniform";
}

std::string_view to_string(SamplingProcedure p) {
  return p == SamplingProcedure::state_input ? "state_input" : "network";
}

SensorRule sensor_rule_from_string(std::string_view name) {
  if (name == "singleton") return SensorRule::singleton;
  if (name == "fixed_plus_uniform") return SensorRule::fixed_plus_uniform;
  throw Error("unknown sensor rule '" + std::string(name) + "'");
}

SamplingProcedure sampling_procedure_from_string(std::string_view name) {
  if (name == "state_input") return SamplingProcedure::state_input;
  if (name == "network") return SamplingProcedure::network;
  throw Error("unknown sampling procedure '" + std::string(name) + "'");
}

std::string_view to_string(SuiteKind k) {
  return k == SuiteKind::gamma_perturbed ? "gamma_perturbed" : "fault";
}

SuiteKind suite_kind_from_string(std::string_view name) {
  if (name == "gamma_perturbed" || name == "gamma") return SuiteKind::gamma_perturbed;
  if (name == "fault") return SuiteKind::fault;
  throw Error("unknown test suite '" + std::string(name) + "'");
}

State sample_state(const SamplingRanges& ranges, Rng& rng) {
  State x;
  for (Eigen::Index i = 0; i < kStateDim; ++i)
    x[i] = uniform(rng, ranges.state[static_cast<std::size_t>(i)].lo,
                   ranges.state[static_cast<std::size_t>(i)].hi);
  return x;
}

namespace {

InterfaceInput sample_input(const SamplingRanges& ranges, Rng& rng) {
  InterfaceInput y;
  for (Eigen::Index i = 0; i < kInputDim; ++i)
    y[i] = uniform(rng, ranges.input[static_cast<std::size_t>(i)].lo,
                   ranges.input[static_cast<std::size_t>(i)].hi);
  return y;
}

/// Uniform on (lo, hi]: flips the half-open interval of the standard distribution.
double uniform_left_open(Rng& rng, double lo, double hi) { return hi - uniform(rng, 0.0, hi - lo); }

}  // namespace

std::pair<State, InterfaceInput> sample_state_input(const SamplingRanges& ranges, Rng& rng) {
  State x = sample_state(ranges, rng);
  return {x, sample_input(ranges, rng)};
}

std::pair<State, InterfaceInput> sample_state_solve_network(const SamplingRanges& ranges,
                                                            const GeneratorParams& gp,
                                                            const GridParams& grid, Rng& rng) {
  State x = sample_state(ranges, rng);
  return {x, solve_network(x, gp, grid)};
}

Coupling sensor_coupling(const SensorWindow& sensors) {
  if (sensors.size() == 1) return FrozenInput{sensors.values.col(0)};
  return sensors;
}

State make_label(const State& x, const SensorWindow& sensors, double h, OutputMode mode,
                 const GeneratorParams& gp, const LabelConfig& cfg) {
  const Coupling c = sensor_coupling(sensors);
  const State x_true = integrate(x, h, cfg.substeps, gp, c);
  switch (mode) {
    case OutputMode::full:
      return x_true;
    case OutputMode::incremental:
      return x_true - x;
    case OutputMode::residual:
      return x_true - integrate(x, h, cfg.substeps, gp.with_beta(cfg.approx_beta), c);
  }
  throw Error("make_label: unknown mode");
}

std::vector<DatasetSample> relabel(std::span<const DatasetSample> samples, OutputMode from,
                                   OutputMode target, const GeneratorParams& gp,
                                   const LabelConfig& cfg) {
  std::vector<DatasetSample> out(samples.begin(), samples.end());
  if (from == target) return out;
  const bool convertible = from != OutputMode::residual && target != OutputMode::residual;
  for (auto& d : out) {
    if (!convertible)
      d.label = make_label(d.x, d.sensors, d.h, target, gp, cfg);
    else if (target == OutputMode::full)
      d.label += d.x;
    else
      d.label -= d.x;
  }
  return out;
}

State approximate_step(const State& x, const InterfaceInput& y, double h,
                       const GeneratorParams& gp, const LabelConfig& cfg) {
  return integrate(x, h, cfg.substeps, gp.with_beta(cfg.approx_beta), FrozenInput{y});
}

std::vector<DatasetSample> build_training_set(Eigen::Index n_samples, SamplingProcedure procedure,
                                              OutputMode mode, const SensorSpec& sensors,
                                              const SamplingRanges& ranges,
                                              const GeneratorParams& gp, const GridParams& grid,
                                              std::uint64_t seed, const LabelConfig& cfg) {
  if (n_samples < 1) throw Error("training set: n_samples must be >= 1");
  ranges.validate();
  sensors.validate();
  if (procedure == SamplingProcedure::network && sensors.m != 1)
    throw Error("training set: the network procedure supports a single sensor only");
  std::vector<DatasetSample> out;
  out.reserve(static_cast<std::size_t>(n_samples));
  for (Eigen::Index k = 0; k < n_samples; ++k) {
    Rng rng = substream(seed, static_cast<std::uint64_t>(k));
    DatasetSample s;
    s.x = sample_state(ranges, rng);
    s.h = uniform_left_open(rng, ranges.h_min, ranges.h_max);
    Eigen::VectorXd d = Eigen::VectorXd::Zero(sensors.m);
    for (Eigen::Index j = 1; j < sensors.m; ++j) {
      do d[j] = uniform(rng, 0.0, s.h);
      while (d[j] <= 0.0);
    }
    std::sort(d.begin(), d.end());
    s.sensors.offsets = d;
    s.sensors.values.resize(2, sensors.m);
    if (procedure == SamplingProcedure::network)
      s.sensors.values.col(0) = solve_network(s.x, gp, grid);
    else
      for (Eigen::Index j = 0; j < sensors.m; ++j) s.sensors.values.col(j) = sample_input(ranges, rng);
    s.label = make_label(s.x, s.sensors, s.h, mode, gp, cfg);
    s.validate(ranges.h_max);
    out.push_back(std::move(s));
  }
  return out;
}

FaultEvent sample_fault(const GridParams& grid, const TestSuiteConfig& cfg, Rng& rng) {
  FaultEvent f;
  f.t_start = cfg.fault_time;
  f.duration = uniform(rng, cfg.fault_duration.lo, cfg.fault_duration.hi);
  f.faulted_grid = grid;
  f.faulted_grid.x_ep *= cfg.fault_xep_scale;
  f.validate();
  return f;
}

std::vector<TestCase> build_test_suite(SuiteKind kind, Eigen::Index n_traj,
                                       const TimePartition& partition, const GeneratorParams& gp,
                                       const GridParams& grid, const State& x_star,
                                       std::uint64_t seed, const TestSuiteConfig& cfg) {
  if (n_traj < 1) throw Error("test suite: n_traj must be >= 1");
  std::vector<TestCase> out;
  out.reserve(static_cast<std::size_t>(n_traj));
  for (Eigen::Index k = 0; k < n_traj; ++k) {
    Rng rng = substream(seed, static_cast<std::uint64_t>(k));
    TestCase c;
    c.x0 = x_star;
    if (kind == SuiteKind::gamma_perturbed) {
      c.gamma = uniform(rng, cfg.gamma.lo, cfg.gamma.hi);
      c.x0[kOmega] *= c.gamma;
    } else {
      c.faults.push_back(sample_fault(grid, cfg, rng));
    }
    c.truth = simulate_truth(c.x0, partition, gp, grid, c.faults, cfg.substeps);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace gridop
