#include "gridop/experiment.hpp"

#include "gridop/io.hpp"

#include <algorithm>
#include <fstream>

namespace gridop {

ExperimentSetup make_setup(const GeneratorParams& base, const GridParams& grid, double delta_star,
                           double e_q_star) {
  base.validate();
  grid.validate();
  const OperatingPoint op = back_solve_operating_point(base, grid, delta_star, e_q_star);
  ExperimentSetup s;
  s.gp = op.params;
  s.grid = grid;
  s.x_star = find_equilibrium(op.params, grid, op.equilibrium);
  return s;
}

SupervisedRun run_supervised(const ExperimentSetup& setup, Eigen::Index n_train,
                             SamplingProcedure procedure, OutputMode mode, std::uint64_t seed,
                             int epochs) {
  const SeedPolicy seeds{seed};
  const auto samples = build_training_set(n_train, procedure, mode, SensorSpec{}, setup.ranges,
                                          setup.gp, setup.grid, seeds.data(), setup.label);
  DeepONetConfig net = setup.net;
  net.mode = mode;
  net.sensors = 1;
  SupervisedRun run{DeepONetModel::create(net, seeds.init()), {}};
  TrainingConfig tc = setup.training;
  tc.epochs = epochs;
  tc.seed = seeds.training();
  run.report = train(run.model, make_training_data(samples, mode, mode), tc);
  return run;
}

FnnRun run_fnn(const ExperimentSetup& setup, Eigen::Index n_train, std::uint64_t seed, int epochs) {
  const SeedPolicy seeds{seed};
  const auto samples = build_training_set(n_train, SamplingProcedure::state_input, OutputMode::full,
                                          SensorSpec{}, setup.ranges, setup.gp, setup.grid,
                                          seeds.data(), setup.label);
  FnnRun run{FnnModel::create(setup.fnn_hidden, setup.net.activation, setup.net.leaky_slope,
                              seeds.init()),
             {}};
  TrainingConfig tc = setup.training;
  tc.epochs = epochs;
  tc.seed = seeds.training();
  run.report = train(run.model, make_training_data(samples, OutputMode::full, OutputMode::full), tc);
  return run;
}

DaggerResult run_dagger_pipeline(const ExperimentSetup& setup, Eigen::Index n_initial,
                                 OutputMode mode, std::uint64_t seed,
                                 const std::function<void(const DaggerIteration&)>& on_iteration) {
  const SeedPolicy seeds{seed};
  auto initial = build_training_set(n_initial, SamplingProcedure::state_input, mode, SensorSpec{},
                                    setup.ranges, setup.gp, setup.grid, seeds.data(), setup.label);
  DeepONetConfig net = setup.net;
  net.mode = mode;
  net.sensors = 1;
  DaggerConfig cfg = setup.dagger;
  cfg.training.seed = seeds.training();
  cfg.seed = seeds.dagger();
  cfg.label = setup.label;
  cfg.rollout = setup.rollout;
  return run_dagger(std::move(initial), DeepONetModel::create(net, seeds.init()), cfg, setup.gp,
                    setup.grid, setup.x_star, on_iteration);
}

ErrorTable evaluate(const DeepONetModel& model, std::span<const TestCase> suite,
                    const ExperimentSetup& setup, Eigen::Index* diverged) {
  const SuiteRollout r = rollout_suite(model, suite, setup.gp, setup.grid, setup.rollout);
  if (diverged) *diverged = static_cast<Eigen::Index>(r.diverged.size());
  return error_table(r.predictions, truths(suite));
}

std::string_view to_string(SweepAxis a) { return a == SweepAxis::n_train ? "n_train" : "dagger_iters"; }

SweepAxis sweep_axis_from_string(std::string_view name) {
  if (name == "n_train") return SweepAxis::n_train;
  if (name == "dagger_iters") return SweepAxis::dagger_iters;
  throw Error("unknown sweep axis '" + std::string(name) + "'");
}

std::vector<SweepPoint> sensitivity_sweep(SweepAxis axis, std::span<const int> values,
                                          std::span<const std::uint64_t> seeds,
                                          const ExperimentSetup& setup, OutputMode mode,
                                          SamplingProcedure procedure,
                                          std::span<const TestCase> suite, int epochs,
                                          Eigen::Index dagger_initial,
                                          const std::function<void(const SweepPoint&)>& on_point) {
  if (values.empty() || seeds.empty()) throw Error("sweep: need at least one value and one seed");
  std::vector<SweepPoint> out;
  auto emit = [&](SweepPoint p) {
    if (on_point) on_point(p);
    out.push_back(std::move(p));
  };
  if (axis == SweepAxis::n_train) {
    for (int v : values) {
      if (v < static_cast<int>(kMinTrainingSamples)) throw Error("sweep: n_train too small");
      for (std::uint64_t s : seeds) {
        const SupervisedRun run = run_supervised(setup, v, procedure, mode, s, epochs);
        emit({axis, v, s, evaluate(run.model, suite, setup)});
      }
    }
    return out;
  }
  const int max_iter = *std::max_element(values.begin(), values.end());
  if (*std::min_element(values.begin(), values.end()) < 1) throw Error("sweep: iterations must be >= 1");
  ExperimentSetup s2 = setup;
  s2.dagger.n_iter = max_iter;
  s2.dagger.training.epochs = epochs;
  for (std::uint64_t s : seeds) {
    const DaggerResult r = run_dagger_pipeline(s2, dagger_initial, mode, s);
    for (int v : values)
      emit({axis, v, s, evaluate(r.iterations[static_cast<std::size_t>(v - 1)].model, suite, setup)});
  }
  return out;
}

void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepPoint> points) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "axis,value,seed";
  for (const char* stat : {"mean", "std"})
    for (Eigen::Index q = 0; q < kQuantityCount; ++q) out << ',' << stat << '_' << quantity_name(q);
  out << '\n';
  for (const auto& p : points) {
    out << to_string(p.axis) << ',' << p.value << ',' << p.seed;
    for (double v : p.table.mean) out << ',' << format_double(v);
    for (double v : p.table.std) out << ',' << format_double(v);
    out << '\n';
  }
}

}  // namespace gridop
