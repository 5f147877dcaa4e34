#pragma once

#include "gridop/dagger.hpp"
#include "gridop/data_generation.hpp"
#include "gridop/deeponet.hpp"
#include "gridop/evaluation.hpp"
#include "gridop/fnn.hpp"
#include "gridop/training.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace gridop {

/// Everything a pipeline run needs besides the seed.
struct ExperimentSetup {
  GeneratorParams gp;  // E_fld and T_M already back-solved
  GridParams grid;
  State x_star = State::Zero();
  SamplingRanges ranges;
  LabelConfig label;
  DeepONetConfig net;
  std::vector<Eigen::Index> fnn_hidden{60, 60, 60};
  TrainingConfig training;
  TestSuiteConfig suite;
  RolloutOptions rollout;
  DaggerConfig dagger;
};

/// Machine constants from `base` with E_fld, T_M chosen so that (delta, omega_s, E'd, E'q) is an
/// equilibrium for the given rotor angle and q-axis EMF; x* is refined by Newton.
ExperimentSetup make_setup(const GeneratorParams& base, const GridParams& grid, double delta_star,
                           double e_q_star);

/// Derived seeds so that data, initialization and training draws never share a stream.
struct SeedPolicy {
  std::uint64_t seed = 0;
  [[nodiscard]] std::uint64_t data() const { return mix_seed(seed ^ 0xda7a5eedULL); }
  [[nodiscard]] std::uint64_t init() const { return mix_seed(seed ^ 0x1417ULL); }
  [[nodiscard]] std::uint64_t training() const { return seed; }
  [[nodiscard]] std::uint64_t dagger() const { return mix_seed(seed ^ 0xda66e7ULL); }
  [[nodiscard]] std::uint64_t suite(SuiteKind kind) const {
    return mix_seed(seed ^ (kind == SuiteKind::fault ? 0xfa017ULL : 0x6a33aULL));
  }
};

struct SupervisedRun {
  DeepONetModel model;
  TrainingReport report;
};

/// Samples a training set and trains a fresh DeepONet on it.
SupervisedRun run_supervised(const ExperimentSetup& setup, Eigen::Index n_train,
                             SamplingProcedure procedure, OutputMode mode, std::uint64_t seed,
                             int epochs);

struct FnnRun {
  FnnModel model;
  TrainingReport report;
};

FnnRun run_fnn(const ExperimentSetup& setup, Eigen::Index n_train, std::uint64_t seed, int epochs);

/// DAgger from `n_initial` state-input samples.
DaggerResult run_dagger_pipeline(const ExperimentSetup& setup, Eigen::Index n_initial,
                                 OutputMode mode, std::uint64_t seed,
                                 const std::function<void(const DaggerIteration&)>& on_iteration = {});

ErrorTable evaluate(const DeepONetModel& model, std::span<const TestCase> suite,
                    const ExperimentSetup& setup, Eigen::Index* diverged = nullptr);

enum class SweepAxis { n_train, dagger_iters };
std::string_view to_string(SweepAxis a);
SweepAxis sweep_axis_from_string(std::string_view name);

struct SweepPoint {
  SweepAxis axis = SweepAxis::n_train;
  int value = 0;
  std::uint64_t seed = 0;
  ErrorTable table;
};

/// One ErrorTable per (value, seed). The DAgger axis runs max(values) iterations once per seed
/// and evaluates the snapshot after each requested iteration count.
std::vector<SweepPoint> sensitivity_sweep(SweepAxis axis, std::span<const int> values,
                                          std::span<const std::uint64_t> seeds,
                                          const ExperimentSetup& setup, OutputMode mode,
                                          SamplingProcedure procedure,
                                          std::span<const TestCase> suite, int epochs,
                                          Eigen::Index dagger_initial = 100,
                                          const std::function<void(const SweepPoint&)>& on_point = {});

void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepPoint> points);

}  // namespace gridop
