#pragma once

#include "gridop/experiment.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace gridop {

/// Raised for malformed configs; the message starts with "file:line:".
class ConfigError : public Error {
public:
  using Error::Error;
};

struct TestConfig {
  Eigen::Index n_traj = 500;
  double t_end = 10.0;
  double h = 0.05;
  bool irregular = false;
  Eigen::Index irregular_points = 200;
  TestSuiteConfig suite;
};

struct SweepConfig {
  SweepAxis axis = SweepAxis::n_train;
  std::vector<int> values;
  std::vector<std::uint64_t> seeds;
  int epochs = 2000;
  Eigen::Index n_traj = 100;
};

struct ExperimentConfig {
  std::string source_text;
  std::string source_name;

  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  GeneratorParams generator;
  double delta_star = 0.9;
  double e_q_star = 1.0;
  GridParams grid;
  SamplingProcedure procedure = SamplingProcedure::state_input;
  Eigen::Index n_train = 2000;
  SamplingRanges ranges;
  SensorSpec sensors;
  LabelConfig label;
  DeepONetConfig model;
  std::vector<Eigen::Index> fnn_hidden;
  TrainingConfig training;
  TestConfig test;
  RolloutOptions rollout;
  Eigen::Index dagger_initial = 100;
  DaggerConfig dagger;
  BoundConfig bound;
  SweepConfig sweep;

  /// Back-solves the operating point and bundles the pipeline settings.
  [[nodiscard]] ExperimentSetup setup() const;
  /// Uniform or irregular test partition (the irregular one is drawn from the seed).
  [[nodiscard]] TimePartition test_partition() const;
};

ExperimentConfig parse_config(const std::string& text, const std::string& source_name);
ExperimentConfig load_config(const std::filesystem::path& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);
std::string file_checksum(const std::filesystem::path& path);

/// Entry point of the gridop tool; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace gridop
