#pragma once

#include "gridop/data_generation.hpp"
#include "gridop/deeponet.hpp"
#include "gridop/evaluation.hpp"
#include "gridop/fnn.hpp"
#include "gridop/training.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace gridop {

inline constexpr int kFormatVersion = 1;

/// Self-describing model files (JSON). Doubles are written in shortest round-trip form, so
/// save followed by load reproduces every parameter bit for bit.
void save_model(const DeepONetModel& model, const std::filesystem::path& path);
DeepONetModel load_model(const std::filesystem::path& path);
std::string model_to_string(const DeepONetModel& model);
DeepONetModel model_from_string(const std::string& text);

void save_fnn(const FnnModel& model, const std::filesystem::path& path);
FnnModel load_fnn(const std::filesystem::path& path);

struct DatasetHeader {
  SamplingProcedure procedure = SamplingProcedure::state_input;
  OutputMode mode = OutputMode::incremental;
  SensorSpec sensors;
  SamplingRanges ranges;
  std::uint64_t seed = 0;
  Eigen::Index count = 0;
};

/// JSON-lines: a header record followed by one record per sample.
void write_dataset(const std::filesystem::path& path, const DatasetHeader& header,
                   std::span<const DatasetSample> samples);
std::vector<DatasetSample> read_dataset(const std::filesystem::path& path,
                                        DatasetHeader* header = nullptr);

/// JSON-lines, one record per time point: {traj, provenance, t, state, input}.
void write_trajectories(const std::filesystem::path& path, std::span<const Trajectory> trajectories);
std::vector<Trajectory> read_trajectories(const std::filesystem::path& path);
/// Columns t, delta, omega, e_d_prime, e_q_prime, i_d, i_q.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& trajectory);

/// Test-case metadata (start state, gamma, fault schedule) next to the truth trajectories.
void write_test_cases(const std::filesystem::path& path, SuiteKind kind,
                      std::span<const TestCase> cases);
/// Rebuilds test cases from the metadata file and the matching truth trajectories.
std::vector<TestCase> read_test_cases(const std::filesystem::path& path,
                                      std::vector<Trajectory> truth, SuiteKind* kind = nullptr);

/// Rows mean and std; columns delta, omega, e_d_prime, e_q_prime, i_d, i_q (percent).
void write_error_table_csv(const std::filesystem::path& path, const ErrorTable& table);
void write_error_table_json(const std::filesystem::path& path, const ErrorTable& table);
ErrorTable read_error_table_json(const std::filesystem::path& path);

/// Columns epoch, train_loss, validation_loss, learning_rate.
void write_loss_history(const std::filesystem::path& path, const TrainingReport& report);

void write_bound_report(const std::filesystem::path& path, const BoundReport& report);

/// Full-precision text for a double (shortest round-trip form).
std::string format_double(double v);

}  // namespace gridop
