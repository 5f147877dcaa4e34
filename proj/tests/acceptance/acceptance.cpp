// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.

#include "gridop/data_generation.hpp"
#include "gridop/evaluation.hpp"
#include "gridop/experiment.hpp"
#include "gridop/io.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

using namespace gridop;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 1;
constexpr Eigen::Index kTestTrajectories = 100;
constexpr int kEpochs = 2000;
constexpr Eigen::Index kTrain = 2000;
/// Per-point budget of the dataset-size sweep (criterion 6).
constexpr int kSweepEpochs = 500;
const std::vector<std::uint64_t> kSeeds{1, 2, 3};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::string states_line(const ErrorTable& t) {
  std::string s;
  for (Eigen::Index q = 0; q < 4; ++q)
    s += (q ? " " : "") + std::string(quantity_name(q)) + "=" + fmt("%.3f", t.mean[static_cast<std::size_t>(q)]);
  return s;
}

void log(const std::string& msg) { std::cerr << "  " << msg << std::endl; }

/// Artifacts shared between criteria, built on first use.
class Context {
public:
  const ExperimentSetup& setup() const { return setup_; }

  const std::vector<TestCase>& suite(SuiteKind kind) {
    auto& slot = kind == SuiteKind::fault ? fault_ : gamma_;
    if (!slot) {
      log("simulating " + std::to_string(kTestTrajectories) + " " + std::string(to_string(kind)) + " trajectories");
      slot = build_test_suite(kind, kTestTrajectories, TimePartition::uniform(10.0, 0.05), setup_.gp,
                              setup_.grid, setup_.x_star, SeedPolicy{kSeed}.suite(kind), setup_.suite);
    }
    return *slot;
  }

  const SupervisedRun& model(OutputMode mode) {
    auto& slot = mode == OutputMode::residual ? residual_ : incremental_;
    if (!slot) {
      const auto t0 = std::chrono::steady_clock::now();
      slot = run_supervised(setup_, kTrain, SamplingProcedure::state_input, mode, kSeed, kEpochs);
      log("trained " + std::string(to_string(mode)) + " model in " + fmt("%.0f s", seconds_since(t0)) +
          ", best validation loss " + fmt("%.3e", slot->report.best_validation_loss));
    }
    return *slot;
  }

  const ErrorTable& incremental_gamma_errors() {
    if (!inc_gamma_) inc_gamma_ = evaluate(model(OutputMode::incremental).model, suite(SuiteKind::gamma_perturbed), setup_);
    return *inc_gamma_;
  }

  static double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

private:
  ExperimentSetup setup_ = make_setup(GeneratorParams{}, GridParams{}, 0.9, 1.0);
  std::optional<std::vector<TestCase>> gamma_, fault_;
  std::optional<SupervisedRun> incremental_, residual_;
  std::optional<ErrorTable> inc_gamma_;
};

std::vector<Eigen::Index> all_columns(Eigen::Index n) {
  std::vector<Eigen::Index> c(static_cast<std::size_t>(n));
  std::iota(c.begin(), c.end(), Eigen::Index{0});
  return c;
}

// 1. Physics oracles.
Outcome physics(Context& ctx) {
  const auto& s = ctx.setup();
  const Trajectory eq = simulate_truth(s.x_star, TimePartition::uniform(10.0, 0.05), s.gp, s.grid);
  const double drift = (eq.states.colwise() - s.x_star).cwiseAbs().maxCoeff();

  double residual = 0.0;
  for (SuiteKind kind : {SuiteKind::gamma_perturbed, SuiteKind::fault}) {
    for (const auto& c : ctx.suite(kind)) {
      const Trajectory& t = c.truth;
      for (Eigen::Index n = 0; n < t.size(); ++n) {
        const GridParams& g = grid_at(t.partition.t(n), s.grid, c.faults);
        residual = std::max(residual, network_residual(t.states.col(n), t.inputs.col(n), s.gp, g).cwiseAbs().maxCoeff());
      }
    }
  }

  State x0 = s.x_star;
  x0[kDelta] += 0.3;
  x0[kOmega] *= 1.05;
  auto err = [&](int steps) {
    const Coupling c = ResolveNetwork{s.grid};
    return (integrate(x0, 1.0, steps, s.gp, c) - integrate(x0, 1.0, steps * 64, s.gp, c)).norm();
  };
  const double order = std::log2(err(20) / err(40));

  const bool pass = drift <= 1e-8 && residual <= 1e-10 && order >= 3.8 && order <= 4.2;
  return {pass, "equilibrium drift " + fmt("%.1e", drift) + ", network residual " + fmt("%.1e", residual) +
                    ", RK4 order " + fmt("%.3f", order)};
}

template <typename M>
double gradient_error(M& model, const TrainingData& data, Rng& rng) {
  const auto cols = all_columns(data.size());
  model.fit_normalization(data, cols);
  const TrainingData norm = model.normalize(data);
  Eigen::VectorXd grad(model.parameters().size());
  model.loss_and_gradient(norm, cols, grad);
  std::uniform_int_distribution<Eigen::Index> pick(0, model.parameters().size() - 1);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Eigen::Index i = pick(rng);
    const double saved = model.parameters()[i];
    model.parameters()[i] = saved + 1e-5;
    const double up = model.loss(norm, cols);
    model.parameters()[i] = saved - 1e-5;
    const double down = model.loss(norm, cols);
    model.parameters()[i] = saved;
    const double fd = (up - down) / 2e-5;
    worst = std::max(worst, std::abs(grad[i] - fd) / (std::abs(grad[i]) + 1e-8));
  }
  return worst;
}

// 2. Gradient correctness on five random models.
Outcome gradients(Context& ctx) {
  const auto& s = ctx.setup();
  Rng rng(mix_seed(kSeed ^ 0x6dULL));
  double worst = 0.0;
  int models = 0;
  const std::pair<Architecture, Eigen::Index> shapes[] = {{Architecture::modified_fc, 1},
                                                          {Architecture::modified_fc, 2},
                                                          {Architecture::plain, 1},
                                                          {Architecture::plain, 2}};
  for (const auto& [arch, m] : shapes) {
    DeepONetConfig cfg;
    cfg.branch_hidden = {16, 16};
    cfg.trunk_hidden = {16, 16};
    cfg.q = 4;
    cfg.architecture = arch;
    cfg.activation = Activation::tanh;
    cfg.sensors = m;
    DeepONetModel model = DeepONetModel::create(cfg, rng());
    const SensorSpec spec{m, m == 1 ? SensorRule::singleton : SensorRule::fixed_plus_uniform};
    const auto data = make_training_data(
        build_training_set(32, SamplingProcedure::state_input, OutputMode::incremental, spec, s.ranges, s.gp, s.grid, rng()),
        OutputMode::incremental, OutputMode::incremental);
    worst = std::max(worst, gradient_error(model, data, rng));
    ++models;
  }
  FnnModel fnn = FnnModel::create({16, 16}, Activation::tanh, 0.01, rng());
  const auto data = make_training_data(
      build_training_set(32, SamplingProcedure::state_input, OutputMode::full, SensorSpec{}, s.ranges, s.gp, s.grid, rng()),
      OutputMode::full, OutputMode::full);
  worst = std::max(worst, gradient_error(fnn, data, rng));
  ++models;
  return {worst <= 1e-4, std::to_string(models) + " models x 100 parameters, max relative error " + fmt("%.2e", worst)};
}

// 3. Oracle equivalences.
Outcome oracles(Context& ctx) {
  const auto& s = ctx.setup();
  Rng rng(mix_seed(kSeed ^ 0x0cULL));

  DeepONetConfig cfg;
  cfg.branch_hidden = {20, 20};
  cfg.trunk_hidden = {20, 20};
  cfg.q = 5;
  const DeepONetModel model = DeepONetModel::create(cfg, rng());
  const Eigen::MatrixXd b = Eigen::MatrixXd::Random(branch_feature_dim(1), 64);
  const Eigen::RowVectorXd t = Eigen::RowVectorXd::Random(64);
  const Eigen::MatrixXd beta = model.branch_coefficients(b);
  const Eigen::MatrixXd phi = model.trunk_basis(t);
  const Eigen::MatrixXd out = model.forward_normalized(b, t);
  double readout = 0.0;
  for (Eigen::Index c = 0; c < out.cols(); ++c)
    for (Eigen::Index i = 0; i < kStateDim; ++i) {
      double sum = 0.0;
      for (Eigen::Index j = 0; j < cfg.q; ++j) sum += beta(i * cfg.q + j, c) * phi(i * cfg.q + j, c);
      readout = std::max(readout, std::abs(out(i, c) - sum));
    }

  double inc = 0.0, res = 0.0, degen = 0.0;
  for (int k = 0; k < 200; ++k) {
    const auto [x, y] = sample_state_input(s.ranges, rng);
    const double h = uniform(rng, s.ranges.h_min, s.ranges.h_max);
    const SensorWindow w = SensorWindow::frozen(y);
    const State full = make_label(x, w, h, OutputMode::full, s.gp, s.label);
    inc = std::max(inc, (full - (make_label(x, w, h, OutputMode::incremental, s.gp, s.label) + x)).cwiseAbs().maxCoeff());
    res = std::max(res, (full - (approximate_step(x, y, h, s.gp, s.label) +
                                 make_label(x, w, h, OutputMode::residual, s.gp, s.label))).cwiseAbs().maxCoeff());
    SensorWindow two;
    two.values.resize(2, 2);
    two.values.col(0) = y;
    two.values.col(1) = y;
    two.offsets = Eigen::Vector2d(0.0, uniform(rng, 0.0, h));
    if (two.offsets[1] == 0.0) two.offsets[1] = h;
    degen = std::max(degen, (make_label(x, two, h, OutputMode::incremental, s.gp, s.label) -
                             make_label(x, w, h, OutputMode::incremental, s.gp, s.label)).cwiseAbs().maxCoeff());
  }

  const BoundInputs bi{1.0, 1.05, 1e-3, 0.01, 0.05, 100};
  const double r = std::exp(0.05), E = 0.05 * 0.01 * r;
  double loop = 0.0;
  for (int k = 0; k < 100; ++k) loop += std::pow(r, k) * E + std::pow(1.05, k) * 1e-3;
  const double bound = std::abs(cumulative_bound(bi) - loop) / loop;

  const double worst = std::max({readout, inc, res, degen, bound});
  return {worst <= 1e-12, "readout " + fmt("%.1e", readout) + ", full=inc+x " + fmt("%.1e", inc) +
                              ", full=approx+res " + fmt("%.1e", res) + ", sensor degeneracy " + fmt("%.1e", degen) +
                              ", bound vs loop (relative) " + fmt("%.1e", bound)};
}

// 4. Data-driven and residual accuracy on the gamma-perturbed suite.
Outcome experiment1(Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& suite = ctx.suite(SuiteKind::gamma_perturbed);
  const ErrorTable& inc = ctx.incremental_gamma_errors();
  Eigen::Index diverged = 0;
  const ErrorTable res = evaluate(ctx.model(OutputMode::residual).model, suite, ctx.setup(), &diverged);
  bool pass = true;
  for (std::size_t q = 0; q < 4; ++q) pass = pass && inc.mean[q] <= 5.0 && res.mean[q] <= 1.5;
  return {pass, "data-driven [" + states_line(inc) + "] residual [" + states_line(res) + "] (%), " +
                    fmt("%.0f s", Context::seconds_since(t0))};
}

// 5. FNN baseline separation.
Outcome baseline(Context& ctx) {
  const auto& s = ctx.setup();
  const auto& suite = ctx.suite(SuiteKind::gamma_perturbed);
  const FnnRun fnn = run_fnn(s, kTrain, kSeed, kEpochs);
  const SuiteRollout r = rollout_suite(fnn.model, suite, s.gp, s.grid, s.rollout);
  const ErrorTable t = error_table(r.predictions, truths(suite));
  const double deep = ctx.incremental_gamma_errors().mean[kDelta];
  const double ratio = t.mean[kDelta] / deep;
  return {ratio >= 3.0, "FNN delta " + fmt("%.3f", t.mean[kDelta]) + "% vs DeepONet " + fmt("%.3f", deep) +
                            "% (ratio " + fmt("%.1f", ratio) + ", " + std::to_string(r.diverged.size()) + " FNN rollouts diverged)"};
}

// 6. Dataset-size trend and sampling-procedure comparability.
Outcome experiment2(Context& ctx) {
  const auto& s = ctx.setup();
  const auto& suite = ctx.suite(SuiteKind::gamma_perturbed);
  double small = 0.0, large = 0.0, state_input = 0.0, network = 0.0;
  for (std::uint64_t seed : kSeeds) {
    auto delta = [&](Eigen::Index n, SamplingProcedure p) {
      const SupervisedRun run = run_supervised(s, n, p, OutputMode::incremental, seed, kSweepEpochs);
      const double e = evaluate(run.model, suite, s).mean[kDelta];
      log("seed " + std::to_string(seed) + " n=" + std::to_string(n) + " " + std::string(to_string(p)) + ": delta " + fmt("%.3f%%", e));
      return e;
    };
    small += delta(100, SamplingProcedure::state_input);
    large += delta(4000, SamplingProcedure::state_input);
    state_input += delta(kTrain, SamplingProcedure::state_input);
    network += delta(kTrain, SamplingProcedure::network);
  }
  const double n = static_cast<double>(kSeeds.size());
  small /= n, large /= n, state_input /= n, network /= n;
  const double ratio = std::max(network / state_input, state_input / network);
  return {large < small && ratio <= 3.0,
          "mean delta over " + std::to_string(kSeeds.size()) + " seeds (" + std::to_string(kSweepEpochs) +
              " epochs): N=100 " + fmt("%.3f", small) + "%, N=4000 " + fmt("%.3f", large) + "%; state-input " +
              fmt("%.3f", state_input) + "% vs network " + fmt("%.3f", network) + "% (ratio " + fmt("%.2f", ratio) + ")"};
}

// 7. DAgger on the fault suite.
Outcome experiment3(Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& s = ctx.setup();
  const auto& suite = ctx.suite(SuiteKind::fault);
  std::array<double, 4> first{}, last{};
  for (std::uint64_t seed : kSeeds) {
    ErrorTable e1, e5;
    run_dagger_pipeline(s, 100, OutputMode::residual, seed, [&](const DaggerIteration& it) {
      if (it.iteration != 1 && it.iteration != s.dagger.n_iter) return;
      const ErrorTable t = evaluate(it.model, suite, s);
      (it.iteration == 1 ? e1 : e5) = t;
      log("seed " + std::to_string(seed) + " iteration " + std::to_string(it.iteration) + " (" +
          std::to_string(it.aggregate_size) + " samples): " + states_line(t));
    });
    for (std::size_t q = 0; q < 4; ++q) {
      first[q] += e1.mean[q] / static_cast<double>(kSeeds.size());
      last[q] += e5.mean[q] / static_cast<double>(kSeeds.size());
    }
  }
  bool pass = true;
  std::string a, b;
  for (std::size_t q = 0; q < 4; ++q) {
    pass = pass && last[q] <= 0.5 && last[q] <= first[q];
    a += (q ? " " : "") + std::string(quantity_name(static_cast<Eigen::Index>(q))) + "=" + fmt("%.4f", last[q]);
    b += (q ? " " : "") + std::string(quantity_name(static_cast<Eigen::Index>(q))) + "=" + fmt("%.4f", first[q]);
  }
  return {pass, "mean over " + std::to_string(kSeeds.size()) + " seeds after 5 iterations [" + a + "] vs 1 iteration [" + b +
                    "] (%), " + fmt("%.0f s", Context::seconds_since(t0))};
}

// 8. Cumulative error bound on trained residual rollouts.
Outcome error_bound(Context& ctx) {
  const auto& s = ctx.setup();
  BoundConfig cfg;
  cfg.suite = s.suite;
  cfg.label = s.label;
  cfg.rollout = s.rollout;
  const BoundReport r = verify_bound(ctx.model(OutputMode::residual).model, s.gp, s.grid, s.x_star,
                                     TimePartition::uniform(10.0, 0.05), s.ranges, mix_seed(kSeed ^ 0xb0a9dULL), cfg);
  std::string violations;
  double max_err = 0.0;
  for (std::size_t k = 0; k < r.rollouts.size(); ++k) {
    max_err = std::max(max_err, r.rollouts[k].error.maxCoeff());
    if (!r.rollouts[k].satisfied())
      violations += " #" + std::to_string(k) + "@step" + std::to_string(r.rollouts[k].first_violation);
  }
  const auto& c = r.constants;
  return {r.satisfied_count() >= 18,
          std::to_string(r.satisfied_count()) + "/" + std::to_string(r.rollouts.size()) + " rollouts within the bound; L " +
              fmt("%.3g", c.lipschitz) + ", L_Phi " + fmt("%.4g", c.flow_lipschitz) + ", eps " + fmt("%.3g", c.eps) +
              ", kappa " + fmt("%.3g", c.kappa) + ", max error " + fmt("%.3g", max_err) + ", bound(1) " +
              fmt("%.3g", r.bound.size() > 1 ? r.bound[1] : 0.0) + (violations.empty() ? "" : "; violations:" + violations)};
}

// 9. Determinism of datasets, loss histories and trajectories.
Outcome determinism(Context& ctx) {
  const auto& s = ctx.setup();
  const fs::path dir = fs::temp_directory_path() / "gridop_acceptance_determinism";
  fs::remove_all(dir);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  auto run_once = [&](const std::string& tag) {
    const fs::path d = dir / tag;
    fs::create_directories(d);
    const SeedPolicy seeds{kSeed};
    const auto data = build_training_set(300, SamplingProcedure::state_input, OutputMode::residual, SensorSpec{},
                                         s.ranges, s.gp, s.grid, seeds.data(), s.label);
    write_dataset(d / "train.jsonl", DatasetHeader{SamplingProcedure::state_input, OutputMode::residual, SensorSpec{},
                                                   s.ranges, seeds.data(), 0},
                  data);
    DeepONetConfig net = s.net;
    net.mode = OutputMode::residual;
    DeepONetModel model = DeepONetModel::create(net, seeds.init());
    TrainingConfig tc = s.training;
    tc.epochs = 30;
    tc.seed = seeds.training();
    write_loss_history(d / "loss.csv", train(model, make_training_data(data, OutputMode::residual, OutputMode::residual), tc));
    save_model(model, d / "model.json");
    const auto suite = build_test_suite(SuiteKind::fault, 5, TimePartition::uniform(10.0, 0.05), s.gp, s.grid,
                                        s.x_star, seeds.suite(SuiteKind::fault), s.suite);
    write_trajectories(d / "truth.jsonl", truths(suite));
    write_trajectories(d / "rollout.jsonl", rollout_suite(model, suite, s.gp, s.grid, s.rollout).predictions);
  };
  run_once("a");
  run_once("b");
  std::vector<std::string> differ;
  for (const char* f : {"train.jsonl", "loss.csv", "model.json", "truth.jsonl", "rollout.jsonl"})
    if (slurp(dir / "a" / f) != slurp(dir / "b" / f) || slurp(dir / "a" / f).empty()) differ.emplace_back(f);
  fs::remove_all(dir);
  std::string detail = differ.empty() ? "dataset, loss history, model, truth and rollout files identical" : "differing:";
  for (const auto& f : differ) detail += " " + f;
  return {differ.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "Run only these criteria (1-9)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Outcome(Context&)>>> criteria{
      {"physics oracles", physics},          {"gradient correctness", gradients},
      {"oracle equivalences", oracles},      {"experiment 1 accuracy", experiment1},
      {"baseline separation", baseline},     {"experiment 2 trend", experiment2},
      {"experiment 3 DAgger", experiment3},  {"error bound", error_bound},
      {"determinism", determinism}};
  const std::set<int> selected(only.begin(), only.end());

  Context ctx;
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << "criterion " << id << " (" << criteria[k].first << "): " << (o.pass ? "PASS" : "FAIL") << " - "
              << o.detail << " [" << fmt("%.1f s", Context::seconds_since(t0)) << "]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
