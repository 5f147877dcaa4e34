#include "gridop/cli.hpp"

#include "gridop/io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>

namespace gridop {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void log(const std::string& msg) { std::cerr << "[gridop] " << msg << '\n'; }

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Records the config, seed and artifact checksums of one command run. Timestamps live only here.
void write_manifest(const fs::path& out, const std::string& command, const ExperimentConfig& cfg,
                    const std::vector<fs::path>& artifacts, json extra = json::object()) {
  json files = json::array();
  for (const auto& a : artifacts)
    files.push_back({{"path", fs::relative(a, out).generic_string()}, {"fnv1a", file_checksum(a)}});
  const json m = {{"command", command},
                  {"config_source", cfg.source_name},
                  {"config_fnv1a", hex(fnv1a(cfg.source_text))},
                  {"config", cfg.source_text},
                  {"seed", cfg.seed},
                  {"output_dir", cfg.output_dir.generic_string()},
                  {"artifacts", files},
                  {"details", std::move(extra)},
                  {"created_utc", utc_now()}};
  fs::create_directories(out);
  std::ofstream f(out / ("manifest_" + command + ".json"), std::ios::binary);
  if (!f) throw Error("cannot write manifest in " + out.string());
  f << m.dump(2) << '\n';
}

json table_json(const ErrorTable& t) {
  json j;
  for (Eigen::Index q = 0; q < kQuantityCount; ++q)
    j[std::string(quantity_name(q))] = {t.mean[static_cast<std::size_t>(q)], t.std[static_cast<std::size_t>(q)]};
  return j;
}

std::string table_line(const ErrorTable& t) {
  std::string s;
  char buf[64];
  for (Eigen::Index q = 0; q < kQuantityCount; ++q) {
    std::snprintf(buf, sizeof(buf), "%s%s %.4f%%", q ? ", " : "", std::string(quantity_name(q)).c_str(),
                  t.mean[static_cast<std::size_t>(q)]);
    s += buf;
  }
  return s;
}

fs::path suite_file(const fs::path& dir, SuiteKind kind) { return dir / (std::string(to_string(kind)) + ".jsonl"); }
fs::path cases_file(const fs::path& dir, SuiteKind kind) {
  return dir / (std::string(to_string(kind)) + ".cases.json");
}

std::vector<TestCase> load_suite(const fs::path& dir, SuiteKind kind) {
  return read_test_cases(cases_file(dir, kind), read_trajectories(suite_file(dir, kind)));
}

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

ExperimentConfig resolve(const Globals& g) {
  if (g.config_path.empty())
    throw ConfigError("no config given: pass --config PATH or set GRIDOP_CONFIG");
  ExperimentConfig c = load_config(g.config_path);
  if (g.seed) c.seed = *g.seed;
  if (!g.out.empty()) c.output_dir = g.out;
  return c;
}

void cmd_generate(const ExperimentConfig& cfg) {
  const fs::path out = cfg.output_dir;
  const ExperimentSetup setup = cfg.setup();
  const SeedPolicy seeds{cfg.seed};
  log("sampling " + std::to_string(cfg.n_train) + " training samples (" +
      std::string(to_string(cfg.procedure)) + ", " + std::string(to_string(cfg.model.mode)) + ")");
  const auto samples = build_training_set(cfg.n_train, cfg.procedure, cfg.model.mode, cfg.sensors,
                                          cfg.ranges, setup.gp, setup.grid, seeds.data(), cfg.label);
  DatasetHeader header{cfg.procedure, cfg.model.mode, cfg.sensors, cfg.ranges, seeds.data(), 0};
  std::vector<fs::path> artifacts{out / "train.jsonl"};
  write_dataset(artifacts.back(), header, samples);

  const TimePartition partition = cfg.test_partition();
  for (SuiteKind kind : {SuiteKind::gamma_perturbed, SuiteKind::fault}) {
    log("simulating " + std::to_string(cfg.test.n_traj) + " " + std::string(to_string(kind)) + " test trajectories");
    const auto suite = build_test_suite(kind, cfg.test.n_traj, partition, setup.gp, setup.grid,
                                        setup.x_star, seeds.suite(kind), cfg.test.suite);
    write_trajectories(suite_file(out, kind), truths(suite));
    write_test_cases(cases_file(out, kind), kind, suite);
    artifacts.push_back(suite_file(out, kind));
    artifacts.push_back(cases_file(out, kind));
  }
  write_manifest(out, "generate", cfg, artifacts,
                 {{"e_fld", setup.gp.e_fld}, {"t_m", setup.gp.t_m},
                  {"x_star", {setup.x_star[0], setup.x_star[1], setup.x_star[2], setup.x_star[3]}}});
}

struct TrainArgs {
  std::string data;
  std::string mode;
  bool fnn = false;
  int epochs = 0;
};

void cmd_train(const ExperimentConfig& cfg, const TrainArgs& a) {
  const fs::path out = cfg.output_dir;
  const fs::path data_path = a.data.empty() ? out / "train.jsonl" : fs::path(a.data);
  DatasetHeader header;
  const auto samples = read_dataset(data_path, &header);
  const ExperimentSetup setup = cfg.setup();
  const SeedPolicy seeds{cfg.seed};
  TrainingConfig tc = cfg.training;
  tc.seed = seeds.training();
  if (a.epochs > 0) tc.epochs = a.epochs;
  const auto progress = [&](const EpochRecord& r) {
    if (r.epoch == 1 || r.epoch % 100 == 0 || r.epoch == tc.epochs) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "epoch %d train %.3e val %.3e lr %.1e", r.epoch, r.train_loss,
                    r.validation_loss, r.learning_rate);
      log(buf);
    }
  };
  std::vector<fs::path> artifacts;
  json details;
  if (a.fnn) {
    FnnModel model = FnnModel::create(cfg.fnn_hidden, cfg.model.activation, cfg.model.leaky_slope, seeds.init());
    const TrainingReport rep =
        train(model, make_training_data(relabel(samples, header.mode, OutputMode::full, setup.gp, cfg.label),
                                        OutputMode::full, OutputMode::full),
              tc, progress);
    artifacts = {out / "fnn.json", out / "loss_fnn.csv"};
    save_fnn(model, artifacts[0]);
    write_loss_history(artifacts[1], rep);
    details = {{"model", "fnn"}, {"best_epoch", rep.best_epoch}, {"best_validation_loss", rep.best_validation_loss}};
  } else {
    DeepONetConfig net = cfg.model;
    if (!a.mode.empty()) net.mode = output_mode_from_string(a.mode);
    net.sensors = header.sensors.m;
    DeepONetModel model = DeepONetModel::create(net, seeds.init());
    const TrainingReport rep =
        train(model, make_training_data(relabel(samples, header.mode, net.mode, setup.gp, cfg.label),
                                        net.mode, net.mode),
              tc, progress);
    const std::string tag(to_string(net.mode));
    artifacts = {out / ("model_" + tag + ".json"), out / ("loss_" + tag + ".csv")};
    save_model(model, artifacts[0]);
    write_loss_history(artifacts[1], rep);
    details = {{"model", "deeponet"}, {"mode", tag}, {"best_epoch", rep.best_epoch},
               {"best_validation_loss", rep.best_validation_loss}};
  }
  details["dataset"] = data_path.generic_string();
  details["dataset_fnv1a"] = file_checksum(data_path);
  write_manifest(out, "train", cfg, artifacts, details);
}

struct RolloutArgs {
  std::string model;
  std::string suite = "gamma_perturbed";
  bool fnn = false;
  bool shadow = false;
  std::string name;
};

void cmd_rollout(const ExperimentConfig& cfg, const RolloutArgs& a) {
  const fs::path out = cfg.output_dir;
  const SuiteKind kind = suite_kind_from_string(a.suite);
  const auto suite = load_suite(out, kind);
  const ExperimentSetup setup = cfg.setup();
  SuiteRollout r;
  std::string tag;
  if (a.fnn) {
    const FnnModel model = load_fnn(a.model);
    r = rollout_suite(
        [&](const TestCase& c, const InputProvider& p) {
          const InputProvider used = a.shadow ? InputProvider(Recorded{c.truth}) : p;
          return rollout_fnn(model, c.x0, c.truth.partition, setup.gp, used, setup.rollout);
        },
        suite, setup.grid);
    tag = "fnn";
  } else {
    const DeepONetModel model = load_model(a.model);
    r = rollout_suite(
        [&](const TestCase& c, const InputProvider& p) {
          const InputProvider used = a.shadow ? InputProvider(Recorded{c.truth}) : p;
          return rollout(model, c.x0, c.truth.partition, setup.gp, used, setup.rollout);
        },
        suite, setup.grid);
    tag = std::string(to_string(model.mode()));
  }
  const std::string name = a.name.empty()
                               ? "rollout_" + std::string(to_string(kind)) + "_" + tag + (a.shadow ? "_shadow" : "")
                               : a.name;
  const fs::path path = out / (name + ".jsonl");
  write_trajectories(path, r.predictions);
  log("wrote " + std::to_string(r.predictions.size()) + " rollouts (" + std::to_string(r.diverged.size()) +
      " diverged) to " + path.string());
  write_manifest(out, "rollout", cfg, {path},
                 {{"model", a.model}, {"model_fnv1a", file_checksum(a.model)}, {"suite", to_string(kind)},
                  {"shadow", a.shadow}, {"diverged", r.diverged}});
}

struct EvaluateArgs {
  std::string pred;
  std::string truth;
  std::string name = "errors";
};

void cmd_evaluate(const ExperimentConfig& cfg, const EvaluateArgs& a) {
  const fs::path out = cfg.output_dir;
  const auto pred = read_trajectories(a.pred);
  const auto truth = read_trajectories(a.truth);
  const ErrorTable t = error_table(pred, truth);
  const fs::path csv = out / (a.name + ".csv");
  const fs::path js = out / (a.name + ".json");
  write_error_table_csv(csv, t);
  write_error_table_json(js, t);
  log("mean L2 error: " + table_line(t));
  write_manifest(out, "evaluate", cfg, {csv, js},
                 {{"pred", a.pred}, {"truth", a.truth}, {"pred_fnv1a", file_checksum(a.pred)},
                  {"truth_fnv1a", file_checksum(a.truth)}});
}

struct DaggerArgs {
  std::string mode;
  int epochs = 0;
};

void cmd_dagger(const ExperimentConfig& cfg, const DaggerArgs& a) {
  const fs::path out = cfg.output_dir;
  ExperimentSetup setup = cfg.setup();
  if (a.epochs > 0) setup.dagger.training.epochs = a.epochs;
  const OutputMode mode = a.mode.empty() ? cfg.model.mode : output_mode_from_string(a.mode);
  std::vector<fs::path> artifacts;
  json iterations = json::array();
  const DaggerResult r = run_dagger_pipeline(setup, cfg.dagger_initial, mode, cfg.seed, [&](const DaggerIteration& it) {
    const fs::path dir = out / ("dagger_iter" + std::to_string(it.iteration));
    artifacts.push_back(dir / "model.json");
    save_model(it.model, artifacts.back());
    artifacts.push_back(dir / "loss.csv");
    write_loss_history(artifacts.back(), it.report);
    iterations.push_back({{"iteration", it.iteration}, {"trained_on", it.aggregate_size},
                          {"collected", it.collected}, {"diverged_rollouts", it.diverged},
                          {"best_validation_loss", it.report.best_validation_loss}});
    log("iteration " + std::to_string(it.iteration) + ": trained on " + std::to_string(it.aggregate_size) +
        " samples, collected " + std::to_string(it.collected));
  });
  artifacts.push_back(out / "dagger_aggregate.jsonl");
  DatasetHeader header{SamplingProcedure::state_input, mode, SensorSpec{}, cfg.ranges, SeedPolicy{cfg.seed}.data(), 0};
  write_dataset(artifacts.back(), header, r.aggregate);
  artifacts.push_back(out / ("model_dagger_" + std::string(to_string(mode)) + ".json"));
  save_model(r.model, artifacts.back());
  write_manifest(out, "dagger", cfg, artifacts, {{"mode", to_string(mode)}, {"iterations", iterations}});
}

void cmd_bound(const ExperimentConfig& cfg, const std::string& model_path) {
  const fs::path out = cfg.output_dir;
  const DeepONetModel model = load_model(model_path);
  const ExperimentSetup setup = cfg.setup();
  const TimePartition partition = TimePartition::uniform(cfg.test.t_end, cfg.test.h);
  const BoundReport rep = verify_bound(model, setup.gp, setup.grid, setup.x_star, partition, cfg.ranges,
                                       mix_seed(cfg.seed ^ 0xb0a9dULL), cfg.bound);
  const fs::path path = out / "bound_report.json";
  write_bound_report(path, rep);
  log("bound satisfied on " + std::to_string(rep.satisfied_count()) + " of " +
      std::to_string(rep.rollouts.size()) + " rollouts");
  write_manifest(out, "bound", cfg, {path}, {{"model", model_path}, {"model_fnv1a", file_checksum(model_path)}});
}

struct PlotArgs {
  std::string pred;
  std::string truth;
  std::vector<int> trajectories{0};
  std::string dir;
};

void cmd_export_plots(const ExperimentConfig& cfg, const PlotArgs& a) {
  const fs::path out = cfg.output_dir;
  const fs::path dir = a.dir.empty() ? out / "plots" : fs::path(a.dir);
  const auto pred = read_trajectories(a.pred);
  const auto truth = read_trajectories(a.truth);
  if (pred.size() != truth.size()) throw Error("export-plots: prediction and truth sets differ in size");
  std::vector<fs::path> artifacts;
  for (int k : a.trajectories) {
    if (k < 0 || static_cast<std::size_t>(k) >= pred.size())
      throw Error("export-plots: trajectory index " + std::to_string(k) + " out of range");
    const Trajectory& p = pred[static_cast<std::size_t>(k)];
    const Trajectory& t = truth[static_cast<std::size_t>(k)];
    if (!p.partition.matches(t.partition)) throw Error("export-plots: partition mismatch");
    for (Eigen::Index q = 0; q < kQuantityCount; ++q) {
      const fs::path path = dir / ("traj" + std::to_string(k) + "_" + std::string(quantity_name(q)) + ".csv");
      fs::create_directories(dir);
      std::ofstream f(path, std::ios::binary);
      if (!f) throw Error("cannot write " + path.string());
      f << "t,truth,prediction\n";
      const Eigen::RowVectorXd tv = t.quantity(q), pv = p.quantity(q);
      for (Eigen::Index n = 0; n < t.size(); ++n)
        f << format_double(t.partition.t(n)) << ',' << format_double(tv[n]) << ',' << format_double(pv[n]) << '\n';
      artifacts.push_back(path);
    }
  }
  write_manifest(out, "export-plots", cfg, artifacts, {{"pred", a.pred}, {"truth", a.truth}});
}

struct SweepArgs {
  std::string axis;
  int epochs = 0;
};

void cmd_sweep(const ExperimentConfig& cfg, const SweepArgs& a) {
  const fs::path out = cfg.output_dir;
  const ExperimentSetup setup = cfg.setup();
  const SweepAxis axis = a.axis.empty() ? cfg.sweep.axis : sweep_axis_from_string(a.axis);
  const int epochs = a.epochs > 0 ? a.epochs : cfg.sweep.epochs;
  const SuiteKind kind = axis == SweepAxis::n_train ? SuiteKind::gamma_perturbed : SuiteKind::fault;
  const auto suite = build_test_suite(kind, cfg.sweep.n_traj, cfg.test_partition(), setup.gp, setup.grid,
                                      setup.x_star, SeedPolicy{cfg.seed}.suite(kind), cfg.test.suite);
  const auto points = sensitivity_sweep(
      axis, cfg.sweep.values, cfg.sweep.seeds, setup, cfg.model.mode, cfg.procedure, suite, epochs,
      cfg.dagger_initial, [](const SweepPoint& p) {
        log(std::string(to_string(p.axis)) + " = " + std::to_string(p.value) + ", seed " +
            std::to_string(p.seed) + ": " + table_line(p.table));
      });
  const fs::path path = out / ("sweep_" + std::string(to_string(axis)) + ".csv");
  write_sweep_csv(path, points);
  json tables = json::array();
  for (const auto& p : points) tables.push_back({{"value", p.value}, {"seed", p.seed}, {"table", table_json(p.table)}});
  write_manifest(out, "sweep", cfg, {path}, {{"axis", to_string(axis)}, {"epochs", epochs}, {"points", tables}});
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"gridop: learned one-step solution operators for a generator on an infinite bus"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "Experiment config (YAML)")->envname("GRIDOP_CONFIG");
  app.add_option("--seed", g.seed, "Override the config seed");
  app.add_option("--out", g.out, "Override the output directory");

  auto* gen = app.add_subcommand("generate", "Sample the training set and simulate both test suites");

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train a DeepONet (or the FNN baseline) on a dataset");
  tr->add_option("--data", ta.data, "Dataset file (default <out>/train.jsonl)");
  tr->add_option("--mode", ta.mode, "Output mode override: full | incremental | residual");
  tr->add_flag("--fnn", ta.fnn, "Train the next-step FNN baseline instead");
  tr->add_option("--epochs", ta.epochs, "Epoch budget override");

  RolloutArgs ra;
  auto* ro = app.add_subcommand("rollout", "Roll a trained model out over a test suite");
  ro->add_option("--model", ra.model, "Model file")->required();
  ro->add_option("--suite", ra.suite, "gamma_perturbed | fault");
  ro->add_flag("--fnn", ra.fnn, "The model file holds the FNN baseline");
  ro->add_flag("--shadow", ra.shadow, "Replay recorded inputs instead of solving the network");
  ro->add_option("--name", ra.name, "Output file stem");

  EvaluateArgs ea;
  auto* ev = app.add_subcommand("evaluate", "L2-relative error table of predictions against truth");
  ev->add_option("--pred", ea.pred, "Predicted trajectories")->required();
  ev->add_option("--truth", ea.truth, "Truth trajectories")->required();
  ev->add_option("--name", ea.name, "Output file stem");

  DaggerArgs da;
  auto* dg = app.add_subcommand("dagger", "Train with data aggregation from closed-loop rollouts");
  dg->add_option("--mode", da.mode, "Output mode override");
  dg->add_option("--epochs", da.epochs, "Epoch budget override for the first iteration");

  std::string bound_model;
  auto* bd = app.add_subcommand("bound", "Check residual rollouts against the cumulative error bound");
  bd->add_option("--model", bound_model, "Residual model file")->required();

  PlotArgs pa;
  auto* ep = app.add_subcommand("export-plots", "Write (t, truth, prediction) CSVs per quantity");
  ep->add_option("--pred", pa.pred, "Predicted trajectories")->required();
  ep->add_option("--truth", pa.truth, "Truth trajectories")->required();
  ep->add_option("--traj", pa.trajectories, "Trajectory indices");
  ep->add_option("--dir", pa.dir, "Output directory (default <out>/plots)");

  SweepArgs sa;
  auto* sw = app.add_subcommand("sweep", "Error tables over dataset sizes or DAgger iterations");
  sw->add_option("--axis", sa.axis, "n_train | dagger_iters");
  sw->add_option("--epochs", sa.epochs, "Epoch budget override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    const ExperimentConfig cfg = resolve(g);
    if (gen->parsed()) cmd_generate(cfg);
    else if (tr->parsed()) cmd_train(cfg, ta);
    else if (ro->parsed()) cmd_rollout(cfg, ra);
    else if (ev->parsed()) cmd_evaluate(cfg, ea);
    else if (dg->parsed()) cmd_dagger(cfg, da);
    else if (bd->parsed()) cmd_bound(cfg, bound_model);
    else if (ep->parsed()) cmd_export_plots(cfg, pa);
    else if (sw->parsed()) cmd_sweep(cfg, sa);
  } catch (const ConfigError& e) {
    std::cerr << "gridop: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "gridop: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace gridop
