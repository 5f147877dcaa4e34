#include "gridop/cli.hpp"
#include "gridop/io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace gridop;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Replaces the value of `key` inside top-level `section` (empty section = top level).
std::string set_key(std::string text, const std::string& section, const std::string& key,
                    const std::string& value) {
  std::size_t from = 0;
  std::string indent;
  if (!section.empty()) {
    from = text.find("\n" + section + ":\n");
    REQUIRE(from != std::string::npos);
    indent = "  ";
  }
  const std::size_t pos = text.find("\n" + indent + key + ":", from);
  REQUIRE(pos != std::string::npos);
  const std::size_t end = text.find('\n', pos + 1);
  text.replace(pos, end - pos, "\n" + indent + key + ": " + value);
  return text;
}

std::string small_config(const fs::path& out) {
  std::string t = slurp(fs::path(GRIDOP_SOURCE_DIR) / "configs" / "default.yaml");
  t = set_key(t, "", "output_dir", out.string());
  t = set_key(t, "sampling", "n_train", "60");
  t = set_key(t, "model", "q", "4");
  t = set_key(t, "model", "branch_hidden", "[12, 12]");
  t = set_key(t, "model", "trunk_hidden", "[12, 12]");
  t = set_key(t, "fnn", "hidden", "[12]");
  t = set_key(t, "training", "epochs", "6");
  t = set_key(t, "training", "batch_size", "32");
  t = set_key(t, "test", "n_traj", "3");
  t = set_key(t, "test", "t_end", "1.0");
  t = set_key(t, "dagger", "n_initial", "30");
  t = set_key(t, "dagger", "n_iter", "2");
  t = set_key(t, "dagger", "n_rollout", "2");
  t = set_key(t, "dagger", "t_end", "0.5");
  t = set_key(t, "bound", "n_rollouts", "2");
  t = set_key(t, "bound", "lipschitz_probes", "50");
  t = set_key(t, "bound", "eps_probes", "50");
  return t;
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "gridop");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

struct Workspace {
  fs::path dir;
  fs::path config;

  explicit Workspace(const std::string& name)
      : dir(fs::temp_directory_path() / ("gridop_test_cli_" + name)), config(dir / "config.yaml") {
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(config) << small_config(dir / "out");
  }
  [[nodiscard]] fs::path out(const std::string& f = "") const { return dir / "out" / f; }
};

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);)
    if (!line.empty() && line[0] != '#') ++n;
  return n;
}

}  // namespace

TEST_CASE("the shipped default config parses with the documented constants") {
  const ExperimentConfig c = load_config(fs::path(GRIDOP_SOURCE_DIR) / "configs" / "default.yaml");
  CHECK(c.seed == 1);
  CHECK(c.n_train == 2000);
  CHECK(c.training.learning_rate == 5e-3);
  CHECK(c.training.epochs == 2000);
  CHECK(c.test.n_traj == 500);
  CHECK(c.ranges.h_max == 0.25);
  CHECK(c.test.suite.gamma.lo == 0.2);
  CHECK(c.test.suite.gamma.hi == 1.5);
  CHECK(c.test.suite.fault_time == 1.0);
  CHECK(c.test.suite.fault_duration.lo == 0.05);
  CHECK(c.test.suite.fault_duration.hi == 1.0);
  CHECK(c.dagger.n_iter == 5);
  CHECK(c.dagger.n_rollout == 10);
  CHECK(c.dagger.t_end == 5.0);
  CHECK(c.dagger_initial == 100);
}

TEST_CASE("config diagnostics name the file, line and key") {
  const std::string good = slurp(fs::path(GRIDOP_SOURCE_DIR) / "configs" / "default.yaml");
  std::string missing = good;
  const auto pos = missing.find("\n    patience:") + 1;
  missing.erase(pos, missing.find('\n', pos) - pos + 1);
  try {
    parse_config(missing, "cfg.yaml");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.rfind("cfg.yaml:", 0) == 0);
    CHECK(msg.find("training.plateau.patience") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config(good + "bogus_key: 3\n", "cfg.yaml"), ConfigError);
  CHECK_THROWS_AS(parse_config(set_key(good, "training", "learning_rate", "-1"), "cfg.yaml"), Error);
  CHECK_THROWS_AS(parse_config(set_key(good, "model", "mode", "sideways"), "cfg.yaml"), ConfigError);
  CHECK_THROWS_AS(parse_config("seed: [1", "cfg.yaml"), ConfigError);

  Workspace w("diag");
  std::ofstream(w.config) << missing;
  CHECK(run({"--config", w.config.string(), "generate"}) == 2);
  CHECK(run({"generate", "--config", (w.dir / "nope.yaml").string()}) != 0);
  CHECK(run({"frobnicate"}) == 2);
}

TEST_CASE("generate is reproducible byte for byte") {
  Workspace w("generate");
  REQUIRE(run({"--config", w.config.string(), "generate"}) == 0);
  const std::string train = slurp(w.out("train.jsonl"));
  const std::string fault = slurp(w.out("fault.jsonl"));
  CHECK(count_lines(w.out("train.jsonl")) == 61);  // header + samples
  CHECK(fs::exists(w.out("gamma_perturbed.cases.json")));
  CHECK(fs::exists(w.out("manifest_generate.json")));
  REQUIRE(run({"--config", w.config.string(), "generate"}) == 0);
  CHECK(slurp(w.out("train.jsonl")) == train);
  CHECK(slurp(w.out("fault.jsonl")) == fault);
  REQUIRE(run({"--config", w.config.string(), "--seed", "2", "generate"}) == 0);
  CHECK(slurp(w.out("train.jsonl")) != train);
}

TEST_CASE("pipeline: train, rollout, evaluate, export, bound, dagger") {
  Workspace w("pipeline");
  const std::string cfg = w.config.string();
  REQUIRE(run({"--config", cfg, "generate"}) == 0);

  REQUIRE(run({"--config", cfg, "train", "--mode", "incremental"}) == 0);
  CHECK(count_lines(w.out("loss_incremental.csv")) == 7);  // header + 6 epochs
  CHECK_NOTHROW(load_model(w.out("model_incremental.json")));
  REQUIRE(run({"--config", cfg, "train", "--fnn", "--epochs", "3"}) == 0);
  CHECK(count_lines(w.out("loss_fnn.csv")) == 4);

  REQUIRE(run({"--config", cfg, "rollout", "--model", w.out("model_incremental.json").string(),
               "--suite", "fault"}) == 0);
  const fs::path pred = w.out("rollout_fault_incremental.jsonl");
  CHECK(read_trajectories(pred).size() == 3);
  REQUIRE(run({"--config", cfg, "rollout", "--fnn", "--model", w.out("fnn.json").string(),
               "--suite", "gamma_perturbed", "--name", "fnn_gamma"}) == 0);
  REQUIRE(run({"--config", cfg, "rollout", "--model", w.out("model_incremental.json").string(),
               "--shadow", "--name", "shadow"}) == 0);
  CHECK(read_trajectories(w.out("shadow.jsonl"))[0].provenance == Provenance::shadow);

  const std::string truth = w.out("fault.jsonl").string();
  REQUIRE(run({"--config", cfg, "evaluate", "--pred", truth, "--truth", truth, "--name", "self"}) == 0);
  const ErrorTable self = read_error_table_json(w.out("self.json"));
  for (std::size_t q = 0; q < 6; ++q) {
    CHECK(self.mean[q] == 0.0);
    CHECK(self.std[q] == 0.0);
  }
  REQUIRE(run({"--config", cfg, "evaluate", "--pred", pred.string(), "--truth", truth}) == 0);
  CHECK(fs::exists(w.out("errors.csv")));

  REQUIRE(run({"--config", cfg, "export-plots", "--pred", pred.string(), "--truth", truth, "--traj", "0",
               "--traj", "2"}) == 0);
  const fs::path plot = w.out("plots/traj2_omega.csv");
  REQUIRE(fs::exists(plot));
  CHECK(slurp(plot).rfind("t,truth,prediction\n", 0) == 0);
  CHECK(count_lines(plot) == 22);

  REQUIRE(run({"--config", cfg, "train", "--mode", "residual"}) == 0);
  REQUIRE(run({"--config", cfg, "bound", "--model", w.out("model_residual.json").string()}) == 0);
  CHECK(fs::exists(w.out("bound_report.json")));

  REQUIRE(run({"--config", cfg, "dagger", "--mode", "residual", "--epochs", "4"}) == 0);
  CHECK(fs::exists(w.out("dagger_iter2/model.json")));
  CHECK(fs::exists(w.out("model_dagger_residual.json")));
  CHECK(count_lines(w.out("dagger_iter1/loss.csv")) == 5);

  const std::string manifest = slurp(w.out("manifest_train.json"));
  CHECK(manifest.find("config_fnv1a") != std::string::npos);
  CHECK(manifest.find("model_residual.json") != std::string::npos);
}

TEST_CASE("training reruns reproduce the model bitwise") {
  Workspace w("retrain");
  const std::string cfg = w.config.string();
  REQUIRE(run({"--config", cfg, "generate"}) == 0);
  REQUIRE(run({"--config", cfg, "train"}) == 0);
  const std::string first = slurp(w.out("model_incremental.json"));
  REQUIRE(run({"--config", cfg, "train"}) == 0);
  CHECK(slurp(w.out("model_incremental.json")) == first);
}

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}
