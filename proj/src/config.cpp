#include "gridop/cli.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace gridop {

namespace {

std::string where(const std::string& source, const YAML::Mark& m) {
  if (m.is_null()) return source + ": ";
  return source + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1) + ": ";
}

/// A mapping whose keys must all be consumed; remembers its dotted path for diagnostics.
class Section {
public:
  Section(const std::string& source, YAML::Node node, std::string path)
      : source_(source), node_(std::move(node)), path_(std::move(path)) {
    if (!node_.IsMap())
      throw ConfigError(where(source_, node_.Mark()) + "'" + display() + "' must be a mapping");
  }

  YAML::Node raw(const std::string& key) {
    const YAML::Node n = node_[key];
    if (!n.IsDefined() || n.IsNull())
      throw ConfigError(where(source_, node_.Mark()) + "missing required key '" + dotted(key) + "'");
    seen_.insert(key);
    return n;
  }

  template <typename T>
  T get(const std::string& key) {
    const YAML::Node n = raw(key);
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(where(source_, n.Mark()) + "invalid value for '" + dotted(key) + "'");
    }
  }

  double positive(const std::string& key) {
    const double v = get<double>(key);
    if (!(v > 0.0)) fail(key, "must be > 0");
    return v;
  }

  template <typename T>
  T at_least(const std::string& key, T lo) {
    const T v = get<T>(key);
    if (v < lo) fail(key, "must be >= " + std::to_string(lo));
    return v;
  }

  Interval interval(const std::string& key) {
    const YAML::Node n = raw(key);
    if (!n.IsSequence() || n.size() != 2) fail(key, "must be a [lo, hi] pair");
    Interval i;
    try {
      i = {n[0].as<double>(), n[1].as<double>()};
    } catch (const YAML::Exception&) {
      fail(key, "must hold two numbers");
    }
    if (!(i.lo < i.hi)) fail(key, "needs lo < hi");
    return i;
  }

  template <typename T>
  std::vector<T> list(const std::string& key) {
    const YAML::Node n = raw(key);
    if (!n.IsSequence()) fail(key, "must be a list");
    try {
      return n.as<std::vector<T>>();
    } catch (const YAML::Exception&) {
      fail(key, "has an invalid entry");
    }
  }

  Section child(const std::string& key) { return Section(source_, raw(key), dotted(key)); }

  [[noreturn]] void fail(const std::string& key, const std::string& what) {
    throw ConfigError(where(source_, node_[key].Mark()) + "'" + dotted(key) + "' " + what);
  }

  /// Wraps library validation so its message carries the section location.
  template <typename F>
  void check(F&& f) {
    try {
      f();
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(where(source_, node_.Mark()) + display() + ": " + e.what());
    }
  }

  void finish() {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      const auto key = it->first.as<std::string>();
      if (!seen_.count(key))
        throw ConfigError(where(source_, it->first.Mark()) + "unknown key '" + dotted(key) + "'");
    }
  }

private:
  [[nodiscard]] std::string dotted(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  [[nodiscard]] std::string display() const { return path_.empty() ? "config" : path_; }

  const std::string& source_;
  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename F>
auto parsed_enum(Section& s, const std::string& key, F&& from_string) {
  const auto name = s.get<std::string>(key);
  try {
    return from_string(name);
  } catch (const Error& e) {
    s.fail(key, std::string("is invalid: ") + e.what());
  }
}

std::vector<Eigen::Index> widths(Section& s, const std::string& key) {
  std::vector<Eigen::Index> out;
  for (long w : s.list<long>(key)) {
    if (w < 1) s.fail(key, "widths must be >= 1");
    out.push_back(w);
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source_name) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(where(source_name, e.mark) + e.msg);
  }
  ExperimentConfig c;
  c.source_text = text;
  c.source_name = source_name;
  const std::string& src = c.source_name;
  if (!root.IsMap()) throw ConfigError(source_name + ": top level must be a mapping");
  Section top(src, root, "");
  c.seed = top.get<std::uint64_t>("seed");
  c.output_dir = top.get<std::string>("output_dir");

  {
    Section g = top.child("generator");
    auto& p = c.generator;
    p.t_d0_prime = g.get<double>("t_d0_prime");
    p.t_q0_prime = g.get<double>("t_q0_prime");
    p.x_d = g.get<double>("x_d");
    p.x_d_prime = g.get<double>("x_d_prime");
    p.x_q = g.get<double>("x_q");
    p.x_q_prime = g.get<double>("x_q_prime");
    p.inertia = g.get<double>("inertia");
    p.damping = g.get<double>("damping");
    p.omega_s = g.get<double>("omega_s");
    p.omega_base = g.get<double>("omega_base");
    g.check([&] { p.validate(); });
    g.finish();
  }
  {
    Section o = top.child("operating_point");
    c.delta_star = o.get<double>("delta");
    c.e_q_star = o.get<double>("e_q_prime");
    o.finish();
  }
  {
    Section g = top.child("grid");
    c.grid.r_s = g.get<double>("r_s");
    c.grid.r_e = g.get<double>("r_e");
    c.grid.x_ep = g.get<double>("x_ep");
    c.grid.v_inf = g.get<double>("v_inf");
    c.grid.theta_inf = g.get<double>("theta_inf");
    g.check([&] { c.grid.validate(); });
    g.finish();
  }
  {
    Section s = top.child("sampling");
    c.procedure = parsed_enum(s, "procedure", sampling_procedure_from_string);
    c.n_train = s.at_least<long>("n_train", kMinTrainingSamples);
    const char* states[] = {"delta", "omega", "e_d_prime", "e_q_prime"};
    for (std::size_t i = 0; i < 4; ++i) c.ranges.state[i] = s.interval(states[i]);
    c.ranges.input[0] = s.interval("i_d");
    c.ranges.input[1] = s.interval("i_q");
    c.ranges.h_min = s.positive("h_min");
    c.ranges.h_max = s.positive("h_max");
    s.check([&] { c.ranges.validate(); });
    s.finish();
  }
  {
    Section s = top.child("sensors");
    c.sensors.m = s.at_least<long>("m", 1);
    c.sensors.rule = parsed_enum(s, "rule", sensor_rule_from_string);
    s.check([&] { c.sensors.validate(); });
    s.finish();
  }
  {
    Section s = top.child("labels");
    c.label.substeps = s.at_least<int>("substeps", 1);
    c.label.approx_beta = s.get<double>("approx_beta");
    if (c.label.approx_beta < 0.0 || c.label.approx_beta > 1.0) s.fail("approx_beta", "must lie in [0, 1]");
    s.finish();
  }
  {
    Section s = top.child("model");
    c.model.mode = parsed_enum(s, "mode", output_mode_from_string);
    c.model.q = s.at_least<long>("q", 1);
    c.model.branch_hidden = widths(s, "branch_hidden");
    c.model.trunk_hidden = widths(s, "trunk_hidden");
    c.model.activation = parsed_enum(s, "activation", activation_from_string);
    c.model.leaky_slope = s.get<double>("leaky_slope");
    c.model.architecture = parsed_enum(s, "architecture", architecture_from_string);
    c.model.sensors = c.sensors.m;
    s.check([&] { (void)DeepONetModel::create(c.model, 0); });
    s.finish();
  }
  {
    Section s = top.child("fnn");
    c.fnn_hidden = widths(s, "hidden");
    s.finish();
  }
  {
    Section s = top.child("training");
    auto& t = c.training;
    t.learning_rate = s.positive("learning_rate");
    t.beta1 = s.get<double>("beta1");
    t.beta2 = s.get<double>("beta2");
    t.epsilon = s.positive("epsilon");
    t.epochs = s.at_least<int>("epochs", 1);
    t.batch_size = s.at_least<long>("batch_size", 1);
    t.validation_fraction = s.get<double>("validation_fraction");
    Section p = s.child("plateau");
    t.plateau.factor = p.get<double>("factor");
    t.plateau.patience = p.at_least<int>("patience", 0);
    t.plateau.min_lr = p.get<double>("min_lr");
    t.plateau.threshold = p.get<double>("threshold");
    p.finish();
    s.check([&] { t.validate(); });
    s.finish();
  }
  {
    Section s = top.child("test");
    auto& t = c.test;
    t.n_traj = s.at_least<long>("n_traj", 1);
    t.t_end = s.positive("t_end");
    t.h = s.positive("h");
    const auto kind = s.get<std::string>("partition");
    if (kind != "uniform" && kind != "irregular") s.fail("partition", "must be uniform or irregular");
    t.irregular = kind == "irregular";
    t.irregular_points = s.at_least<long>("irregular_points", 2);
    t.suite.substeps = s.at_least<int>("truth_substeps", 1);
    t.suite.gamma = s.interval("gamma");
    t.suite.fault_time = s.get<double>("fault_time");
    if (t.suite.fault_time < 0.0) s.fail("fault_time", "must be >= 0");
    t.suite.fault_duration = s.interval("fault_duration");
    if (!(t.suite.fault_duration.lo > 0.0)) s.fail("fault_duration", "must be positive");
    t.suite.fault_xep_scale = s.positive("fault_xep_scale");
    s.finish();
  }
  {
    Section s = top.child("rollout");
    c.rollout.approx_beta = c.label.approx_beta;
    c.rollout.approx_substeps = s.at_least<int>("approx_substeps", 1);
    c.rollout.divergence_limit = s.positive("divergence_limit");
    s.finish();
  }
  {
    Section s = top.child("dagger");
    auto& d = c.dagger;
    c.dagger_initial = s.at_least<long>("n_initial", kMinTrainingSamples);
    d.n_iter = s.at_least<int>("n_iter", 1);
    d.n_rollout = s.at_least<int>("n_rollout", 1);
    d.t_end = s.positive("t_end");
    d.h = s.positive("h");
    d.warm_start = s.get<bool>("warm_start");
    d.warm_epoch_fraction = s.positive("warm_epoch_fraction");
    d.gamma = c.test.suite.gamma;
    d.training = c.training;
    d.label = c.label;
    d.rollout = c.rollout;
    s.check([&] { d.validate(); });
    s.finish();
  }
  {
    Section s = top.child("bound");
    auto& b = c.bound;
    b.n_rollouts = s.at_least<long>("n_rollouts", 1);
    b.lipschitz_probes = s.at_least<long>("lipschitz_probes", 2);
    b.eps_probes = s.at_least<long>("eps_probes", 1);
    b.inflation = s.positive("inflation");
    b.kappa_substeps = s.at_least<int>("kappa_substeps", 1);
    b.suite = c.test.suite;
    b.label = c.label;
    b.rollout = c.rollout;
    s.finish();
  }
  {
    Section s = top.child("sweep");
    auto& w = c.sweep;
    w.axis = parsed_enum(s, "axis", sweep_axis_from_string);
    w.values = s.list<int>("values");
    if (w.values.empty()) s.fail("values", "must not be empty");
    w.seeds = s.list<std::uint64_t>("seeds");
    if (w.seeds.empty()) s.fail("seeds", "must not be empty");
    w.epochs = s.at_least<int>("epochs", 1);
    w.n_traj = s.at_least<long>("n_traj", 1);
    s.finish();
  }
  top.finish();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

ExperimentSetup ExperimentConfig::setup() const {
  ExperimentSetup s = make_setup(generator, grid, delta_star, e_q_star);
  s.ranges = ranges;
  s.label = label;
  s.net = model;
  s.fnn_hidden = fnn_hidden;
  s.training = training;
  s.suite = test.suite;
  s.rollout = rollout;
  s.dagger = dagger;
  return s;
}

TimePartition ExperimentConfig::test_partition() const {
  if (!test.irregular) return TimePartition::uniform(test.t_end, test.h);
  Rng rng(mix_seed(seed ^ 0x9a27ULL));
  return irregular_partition(test.t_end, test.irregular_points, rng, ranges.h_max);
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string file_checksum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(ss.str())));
  return buf;
}

}  // namespace gridop
