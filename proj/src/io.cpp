#include "gridop/io.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace gridop {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  return in;
}

json vec(const Eigen::Ref<const Eigen::VectorXd>& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd to_vec(const json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

template <int N>
Eigen::Matrix<double, N, 1> to_fixed(const json& a, const char* what) {
  if (!a.is_array() || a.size() != N) throw Error(std::string("expected ") + std::to_string(N) + " values for " + what);
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v[i] = a[static_cast<std::size_t>(i)].get<double>();
  return v;
}

json spec_json(const NetworkSpec& s) {
  return {{"input_dim", s.input_dim},
          {"output_dim", s.output_dim},
          {"hidden_layers", s.hidden_layers},
          {"activation", to_string(s.activation)},
          {"leaky_slope", s.leaky_slope},
          {"architecture", to_string(s.architecture)}};
}

NetworkSpec spec_from(const json& j) {
  NetworkSpec s;
  s.input_dim = j.at("input_dim").get<Eigen::Index>();
  s.output_dim = j.at("output_dim").get<Eigen::Index>();
  s.hidden_layers = j.at("hidden_layers").get<std::vector<Eigen::Index>>();
  s.activation = activation_from_string(j.at("activation").get<std::string>());
  s.leaky_slope = j.at("leaky_slope").get<double>();
  s.architecture = architecture_from_string(j.at("architecture").get<std::string>());
  return s;
}

json standardizer_json(const Standardizer& s) { return {{"mean", vec(s.mean)}, {"std", vec(s.std)}}; }

Standardizer standardizer_from(const json& j) {
  Standardizer s{to_vec(j.at("mean")), to_vec(j.at("std"))};
  if (s.mean.size() != s.std.size()) throw Error("normalization: mean/std length mismatch");
  return s;
}

void check_header(const json& j, std::string_view format) {
  if (!j.contains("format") || j["format"] != format)
    throw Error("not a " + std::string(format) + " file");
  if (j.at("version").get<int>() != kFormatVersion)
    throw Error("unsupported " + std::string(format) + " version");
}

json ranges_json(const SamplingRanges& r) {
  json s = json::array(), in = json::array();
  for (const auto& i : r.state) s.push_back({i.lo, i.hi});
  for (const auto& i : r.input) in.push_back({i.lo, i.hi});
  return {{"state", s}, {"input", in}, {"h_min", r.h_min}, {"h_max", r.h_max}};
}

SamplingRanges ranges_from(const json& j) {
  SamplingRanges r;
  for (std::size_t i = 0; i < 4; ++i) r.state[i] = {j.at("state")[i][0], j.at("state")[i][1]};
  for (std::size_t i = 0; i < 2; ++i) r.input[i] = {j.at("input")[i][0], j.at("input")[i][1]};
  r.h_min = j.at("h_min");
  r.h_max = j.at("h_max");
  return r;
}

json grid_json(const GridParams& g) {
  return {{"r_s", g.r_s}, {"r_e", g.r_e}, {"x_ep", g.x_ep}, {"v_inf", g.v_inf}, {"theta_inf", g.theta_inf}};
}

GridParams grid_from(const json& j) {
  GridParams g;
  g.r_s = j.at("r_s");
  g.r_e = j.at("r_e");
  g.x_ep = j.at("x_ep");
  g.v_inf = j.at("v_inf");
  g.theta_inf = j.at("theta_inf");
  return g;
}

json model_json(const DeepONetModel& m) {
  return {{"format", "gridop-deeponet"},
          {"version", kFormatVersion},
          {"output_mode", to_string(m.mode())},
          {"q", m.q()},
          {"n_x", m.n_x()},
          {"sensors", m.sensors()},
          {"branch", spec_json(m.branch().spec())},
          {"trunk", spec_json(m.trunk().spec())},
          {"normalization",
           {{"branch", standardizer_json(m.normalization().branch)},
            {"trunk", standardizer_json(m.normalization().trunk)},
            {"output", standardizer_json(m.normalization().output)}}},
          {"parameters", vec(m.parameters())}};
}

DeepONetModel model_from(const json& j) {
  check_header(j, "gridop-deeponet");
  if (j.at("n_x").get<Eigen::Index>() != kStateDim) throw Error("model: unsupported state dimension");
  DeepONetModel m(spec_from(j.at("branch")), spec_from(j.at("trunk")), j.at("q").get<Eigen::Index>(),
                  j.at("sensors").get<Eigen::Index>(),
                  output_mode_from_string(j.at("output_mode").get<std::string>()));
  const Eigen::VectorXd p = to_vec(j.at("parameters"));
  if (p.size() != m.parameters().size()) throw Error("model: parameter count mismatch");
  if (!p.allFinite()) throw Error("model: non-finite parameters");
  m.parameters() = p;
  const json& n = j.at("normalization");
  m.normalization() = {standardizer_from(n.at("branch")), standardizer_from(n.at("trunk")),
                       standardizer_from(n.at("output"))};
  return m;
}

json parse_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string model_to_string(const DeepONetModel& model) { return model_json(model).dump(); }

DeepONetModel model_from_string(const std::string& text) {
  try {
    return model_from(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(std::string("model: ") + e.what());
  }
}

void save_model(const DeepONetModel& model, const std::filesystem::path& path) {
  open_out(path) << model_json(model).dump() << '\n';
}

DeepONetModel load_model(const std::filesystem::path& path) {
  try {
    return model_from(parse_file(path));
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void save_fnn(const FnnModel& model, const std::filesystem::path& path) {
  const json j = {{"format", "gridop-fnn"},
                  {"version", kFormatVersion},
                  {"net", spec_json(model.net().spec())},
                  {"normalization",
                   {{"input", standardizer_json(model.input_norm())},
                    {"output", standardizer_json(model.output_norm())}}},
                  {"parameters", vec(model.parameters())}};
  open_out(path) << j.dump() << '\n';
}

FnnModel load_fnn(const std::filesystem::path& path) {
  try {
    const json j = parse_file(path);
    check_header(j, "gridop-fnn");
    FnnModel m(spec_from(j.at("net")));
    const Eigen::VectorXd p = to_vec(j.at("parameters"));
    if (p.size() != m.parameters().size()) throw Error("fnn: parameter count mismatch");
    m.parameters() = p;
    m.input_norm() = standardizer_from(j.at("normalization").at("input"));
    m.output_norm() = standardizer_from(j.at("normalization").at("output"));
    return m;
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_dataset(const std::filesystem::path& path, const DatasetHeader& header,
                   std::span<const DatasetSample> samples) {
  auto out = open_out(path);
  const json h = {{"format", "gridop-dataset"},
                  {"version", kFormatVersion},
                  {"procedure", to_string(header.procedure)},
                  {"mode", to_string(header.mode)},
                  {"sensors", {{"m", header.sensors.m}, {"rule", to_string(header.sensors.rule)}}},
                  {"ranges", ranges_json(header.ranges)},
                  {"seed", header.seed},
                  {"count", samples.size()}};
  out << h.dump() << '\n';
  for (const auto& s : samples) {
    json y = json::array();
    for (Eigen::Index k = 0; k < s.sensors.size(); ++k) y.push_back(vec(s.sensors.values.col(k)));
    const json r = {{"x", vec(s.x)}, {"y", y}, {"d", vec(s.sensors.offsets)}, {"h", s.h}, {"label", vec(s.label)}};
    out << r.dump() << '\n';
  }
}

std::vector<DatasetSample> read_dataset(const std::filesystem::path& path, DatasetHeader* header) {
  auto in = open_in(path);
  std::string line;
  std::size_t line_no = 0;
  std::vector<DatasetSample> out;
  DatasetHeader h;
  try {
    if (!std::getline(in, line)) throw Error("empty dataset file");
    ++line_no;
    const json j = json::parse(line);
    check_header(j, "gridop-dataset");
    h.procedure = sampling_procedure_from_string(j.at("procedure").get<std::string>());
    h.mode = output_mode_from_string(j.at("mode").get<std::string>());
    h.sensors.m = j.at("sensors").at("m");
    h.sensors.rule = sensor_rule_from_string(j.at("sensors").at("rule").get<std::string>());
    h.ranges = ranges_from(j.at("ranges"));
    h.seed = j.at("seed");
    h.count = j.at("count");
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const json r = json::parse(line);
      DatasetSample s;
      s.x = to_fixed<4>(r.at("x"), "x");
      const json& y = r.at("y");
      s.sensors.values.resize(2, static_cast<Eigen::Index>(y.size()));
      for (std::size_t k = 0; k < y.size(); ++k)
        s.sensors.values.col(static_cast<Eigen::Index>(k)) = to_fixed<2>(y[k], "y");
      s.sensors.offsets = to_vec(r.at("d"));
      s.h = r.at("h");
      s.label = to_fixed<4>(r.at("label"), "label");
      s.validate(h.ranges.h_max);
      out.push_back(std::move(s));
    }
  } catch (const std::exception& e) {
    throw Error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
  }
  if (static_cast<Eigen::Index>(out.size()) != h.count)
    throw Error(path.string() + ": header announces " + std::to_string(h.count) + " samples, found " +
                std::to_string(out.size()));
  if (header) *header = h;
  return out;
}

void write_trajectories(const std::filesystem::path& path, std::span<const Trajectory> trajectories) {
  auto out = open_out(path);
  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    const Trajectory& t = trajectories[k];
    for (Eigen::Index n = 0; n < t.size(); ++n) {
      const json r = {{"traj", k},
                      {"provenance", to_string(t.provenance)},
                      {"t", t.partition.t(n)},
                      {"state", vec(t.states.col(n))},
                      {"input", vec(t.inputs.col(n))}};
      out << r.dump() << '\n';
    }
  }
}

std::vector<Trajectory> read_trajectories(const std::filesystem::path& path) {
  auto in = open_in(path);
  struct Rows {
    Provenance prov = Provenance::truth;
    std::vector<double> t;
    std::vector<State> x;
    std::vector<InterfaceInput> y;
  };
  std::map<std::size_t, Rows> rows;
  std::string line;
  std::size_t line_no = 0;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const json r = json::parse(line);
      Rows& dst = rows[r.at("traj").get<std::size_t>()];
      dst.prov = provenance_from_string(r.at("provenance").get<std::string>());
      dst.t.push_back(r.at("t"));
      dst.x.push_back(to_fixed<4>(r.at("state"), "state"));
      dst.y.push_back(to_fixed<2>(r.at("input"), "input"));
    }
  } catch (const std::exception& e) {
    throw Error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
  }
  std::vector<Trajectory> out;
  std::size_t expected = 0;
  for (auto& [id, r] : rows) {
    if (id != expected++) throw Error(path.string() + ": trajectory ids must be contiguous from 0");
    const auto n = static_cast<Eigen::Index>(r.t.size());
    Eigen::VectorXd p = Eigen::Map<Eigen::VectorXd>(r.t.data(), n);
    const double max_step = n > 1 ? (p.tail(n - 1) - p.head(n - 1)).maxCoeff() : 1.0;
    Trajectory t(TimePartition(p, max_step), r.prov);
    for (Eigen::Index k = 0; k < n; ++k) {
      t.states.col(k) = r.x[static_cast<std::size_t>(k)];
      t.inputs.col(k) = r.y[static_cast<std::size_t>(k)];
    }
    out.push_back(std::move(t));
  }
  return out;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& t) {
  auto out = open_out(path);
  out << "t";
  for (Eigen::Index q = 0; q < kQuantityCount; ++q) out << ',' << quantity_name(q);
  out << '\n';
  for (Eigen::Index n = 0; n < t.size(); ++n) {
    out << format_double(t.partition.t(n));
    for (Eigen::Index q = 0; q < 4; ++q) out << ',' << format_double(t.states(q, n));
    for (Eigen::Index q = 0; q < 2; ++q) out << ',' << format_double(t.inputs(q, n));
    out << '\n';
  }
}

void write_test_cases(const std::filesystem::path& path, SuiteKind kind,
                      std::span<const TestCase> cases) {
  json arr = json::array();
  for (const auto& c : cases) {
    json faults = json::array();
    for (const auto& f : c.faults)
      faults.push_back({{"t_start", f.t_start}, {"duration", f.duration}, {"grid", grid_json(f.faulted_grid)}});
    arr.push_back({{"x0", vec(c.x0)}, {"gamma", c.gamma}, {"faults", faults}});
  }
  const json j = {{"format", "gridop-test-cases"}, {"version", kFormatVersion}, {"kind", to_string(kind)}, {"cases", arr}};
  open_out(path) << j.dump() << '\n';
}

std::vector<TestCase> read_test_cases(const std::filesystem::path& path,
                                      std::vector<Trajectory> truth, SuiteKind* kind) {
  try {
    const json j = parse_file(path);
    check_header(j, "gridop-test-cases");
    const json& arr = j.at("cases");
    if (arr.size() != truth.size())
      throw Error("test cases: " + std::to_string(arr.size()) + " cases but " +
                  std::to_string(truth.size()) + " truth trajectories");
    std::vector<TestCase> out;
    for (std::size_t k = 0; k < arr.size(); ++k) {
      TestCase c;
      c.x0 = to_fixed<4>(arr[k].at("x0"), "x0");
      c.gamma = arr[k].at("gamma");
      for (const auto& f : arr[k].at("faults"))
        c.faults.push_back({f.at("t_start"), f.at("duration"), grid_from(f.at("grid"))});
      c.truth = std::move(truth[k]);
      out.push_back(std::move(c));
    }
    if (kind) *kind = suite_kind_from_string(j.at("kind").get<std::string>());
    return out;
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_error_table_csv(const std::filesystem::path& path, const ErrorTable& table) {
  auto out = open_out(path);
  out << "# L2-relative error (%), population std over " << table.count << " trajectories\n";
  out << "stat";
  for (Eigen::Index q = 0; q < kQuantityCount; ++q) out << ',' << quantity_name(q);
  out << "\nmean";
  for (double v : table.mean) out << ',' << format_double(v);
  out << "\nstd";
  for (double v : table.std) out << ',' << format_double(v);
  out << '\n';
}

void write_error_table_json(const std::filesystem::path& path, const ErrorTable& table) {
  json mean, std;
  for (Eigen::Index q = 0; q < kQuantityCount; ++q) {
    mean[std::string(quantity_name(q))] = table.mean[static_cast<std::size_t>(q)];
    std[std::string(quantity_name(q))] = table.std[static_cast<std::size_t>(q)];
  }
  const json j = {{"format", "gridop-error-table"}, {"version", kFormatVersion}, {"count", table.count},
                  {"std_convention", "population"}, {"mean", mean}, {"std", std}};
  open_out(path) << j.dump(2) << '\n';
}

ErrorTable read_error_table_json(const std::filesystem::path& path) {
  try {
    const json j = parse_file(path);
    check_header(j, "gridop-error-table");
    ErrorTable t;
    t.count = j.at("count");
    for (Eigen::Index q = 0; q < kQuantityCount; ++q) {
      t.mean[static_cast<std::size_t>(q)] = j.at("mean").at(std::string(quantity_name(q)));
      t.std[static_cast<std::size_t>(q)] = j.at("std").at(std::string(quantity_name(q)));
    }
    return t;
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_loss_history(const std::filesystem::path& path, const TrainingReport& report) {
  auto out = open_out(path);
  out << "epoch,train_loss,validation_loss,learning_rate\n";
  for (const auto& r : report.history)
    out << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.validation_loss)
        << ',' << format_double(r.learning_rate) << '\n';
}

void write_bound_report(const std::filesystem::path& path, const BoundReport& report) {
  json rollouts = json::array();
  for (const auto& r : report.rollouts)
    rollouts.push_back({{"gamma", r.gamma},
                        {"max_error", r.error.size() ? r.error.maxCoeff() : 0.0},
                        {"satisfied", r.satisfied()},
                        {"first_violation", r.first_violation}});
  const json j = {{"format", "gridop-bound-report"},
                  {"version", kFormatVersion},
                  {"constants",
                   {{"lipschitz", report.constants.lipschitz},
                    {"flow_lipschitz", report.constants.flow_lipschitz},
                    {"eps", report.constants.eps},
                    {"kappa", report.constants.kappa}}},
                  {"bound", vec(report.bound)},
                  {"satisfied_count", report.satisfied_count()},
                  {"rollouts", rollouts}};
  open_out(path) << j.dump(2) << '\n';
}

}  // namespace gridop
