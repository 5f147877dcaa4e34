#include "gridop/data_generation.hpp"
#include "gridop/deeponet.hpp"
#include "gridop/fnn.hpp"
#include "gridop/mlp.hpp"
#include "gridop/training.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

using namespace gridop;

namespace {

std::vector<Eigen::Index> all_columns(Eigen::Index n) {
  std::vector<Eigen::Index> c(static_cast<std::size_t>(n));
  std::iota(c.begin(), c.end(), Eigen::Index{0});
  return c;
}

DeepONetConfig small_config(Architecture arch, Activation act, Eigen::Index sensors,
                            OutputMode mode = OutputMode::incremental) {
  DeepONetConfig cfg;
  cfg.branch_hidden = {8, 8};
  cfg.trunk_hidden = {8, 8};
  cfg.architecture = arch;
  cfg.activation = act;
  cfg.q = 3;
  cfg.sensors = sensors;
  cfg.mode = mode;
  return cfg;
}

std::vector<DatasetSample> samples(Eigen::Index n, Eigen::Index m, OutputMode mode,
                                   std::uint64_t seed) {
  const auto& s = test::default_setup();
  SensorSpec spec{m, m == 1 ? SensorRule::singleton : SensorRule::fixed_plus_uniform};
  return build_training_set(n, SamplingProcedure::state_input, mode, spec, s.ranges, s.gp, s.grid,
                            seed);
}

/// Largest relative deviation between the analytic gradient and central differences over
/// `n_probe` random parameters.
template <typename M>
double gradient_check(M& model, const TrainingData& norm, int n_probe, std::uint64_t seed) {
  const auto cols = all_columns(norm.size());
  Eigen::VectorXd grad(model.parameters().size());
  model.loss_and_gradient(norm, cols, grad);
  Rng rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, model.parameters().size() - 1);
  double worst = 0.0;
  const double step = 1e-5;
  for (int k = 0; k < n_probe; ++k) {
    const Eigen::Index i = pick(rng);
    const double saved = model.parameters()[i];
    model.parameters()[i] = saved + step;
    const double up = model.loss(norm, cols);
    model.parameters()[i] = saved - step;
    const double down = model.loss(norm, cols);
    model.parameters()[i] = saved;
    const double fd = (up - down) / (2 * step);
    worst = std::max(worst, std::abs(grad[i] - fd) / (std::abs(grad[i]) + 1e-8));
  }
  return worst;
}

void set_constant_output(const Mlp<double>& net, Eigen::Ref<Eigen::VectorXd> params, double value) {
  const AffineBlock& out = net.layout().output();
  params.segment(out.offset, out.weight_size()).setZero();
  params.segment(out.bias_offset(), out.rows).setConstant(value);
}

}  // namespace

TEST_CASE("zero-depth plain net with identity weights is the identity") {
  NetworkSpec spec{3, 3, {}, Activation::leaky_relu, 0.01, Architecture::plain};
  Mlp<double> net(spec);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(net.parameter_count());
  Eigen::Map<Eigen::MatrixXd>(p.data(), 3, 3).setIdentity();
  Eigen::MatrixXd x(3, 2);
  x << 1, -2,
       0.5, 3,
       -7, 0;
  CHECK((net.forward(x, p) - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("2-2-1 plain net against a hand forward pass") {
  NetworkSpec spec{2, 1, {2}, Activation::leaky_relu, 0.1, Architecture::plain};
  Mlp<double> net(spec);
  // W1 = [[1, -1], [0.5, 2]] column-major, b1 = (0.1, -0.2), W2 = [3, -1], b2 = 0.5
  Eigen::VectorXd p(9);
  p << 1, 0.5, -1, 2, 0.1, -0.2, 3, -1, 0.5;
  Eigen::MatrixXd x(2, 1);
  x << 0.3, 0.6;
  // a = (0.3 - 0.6 + 0.1, 0.15 + 1.2 - 0.2) = (-0.2, 1.15); z = (-0.02, 1.15)
  const double expected = 3 * -0.02 - 1.15 + 0.5;
  CHECK(std::abs(net.forward(x, p)(0, 0) - expected) <= 1e-12);
}

TEST_CASE("input dimension mismatch is rejected") {
  Mlp<double> net(NetworkSpec{2, 1, {4}});
  Eigen::VectorXd p = Eigen::VectorXd::Zero(net.parameter_count());
  CHECK_THROWS_AS(net.forward(Eigen::MatrixXd::Zero(3, 1), p), Error);
  CHECK_THROWS_AS(net.forward(Eigen::MatrixXd::Zero(2, 1), Eigen::VectorXd::Zero(3)), Error);
}

TEST_CASE("network spec invariants") {
  CHECK_THROWS_AS(NetworkSpec({0, 1, {}}).validate(), Error);
  CHECK_THROWS_AS(NetworkSpec({1, 1, {4}, Activation::leaky_relu, 1.5}).validate(), Error);
  CHECK_THROWS_AS(NetworkSpec({1, 1, {4, 5}, Activation::leaky_relu, 0.01,
                               Architecture::modified_fc}).validate(), Error);
}

TEST_CASE("modified_fc with identical encoders collapses to the plain stack") {
  for (Activation act : {Activation::leaky_relu, Activation::tanh}) {
    NetworkSpec plain_spec{3, 2, {5}, act, 0.01, Architecture::plain};
    NetworkSpec mod_spec = plain_spec;
    mod_spec.architecture = Architecture::modified_fc;
    Mlp<double> plain(plain_spec), mod(mod_spec);
    Rng rng(7);
    Eigen::VectorXd pp(plain.parameter_count());
    plain.initialize(pp, rng);
    // Both encoders and the hidden layer reuse the plain hidden layer's parameters.
    const auto& hidden = plain.layout().hidden(0);
    const auto& out = plain.layout().output();
    Eigen::VectorXd pm(mod.parameter_count());
    for (int b = 0; b < 3; ++b) {
      const AffineBlock& dst = mod.layout().blocks[static_cast<std::size_t>(b)];
      pm.segment(dst.offset, dst.end() - dst.offset) =
          pp.segment(hidden.offset, hidden.end() - hidden.offset);
    }
    const AffineBlock& mout = mod.layout().output();
    pm.segment(mout.offset, mout.end() - mout.offset) = pp.segment(out.offset, out.end() - out.offset);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 6);
    CHECK((plain.forward(x, pp) - mod.forward(x, pm)).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("modified_fc hidden layers have no effect when the encoders agree") {
  NetworkSpec spec{2, 1, {4, 4, 4}, Activation::tanh, 0.01, Architecture::modified_fc};
  Mlp<double> net(spec);
  Rng rng(3);
  Eigen::VectorXd p(net.parameter_count());
  net.initialize(p, rng);
  const AffineBlock& u = net.layout().blocks[0];
  const AffineBlock& v = net.layout().blocks[1];
  p.segment(v.offset, v.end() - v.offset) = p.segment(u.offset, u.end() - u.offset);
  Mlp<double>::Tape tape;
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, 5);
  net.forward(x, p, &tape);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(p.size());
  net.backward(tape, Eigen::MatrixXd::Ones(1, 5), p, grad);
  for (std::size_t k = 0; k < 3; ++k) {
    const AffineBlock& b = net.layout().hidden(k);
    CHECK(grad.segment(b.offset, b.end() - b.offset).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("readout is the blockwise dot product") {
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(kStateDim, 3);
  CHECK(DeepONetModel::readout(ones, ones, 1) == ones);

  for (Eigen::Index m : {1, 2}) {
    DeepONetModel model = DeepONetModel::create(
        small_config(Architecture::modified_fc, Activation::leaky_relu, m), 11);
    const Eigen::MatrixXd b = Eigen::MatrixXd::Random(branch_feature_dim(m), 7);
    const Eigen::RowVectorXd t = Eigen::RowVectorXd::Random(7);
    const Eigen::MatrixXd beta = model.branch_coefficients(b);
    const Eigen::MatrixXd phi = model.trunk_basis(t);
    const Eigen::MatrixXd out = model.forward_normalized(b, t);
    REQUIRE(out.rows() == kStateDim);
    for (Eigen::Index c = 0; c < 7; ++c) {
      for (Eigen::Index i = 0; i < kStateDim; ++i) {
        double sum = 0.0;
        for (Eigen::Index j = 0; j < model.q(); ++j)
          sum += beta(i * model.q() + j, c) * phi(i * model.q() + j, c);
        CHECK(std::abs(out(i, c) - sum) <= 1e-12);
      }
    }
  }
}

TEST_CASE("forced all-ones coefficients and basis give unit outputs") {
  DeepONetConfig cfg = small_config(Architecture::plain, Activation::tanh, 1);
  cfg.q = 1;
  DeepONetModel model = DeepONetModel::create(cfg, 5);
  const Eigen::Index nb = model.branch().parameter_count();
  set_constant_output(model.branch(), model.parameters().head(nb), 1.0);
  set_constant_output(model.trunk(), model.parameters().tail(model.trunk().parameter_count()), 1.0);
  const Eigen::MatrixXd out =
      model.forward_normalized(Eigen::MatrixXd::Random(branch_feature_dim(1), 4), Eigen::RowVectorXd::Random(4));
  CHECK((out.array() - 1.0).abs().maxCoeff() <= 1e-15);
  const State p = model.predict(State(0.1, 1, 0, 1), SensorWindow::frozen(InterfaceInput(0.2, 0.1)), 0.05);
  CHECK((p.array() - 1.0).abs().maxCoeff() <= 1e-15);
}

TEST_CASE("predict reports non-finite activations") {
  DeepONetModel model = DeepONetModel::create(small_config(Architecture::plain, Activation::tanh, 1), 5);
  model.parameters()[model.branch().layout().output().bias_offset()] =
      std::numeric_limits<double>::infinity();
  model.parameters()[model.parameters().size() - 1] = 0.0;
  CHECK_THROWS_WITH_AS(model.predict(State(0.1, 1, 0, 1), SensorWindow::frozen(InterfaceInput(0, 0)), 0.05),
                       "numerical blow-up", Error);
}

TEST_CASE("loss examples") {
  DeepONetModel model = DeepONetModel::create(small_config(Architecture::plain, Activation::tanh, 1), 1);
  model.parameters().setZero();  // prediction 0 everywhere, identity normalization
  DatasetSample a;
  a.h = 0.05;
  CHECK(loss(model, std::vector<DatasetSample>{a}) == 0.0);
  a.label = State(0.1, 0, 0, 0);
  CHECK(loss(model, std::vector<DatasetSample>{a}) == doctest::Approx(0.01).epsilon(1e-14));
  DatasetSample b = a;
  a.label = State(0.1, 0.1, 0, 0);
  b.label = State(0.2, 0, 0, 0);
  CHECK(loss(model, std::vector<DatasetSample>{a, b}) == doctest::Approx(0.03).epsilon(1e-14));
}

TEST_CASE("analytic gradients match central differences") {
  struct Case {
    Architecture arch;
    Activation act;
    Eigen::Index m;
  };
  const Case cases[] = {{Architecture::plain, Activation::tanh, 1},
                        {Architecture::modified_fc, Activation::tanh, 1},
                        {Architecture::modified_fc, Activation::tanh, 2},
                        {Architecture::plain, Activation::leaky_relu, 2},
                        {Architecture::modified_fc, Activation::leaky_relu, 1}};
  std::uint64_t seed = 100;
  for (const Case& c : cases) {
    CAPTURE(to_string(c.arch));
    CAPTURE(to_string(c.act));
    CAPTURE(c.m);
    DeepONetModel model = DeepONetModel::create(small_config(c.arch, c.act, c.m), ++seed);
    const auto data = make_training_data(samples(16, c.m, OutputMode::incremental, seed),
                                         OutputMode::incremental, OutputMode::incremental);
    const auto cols = all_columns(data.size());
    model.fit_normalization(data, cols);
    CHECK(gradient_check(model, model.normalize(data), 100, seed) <= 1e-4);
  }
}

TEST_CASE("FNN gradients match central differences") {
  for (Activation act : {Activation::tanh, Activation::leaky_relu}) {
    FnnModel model = FnnModel::create({10, 10}, act, 0.01, 9);
    const auto data = make_training_data(samples(16, 1, OutputMode::full, 4), OutputMode::full,
                                         OutputMode::full);
    model.fit_normalization(data, all_columns(data.size()));
    CHECK(gradient_check(model, model.normalize(data), 100, 17) <= 1e-4);
    CHECK(model.predict(State(0.1, 1, 0, 1), InterfaceInput(0.3, 0.1), 0.05).size() == kStateDim);
  }
}

TEST_CASE("parameters behind a zero coefficient block get no gradient") {
  DeepONetModel model = DeepONetModel::create(small_config(Architecture::plain, Activation::tanh, 1), 21);
  const auto data = make_training_data(samples(12, 1, OutputMode::incremental, 3),
                                       OutputMode::incremental, OutputMode::incremental);
  const auto cols = all_columns(data.size());
  model.fit_normalization(data, cols);
  const Eigen::Index q = model.q();
  const AffineBlock& bout = model.branch().layout().output();
  Eigen::Map<Eigen::MatrixXd> w(model.parameters().data() + bout.offset, bout.rows, bout.cols);
  w.topRows(q).setZero();
  model.parameters().segment(bout.bias_offset(), q).setZero();

  Eigen::VectorXd grad(model.parameters().size());
  model.loss_and_gradient(model.normalize(data), cols, grad);
  const Eigen::Index nb = model.branch().parameter_count();
  const AffineBlock& tout = model.trunk().layout().output();
  const Eigen::VectorXd g = grad.tail(model.trunk().parameter_count());
  Eigen::Map<const Eigen::MatrixXd> gw(g.data() + tout.offset, tout.rows, tout.cols);
  CHECK(gw.topRows(q).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(g.segment(tout.bias_offset(), q).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(nb + model.trunk().parameter_count() == model.parameters().size());
}

TEST_CASE("doubling the label residual doubles the output-bias gradient") {
  DeepONetModel model = DeepONetModel::create(small_config(Architecture::modified_fc, Activation::tanh, 1), 8);
  TrainingData data = make_training_data(samples(12, 1, OutputMode::incremental, 5),
                                         OutputMode::incremental, OutputMode::incremental);
  const auto cols = all_columns(data.size());
  model.fit_normalization(data, cols);
  TrainingData norm = model.normalize(data);
  Eigen::VectorXd g1(model.parameters().size()), g2(model.parameters().size());
  model.loss_and_gradient(norm, cols, g1);
  const Eigen::MatrixXd pred = model.forward_normalized(norm.branch, norm.step);
  norm.label = pred - 2.0 * (pred - norm.label);
  model.loss_and_gradient(norm, cols, g2);
  const AffineBlock& bout = model.branch().layout().output();
  const Eigen::VectorXd b1 = g1.segment(bout.bias_offset(), bout.rows);
  const Eigen::VectorXd b2 = g2.segment(bout.bias_offset(), bout.rows);
  CHECK((b2 - 2.0 * b1).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, b1.cwiseAbs().maxCoeff()));
}

TEST_CASE("standardizer round trip and floor") {
  Eigen::MatrixXd v(3, 5);
  v << 1, 2, 3, 4, 5,
       7, 7, 7, 7, 7,
       -1e3, 2e3, 0, 5, 1;
  const Standardizer s = Standardizer::fit(v);
  CHECK(s.std[1] == Standardizer::kStdFloor);
  CHECK(s.std[0] == doctest::Approx(std::sqrt(2.0)));
  CHECK((s.denormalize(s.normalize(v)) - v).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("branch features") {
  SensorWindow w;
  w.values.resize(2, 2);
  w.values << 1, 2,
              3, 4;
  w.offsets = Eigen::Vector2d(0.0, 0.03);
  const Eigen::VectorXd f = branch_features(State(0.1, 0.2, 0.3, 0.4), w);
  REQUIRE(f.size() == branch_feature_dim(2));
  Eigen::VectorXd expected(10);
  expected << 0.1, 0.2, 0.3, 0.4, 1, 3, 2, 4, 0.0, 0.03;
  CHECK(f == expected);
  CHECK(branch_features(State::Zero(), SensorWindow::frozen(InterfaceInput(5, 6))).size() == 6);
}

TEST_CASE("full and incremental labels convert through the state") {
  const auto full = samples(5, 1, OutputMode::full, 2);
  const TrainingData inc = make_training_data(full, OutputMode::full, OutputMode::incremental);
  for (Eigen::Index k = 0; k < 5; ++k)
    CHECK((inc.label.col(k) - (full[static_cast<std::size_t>(k)].label - full[static_cast<std::size_t>(k)].x)).norm() == 0.0);
  CHECK_THROWS_AS(make_training_data(full, OutputMode::residual, OutputMode::full), Error);
}

TEST_CASE("training configuration guards") {
  TrainingConfig cfg;
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = TrainingConfig{};
  cfg.validation_fraction = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  DeepONetModel model = DeepONetModel::create(small_config(Architecture::plain, Activation::tanh, 1), 1);
  const auto data = make_training_data(samples(9, 1, OutputMode::incremental, 1),
                                       OutputMode::incremental, OutputMode::incremental);
  CHECK_THROWS_AS(train(model, data, TrainingConfig{}), Error);
}

TEST_CASE("plateau scheduler halves after the patience window") {
  PlateauScheduler s(1.0, PlateauConfig{0.5, 2, 0.1, 1e-4});
  CHECK(s.step(1.0) == 1.0);
  CHECK(s.step(1.0) == 1.0);
  CHECK(s.step(1.0) == 1.0);
  CHECK(s.step(1.0) == 0.5);  // third bad epoch exceeds patience 2
  CHECK(s.step(0.5) == 0.5);
  for (int i = 0; i < 20; ++i) s.step(0.5);
  CHECK(s.learning_rate() == 0.1);
}

TEST_CASE("adam first step moves each parameter by the learning rate") {
  Adam adam(3, 0.9, 0.999, 1e-8);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(3);
  adam.step(p, Eigen::Vector3d(2.0, -0.5, 0.0), 0.1);
  CHECK(p[0] == doctest::Approx(-0.1));
  CHECK(p[1] == doctest::Approx(0.1));
  CHECK(p[2] == 0.0);
}

TEST_CASE("split is seeded and disjoint") {
  Rng a(1), b(1);
  const DataSplit s1 = split_indices(100, 0.2, a);
  const DataSplit s2 = split_indices(100, 0.2, b);
  CHECK(s1.validation.size() == 20);
  CHECK(s1.train == s2.train);
  std::vector<Eigen::Index> all = s1.train;
  all.insert(all.end(), s1.validation.begin(), s1.validation.end());
  std::sort(all.begin(), all.end());
  CHECK(all == all_columns(100));
}

TEST_CASE("training is deterministic and descends") {
  const auto data = make_training_data(samples(200, 1, OutputMode::incremental, 6),
                                       OutputMode::incremental, OutputMode::incremental);
  TrainingConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 64;
  cfg.seed = 12;
  auto run = [&] {
    DeepONetModel model = DeepONetModel::create(small_config(Architecture::modified_fc, Activation::leaky_relu, 1), 4);
    TrainingReport r = train(model, data, cfg);
    return std::make_pair(r, model.parameters());
  };
  const auto [r1, p1] = run();
  const auto [r2, p2] = run();
  REQUIRE(r1.history.size() == 40);
  for (std::size_t i = 0; i < r1.history.size(); ++i) {
    CHECK(r1.history[i].train_loss == r2.history[i].train_loss);
    CHECK(r1.history[i].validation_loss == r2.history[i].validation_loss);
  }
  CHECK(p1 == p2);
  CHECK(r1.history.back().train_loss < r1.history.front().train_loss);
  CHECK(r1.train_count == 160);
  CHECK(r1.best_validation_loss == std::min_element(r1.history.begin(), r1.history.end(),
                                                    [](auto& a, auto& b) { return a.validation_loss < b.validation_loss; })
                                       ->validation_loss);
}

TEST_CASE("zero residual labels are learned") {
  const auto& s = test::default_setup();
  GeneratorParams gp = s.gp;
  LabelConfig lc;
  lc.approx_beta = gp.beta;  // approximate model equals the truth
  const auto raw = build_training_set(200, SamplingProcedure::state_input, OutputMode::residual,
                                      SensorSpec{}, s.ranges, gp, s.grid, 3, lc);
  for (const auto& d : raw) REQUIRE(d.label.cwiseAbs().maxCoeff() == 0.0);
  const auto data = make_training_data(raw, OutputMode::residual, OutputMode::residual);
  DeepONetModel model = DeepONetModel::create(small_config(Architecture::modified_fc, Activation::leaky_relu, 1, OutputMode::residual), 2);
  TrainingConfig cfg;
  cfg.epochs = 1000;
  cfg.batch_size = 64;
  cfg.plateau.patience = 20;
  const TrainingReport r = train(model, data, cfg);
  CHECK(r.history.back().train_loss <= 1e-6);
}

TEST_CASE("divergence surfaces with a finite checkpoint") {
  const auto data = make_training_data(samples(40, 1, OutputMode::incremental, 6),
                                       OutputMode::incremental, OutputMode::incremental);
  DeepONetModel model = DeepONetModel::create(small_config(Architecture::plain, Activation::leaky_relu, 1), 4);
  TrainingConfig cfg;
  cfg.epochs = 50;
  cfg.learning_rate = 1e300;
  try {
    train(model, data, cfg);
    FAIL("expected divergence");
  } catch (const TrainingDiverged& e) {
    CHECK(e.checkpoint().allFinite());
    CHECK(std::string(e.what()).find("training diverged") != std::string::npos);
  }
}
