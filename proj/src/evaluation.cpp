#include "gridop/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gridop {

double l2_relative_error(const Eigen::RowVectorXd& pred, const Eigen::RowVectorXd& truth) {
  if (pred.size() != truth.size()) throw Error("l2 error: series lengths differ");
  return 100.0 * (pred - truth).norm() / std::max(truth.norm(), kL2DenominatorFloor);
}

double l2_relative_error(const Trajectory& pred, const Trajectory& truth, Eigen::Index quantity) {
  if (!pred.partition.matches(truth.partition) || pred.size() != truth.size())
    throw Error("l2 error: partition mismatch");
  return l2_relative_error(pred.quantity(quantity), truth.quantity(quantity));
}

Eigen::MatrixXd per_trajectory_errors(std::span<const Trajectory> pred,
                                      std::span<const Trajectory> truth) {
  if (pred.size() != truth.size()) throw Error("error table: set sizes differ");
  Eigen::MatrixXd e(static_cast<Eigen::Index>(pred.size()), kQuantityCount);
  for (std::size_t k = 0; k < pred.size(); ++k)
    for (Eigen::Index q = 0; q < kQuantityCount; ++q)
      e(static_cast<Eigen::Index>(k), q) = l2_relative_error(pred[k], truth[k], q);
  return e;
}

ErrorTable error_table(const Eigen::MatrixXd& per_trajectory) {
  if (per_trajectory.rows() == 0) throw Error("error table: empty set");
  ErrorTable t;
  t.count = per_trajectory.rows();
  for (Eigen::Index q = 0; q < kQuantityCount; ++q) {
    const Eigen::VectorXd c = per_trajectory.col(q);
    const double mean = c.mean();
    t.mean[static_cast<std::size_t>(q)] = mean;
    t.std[static_cast<std::size_t>(q)] =
        std::sqrt((c.array() - mean).square().sum() / static_cast<double>(c.size()));
  }
  return t;
}

ErrorTable error_table(std::span<const Trajectory> pred, std::span<const Trajectory> truth) {
  return error_table(per_trajectory_errors(pred, truth));
}

Trajectory hold_last(const Trajectory& partial, const TimePartition& partition) {
  Trajectory t(partition, partial.provenance);
  const Eigen::Index n = partial.size();
  if (n == 0) throw Error("hold_last: empty trajectory");
  for (Eigen::Index k = 0; k < t.size(); ++k) {
    const Eigen::Index src = std::min(k, n - 1);
    t.states.col(k) = partial.states.col(src);
    t.inputs.col(k) = partial.inputs.col(src);
  }
  return t;
}

SuiteRollout rollout_suite(const SuitePredictor& predictor, std::span<const TestCase> suite,
                           const GridParams& grid) {
  SuiteRollout out;
  out.predictions.reserve(suite.size());
  for (std::size_t k = 0; k < suite.size(); ++k) {
    const TestCase& c = suite[k];
    try {
      out.predictions.push_back(predictor(c, ClosedLoop{grid, c.faults}));
    } catch (const RolloutDiverged& e) {
      out.diverged.push_back(static_cast<Eigen::Index>(k));
      out.predictions.push_back(hold_last(e.partial(), c.truth.partition));
    }
  }
  return out;
}

SuiteRollout rollout_suite(const DeepONetModel& model, std::span<const TestCase> suite,
                           const GeneratorParams& gp, const GridParams& grid,
                           const RolloutOptions& opts) {
  return rollout_suite(
      [&](const TestCase& c, const InputProvider& p) {
        return rollout(model, c.x0, c.truth.partition, gp, p, opts);
      },
      suite, grid);
}

SuiteRollout rollout_suite(const FnnModel& model, std::span<const TestCase> suite,
                           const GeneratorParams& gp, const GridParams& grid,
                           const RolloutOptions& opts) {
  return rollout_suite(
      [&](const TestCase& c, const InputProvider& p) {
        return rollout_fnn(model, c.x0, c.truth.partition, gp, p, opts);
      },
      suite, grid);
}

std::vector<Trajectory> truths(std::span<const TestCase> suite) {
  std::vector<Trajectory> t;
  t.reserve(suite.size());
  for (const auto& c : suite) t.push_back(c.truth);
  return t;
}

namespace {

InterfaceInput draw_input(const SamplingRanges& r, Rng& rng) {
  InterfaceInput y;
  for (Eigen::Index i = 0; i < kInputDim; ++i)
    y[i] = uniform(rng, r.input[static_cast<std::size_t>(i)].lo, r.input[static_cast<std::size_t>(i)].hi);
  return y;
}

}  // namespace

double estimate_lipschitz(const VectorField& f, const SamplingRanges& ranges, Eigen::Index n_probe,
                          Rng& rng, double inflation) {
  if (n_probe < 2) throw Error("lipschitz: need at least two probes");
  double best = 0.0;
  for (Eigen::Index k = 0; k < n_probe; ++k) {
    const State x1 = sample_state(ranges, rng);
    const State x2 = sample_state(ranges, rng);
    const InterfaceInput y1 = draw_input(ranges, rng);
    const InterfaceInput y2 = draw_input(ranges, rng);
    const State f11 = f(x1, y1);
    const double dx = (x1 - x2).norm();
    const double dy = (y1 - y2).norm();
    if (dx > 0.0) best = std::max(best, (f11 - f(x2, y1)).norm() / dx);
    if (dy > 0.0) best = std::max(best, (f11 - f(x1, y2)).norm() / dy);
  }
  return inflation * best;
}

double estimate_lipschitz_f(const GeneratorParams& gp, const SamplingRanges& ranges,
                            Eigen::Index n_probe, Rng& rng, double inflation) {
  return estimate_lipschitz(
      [&gp](const State& x, const InterfaceInput& y) { return two_axis_rhs(x, y, gp); }, ranges,
      n_probe, rng, inflation);
}

void BoundInputs::validate() const {
  if (lipschitz < 0.0 || flow_lipschitz < 0.0 || eps < 0.0 || kappa < 0.0 || n < 0)
    throw Error("bound inputs must be nonnegative");
  if (!(h > 0.0)) throw Error("bound inputs: h must be > 0");
}

namespace {

/// sum_{k<n} a^k for a = exp(log_a), using the limit n near a = 1.
double geometric_sum(double a, Eigen::Index n) {
  if (n == 0) return 0.0;
  if (std::abs(a - 1.0) < 1e-9) return static_cast<double>(n);
  if (a == 0.0) return 1.0;
  return std::expm1(static_cast<double>(n) * std::log(a)) / (a - 1.0);
}

}  // namespace

double cumulative_bound(const BoundInputs& b) {
  b.validate();
  const double lh = b.lipschitz * b.h;
  const double e = lh * b.kappa * std::exp(lh);
  const double r_sum = std::abs(lh) < 1e-9
                           ? static_cast<double>(b.n)
                           : std::expm1(static_cast<double>(b.n) * lh) / std::expm1(lh);
  return r_sum * e + geometric_sum(b.flow_lipschitz, b.n) * b.eps;
}

Eigen::Index BoundReport::satisfied_count() const {
  return static_cast<Eigen::Index>(
      std::count_if(rollouts.begin(), rollouts.end(), [](const BoundRollout& r) { return r.satisfied(); }));
}

double estimate_flow_lipschitz(const GeneratorParams& gp, const SamplingRanges& ranges, double h,
                               Eigen::Index n_probe, Rng& rng, int substeps, double inflation) {
  if (n_probe < 2) throw Error("flow lipschitz: need at least two probes");
  double best = 0.0;
  for (Eigen::Index k = 0; k < n_probe; ++k) {
    const State x1 = sample_state(ranges, rng);
    const State x2 = sample_state(ranges, rng);
    const FrozenInput y{draw_input(ranges, rng)};
    const double dx = (x1 - x2).norm();
    if (dx == 0.0) continue;
    best = std::max(best,
                    (integrate(x1, h, substeps, gp, y) - integrate(x2, h, substeps, gp, y)).norm() / dx);
  }
  return inflation * best;
}

double estimate_kappa(const Trajectory& truth, const GeneratorParams& gp, const GridParams& grid,
                      int substeps) {
  double kappa = 0.0;
  const TimePartition& p = truth.partition;
  for (Eigen::Index n = 0; n + 1 < truth.size(); ++n) {
    const InterfaceInput y0 = truth.inputs.col(n);
    const double hs = p.step(n) / substeps;
    State x = truth.states.col(n);
    for (int k = 0; k < substeps; ++k) {
      x = rk4_step(x, hs, gp, ResolveNetwork{grid});
      kappa = std::max(kappa, (solve_network(x, gp, grid) - y0).norm());
    }
  }
  return kappa;
}

double estimate_residual_eps(const DeepONetModel& model, const GeneratorParams& gp,
                             const GridParams& grid, const SamplingRanges& ranges,
                             Eigen::Index n_probe, std::uint64_t seed, const LabelConfig& label) {
  if (model.mode() != OutputMode::residual) throw Error("eps estimate needs a residual model");
  const SensorSpec sensors{model.sensors(),
                           model.sensors() == 1 ? SensorRule::singleton : SensorRule::fixed_plus_uniform};
  const auto probes = build_training_set(n_probe, SamplingProcedure::state_input,
                                         OutputMode::residual, sensors, ranges, gp, grid, seed, label);
  double eps = 0.0;
  for (const auto& s : probes)
    eps = std::max(eps, (model.predict(s.x, s.sensors, s.h) - s.label).norm());
  return eps;
}

BoundReport check_bound(std::span<const Trajectory> truth, std::span<const Trajectory> pred,
                        const BoundConstants& c, double h) {
  if (truth.size() != pred.size()) throw Error("bound check: set sizes differ");
  BoundReport rep;
  rep.constants = c;
  Eigen::Index points = truth.empty() ? 0 : truth.front().size();
  rep.bound.resize(points);
  for (Eigen::Index n = 0; n < points; ++n)
    rep.bound[n] = cumulative_bound({c.lipschitz, c.flow_lipschitz, c.eps, c.kappa, h, n});
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (truth[k].size() != points || pred[k].size() != points)
      throw Error("bound check: trajectories must share one partition");
    BoundRollout r;
    r.error = (truth[k].states - pred[k].states).colwise().norm().transpose();
    for (Eigen::Index n = 0; n < points && r.first_violation < 0; ++n)
      if (!(r.error[n] <= rep.bound[n])) r.first_violation = n;
    rep.rollouts.push_back(std::move(r));
  }
  return rep;
}

BoundReport verify_bound(const DeepONetModel& model, const GeneratorParams& gp,
                         const GridParams& grid, const State& x_star,
                         const TimePartition& partition, const SamplingRanges& ranges,
                         std::uint64_t seed, const BoundConfig& cfg) {
  if (model.mode() != OutputMode::residual) throw Error("verify_bound needs a residual model");
  const auto suite = build_test_suite(SuiteKind::gamma_perturbed, cfg.n_rollouts, partition, gp,
                                      grid, x_star, seed, cfg.suite);
  const SuiteRollout pred = rollout_suite(model, suite, gp, grid, cfg.rollout);
  const std::vector<Trajectory> truth = truths(suite);

  Rng rng(mix_seed(seed ^ 0xb0b0b0b0ULL));
  BoundConstants c;
  c.lipschitz = estimate_lipschitz_f(gp, ranges, cfg.lipschitz_probes, rng, cfg.inflation);
  c.flow_lipschitz = estimate_flow_lipschitz(gp, ranges, partition.max_step(), cfg.lipschitz_probes,
                                             rng, cfg.label.substeps, cfg.inflation);
  c.eps = cfg.inflation * estimate_residual_eps(model, gp, grid, ranges, cfg.eps_probes,
                                                mix_seed(seed + 1), cfg.label);
  for (const auto& t : truth)
    c.kappa = std::max(c.kappa, cfg.inflation * estimate_kappa(t, gp, grid, cfg.kappa_substeps));

  BoundReport rep = check_bound(truth, pred.predictions, c, partition.max_step());
  for (std::size_t k = 0; k < suite.size(); ++k) rep.rollouts[k].gamma = suite[k].gamma;
  return rep;
}

}  // namespace gridop
