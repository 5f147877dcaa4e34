#include "gridop/rollout.hpp"

#include "gridop/data_generation.hpp"

#include <algorithm>
#include <cmath>

namespace gridop {

namespace {

struct InputSource {
  const GeneratorParams& gp;
  const InputProvider& provider;

  [[nodiscard]] bool recorded() const { return std::holds_alternative<Recorded>(provider); }

  InterfaceInput at(const State& x, double t) const {
    if (const auto* r = std::get_if<Recorded>(&provider)) return r->trajectory.input_at(t);
    const auto& c = std::get<ClosedLoop>(provider);
    return solve_network(x, gp, grid_at(t, c.grid, c.faults));
  }

  /// Single sensor at t_n; two sensors at t_n and the step midpoint (recorded inputs only).
  SensorWindow window(const InterfaceInput& y_n, double t, double h, Eigen::Index sensors) const {
    if (sensors == 1) return SensorWindow::frozen(y_n);
    if (sensors != 2 || !recorded())
      throw Error("rollout: multi-sensor rollouts need two sensors and recorded inputs");
    const auto& traj = std::get<Recorded>(provider).trajectory;
    SensorWindow w;
    w.values.resize(2, 2);
    w.values.col(0) = y_n;
    w.values.col(1) = traj.input_at(t + 0.5 * h);
    w.offsets = Eigen::Vector2d(0.0, 0.5 * h);
    return w;
  }
};

void check_provider(const InputProvider& provider, const TimePartition& partition) {
  if (const auto* r = std::get_if<Recorded>(&provider)) {
    const Trajectory& t = r->trajectory;
    if (t.size() < 2 || t.partition.t(t.size() - 1) < partition.t_end() - 1e-12)
      throw Error("rollout: recorded trajectory does not cover the partition");
  }
}

template <typename Advance>
Trajectory march(const State& x0, const TimePartition& partition, const InputSource& src,
                 Provenance prov, const RolloutOptions& opts, Advance&& advance) {
  check_provider(src.provider, partition);
  Trajectory traj(partition, src.recorded() ? Provenance::shadow : prov);
  State x = x0;
  const Eigen::Index steps = partition.steps();
  for (Eigen::Index n = 0;; ++n) {
    const double t = partition.t(n);
    const InterfaceInput y = src.at(x, t);
    traj.states.col(n) = x;
    traj.inputs.col(n) = y;
    if (n == steps) break;
    bool ok = true;
    State next;
    try {
      next = advance(x, y, t, partition.step(n));
      ok = next.allFinite() && next.cwiseAbs().maxCoeff() <= opts.divergence_limit;
    } catch (const Error&) {
      ok = false;
    }
    if (!ok) {
      traj.truncate(n + 1);
      throw RolloutDiverged(n, std::move(traj));
    }
    x = next;
  }
  return traj;
}

}  // namespace

Trajectory rollout_data_driven(const StepFunction& step, OutputMode mode, Eigen::Index sensors,
                               const State& x0, const TimePartition& partition,
                               const GeneratorParams& gp, const InputProvider& provider,
                               const RolloutOptions& opts) {
  if (mode == OutputMode::residual)
    throw Error("rollout_data_driven: model must predict full states or increments");
  const InputSource src{gp, provider};
  return march(x0, partition, src, Provenance::rollout_data_driven, opts,
               [&](const State& x, const InterfaceInput& y, double t, double h) -> State {
                 const State r = step(x, src.window(y, t, h, sensors), h);
                 return mode == OutputMode::incremental ? State(x + r) : r;
               });
}

Trajectory rollout_residual(const StepFunction& residual, Eigen::Index sensors, const State& x0,
                            const TimePartition& partition, const GeneratorParams& gp,
                            const InputProvider& provider, const RolloutOptions& opts) {
  const InputSource src{gp, provider};
  const GeneratorParams approx = gp.with_beta(opts.approx_beta);
  return march(x0, partition, src, Provenance::rollout_residual, opts,
               [&](const State& x, const InterfaceInput& y, double t, double h) -> State {
                 const SensorWindow w = src.window(y, t, h, sensors);
                 const State x_approx =
                     integrate(x, h, opts.approx_substeps, approx, sensor_coupling(w));
                 return x_approx + residual(x, w, h);
               });
}

Trajectory rollout(const DeepONetModel& model, const State& x0, const TimePartition& partition,
                   const GeneratorParams& gp, const InputProvider& provider,
                   const RolloutOptions& opts) {
  const StepFunction f = [&model](const State& x, const SensorWindow& w, double h) {
    return model.predict(x, w, h);
  };
  if (model.mode() == OutputMode::residual)
    return rollout_residual(f, model.sensors(), x0, partition, gp, provider, opts);
  return rollout_data_driven(f, model.mode(), model.sensors(), x0, partition, gp, provider, opts);
}

Trajectory rollout_fnn(const FnnModel& model, const State& x0, const TimePartition& partition,
                       const GeneratorParams& gp, const InputProvider& provider,
                       const RolloutOptions& opts) {
  const StepFunction f = [&model](const State& x, const SensorWindow& w, double h) {
    return model.predict(x, w.values.col(0), h);
  };
  return rollout_data_driven(f, OutputMode::full, 1, x0, partition, gp, provider, opts);
}

Trajectory rollout_approximate(const State& x0, const TimePartition& partition,
                               const GeneratorParams& gp, const InputProvider& provider,
                               const RolloutOptions& opts) {
  const StepFunction zero = [](const State&, const SensorWindow&, double) -> State {
    return State::Zero();
  };
  return rollout_residual(zero, 1, x0, partition, gp, provider, opts);
}

TimePartition irregular_partition(double t_end, Eigen::Index n_points, Rng& rng, double max_step) {
  if (n_points < 2) throw Error("irregular partition: need at least two points");
  if (!(t_end > 0.0) || !(max_step > 0.0)) throw Error("irregular partition: invalid horizon");
  Eigen::VectorXd p(n_points + 1);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    p[0] = 0.0;
    for (Eigen::Index k = 1; k < n_points; ++k) {
      do p[k] = uniform(rng, 0.0, t_end);
      while (p[k] <= 0.0);
    }
    p[n_points] = t_end;
    std::sort(p.begin() + 1, p.end());
    bool ok = true;
    for (Eigen::Index k = 0; k < n_points && ok; ++k) {
      const double step = p[k + 1] - p[k];
      ok = step > 0.0 && step <= max_step;
    }
    if (ok) return TimePartition(p, max_step);
  }
  throw Error("irregular partition: could not satisfy the step bound");
}

}  // namespace gridop
