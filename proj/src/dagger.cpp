#include "gridop/dagger.hpp"

#include <algorithm>
#include <cmath>

namespace gridop {

void DaggerConfig::validate() const {
  if (n_iter < 1) throw Error("dagger: n_iter must be >= 1");
  if (n_rollout < 1) throw Error("dagger: n_rollout must be >= 1");
  if (!(warm_epoch_fraction > 0.0 && warm_epoch_fraction <= 1.0))
    throw Error("dagger: warm_epoch_fraction must lie in (0, 1]");
  training.validate();
}

std::vector<VisitedPoint> collect_visited(const Trajectory& trajectory) {
  std::vector<VisitedPoint> out;
  const Eigen::Index steps = std::min(trajectory.size(), trajectory.partition.steps() + 1) - 1;
  out.reserve(static_cast<std::size_t>(std::max<Eigen::Index>(steps, 0)));
  for (Eigen::Index n = 0; n < steps; ++n)
    out.push_back({trajectory.states.col(n), trajectory.inputs.col(n), trajectory.partition.step(n)});
  return out;
}

std::vector<DatasetSample> label_visited(std::span<const VisitedPoint> points, OutputMode mode,
                                         const GeneratorParams& gp, const LabelConfig& cfg) {
  std::vector<DatasetSample> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    DatasetSample s;
    s.x = p.x;
    s.sensors = SensorWindow::frozen(p.y);
    s.h = p.h;
    s.label = make_label(p.x, s.sensors, p.h, mode, gp, cfg);
    out.push_back(std::move(s));
  }
  return out;
}

DaggerResult run_dagger(std::vector<DatasetSample> initial, const DeepONetModel& model_template,
                        const DaggerConfig& cfg, const GeneratorParams& gp, const GridParams& grid,
                        const State& x_star,
                        const std::function<void(const DaggerIteration&)>& on_iteration) {
  cfg.validate();
  if (initial.empty()) throw Error("dagger: initial dataset is empty");
  if (model_template.sensors() != 1) throw Error("dagger: closed-loop rollouts need one sensor");
  const OutputMode mode = model_template.mode();
  const TimePartition partition = TimePartition::uniform(cfg.t_end, cfg.h);

  DaggerResult result;
  result.aggregate = std::move(initial);
  result.model = model_template;
  for (int k = 1; k <= cfg.n_iter; ++k) {
    DaggerIteration it;
    it.iteration = k;
    TrainingConfig tc = cfg.training;
    tc.seed = cfg.training.seed + static_cast<std::uint64_t>(k - 1);
    if (k > 1 && cfg.warm_start)
      tc.epochs = std::max(1, static_cast<int>(std::lround(cfg.training.epochs * cfg.warm_epoch_fraction)));
    else
      result.model = model_template;
    it.aggregate_size = static_cast<Eigen::Index>(result.aggregate.size());
    it.report = train(result.model, make_training_data(result.aggregate, mode, mode), tc);

    std::vector<DatasetSample> fresh;
    for (int r = 0; r < cfg.n_rollout; ++r) {
      Rng rng = substream(cfg.seed, static_cast<std::uint64_t>(k) * 1000003ULL + static_cast<std::uint64_t>(r));
      State x0 = x_star;
      x0[kOmega] *= uniform(rng, cfg.gamma.lo, cfg.gamma.hi);
      Trajectory visited;
      try {
        visited = rollout(result.model, x0, partition, gp, ClosedLoop{grid, {}}, cfg.rollout);
      } catch (const RolloutDiverged& e) {
        ++it.diverged;
        visited = e.partial();
      }
      const auto points = collect_visited(visited);
      auto labeled = label_visited(points, mode, gp, cfg.label);
      fresh.insert(fresh.end(), std::make_move_iterator(labeled.begin()),
                   std::make_move_iterator(labeled.end()));
    }
    it.collected = static_cast<Eigen::Index>(fresh.size());
    result.aggregate.insert(result.aggregate.end(), std::make_move_iterator(fresh.begin()),
                            std::make_move_iterator(fresh.end()));
    it.model = result.model;
    if (on_iteration) on_iteration(it);
    result.iterations.push_back(std::move(it));
  }
  return result;
}

}  // namespace gridop
