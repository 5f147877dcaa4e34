#include "gridop/grid_dynamics.hpp"

#include <Eigen/LU>

#include <cmath>
#include <string>

namespace gridop {

void GeneratorParams::validate() const {
  if (!(t_d0_prime > 0.0)) throw Error("generator: T'd0 must be positive");
  if (!(t_q0_prime > 0.0)) throw Error("generator: T'q0 must be positive");
  if (!(inertia > 0.0)) throw Error("generator: H must be positive");
  if (!(x_d_prime > 0.0) || x_d < x_d_prime) throw Error("generator: need X_d >= X'd > 0");
  if (!(x_q_prime > 0.0) || x_q < x_q_prime) throw Error("generator: need X_q >= X'q > 0");
  if (!(beta >= 0.0 && beta <= 1.0)) throw Error("generator: beta must lie in [0, 1]");
  if (!(omega_s > 0.0)) throw Error("generator: omega_s must be positive");
}

void GridParams::validate() const {
  if (!(v_inf >= 0.0)) throw Error("grid: V_inf must be non-negative");
  if (!std::isfinite(r_s) || !std::isfinite(r_e) || !std::isfinite(x_ep) || !std::isfinite(theta_inf))
    throw Error("grid: non-finite parameter");
}

void FaultEvent::validate() const {
  if (!(t_start >= 0.0)) throw Error("fault: t_start must be non-negative");
  if (!(duration > 0.0)) throw Error("fault: duration must be positive");
  faulted_grid.validate();
}

namespace {
// Partition points built as n*h sit within a few ulps of the nominal switching times.
constexpr double kEventTol = 1e-9;
}  // namespace

bool FaultEvent::active(double t) const {
  return t >= t_start - kEventTol && t < t_start + duration - kEventTol;
}

const GridParams& grid_at(double t, const GridParams& base, std::span<const FaultEvent> faults) {
  for (const auto& f : faults) {
    if (f.active(t)) return f.faulted_grid;
  }
  return base;
}

Eigen::Matrix2d network_matrix(const GeneratorParams& gp, const GridParams& grid) {
  const double r = grid.r_s + grid.r_e;
  Eigen::Matrix2d a;
  a << r, -(gp.x_q_prime + grid.x_ep),
       gp.x_d_prime + grid.x_ep, r;
  return a;
}

namespace {

Eigen::Vector2d network_rhs(const State& x, const GridParams& grid) {
  const double angle = x[kDelta] - grid.theta_inf;
  return {x[kEdPrime] - grid.v_inf * std::sin(angle), x[kEqPrime] - grid.v_inf * std::cos(angle)};
}

}  // namespace

InterfaceInput solve_network(const State& x, const GeneratorParams& gp, const GridParams& grid) {
  const Eigen::Matrix2d a = network_matrix(gp, grid);
  if (std::abs(a.determinant()) < 1e-12) throw Error("singular network");
  if (!x.allFinite()) throw Error("non-finite state");
  return a.partialPivLu().solve(network_rhs(x, grid));
}

Eigen::Vector2d network_residual(const State& x, const InterfaceInput& y, const GeneratorParams& gp,
                                 const GridParams& grid) {
  return network_matrix(gp, grid) * y - network_rhs(x, grid);
}

namespace {

InterfaceInput stage_input(const State& x, double s, const GeneratorParams& gp, const Coupling& c) {
  return std::visit(
      [&](const auto& mode) -> InterfaceInput {
        using T = std::decay_t<decltype(mode)>;
        if constexpr (std::is_same_v<T, ResolveNetwork>) {
          return solve_network(x, gp, mode.grid);
        } else if constexpr (std::is_same_v<T, FrozenInput>) {
          return mode.y;
        } else {
          return mode.at(s);
        }
      },
      c);
}

}  // namespace

State rk4_step(const State& x, double h, const GeneratorParams& gp, const Coupling& coupling,
               double t_offset) {
  if (!(h > 0.0)) throw Error("rk4 step requires h > 0");
  auto f = [&](const State& z, double s) {
    return two_axis_rhs<double>(z, stage_input(z, s, gp, coupling), gp);
  };
  const State k1 = f(x, t_offset);
  const State k2 = f(x + 0.5 * h * k1, t_offset + 0.5 * h);
  const State k3 = f(x + 0.5 * h * k2, t_offset + 0.5 * h);
  const State k4 = f(x + h * k3, t_offset + h);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

State integrate(const State& x, double h, int substeps, const GeneratorParams& gp,
                const Coupling& coupling) {
  if (substeps < 1) throw Error("integrate requires at least one substep");
  const double hs = h / substeps;
  State z = x;
  for (int k = 0; k < substeps; ++k) z = rk4_step(z, hs, gp, coupling, k * hs);
  return z;
}

Trajectory simulate_truth(const State& x0, const TimePartition& partition, const GeneratorParams& gp,
                          const GridParams& grid, std::span<const FaultEvent> faults, int substeps) {
  if (substeps < 1) throw Error("simulate_truth requires substeps >= 1");
  Trajectory traj(partition, Provenance::truth);
  State x = x0;
  const Eigen::Index m = partition.steps();
  for (Eigen::Index n = 0; n <= m; ++n) {
    const GridParams& g = grid_at(partition.t(n), grid, faults);
    traj.states.col(n) = x;
    traj.inputs.col(n) = solve_network(x, gp, g);
    if (n < m) x = integrate(x, partition.step(n), substeps, gp, ResolveNetwork{g});
  }
  return traj;
}

StateDerivative closed_loop_rhs(const State& x, const GeneratorParams& gp, const GridParams& grid) {
  return two_axis_rhs<double>(x, solve_network(x, gp, grid), gp);
}

OperatingPoint back_solve_operating_point(const GeneratorParams& gp, const GridParams& grid,
                                          double delta, double e_q_prime) {
  gp.validate();
  // The network solution is affine in E'd; the d-axis balance E'd = (X_q - X'q) I_q is then linear.
  State x{delta, gp.omega_s, 0.0, e_q_prime};
  const InterfaceInput y0 = solve_network(x, gp, grid);
  State unit = x;
  unit[kEdPrime] = 1.0;
  const double slope = solve_network(unit, gp, grid)[kIq] - y0[kIq];
  const double gain = gp.x_q - gp.x_q_prime;
  const double denom = 1.0 - gain * slope;
  if (std::abs(denom) < 1e-12) throw Error("operating point: degenerate d-axis balance");
  x[kEdPrime] = gain * y0[kIq] / denom;

  const InterfaceInput y = solve_network(x, gp, grid);
  OperatingPoint op{gp, x};
  op.params.e_fld = e_q_prime + (gp.x_d - gp.x_d_prime) * y[kId];
  op.params.t_m = electrical_torque<double>(x, y, gp);
  return op;
}

State find_equilibrium(const GeneratorParams& gp, const GridParams& grid, const State& guess) {
  if (!guess.allFinite()) throw Error("equilibrium guess must be finite");
  const GeneratorParams truth = gp.with_beta(1.0);
  auto residual = [&](const State& x) { return closed_loop_rhs(x, truth, grid); };

  State x = guess;
  State fx = residual(x);
  for (int iter = 0; iter < 100; ++iter) {
    if (fx.lpNorm<Eigen::Infinity>() <= 1e-10) return x;
    Eigen::Matrix4d jac;
    for (int j = 0; j < 4; ++j) {
      const double step = 1e-7 * (1.0 + std::abs(x[j]));
      State xp = x, xm = x;
      xp[j] += step;
      xm[j] -= step;
      jac.col(j) = (residual(xp) - residual(xm)) / (2.0 * step);
    }
    const State dx = jac.fullPivLu().solve(-fx);
    if (!dx.allFinite()) break;

    double lambda = 1.0;
    State trial = x + dx;
    State ft = residual(trial);
    for (int halving = 0; halving < 8 && ft.norm() >= fx.norm(); ++halving) {
      lambda *= 0.5;
      trial = x + lambda * dx;
      ft = residual(trial);
    }
    x = trial;
    fx = ft;
  }
  if (fx.lpNorm<Eigen::Infinity>() <= 1e-10) return x;
  throw Error("equilibrium not found");
}

}  // namespace gridop
