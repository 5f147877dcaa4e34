#pragma once

#include "gridop/trajectory.hpp"
#include "gridop/types.hpp"

#include <Eigen/Core>

#include <cmath>
#include <span>
#include <variant>
#include <vector>

namespace gridop {

/// Two-axis machine constants. Reactances in p.u., time constants in seconds.
struct GeneratorParams {
  double t_d0_prime = 6.0;
  double t_q0_prime = 0.5;
  double x_d = 1.2;
  double x_d_prime = 0.25;
  double x_q = 1.1;
  double x_q_prime = 0.45;
  double inertia = 4.0;  // H (s)
  double damping = 2.0;  // D (p.u.)
  double omega_s = 1.0;
  double e_fld = 0.0;
  double t_m = 0.0;
  /// Scales the damping term; 1 is the true machine, < 1 a lower-fidelity model.
  double beta = 1.0;
  /// Multiplier on d(delta)/dt. 1 keeps speed and angle rate in the same per-unit.
  double omega_base = 1.0;

  void validate() const;
  [[nodiscard]] GeneratorParams with_beta(double b) const {
    GeneratorParams p = *this;
    p.beta = b;
    return p;
  }
};

/// Infinite bus behind an external impedance.
struct GridParams {
  double r_s = 0.0;
  double r_e = 0.02;
  double x_ep = 0.3;
  double v_inf = 1.0;
  double theta_inf = 0.0;

  void validate() const;
};

struct FaultEvent {
  double t_start = 1.0;
  double duration = 0.1;
  GridParams faulted_grid;

  void validate() const;
  [[nodiscard]] bool active(double t) const;
};

/// Grid in force at time t: the first active fault wins, otherwise `base`.
const GridParams& grid_at(double t, const GridParams& base, std::span<const FaultEvent> faults);

template <typename Scalar>
Scalar electrical_torque(const StateT<Scalar>& x, const InterfaceInputT<Scalar>& y,
                         const GeneratorParams& gp) {
  return x[kEdPrime] * y[kId] + x[kEqPrime] * y[kIq] +
         Scalar(gp.x_q_prime - gp.x_d_prime) * y[kId] * y[kIq];
}

/// Right-hand side of the two-axis model with the interface currents held at y.
template <typename Scalar>
StateT<Scalar> two_axis_rhs(const StateT<Scalar>& x, const InterfaceInputT<Scalar>& y,
                            const GeneratorParams& gp) {
  if (!x.allFinite() || !y.allFinite()) throw Error("non-finite state");
  const Scalar slip = x[kOmega] - Scalar(gp.omega_s);
  const Scalar t_e = electrical_torque(x, y, gp);
  StateT<Scalar> dx;
  dx[kDelta] = Scalar(gp.omega_base) * slip;
  dx[kOmega] = Scalar(gp.omega_s / (2.0 * gp.inertia)) *
               (Scalar(gp.t_m) - t_e - Scalar(gp.beta * gp.damping) * slip);
  dx[kEdPrime] = (-x[kEdPrime] + Scalar(gp.x_q - gp.x_q_prime) * y[kIq]) / Scalar(gp.t_q0_prime);
  dx[kEqPrime] = (-x[kEqPrime] - Scalar(gp.x_d - gp.x_d_prime) * y[kId] + Scalar(gp.e_fld)) /
                 Scalar(gp.t_d0_prime);
  return dx;
}

/// Stator/network algebraic equations of the infinite bus:
///   (R_s+R_e) I_d - (X'q+X_ep) I_q = E'd - V sin(delta - theta)
///   (R_s+R_e) I_q + (X'd+X_ep) I_d = E'q - V cos(delta - theta)
Eigen::Matrix2d network_matrix(const GeneratorParams& gp, const GridParams& grid);
InterfaceInput solve_network(const State& x, const GeneratorParams& gp, const GridParams& grid);
/// Left minus right side of both network equations.
Eigen::Vector2d network_residual(const State& x, const InterfaceInput& y, const GeneratorParams& gp,
                                 const GridParams& grid);

/// Every RK4 stage re-solves the network on the stage state.
struct ResolveNetwork {
  GridParams grid;
};
/// Every stage uses the same interface input (single sensor at the step start).
struct FrozenInput {
  InterfaceInput y;
};
using Coupling = std::variant<ResolveNetwork, FrozenInput, SensorWindow>;

/// One classical RK4 step of length h. `t_offset` locates the step inside a sensor window.
State rk4_step(const State& x, double h, const GeneratorParams& gp, const Coupling& coupling,
               double t_offset = 0.0);

/// `substeps` equal RK4 steps covering [0, h].
State integrate(const State& x, double h, int substeps, const GeneratorParams& gp,
                const Coupling& coupling);

/// Reference trajectory: each macro step is `substeps` RK4 steps with the network re-solved at
/// every stage against the grid in force at the macro step start.
Trajectory simulate_truth(const State& x0, const TimePartition& partition, const GeneratorParams& gp,
                          const GridParams& grid, std::span<const FaultEvent> faults = {},
                          int substeps = 8);

/// Constants E_fld, T_M that make (delta, omega_s, E'd, E'q) an equilibrium for the given
/// rotor angle and q-axis EMF. E'd is found from the d-axis balance.
struct OperatingPoint {
  GeneratorParams params;
  State equilibrium;
};
OperatingPoint back_solve_operating_point(const GeneratorParams& gp, const GridParams& grid,
                                          double delta, double e_q_prime);

/// Damped Newton on f(x, solve_network(x)) = 0 with beta forced to 1.
State find_equilibrium(const GeneratorParams& gp, const GridParams& grid, const State& guess);

/// f(x, solve_network(x)) for the true model.
StateDerivative closed_loop_rhs(const State& x, const GeneratorParams& gp, const GridParams& grid);

}  // namespace gridop
