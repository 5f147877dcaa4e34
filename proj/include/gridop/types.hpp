#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <string_view>

namespace gridop {

template <typename Scalar>
using StateT = Eigen::Matrix<Scalar, 4, 1>;
template <typename Scalar>
using InterfaceInputT = Eigen::Matrix<Scalar, 2, 1>;

/// Generator state in canonical order (delta, omega, E'd, E'q).
using State = StateT<double>;
/// Stator currents (I_d, I_q) closing the generator/network loop.
using InterfaceInput = InterfaceInputT<double>;
using StateDerivative = StateT<double>;

inline constexpr Eigen::Index kStateDim = 4;
inline constexpr Eigen::Index kInputDim = 2;

enum StateIndex : Eigen::Index { kDelta = 0, kOmega = 1, kEdPrime = 2, kEqPrime = 3 };
enum InputIndex : Eigen::Index { kId = 0, kIq = 1 };

/// Base error for every contract violation raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// What a DeepONet is trained to predict over one step.
enum class OutputMode { full, incremental, residual };

std::string_view to_string(OutputMode mode);
OutputMode output_mode_from_string(std::string_view name);

/// Discretized interface input over one step: column k holds y(t_n + d_k).
/// With a single column the input is frozen at the step start.
struct SensorWindow {
  Eigen::Matrix<double, 2, Eigen::Dynamic> values;
  Eigen::VectorXd offsets;

  static SensorWindow frozen(const InterfaceInput& y) {
    SensorWindow w;
    w.values = y;
    w.offsets = Eigen::VectorXd::Zero(1);
    return w;
  }

  [[nodiscard]] Eigen::Index size() const { return values.cols(); }

  /// Piecewise-linear interpolation through the sensors, held constant past the last one.
  [[nodiscard]] InterfaceInput at(double s) const;

  /// Throws unless d_0 = 0, offsets strictly increase and d_k <= h.
  void validate(double h) const;
};

}  // namespace gridop
