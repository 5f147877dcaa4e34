#pragma once

#include "gridop/experiment.hpp"

namespace gridop::test {

/// Default machine at the (0.9 rad, 1.0 p.u.) operating point.
inline const ExperimentSetup& default_setup() {
  static const ExperimentSetup s = make_setup(GeneratorParams{}, GridParams{}, 0.9, 1.0);
  return s;
}

inline State perturbed(const State& x) {
  State p = x;
  p[kDelta] += 0.3;
  p[kOmega] *= 1.05;
  p[kEdPrime] -= 0.05;
  p[kEqPrime] += 0.04;
  return p;
}

}  // namespace gridop::test
