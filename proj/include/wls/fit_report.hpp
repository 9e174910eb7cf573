#pragma once

#include <vector>

namespace wls {

enum class Exec { kSerial, kParallel };

template <class Config>
struct FitReport {
  std::vector<long> trace_iteration;
  std::vector<double> trace_objective;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  double final_gradient_norm = 0.0;
  long iterations = 0;
  double wall_seconds = 0.0;
  bool stopped_on_tolerance = false;
  // A near-singular marginal covariance was regularized at some iteration.
  bool regularized = false;
  Config config;
};

}  // namespace wls
