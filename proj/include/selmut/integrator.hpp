#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "selmut/errors.hpp"
#include "selmut/grid.hpp"
#include "selmut/model.hpp"

namespace selmut {

enum class Scheme { Rk4, ExponentialSplit };

std::string to_string(Scheme s);
Scheme parse_scheme(const std::string& name);

struct IntegratorConfig {
  Scheme scheme = Scheme::ExponentialSplit;
  double dt_init = 1e-3;
  double dt_max = 0.05;
  double rel_tol = 1e-7;
  double abs_tol = 1e-14;
  double t_end = 1.0;
  /// Negative values above -threshold * max(n) are clamped; below, the step is rejected.
  double positivity_clamp_threshold = 1e-12;
  /// Snapshot every save_stride accepted steps; the stride doubles when the budget fills.
  std::size_t save_stride = 1;
  std::size_t snapshot_budget = 512;

  void check() const;
};

struct StepResult {
  std::vector<double> n;
  double dt_used;
  double error_estimate;
  double dt_next;
  double clamped_mass;
  double min_before_clamp;
  int rejections;
};

/// One adaptive step: retries with smaller dt until the step-doubling error
/// estimate meets the tolerances. Throws StiffnessError on dt underflow.
StepResult step(const Model& model, std::span<const double> n, double dt, const IntegratorConfig& config);

/// Single fixed-size step without error control (used by convergence studies).
std::vector<double> fixed_step(const Model& model, std::span<const double> n, double dt, Scheme scheme);

struct StepSample {
  double t;
  double rho;
  double rho_dot;
};

struct Trajectory {
  double eps = 0.0;
  std::vector<double> times;
  std::vector<DensityState> states;
  std::vector<StepSample> steps;
  double clamped_mass = 0.0;
  /// Most negative relative value seen before clamping (min n / max n, <= 0).
  double min_relative_value = 0.0;
  std::size_t rejected_steps = 0;
  bool complete = false;
};

class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, Trajectory partial) : Error(what), partial_(std::move(partial)) {}
  const Trajectory& partial() const noexcept { return partial_; }

 private:
  Trajectory partial_;
};

/// Called after t = 0 and every accepted step.
using StepObserver = std::function<void(const StepSample&, const DensityState&)>;

Trajectory integrate(const Model& model, const DensityState& n0, const IntegratorConfig& config,
                     const StepObserver& observer = {});

}  // namespace selmut
