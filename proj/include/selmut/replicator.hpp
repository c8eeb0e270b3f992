#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "selmut/grid.hpp"
#include "selmut/kernels.hpp"
#include "selmut/model.hpp"

namespace selmut {

struct ReplicatorSpec {
  Grid grid;
  TwoPointKernel ks;
  std::function<double(double)> r0;
  double x_M = 0.0;
  std::string r0_name = "R0";
};

/// Closed dynamics of q = n / rho for the generalized no-mutation model,
/// on the fast time scale.
class Replicator {
 public:
  explicit Replicator(ReplicatorSpec spec);

  const ReplicatorSpec& spec() const noexcept { return spec_; }
  const Grid& grid() const noexcept { return spec_.grid; }
  const std::vector<double>& r0_values() const noexcept { return r0_; }

  /// y -> K_S(x_M, y) - R0(y) peaks uniquely at the node nearest x_M.
  bool xm_certified() const noexcept { return xm_certified_; }
  double xm_margin() const noexcept { return xm_margin_; }

  /// K_S q - R0 at every node.
  std::vector<double> fitness(std::span<const double> q) const;
  std::vector<double> rhs(std::span<const double> q) const;
  std::vector<double> rhs(const ProbabilityState& q) const { return rhs(q.values()); }

  double J(std::span<const double> q) const;
  double J(const ProbabilityState& q) const { return J(q.values()); }
  /// Variance of the fitness under q.
  double dJdt(std::span<const double> q) const;
  double dJdt(const ProbabilityState& q) const { return dJdt(q.values()); }
  /// Same quantity through the chain rule along rhs.
  double dJdt_chain(std::span<const double> q) const;
  /// max - min of the fitness on {q > 1e-10 max q}.
  double flatness_residual(std::span<const double> q) const;
  /// Double quadrature of K_S xi xi.
  double quadratic_form(std::span<const double> xi) const;

 private:
  std::vector<double> apply_ks(std::span<const double> f) const;
  void check(std::span<const double> q) const;

  ReplicatorSpec spec_;
  std::optional<Convolver> conv_;
  std::vector<double> dense_;
  std::vector<double> r0_;
  bool xm_certified_ = false;
  double xm_margin_ = 0.0;
};

struct ConvexityEntry {
  std::size_t pair;
  double theta;
  double identity_residual;
  double quadratic_form;
};

struct ConvexityReport {
  std::vector<ConvexityEntry> entries;
  std::vector<std::size_t> violations;
  double max_identity_residual = 0.0;
  bool identity_ok() const noexcept { return max_identity_residual <= 1e-10; }
  bool ok() const noexcept { return identity_ok() && violations.empty(); }
};

/// Segment identity of J along [q2, q1] and positivity of the form on q1 - q2.
ConvexityReport convexity_certificate(const Replicator& rep,
                                      const std::vector<std::pair<ProbabilityState, ProbabilityState>>& pairs,
                                      const std::vector<double>& thetas);

/// Box kernel on a four-node grid whose form is negative on the alternating vector.
struct Counterexample {
  Replicator replicator;
  ProbabilityState q1;
  ProbabilityState q2;
};
Counterexample oscillatory_counterexample();

struct ProbeMargin {
  std::size_t probe;
  double lhs;
  double rhs;
  double margin() const noexcept { return lhs - rhs; }
};

struct MutationalLyapunovReport {
  double J = 0.0;
  std::vector<ProbeMargin> lyap1;
  /// Only for constant fecundity (AF).
  std::vector<ProbeMargin> lyap2;
  std::optional<double> variance_term;
  std::optional<double> fecundity_term;
  std::optional<double> dJdt;
};

/// Candidate Lyapunov functional with mutations and its two sufficient conditions.
/// Dense N^3 tensor: keep N modest.
MutationalLyapunovReport lyapunov_mutational(const Model& model, std::function<double(double)> r0,
                                             const ProbabilityState& q, const std::vector<ProbabilityState>& probes);

struct LyapunovTrace {
  std::vector<double> t, J, dJdt, flatness_residual, mean, variance;
  void write_csv(const std::string& path) const;
};

enum class StabilityVerdict { Converged, NotConverged, Degenerate };
std::string to_string(StabilityVerdict v);

struct StabilityConfig {
  double t_end = 400.0;
  double dt_init = 1e-2;
  double dt_max = 5.0;
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  /// Defaults to 10% of the domain width.
  std::optional<double> locality_radius;
  double locality_mass = 0.9;
};

struct StabilityResult {
  LyapunovTrace trace;
  StabilityVerdict verdict;
  ProbabilityState final_state;
  double max_J_decrease = 0.0;
  bool monotone = true;
};

StabilityResult run_to_stability(const Replicator& rep, const ProbabilityState& q0, const StabilityConfig& config = {});

}  // namespace selmut
