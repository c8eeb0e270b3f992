#pragma once

#include <optional>
#include <string>
#include <vector>

#include "selmut/grid.hpp"
#include "selmut/kernels.hpp"

namespace selmut {

enum class DiracVerdict { Feasible, SignInfeasible, Singular };
std::string to_string(DiracVerdict v);

/// Stationary combination of Dirac masses at fixed points.
struct DiracSystem {
  std::vector<double> points;
  /// Row-major K0(x_i - x_j).
  std::vector<double> matrix;
  std::vector<double> P;
  double rho = 0.0;
  std::vector<double> masses;
  double nu = 1.0;
  DiracVerdict verdict = DiracVerdict::Singular;
  double det_ratio = 0.0;
  double residual = 0.0;

  std::size_t size() const noexcept { return points.size(); }
  bool feasible() const noexcept { return verdict == DiracVerdict::Feasible; }
};

/// Solves K P = 1 and rescales to masses rho_i = nu P_i rho^2.
DiracSystem solve_dirac_system(const SymmetricKernel& k0, std::vector<double> points, double nu);

/// Largest deviation of the per-point fitness from nu rho.
double verify_kdd(const DiracSystem& sys, const SymmetricKernel& k0);

struct EsdVerdict {
  bool esd = false;
  double rho = 0.0;
  double tolerance = 0.0;
  /// Largest |K0*n - nu rho^2| on the support.
  double equality_residual = 0.0;
  /// Largest K0*n - nu rho^2 anywhere on the audit set.
  double max_excess = 0.0;
  std::optional<double> worst_point;
  double worst_value = 0.0;
};

EsdVerdict esd_check(const SymmetricKernel& k0, const DiracSystem& candidate, const Grid& audit);
EsdVerdict esd_check(const SymmetricKernel& k0, const DensityState& candidate, double nu, const Grid& audit);

struct MonomorphismWitness {
  double derivative = 0.0;
  double leftmost = 0.0;
  bool certifies() const noexcept { return derivative > 0.0; }
};

/// Slope of the fitness at the leftmost morph; positive means a neighbour to the right does better.
MonomorphismWitness monomorphism_witness(const SymmetricKernel& k0, const DiracSystem& sys);

}  // namespace selmut
