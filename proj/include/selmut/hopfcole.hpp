#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "selmut/bounds.hpp"
#include "selmut/grid.hpp"
#include "selmut/integrator.hpp"
#include "selmut/model.hpp"
#include "selmut/profile.hpp"

namespace selmut {

/// u = eps ln n, with n floored at the smallest normal double.
struct HopfColeField {
  Grid grid;
  std::vector<double> u;
  double eps;
  double floor_value;
  std::vector<bool> floored;

  double max() const;
  std::size_t argmax() const;
  std::size_t floored_count() const;
};

HopfColeField hopf_cole(const DensityState& n, double eps);
/// exp(u / eps).
DensityState inverse_hopf_cole(const Grid& grid, std::span<const double> u, double eps);

/// Integral of G(z) exp(-p z); closed forms for Gaussian and two-atom profiles.
double laplace_transform(const Profile& g, double p);
/// p -> L[G](p) sampled for dumping as a two-column table.
void write_laplace_table(const Profile& g, const std::vector<double>& p, const std::string& path);

struct HjResidual {
  std::vector<double> residual;
  std::vector<std::size_t> excluded;
  double max_residual = 0.0;
};

/// Nodewise gap between the eps-level u equation and eps dn/dt / n (ATH and AF).
HjResidual eps_level_hj_residual(const Model& model, const DensityState& n, const HopfColeField& u);

/// Lipschitz-in-space, growth and initial-data constants for the appendix bounds.
struct HjConstantsConfig {
  double A = 1.0;
  double lambda = 1.0;
};
void certify_hj_constants(const Model& model, const DensityState& n0, BoundCertificate& cert,
                          const HjConstantsConfig& config = {});

/// y -> A (1 + max(|x|, |y|)) / (1 - exp(-|y - x| A (1 + max(|x|, |y|)))).
double g_xA(double x, double A, double y);
struct MxA {
  double value;
  double argmin;
};
/// Minimum of g_xA over the real line (golden section on each side of x).
MxA m_xA(double x, double A);

struct AppendixCheck {
  std::string name;
  double min_margin = 0.0;
  std::optional<double> worst_t;
  std::optional<double> worst_x;
  bool pass() const noexcept { return min_margin > 0.0; }
};

struct AppendixSnapshot {
  double t;
  double max_u;
  double global_bound;
  double refined_bound;
};

struct AppendixReport {
  double C1 = 0.0;
  double C2 = 0.0;
  double C = 0.0;
  double u0_shift = 0.0;
  std::vector<AppendixCheck> checks;
  std::vector<AppendixSnapshot> snapshots;
  bool pass() const;
};

/// Lower, upper, space-Lipschitz and global upper bounds on every snapshot.
AppendixReport appendix_bound_suite(const Model& model, const Trajectory& tr, const BoundCertificate& cert);

/// Limit Hamiltonian k(x) L[G](p) - r(x) with frozen coefficients.
struct Hamiltonian {
  Grid grid;
  std::vector<double> k;
  std::vector<double> r;
  std::function<double(double)> laplace;
  double p_max;
  std::string family;

  static Hamiltonian gaussian_ath(Grid grid, std::vector<double> k, std::vector<double> r, double p_max);
  static Hamiltonian from_profile(const Profile& g, Grid grid, std::vector<double> k, std::vector<double> r,
                                  double p_max);
  /// Frozen coefficients from an eps-level state (ATH: k = K1 q, AF: b = int B q).
  static Hamiltonian from_state(const Model& model, const DensityState& n, double p_max);

  double operator()(std::size_t i, double p) const { return k[i] * laplace(p) - r[i]; }
  /// Bound on |dH/dp| over |p| <= p_max.
  double sigma() const;
};

/// Monotone Lax-Friedrichs step with Neumann ghosts; optional projection onto max u = 0.
std::vector<double> limit_hj_step(const Hamiltonian& h, std::span<const double> u, double dt, bool constrain = true);

struct SupportReport {
  std::vector<double> points;
  std::vector<double> residual_zeros;
  bool monomorphic = false;
  /// Every identified point lies within 2 spacings of a residual zero.
  bool matches_residual = true;
};

SupportReport support_identification(const Grid& grid, std::span<const double> u, double tol,
                                     std::span<const double> fitness_residual = {});
inline SupportReport support_identification(const HopfColeField& u, double tol,
                                            std::span<const double> fitness_residual = {}) {
  return support_identification(u.grid, u.u, tol, fitness_residual);
}

}  // namespace selmut
