#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "selmut/grid.hpp"
#include "selmut/kernels.hpp"
#include "selmut/model.hpp"

namespace selmut {

/// Every node delta, the uniform measure, then `extra`.
std::vector<ProbabilityState> standard_probes(const Grid& grid, std::span<const ProbabilityState> extra = {});

/// Quadrature masses m_j = w_j q_j of a probability state (they sum to 1).
std::vector<double> probe_masses(const ProbabilityState& q);

struct ProbeEstimate {
  double value;
  std::size_t probe;
};

/// Result of minimizing m'Qm + c'm over the probability simplex.
struct SimplexQp {
  double upper = 0.0;   // objective at the returned point
  double lower = 0.0;   // upper minus Frank-Wolfe gap; a true lower bound when convex
  bool certified = false;
  std::vector<double> masses;
  int iterations = 0;
};

/// Accelerated projected gradient with restarts; `q` is row-major N x N (symmetrized internally).
SimplexQp minimize_on_simplex(std::span<const double> q, std::span<const double> c, std::size_t n, bool convex,
                              int max_iter = 4000, double gap_tol = 1e-10);

/// Probe and simplex estimates of the constants governing the total mass.
///
/// Works on the parents' bilinear form Q from Model::mass_matrix. K_M and
/// kappa_m are exact on the grid (attained by node deltas); kappa' and kappa''
/// are reported both as probe minima (upper estimates) and as certified
/// lower bounds when Q is positive semidefinite.
class KappaAnalysis {
 public:
  KappaAnalysis(const Model& model, std::vector<ProbabilityState> probes);

  double K_M() const noexcept { return k_max_; }
  ProbeEstimate K_M_probe() const;

  double kappa_m(double rho) const;
  ProbeEstimate kappa1_probe(double rho) const;
  SimplexQp kappa1_qp(double rho) const;
  ProbeEstimate kappa2_probe() const;
  const SimplexQp& kappa2_qp() const noexcept { return kappa2_qp_; }

  /// Same infimum for the K0 convolution form alone (nM and ATH); empty otherwise.
  const std::optional<SimplexQp>& kappa2_k0_form() const noexcept { return kappa2_k0_; }

  bool psd() const noexcept { return psd_; }
  double lambda_min() const noexcept { return lambda_min_; }
  double lambda_max() const noexcept { return lambda_max_; }
  const std::vector<double>& form() const noexcept { return q_; }
  const std::vector<ProbabilityState>& probes() const noexcept { return probes_; }
  std::size_t size() const noexcept { return n_; }

 private:
  double quadratic(std::span<const double> m) const;

  Grid grid_;
  SaturationTerm saturation_;
  std::size_t n_;
  std::vector<double> q_;
  std::vector<ProbabilityState> probes_;
  std::vector<std::vector<double>> masses_;
  double k_max_ = 0.0;
  std::vector<double> row_min_;
  bool psd_ = false;
  double lambda_min_ = 0.0;
  double lambda_max_ = 0.0;
  SimplexQp kappa2_qp_;
  std::optional<SimplexQp> kappa2_k0_;
};

struct Violation {
  std::string check;
  std::string detail;
};

/// Constants certified or fitted for a configured model.
struct BoundCertificate {
  double K_M = 0.0;
  double rho_M = 0.0;
  std::optional<double> rho_m;
  std::string rho_m_rule;
  std::vector<std::pair<std::string, double>> rho_m_candidates;
  double kappa2_upper = 0.0;
  double kappa2_lower = 0.0;
  bool kappa2_certified = false;
  std::optional<double> eta0;
  std::optional<double> alpha_C;
  std::optional<double> C1;
  std::optional<double> C2;
  std::optional<double> C_f_bar;
  std::optional<double> C0;
  std::optional<double> L_r;
  std::optional<double> L0;
  std::optional<double> lambda;
  std::optional<double> C_lambda;
  std::optional<double> K_bar;
  std::optional<double> A;
  std::optional<double> C;
  std::optional<double> eps_rho_dot_neg0;
};

struct Validation {
  BoundCertificate certificate;
  std::vector<Violation> violations;
  bool ok() const noexcept { return violations.empty(); }
  bool has(const std::string& check) const;
};

/// Advisory checks of the standing hypotheses; throws only for structural problems.
Validation validate(const Model& model, std::span<const ProbabilityState> probes,
                    const DensityState* initial = nullptr);

/// R_m^{-1}(target) by bisection on the grid envelope.
double invert_lower_envelope(const SaturationTerm& r, const Grid& grid, double target);
double invert_upper_envelope(const SaturationTerm& r, const Grid& grid, double target);

struct AlphaLevel {
  double eps;
  double min_L;
  std::size_t argmin;
  double C_hat;
};

struct AlphaReport {
  std::vector<AlphaLevel> levels;
  double C_hat = 0.0;
  bool holds = false;
};

/// L(eps, phi) = triple integral of alpha_eps B(x) B(y) phi(y) phi(z) minus (int B phi)^2.
double alpha_functional(const Grid& grid, const Fecundity& b, const OffspringDistribution& alpha,
                        const ProbabilityState& phi, bool normalize = true);

AlphaReport check_alpha_assumption(const Grid& grid, const Fecundity& b, const OffspringDistribution& alpha,
                                   std::span<const double> eps_list, std::span<const ProbabilityState> probes,
                                   bool normalize = true);

struct GeLevel {
  double eps;
  double discrepancy;
  double bound;
  bool pass;
};

struct GeReport {
  double phi_variation;
  std::vector<GeLevel> levels;
  bool pass = true;
};

/// |int psi (G_eps * phi - phi)| against 2 ||phi'||_1 eps / sqrt(2 pi) + tol.
GeReport check_ge_convergence(const Grid& grid, const Profile& g, std::span<const double> eps_list,
                              std::span<const double> phi, std::span<const double> psi, double tol = 1e-8);

/// Minimum over probes of int (K0 * phi)(G_eps * phi).
ProbeEstimate eta_estimate(const Grid& grid, const SymmetricKernel& k0, const MutationKernel& g,
                           std::span<const ProbabilityState> probes);

}  // namespace selmut
