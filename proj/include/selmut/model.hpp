#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "selmut/convolution.hpp"
#include "selmut/grid.hpp"
#include "selmut/kernels.hpp"

namespace selmut {

enum class ModelFamily { NM, GNM, AF, ATH, General };

std::string to_string(ModelFamily f);
ModelFamily parse_family(const std::string& name);

using TripleKernel = std::function<double(double, double, double)>;

/// Everything that determines the right-hand side.
///
/// Required kernels: nM needs k0; ATH needs k0 (or k1) and mutation; AF needs
/// fecundity and offspring; gnM needs ks; general needs general.
struct ModelSpec {
  ModelFamily family;
  Grid grid;
  double eps;
  SaturationTerm saturation;
  std::optional<SymmetricKernel> k0{};
  std::optional<MutationKernel> mutation{};
  std::optional<TwoPointKernel> k1{};
  std::optional<Fecundity> fecundity{};
  std::optional<OffspringDistribution> offspring{};
  std::optional<TwoPointKernel> ks{};
  TripleKernel general{};
  ConvolutionMethod method = ConvolutionMethod::Auto;
  /// Rescale alpha_eps(., y, z) to unit grid mass for every parent node.
  bool normalize_offspring = true;
  /// max |dn/dt| above this raises StiffnessError.
  double rhs_ceiling = 1e12;
};

/// Immutable assembled model: kernel tables, convolution plans, cached samples.
class Model {
 public:
  explicit Model(ModelSpec spec);

  const ModelSpec& spec() const noexcept { return spec_; }
  ModelFamily family() const noexcept { return spec_.family; }
  const Grid& grid() const noexcept { return spec_.grid; }
  double eps() const noexcept { return spec_.eps; }
  const SaturationTerm& saturation() const noexcept { return spec_.saturation; }

  /// (1/rho) double integral of K_eps(x, y, z) n(y) n(z) at every node.
  std::vector<double> birth_term(const DensityState& n) const;
  std::vector<double> birth_term(std::span<const double> n) const;

  /// (birth - R(x, rho) n) / eps.
  std::vector<double> rhs(const DensityState& n) const;
  std::vector<double> rhs(std::span<const double> n) const;
  double rho_rhs(const DensityState& n) const;

  /// Directional derivatives along v at n.
  std::vector<double> birth_tangent(std::span<const double> n, std::span<const double> v) const;
  std::vector<double> rhs_tangent(std::span<const double> n, std::span<const double> v) const;
  /// Time derivative of rho_rhs along the flow.
  double rho_second_derivative(const DensityState& n) const;

  std::vector<double> death_rate(double rho) const;

  /// K0 * f, G_eps * f, (K1 f)(x) and (K_S f)(x) by grid quadrature.
  std::vector<double> convolve_k0(std::span<const double> f) const;
  std::vector<double> convolve_g(std::span<const double> f) const;
  std::vector<double> apply_k1(std::span<const double> f) const;
  std::vector<double> apply_ks(std::span<const double> f) const;

  bool has_k0() const noexcept { return k0_conv_.has_value(); }
  bool has_mutation() const noexcept { return g_conv_.has_value(); }
  const SymmetricKernel& k0() const;
  const MutationKernel& mutation() const;
  const Fecundity& fecundity() const;
  const OffspringDistribution& offspring() const;
  const TwoPointKernel& ks() const;
  /// Sampled B(x_i) (AF only).
  const std::vector<double>& fecundity_values() const;
  /// Per-parent-node grid mass the offspring kernel is divided by (AF only).
  const std::vector<double>& offspring_norm() const;

  /// Pointwise K_eps(x, y, z); CapabilityError for nM/gnM (singular in x).
  double kernel3(double x, double y, double z) const;
  bool has_pointwise_kernel() const noexcept;

  /// Q[y * N + z] = grid quadrature over x of K_eps(x, y_j, z_k), the
  /// bilinear form of the birth mass in the parents' coordinates.
  std::vector<double> mass_matrix() const;

 private:
  void check_state(std::span<const double> n) const;
  std::vector<double> offspring_spread(std::span<const double> f) const;

  ModelSpec spec_;
  std::optional<Convolver> k0_conv_;
  std::optional<Convolver> g_conv_;
  std::optional<Convolver> k1_conv_;
  std::optional<Convolver> ks_conv_;
  std::vector<double> k1_dense_;
  std::vector<double> ks_dense_;
  std::vector<double> b_values_;
  std::vector<double> offspring_mass_;
  std::vector<double> offspring_norm_;
};


}  // namespace selmut
