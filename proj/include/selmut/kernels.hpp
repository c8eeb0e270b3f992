#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "selmut/grid.hpp"
#include "selmut/profile.hpp"

namespace selmut {

/// Even, bounded, nonnegative profile K0(z).
class SymmetricKernel {
 public:
  /// Checks evenness on a symmetric probe set to 1e-12 (relative to sup).
  explicit SymmetricKernel(Profile profile);

  double operator()(double z) const { return profile_(z); }
  double derivative(double z) const { return profile_.derivative(z); }
  const Profile& profile() const noexcept { return profile_; }
  double sup() const { return profile_.sup(); }
  double mass() const { return profile_.mass(); }
  /// Minimum over the difference lattice reachable on `grid`.
  double inf_on(const Grid& grid) const;

 private:
  Profile profile_;
};

/// G_eps(z) = G(z/eps)/eps with unit-mass base profile G.
class MutationKernel {
 public:
  MutationKernel(Profile base, double eps);

  double operator()(double z) const;
  const Profile& base() const noexcept { return base_; }
  double eps() const noexcept { return eps_; }
  bool gaussian() const noexcept;
  MutationKernel with_eps(double eps) const { return MutationKernel(base_, eps); }

  /// Grid quadrature of G_eps(. - x) for the node x closest to the grid center.
  double grid_mass(const Grid& grid) const;

 private:
  Profile base_;
  double eps_;
};

/// Female-trait fecundity B(y).
class Fecundity {
 public:
  static Fecundity constant(double b);
  /// base + peak * exp(-(y-center)^2 / (2 width^2)).
  static Fecundity gaussian_peak(double base, double peak, double center, double width);
  static Fecundity custom(std::function<double(double)> b, std::string name);

  double operator()(double y) const { return b_(y); }
  bool is_constant() const noexcept { return constant_; }
  double sup_on(const Grid& grid) const;
  std::vector<double> sample(const Grid& grid) const;
  const std::string& describe() const noexcept { return name_; }

 private:
  Fecundity(std::function<double(double)> b, std::string name, bool constant)
      : b_(std::move(b)), name_(std::move(name)), constant_(constant) {}

  std::function<double(double)> b_;
  std::string name_;
  bool constant_;
};

enum class OffspringForm { FemaleCentered, MaleCentered };

/// alpha_eps(x, y, z) = G_eps(x - y) (female-centered) or G_eps(x - z) (male-centered).
class OffspringDistribution {
 public:
  OffspringDistribution(MutationKernel kernel, OffspringForm form) : kernel_(std::move(kernel)), form_(form) {}

  double operator()(double x, double y, double z) const {
    return kernel_(x - (form_ == OffspringForm::FemaleCentered ? y : z));
  }
  const MutationKernel& kernel() const noexcept { return kernel_; }
  OffspringForm form() const noexcept { return form_; }
  OffspringDistribution with_eps(double eps) const { return {kernel_.with_eps(eps), form_}; }

 private:
  MutationKernel kernel_;
  OffspringForm form_;
};

enum class SaturationForm { Linear, Separable, General };

/// Death and competition rate R(x, rho).
class SaturationTerm {
 public:
  using Fn1 = std::function<double(double)>;
  using Fn2 = std::function<double(double, double)>;

  static SaturationTerm linear(double nu);
  /// R0(x) + R1(rho); derivatives fall back to central differences when absent.
  static SaturationTerm separable(Fn1 r0, Fn1 r1, Fn1 dr1 = {}, Fn1 dr0 = {}, std::string name = "separable");
  /// R0(x) + nu * rho^gamma, R0 = 0 when absent.
  static SaturationTerm power(double nu, double gamma, Fn1 r0 = {}, Fn1 dr0 = {});
  static SaturationTerm general(Fn2 r, Fn2 dr_rho = {}, Fn2 dr_x = {}, std::string name = "general");

  double operator()(double x, double rho) const { return r_(x, rho); }
  double d_rho(double x, double rho) const;
  double d_x(double x, double rho) const;

  SaturationForm form() const noexcept { return form_; }
  /// R = nu * rho with no trait dependence.
  bool is_linear() const noexcept { return form_ == SaturationForm::Linear; }
  double nu() const noexcept { return nu_; }
  double gamma() const noexcept { return gamma_; }

  /// Separable parts; CapabilityError for general forms.
  double r0(double x) const;
  double r1(double rho) const;
  double dr1(double rho) const;

  /// Envelopes over grid nodes.
  double R_m(double rho, const Grid& grid) const;
  double R_M(double rho, const Grid& grid) const;

  std::vector<double> sample(const Grid& grid, double rho) const;
  const std::string& describe() const noexcept { return name_; }

 private:
  SaturationTerm() = default;

  SaturationForm form_ = SaturationForm::General;
  Fn2 r_;
  Fn2 dr_rho_;
  Fn2 dr_x_;
  Fn1 r0_;
  Fn1 r1_;
  Fn1 dr1_;
  double nu_ = 0.0;
  double gamma_ = 1.0;
  std::string name_;
};

/// Two-argument kernel K(x, y); translation-invariant when built from a profile.
class TwoPointKernel {
 public:
  static TwoPointKernel from_profile(Profile p);
  static TwoPointKernel custom(std::function<double(double, double)> k, std::string name);

  double operator()(double x, double y) const;
  bool translation_invariant() const noexcept { return profile_ != nullptr; }
  const Profile& profile() const;
  const std::string& describe() const noexcept { return name_; }

  /// Dense matrix K(x_i, x_j).
  std::vector<double> matrix(const Grid& grid) const;
  double sup_on(const Grid& grid) const;

 private:
  TwoPointKernel() = default;

  std::shared_ptr<const Profile> profile_;
  std::function<double(double, double)> k_;
  std::string name_;
};

}  // namespace selmut
