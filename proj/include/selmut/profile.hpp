#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace selmut {

enum class ProfileFamily { Gaussian, Cauchy, CompactBump, Constant, Table, TwoAtom };

/// A one-argument kernel profile z -> K(z).
///
/// Analytic families carry their derivative; the table family interpolates
/// linearly between samples and is zero outside the sampled range. The
/// two-atom profile 1/2(delta_{-h} + delta_{h}) is a measure, usable only
/// where an operation integrates it in closed form (Laplace transforms).
class Profile {
 public:
  static Profile gaussian(double sd, double amplitude = 1.0);
  /// Unit-mass centered normal density with standard deviation sd.
  static Profile normal(double sd);
  static Profile cauchy(double scale, double amplitude = 1.0);
  /// amplitude * exp(1 - 1/(1 - (z/radius)^2)) on |z| < radius; peak value = amplitude.
  static Profile compact_bump(double radius, double amplitude = 1.0);
  static Profile constant(double value);
  static Profile table(std::vector<double> z, std::vector<double> k);
  static Profile two_atom(double h);

  ProfileFamily family() const noexcept { return family_; }
  double operator()(double z) const;
  double derivative(double z) const;

  bool differentiable() const noexcept;
  bool atomic() const noexcept { return family_ == ProfileFamily::TwoAtom; }
  /// Strictly decreasing in |z| on its support (constant profiles are not).
  bool radial_decreasing() const;

  double sup() const;
  /// Integral over the real line (inf for constant profiles).
  double mass() const;
  /// Radius beyond which the profile is zero or below 1e-300 relative.
  double effective_radius() const;

  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }
  const std::vector<double>& table_z() const noexcept { return tz_; }
  const std::vector<double>& table_k() const noexcept { return tk_; }

  std::string describe() const;

 private:
  Profile(ProfileFamily f, double a, double b) : family_(f), a_(a), b_(b) {}

  ProfileFamily family_;
  double a_;  // width parameter (sd, scale, radius, atom offset) or constant value
  double b_;  // amplitude
  std::vector<double> tz_;
  std::vector<double> tk_;
};

/// Reads a two-column (z, K(z)) text table; '#' starts a comment.
/// Rows must be strictly increasing in z.
Profile load_profile_table(const std::filesystem::path& path);

}  // namespace selmut
