#include "selmut/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "selmut/errors.hpp"

namespace selmut {

namespace {

double central_difference(const std::function<double(double)>& f, double x) {
  const double h = 1e-6 * std::max(1.0, std::abs(x));
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace

SymmetricKernel::SymmetricKernel(Profile profile) : profile_(std::move(profile)) {
  if (profile_.atomic()) throw ConfigurationError("selection kernel must have pointwise values");
  double radius = profile_.effective_radius();
  if (!std::isfinite(radius)) radius = 50.0;
  const double scale = std::max(profile_.sup(), 1e-300);
  for (int i = 0; i <= 400; ++i) {
    const double z = radius * i / 400.0 * 1.2;
    const double a = profile_(z);
    const double b = profile_(-z);
    if (std::abs(a - b) > 1e-12 * scale) {
      std::ostringstream os;
      os << "kernel " << profile_.describe() << " is not even at z=" << z;
      throw ConfigurationError(os.str());
    }
    if (a < 0.0) throw ConfigurationError("kernel " + profile_.describe() + " takes negative values");
  }
}

double SymmetricKernel::inf_on(const Grid& grid) const {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid.n_points(); ++k) m = std::min(m, profile_(k * grid.spacing()));
  return m;
}

MutationKernel::MutationKernel(Profile base, double eps) : base_(std::move(base)), eps_(eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ConfigurationError("mutation scale eps must be positive");
  const double m = base_.mass();
  if (std::abs(m - 1.0) > 1e-8) {
    std::ostringstream os;
    os << "mutation profile " << base_.describe() << " has mass " << m << ", expected 1";
    throw ConfigurationError(os.str());
  }
}

double MutationKernel::operator()(double z) const { return base_(z / eps_) / eps_; }

bool MutationKernel::gaussian() const noexcept { return base_.family() == ProfileFamily::Gaussian; }

double MutationKernel::grid_mass(const Grid& grid) const {
  const std::size_t c = grid.n_points() / 2;
  const double xc = grid.node(c);
  double s = 0.0;
  for (std::size_t i = 0; i < grid.n_points(); ++i) s += grid.weight(i) * (*this)(grid.node(i) - xc);
  return s;
}

Fecundity Fecundity::constant(double b) {
  if (!(b > 0.0) || !std::isfinite(b)) throw ConfigurationError("fecundity must be positive");
  std::ostringstream os;
  os << "constant(" << b << ")";
  return Fecundity([b](double) { return b; }, os.str(), true);
}

Fecundity Fecundity::gaussian_peak(double base, double peak, double center, double width) {
  if (!(base >= 0.0) || !(peak >= 0.0) || !(base + peak > 0.0)) {
    throw ConfigurationError("fecundity base and peak must be nonnegative with positive sum");
  }
  if (!(width > 0.0)) throw ConfigurationError("fecundity width must be positive");
  std::ostringstream os;
  os << "gaussian_peak(base=" << base << ", peak=" << peak << ", center=" << center << ", width=" << width << ")";
  return Fecundity(
      [=](double y) {
        const double t = (y - center) / width;
        return base + peak * std::exp(-0.5 * t * t);
      },
      os.str(), peak == 0.0);
}

Fecundity Fecundity::custom(std::function<double(double)> b, std::string name) {
  return Fecundity(std::move(b), std::move(name), false);
}

double Fecundity::sup_on(const Grid& grid) const {
  double m = 0.0;
  for (std::size_t i = 0; i < grid.n_points(); ++i) m = std::max(m, b_(grid.node(i)));
  return m;
}

std::vector<double> Fecundity::sample(const Grid& grid) const {
  std::vector<double> out(grid.n_points());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = b_(grid.node(i));
    if (!(out[i] >= 0.0) || !std::isfinite(out[i])) throw DomainError("fecundity " + name_ + " is negative or non-finite");
  }
  return out;
}

SaturationTerm SaturationTerm::linear(double nu) {
  if (!(nu > 0.0) || !std::isfinite(nu)) throw ConfigurationError("nu must be positive");
  SaturationTerm s;
  s.form_ = SaturationForm::Linear;
  s.nu_ = nu;
  s.r_ = [nu](double, double rho) { return nu * rho; };
  s.dr_rho_ = [nu](double, double) { return nu; };
  s.dr_x_ = [](double, double) { return 0.0; };
  s.r0_ = [](double) { return 0.0; };
  s.r1_ = [nu](double rho) { return nu * rho; };
  s.dr1_ = [nu](double) { return nu; };
  std::ostringstream os;
  os << "linear(nu=" << nu << ")";
  s.name_ = os.str();
  return s;
}

SaturationTerm SaturationTerm::separable(Fn1 r0, Fn1 r1, Fn1 dr1, Fn1 dr0, std::string name) {
  if (!r0 || !r1) throw ConfigurationError("separable saturation needs R0 and R1");
  SaturationTerm s;
  s.form_ = SaturationForm::Separable;
  s.r0_ = r0;
  s.r1_ = r1;
  s.dr1_ = dr1 ? dr1 : Fn1([r1](double rho) { return central_difference(r1, rho); });
  const Fn1 d0 = dr0 ? dr0 : Fn1([r0](double x) { return central_difference(r0, x); });
  s.r_ = [r0, r1](double x, double rho) { return r0(x) + r1(rho); };
  s.dr_rho_ = [d1 = s.dr1_](double, double rho) { return d1(rho); };
  s.dr_x_ = [d0](double x, double) { return d0(x); };
  s.name_ = std::move(name);
  return s;
}

SaturationTerm SaturationTerm::power(double nu, double gamma, Fn1 r0, Fn1 dr0) {
  if (!(nu > 0.0)) throw ConfigurationError("nu must be positive");
  if (!(gamma > 0.0)) throw ConfigurationError("saturation exponent must be positive");
  const bool trivial_r0 = !r0;
  if (trivial_r0 && gamma == 1.0) return linear(nu);
  if (!r0) r0 = [](double) { return 0.0; };
  if (!dr0 && trivial_r0) dr0 = [](double) { return 0.0; };
  std::ostringstream os;
  os << "power(nu=" << nu << ", gamma=" << gamma << (trivial_r0 ? "" : ", R0") << ")";
  SaturationTerm s = separable(
      r0, [nu, gamma](double rho) { return nu * std::pow(rho, gamma); },
      [nu, gamma](double rho) { return nu * gamma * std::pow(rho, gamma - 1.0); }, dr0, os.str());
  s.nu_ = nu;
  s.gamma_ = gamma;
  return s;
}

SaturationTerm SaturationTerm::general(Fn2 r, Fn2 dr_rho, Fn2 dr_x, std::string name) {
  if (!r) throw ConfigurationError("general saturation needs R(x, rho)");
  SaturationTerm s;
  s.form_ = SaturationForm::General;
  s.r_ = r;
  s.dr_rho_ = dr_rho ? dr_rho : Fn2([r](double x, double rho) {
    const double h = 1e-6 * std::max(1.0, std::abs(rho));
    return (r(x, rho + h) - r(x, rho - h)) / (2.0 * h);
  });
  s.dr_x_ = dr_x ? dr_x : Fn2([r](double x, double rho) {
    const double h = 1e-6 * std::max(1.0, std::abs(x));
    return (r(x + h, rho) - r(x - h, rho)) / (2.0 * h);
  });
  s.name_ = std::move(name);
  return s;
}

double SaturationTerm::d_rho(double x, double rho) const { return dr_rho_(x, rho); }
double SaturationTerm::d_x(double x, double rho) const { return dr_x_(x, rho); }

double SaturationTerm::r0(double x) const {
  if (form_ == SaturationForm::General) throw CapabilityError("saturation " + name_ + " is not separable");
  return r0_(x);
}

double SaturationTerm::r1(double rho) const {
  if (form_ == SaturationForm::General) throw CapabilityError("saturation " + name_ + " is not separable");
  return r1_(rho);
}

double SaturationTerm::dr1(double rho) const {
  if (form_ == SaturationForm::General) throw CapabilityError("saturation " + name_ + " is not separable");
  return dr1_(rho);
}

double SaturationTerm::R_m(double rho, const Grid& grid) const {
  if (is_linear()) return nu_ * rho;
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.n_points(); ++i) m = std::min(m, r_(grid.node(i), rho));
  return m;
}

double SaturationTerm::R_M(double rho, const Grid& grid) const {
  if (is_linear()) return nu_ * rho;
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.n_points(); ++i) m = std::max(m, r_(grid.node(i), rho));
  return m;
}

std::vector<double> SaturationTerm::sample(const Grid& grid, double rho) const {
  std::vector<double> out(grid.n_points());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = r_(grid.node(i), rho);
  return out;
}

TwoPointKernel TwoPointKernel::from_profile(Profile p) {
  TwoPointKernel k;
  k.name_ = p.describe();
  k.profile_ = std::make_shared<const Profile>(std::move(p));
  k.k_ = [prof = k.profile_](double x, double y) { return (*prof)(x - y); };
  return k;
}

TwoPointKernel TwoPointKernel::custom(std::function<double(double, double)> f, std::string name) {
  if (!f) throw ConfigurationError("two-point kernel needs a callable");
  TwoPointKernel k;
  k.k_ = std::move(f);
  k.name_ = std::move(name);
  return k;
}

double TwoPointKernel::operator()(double x, double y) const { return k_(x, y); }

const Profile& TwoPointKernel::profile() const {
  if (!profile_) throw CapabilityError("kernel " + name_ + " is not translation invariant");
  return *profile_;
}

std::vector<double> TwoPointKernel::matrix(const Grid& grid) const {
  const std::size_t n = grid.n_points();
  std::vector<double> m(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m[i * n + j] = k_(grid.node(i), grid.node(j));
  }
  return m;
}

double TwoPointKernel::sup_on(const Grid& grid) const {
  if (profile_) return profile_->sup();
  const auto m = matrix(grid);
  return *std::max_element(m.begin(), m.end());
}

}  // namespace selmut
