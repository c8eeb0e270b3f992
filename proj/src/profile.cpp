#include "selmut/profile.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "selmut/errors.hpp"

namespace selmut {

namespace {

double bump_unit(double t) {
  // exp(1 - 1/(1 - t^2)) on |t| < 1
  const double s = 1.0 - t * t;
  if (s <= 0.0) return 0.0;
  return std::exp(1.0 - 1.0 / s);
}

double simpson(auto&& f, double lo, double hi, int n) {
  if (n % 2) ++n;
  const double h = (hi - lo) / n;
  double s = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(lo + i * h);
  return s * h / 3.0;
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigurationError(std::string(what) + " must be positive and finite");
  }
}

}  // namespace

Profile Profile::gaussian(double sd, double amplitude) {
  require_positive(sd, "gaussian sd");
  if (!(amplitude >= 0.0)) throw ConfigurationError("gaussian amplitude must be nonnegative");
  return Profile(ProfileFamily::Gaussian, sd, amplitude);
}

Profile Profile::normal(double sd) {
  require_positive(sd, "normal sd");
  return Profile(ProfileFamily::Gaussian, sd, 1.0 / (sd * std::sqrt(2.0 * std::numbers::pi)));
}

Profile Profile::cauchy(double scale, double amplitude) {
  require_positive(scale, "cauchy scale");
  if (!(amplitude >= 0.0)) throw ConfigurationError("cauchy amplitude must be nonnegative");
  return Profile(ProfileFamily::Cauchy, scale, amplitude);
}

Profile Profile::compact_bump(double radius, double amplitude) {
  require_positive(radius, "bump radius");
  if (!(amplitude >= 0.0)) throw ConfigurationError("bump amplitude must be nonnegative");
  return Profile(ProfileFamily::CompactBump, radius, amplitude);
}

Profile Profile::constant(double value) {
  if (!(value >= 0.0) || !std::isfinite(value)) {
    throw ConfigurationError("constant kernel must be finite and nonnegative");
  }
  return Profile(ProfileFamily::Constant, value, value);
}

Profile Profile::table(std::vector<double> z, std::vector<double> k) {
  if (z.size() != k.size() || z.size() < 2) {
    throw ConfigurationError("kernel table needs at least two (z, K) rows of equal length");
  }
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!std::isfinite(z[i]) || !std::isfinite(k[i])) throw ConfigurationError("kernel table has non-finite entries");
    if (k[i] < 0.0) throw ConfigurationError("kernel table values must be nonnegative");
    if (i > 0 && !(z[i] > z[i - 1])) throw ConfigurationError("kernel table rows must be strictly increasing in z");
  }
  Profile p(ProfileFamily::Table, 0.0, 0.0);
  p.tz_ = std::move(z);
  p.tk_ = std::move(k);
  return p;
}

Profile Profile::two_atom(double h) {
  require_positive(h, "atom offset");
  return Profile(ProfileFamily::TwoAtom, h, 1.0);
}

double Profile::operator()(double z) const {
  switch (family_) {
    case ProfileFamily::Gaussian: {
      const double t = z / a_;
      return b_ * std::exp(-0.5 * t * t);
    }
    case ProfileFamily::Cauchy: {
      const double t = z / a_;
      return b_ / (1.0 + t * t);
    }
    case ProfileFamily::CompactBump: return b_ * bump_unit(z / a_);
    case ProfileFamily::Constant: return a_;
    case ProfileFamily::Table: {
      if (z < tz_.front() || z > tz_.back()) return 0.0;
      const auto it = std::upper_bound(tz_.begin(), tz_.end(), z);
      if (it == tz_.end()) return tk_.back();
      const std::size_t j = static_cast<std::size_t>(it - tz_.begin());
      const double t = (z - tz_[j - 1]) / (tz_[j] - tz_[j - 1]);
      return (1.0 - t) * tk_[j - 1] + t * tk_[j];
    }
    case ProfileFamily::TwoAtom:
      throw CapabilityError("two-atom profile has no pointwise values");
  }
  return 0.0;
}

double Profile::derivative(double z) const {
  switch (family_) {
    case ProfileFamily::Gaussian: return -z / (a_ * a_) * (*this)(z);
    case ProfileFamily::Cauchy: {
      const double t = z / a_;
      const double d = 1.0 + t * t;
      return -2.0 * b_ * t / (a_ * d * d);
    }
    case ProfileFamily::CompactBump: {
      const double t = z / a_;
      const double s = 1.0 - t * t;
      if (s <= 0.0) return 0.0;
      return b_ * bump_unit(t) * (-2.0 * t / (s * s)) / a_;
    }
    case ProfileFamily::Constant: return 0.0;
    default: throw CapabilityError("profile '" + describe() + "' is not differentiable");
  }
}

bool Profile::differentiable() const noexcept {
  return family_ != ProfileFamily::Table && family_ != ProfileFamily::TwoAtom;
}

bool Profile::radial_decreasing() const {
  switch (family_) {
    case ProfileFamily::Gaussian:
    case ProfileFamily::Cauchy:
    case ProfileFamily::CompactBump: return b_ > 0.0;
    case ProfileFamily::Table: {
      // strictly decreasing in |z| wherever positive
      const double zmax = std::max(std::abs(tz_.front()), std::abs(tz_.back()));
      double prev = (*this)(0.0);
      const int n = 2000;
      for (int i = 1; i <= n; ++i) {
        const double z = zmax * i / n;
        const double v = std::max((*this)(z), (*this)(-z));
        if (v > 0.0 && !(v < prev)) return false;
        if (std::abs((*this)(z) - (*this)(-z)) > 1e-12) return false;
        prev = v;
      }
      return true;
    }
    default: return false;
  }
}

double Profile::sup() const {
  switch (family_) {
    case ProfileFamily::Gaussian:
    case ProfileFamily::Cauchy:
    case ProfileFamily::CompactBump: return b_;
    case ProfileFamily::Constant: return a_;
    case ProfileFamily::Table: return *std::max_element(tk_.begin(), tk_.end());
    case ProfileFamily::TwoAtom: return std::numeric_limits<double>::infinity();
  }
  return 0.0;
}

double Profile::mass() const {
  switch (family_) {
    case ProfileFamily::Gaussian: return b_ * a_ * std::sqrt(2.0 * std::numbers::pi);
    case ProfileFamily::Cauchy: return b_ * a_ * std::numbers::pi;
    case ProfileFamily::CompactBump:
      return b_ * a_ * simpson([](double t) { return bump_unit(t); }, -1.0, 1.0, 20000);
    case ProfileFamily::Constant: return a_ > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    case ProfileFamily::Table: {
      double s = 0.0;
      for (std::size_t i = 1; i < tz_.size(); ++i) s += 0.5 * (tk_[i] + tk_[i - 1]) * (tz_[i] - tz_[i - 1]);
      return s;
    }
    case ProfileFamily::TwoAtom: return 1.0;
  }
  return 0.0;
}

double Profile::effective_radius() const {
  switch (family_) {
    case ProfileFamily::Gaussian: return a_ * 38.6;  // exp(-z^2/2sd^2) < 1e-300 past here
    case ProfileFamily::Cauchy: return std::numeric_limits<double>::infinity();
    case ProfileFamily::CompactBump: return a_;
    case ProfileFamily::Constant: return std::numeric_limits<double>::infinity();
    case ProfileFamily::Table: return std::max(std::abs(tz_.front()), std::abs(tz_.back()));
    case ProfileFamily::TwoAtom: return a_;
  }
  return 0.0;
}

std::string Profile::describe() const {
  std::ostringstream os;
  switch (family_) {
    case ProfileFamily::Gaussian: os << "gaussian(sd=" << a_ << ", amplitude=" << b_ << ")"; break;
    case ProfileFamily::Cauchy: os << "cauchy(scale=" << a_ << ", amplitude=" << b_ << ")"; break;
    case ProfileFamily::CompactBump: os << "bump(radius=" << a_ << ", amplitude=" << b_ << ")"; break;
    case ProfileFamily::Constant: os << "constant(" << a_ << ")"; break;
    case ProfileFamily::Table: os << "table(" << tz_.size() << " rows)"; break;
    case ProfileFamily::TwoAtom: os << "two_atom(h=" << a_ << ")"; break;
  }
  return os.str();
}

Profile load_profile_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open kernel table " + path.string());
  std::vector<double> z, k;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    for (char& c : line) {
      if (c == ',' || c == '\t') c = ' ';
    }
    std::istringstream is(line);
    double a, b;
    if (!(is >> a)) continue;
    if (!(is >> b)) {
      throw ConfigurationError(path.string() + ":" + std::to_string(lineno) + ": expected two columns");
    }
    if (!z.empty() && !(a > z.back())) {
      throw ConfigurationError(path.string() + ":" + std::to_string(lineno) + ": z must be strictly increasing");
    }
    z.push_back(a);
    k.push_back(b);
  }
  return Profile::table(std::move(z), std::move(k));
}

}  // namespace selmut
