#include "selmut/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "selmut/errors.hpp"

namespace selmut {

Grid::Grid(double x_min, double x_max, std::size_t n_points)
    : x_min_(x_min), x_max_(x_max), n_points_(n_points), spacing_(0.0) {
  if (!(x_min < x_max) || !std::isfinite(x_min) || !std::isfinite(x_max)) {
    throw ConfigurationError("grid requires finite x_min < x_max");
  }
  if (n_points < 3) throw ConfigurationError("grid requires at least 3 points");
  spacing_ = (x_max - x_min) / static_cast<double>(n_points - 1);
}

std::vector<double> Grid::nodes() const {
  std::vector<double> x(n_points_);
  for (std::size_t i = 0; i < n_points_; ++i) x[i] = node(i);
  return x;
}

std::vector<double> Grid::weights() const {
  std::vector<double> w(n_points_, spacing_);
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

std::size_t Grid::nearest(double x) const noexcept {
  const double s = std::round((x - x_min_) / spacing_);
  if (s <= 0.0) return 0;
  const auto i = static_cast<std::size_t>(s);
  return std::min(i, n_points_ - 1);
}

void require_size(std::span<const double> f, const Grid& grid, const char* what) {
  if (f.size() != grid.n_points()) {
    std::ostringstream os;
    os << what << ": expected " << grid.n_points() << " values, got " << f.size();
    throw DimensionError(os.str());
  }
}

double quadrature(std::span<const double> f, const Grid& grid) {
  require_size(f, grid, "quadrature");
  double s = 0.0;
  for (double v : f) s += v;
  s -= 0.5 * (f.front() + f.back());
  return s * grid.spacing();
}

DensityState::DensityState(Grid grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)), mass_(0.0) {
  require_size(values_, grid_, "DensityState");
  for (double v : values_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw DomainError("DensityState values must be finite and nonnegative");
    }
  }
  mass_ = quadrature(values_, grid_);
}

double DensityState::max_value() const noexcept {
  return *std::max_element(values_.begin(), values_.end());
}

DensityState DensityState::scaled(double c) const {
  std::vector<double> v(values_);
  for (double& x : v) x *= c;
  return DensityState(grid_, std::move(v));
}

ProbabilityState::ProbabilityState(Grid grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  require_size(values_, grid_, "ProbabilityState");
  for (double v : values_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw DomainError("ProbabilityState values must be finite and nonnegative");
    }
  }
  const double m = quadrature(values_, grid_);
  if (std::abs(m - 1.0) > 1e-10) {
    throw DomainError("ProbabilityState must have unit mass");
  }
}

ProbabilityState normalize(const DensityState& n) {
  if (!(n.mass() > 0.0)) throw ExtinctionError("cannot normalize a density with nonpositive mass");
  std::vector<double> v(n.values());
  const double inv = 1.0 / n.mass();
  for (double& x : v) x *= inv;
  return ProbabilityState(n.grid(), std::move(v));
}

ProbabilityState make_probability(const Grid& grid, std::vector<double> values) {
  return normalize(DensityState(grid, std::move(values)));
}

Moments moments(const ProbabilityState& q) {
  const Grid& g = q.grid();
  std::vector<double> f(g.n_points());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = g.node(i) * q[i];
  const double mean = quadrature(f, g);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double d = g.node(i) - mean;
    f[i] = d * d * q[i];
  }
  return {mean, std::max(0.0, quadrature(f, g))};
}

std::vector<double> grid_delta(const Grid& grid, std::size_t node) {
  if (node >= grid.n_points()) throw DimensionError("grid_delta: node out of range");
  std::vector<double> v(grid.n_points(), 0.0);
  v[node] = 1.0 / grid.weight(node);
  return v;
}

double support_width(std::span<const double> values, const Grid& grid, double threshold) {
  require_size(values, grid, "support_width");
  const double mx = *std::max_element(values.begin(), values.end());
  if (!(mx > 0.0)) return 0.0;
  std::size_t lo = values.size(), hi = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] > threshold * mx) {
      lo = std::min(lo, i);
      hi = std::max(hi, i);
    }
  }
  return lo > hi ? 0.0 : grid.node(hi) - grid.node(lo);
}

}  // namespace selmut
