#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace selmut {

/// Uniform trait lattice on [x_min, x_max] with n_points nodes (endpoints included).
class Grid {
 public:
  Grid(double x_min, double x_max, std::size_t n_points);

  double x_min() const noexcept { return x_min_; }
  double x_max() const noexcept { return x_max_; }
  std::size_t n_points() const noexcept { return n_points_; }
  double spacing() const noexcept { return spacing_; }
  double width() const noexcept { return x_max_ - x_min_; }

  double node(std::size_t i) const noexcept { return x_min_ + static_cast<double>(i) * spacing_; }
  std::vector<double> nodes() const;

  /// Trapezoid weight of node i.
  double weight(std::size_t i) const noexcept {
    return (i == 0 || i + 1 == n_points_) ? 0.5 * spacing_ : spacing_;
  }
  std::vector<double> weights() const;

  /// Index of the node closest to x (clamped to the grid).
  std::size_t nearest(double x) const noexcept;

  bool operator==(const Grid& other) const noexcept {
    return x_min_ == other.x_min_ && x_max_ == other.x_max_ && n_points_ == other.n_points_;
  }

 private:
  double x_min_;
  double x_max_;
  std::size_t n_points_;
  double spacing_;
};

/// Composite trapezoid rule on the grid.
double quadrature(std::span<const double> f, const Grid& grid);

void require_size(std::span<const double> f, const Grid& grid, const char* what);

/// Nonnegative density with cached mass.
class DensityState {
 public:
  DensityState(Grid grid, std::vector<double> values);

  const Grid& grid() const noexcept { return grid_; }
  const std::vector<double>& values() const noexcept { return values_; }
  double mass() const noexcept { return mass_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  std::size_t size() const noexcept { return values_.size(); }
  double max_value() const noexcept;

  DensityState scaled(double c) const;

 private:
  Grid grid_;
  std::vector<double> values_;
  double mass_;
};

/// Density with unit quadrature mass.
class ProbabilityState {
 public:
  /// Validates unit mass to 1e-10.
  ProbabilityState(Grid grid, std::vector<double> values);

  const Grid& grid() const noexcept { return grid_; }
  const std::vector<double>& values() const noexcept { return values_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  std::size_t size() const noexcept { return values_.size(); }

  DensityState as_density() const { return DensityState(grid_, values_); }

 private:
  Grid grid_;
  std::vector<double> values_;
};

ProbabilityState normalize(const DensityState& n);

/// Renormalizes arbitrary nonnegative values to unit mass.
ProbabilityState make_probability(const Grid& grid, std::vector<double> values);

struct Moments {
  double mean;
  double variance;
};

Moments moments(const ProbabilityState& q);

/// Unit-mass field concentrated on one node (height 1/weight).
std::vector<double> grid_delta(const Grid& grid, std::size_t node);

/// Distance between the outermost nodes carrying more than `threshold` times the maximum.
double support_width(std::span<const double> values, const Grid& grid, double threshold = 1e-10);

}  // namespace selmut
