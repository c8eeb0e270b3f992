#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "selmut/grid.hpp"

namespace testing {

inline std::vector<double> random_field(std::size_t n, std::uint64_t seed, double lo = 0.1, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

inline std::vector<double> sample(const selmut::Grid& g, auto f) {
  std::vector<double> v(g.n_points());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(g.node(i));
  return v;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs(const std::vector<double>& a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace testing
