#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "selmut/grid.hpp"

namespace selmut {

enum class ConvolutionMethod { Direct, Fft, Auto };

/// (K * f)(x_i) = sum_j w_j K(x_i - x_j) f_j, with K tabulated once on the
/// difference lattice {k h : |k| < N}.
///
/// FFT mode zero-pads to a power of two >= 2N, so the result is the linear
/// convolution on the truncated line. Copies share the precomputed spectrum;
/// concurrent apply() calls are safe.
class Convolver {
 public:
  Convolver(const Grid& grid, const std::function<double(double)>& kernel,
            ConvolutionMethod method = ConvolutionMethod::Auto);

  const Grid& grid() const noexcept { return grid_; }
  ConvolutionMethod method() const noexcept { return method_; }

  std::vector<double> apply(std::span<const double> f) const { return apply(f, method_); }
  std::vector<double> apply(std::span<const double> f, ConvolutionMethod method) const;
  std::vector<double> apply(const DensityState& n) const;

  /// K(k * spacing) for -(N-1) <= k <= N-1.
  double lattice(std::ptrdiff_t k) const { return table_[static_cast<std::size_t>(k + offset_)]; }

  /// Largest |K| just outside the tabulated window (the part the truncation drops).
  double dropped_tail() const noexcept { return dropped_tail_; }

 private:
  struct Spectrum;

  std::vector<double> direct(std::span<const double> f) const;
  std::vector<double> fft(std::span<const double> f) const;

  Grid grid_;
  ConvolutionMethod method_;
  std::vector<double> table_;
  std::ptrdiff_t offset_;
  double dropped_tail_;
  std::shared_ptr<const Spectrum> spectrum_;
};

}  // namespace selmut
