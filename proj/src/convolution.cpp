#include "selmut/convolution.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <sstream>

#include "selmut/errors.hpp"
#include "selmut/log.hpp"

namespace selmut {

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t m = 1;
  while (m < n) m <<= 1;
  return m;
}

}  // namespace

struct Convolver::Spectrum {
  std::size_t size = 0;
  std::vector<std::complex<double>> kernel_hat;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;

  ~Spectrum() {
    std::lock_guard lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

Convolver::Convolver(const Grid& grid, const std::function<double(double)>& kernel, ConvolutionMethod method)
    : grid_(grid), method_(method), offset_(static_cast<std::ptrdiff_t>(grid.n_points()) - 1) {
  const std::size_t n = grid.n_points();
  const double h = grid.spacing();
  table_.resize(2 * n - 1);
  for (std::size_t k = 0; k < table_.size(); ++k) {
    const double v = kernel((static_cast<double>(k) - static_cast<double>(offset_)) * h);
    if (!std::isfinite(v)) throw DomainError("kernel is not finite on the difference lattice");
    table_[k] = v;
  }
  dropped_tail_ = std::max(std::abs(kernel(static_cast<double>(n) * h)), std::abs(kernel(-static_cast<double>(n) * h)));
  const double peak = *std::max_element(table_.begin(), table_.end(),
                                        [](double a, double b) { return std::abs(a) < std::abs(b); });
  if (dropped_tail_ > 1e-12 * std::abs(peak)) {
    std::ostringstream os;
    os << "kernel tail beyond the grid width is dropped (|K| up to " << dropped_tail_ << ")";
    log::debug("convolve", os.str());
  }

  if (method_ == ConvolutionMethod::Auto) method_ = n >= 96 ? ConvolutionMethod::Fft : ConvolutionMethod::Direct;

  auto spec = std::make_shared<Spectrum>();
  spec->size = next_pow2(2 * n);
  const std::size_t m = spec->size;
  const std::size_t mc = m / 2 + 1;
  std::vector<double> real(m, 0.0);
  for (std::size_t k = 0; k < n; ++k) real[k] = table_[static_cast<std::size_t>(offset_) + k];
  for (std::size_t k = 1; k < n; ++k) real[m - k] = table_[static_cast<std::size_t>(offset_) - k];
  spec->kernel_hat.resize(mc);
  {
    std::lock_guard lock(planner_mutex());
    auto* cbuf = reinterpret_cast<fftw_complex*>(spec->kernel_hat.data());
    spec->forward = fftw_plan_dft_r2c_1d(static_cast<int>(m), real.data(), cbuf, FFTW_ESTIMATE | FFTW_UNALIGNED);
    std::vector<double> scratch(m);
    spec->backward = fftw_plan_dft_c2r_1d(static_cast<int>(m), cbuf, scratch.data(),
                                          FFTW_ESTIMATE | FFTW_UNALIGNED | FFTW_DESTROY_INPUT);
    if (!spec->forward || !spec->backward) throw Error("FFTW planning failed");
  }
  fftw_execute_dft_r2c(spec->forward, real.data(), reinterpret_cast<fftw_complex*>(spec->kernel_hat.data()));
  spectrum_ = std::move(spec);
}

std::vector<double> Convolver::apply(std::span<const double> f, ConvolutionMethod method) const {
  require_size(f, grid_, "convolution input");
  if (method == ConvolutionMethod::Auto) method = method_;
  return method == ConvolutionMethod::Fft ? fft(f) : direct(f);
}

std::vector<double> Convolver::apply(const DensityState& n) const {
  if (!(n.grid() == grid_)) throw DimensionError("density grid does not match the convolution grid");
  return apply(n.values());
}

std::vector<double> Convolver::direct(std::span<const double> f) const {
  const std::size_t n = grid_.n_points();
  std::vector<double> g(n);
  for (std::size_t j = 0; j < n; ++j) g[j] = grid_.weight(j) * f[j];
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = table_.data() + offset_ + static_cast<std::ptrdiff_t>(i);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += *(row - static_cast<std::ptrdiff_t>(j)) * g[j];
    out[i] = s;
  }
  return out;
}

std::vector<double> Convolver::fft(std::span<const double> f) const {
  const std::size_t n = grid_.n_points();
  const std::size_t m = spectrum_->size;
  std::vector<double> buf(m, 0.0);
  for (std::size_t j = 0; j < n; ++j) buf[j] = grid_.weight(j) * f[j];
  std::vector<std::complex<double>> hat(m / 2 + 1);
  fftw_execute_dft_r2c(spectrum_->forward, buf.data(), reinterpret_cast<fftw_complex*>(hat.data()));
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < hat.size(); ++k) hat[k] *= spectrum_->kernel_hat[k] * scale;
  fftw_execute_dft_c2r(spectrum_->backward, reinterpret_cast<fftw_complex*>(hat.data()), buf.data());
  buf.resize(n);
  return buf;
}

}  // namespace selmut
