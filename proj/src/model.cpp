#include "selmut/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "selmut/errors.hpp"
#include "selmut/log.hpp"

namespace selmut {

std::string to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::NM: return "nM";
    case ModelFamily::GNM: return "gnM";
    case ModelFamily::AF: return "AF";
    case ModelFamily::ATH: return "ATH";
    case ModelFamily::General: return "general";
  }
  return "?";
}

ModelFamily parse_family(const std::string& name) {
  if (name == "nM") return ModelFamily::NM;
  if (name == "gnM") return ModelFamily::GNM;
  if (name == "AF") return ModelFamily::AF;
  if (name == "ATH") return ModelFamily::ATH;
  if (name == "general") return ModelFamily::General;
  throw ConfigurationError("unknown model family '" + name + "'");
}

namespace {

std::vector<double> dense_apply(const std::vector<double>& m, const Grid& grid, std::span<const double> f) {
  const std::size_t n = grid.n_points();
  std::vector<double> g(n), out(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) g[j] = grid.weight(j) * f[j];
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    const double* row = m.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) s += row[j] * g[j];
    out[i] = s;
  }
  return out;
}

[[noreturn]] void missing(const char* what, ModelFamily f) {
  throw ConfigurationError(std::string("model family ") + to_string(f) + " requires kernel '" + what + "'");
}

}  // namespace

Model::Model(ModelSpec spec) : spec_(std::move(spec)) {
  const Grid& grid = spec_.grid;
  if (!(spec_.eps > 0.0) || spec_.eps > 1.0) throw ConfigurationError("eps must lie in (0, 1]");
  const auto method = spec_.method;

  switch (spec_.family) {
    case ModelFamily::NM:
      if (!spec_.k0) missing("k0", spec_.family);
      break;
    case ModelFamily::ATH:
      if (!spec_.k0 && !spec_.k1) missing("k0", spec_.family);
      if (!spec_.mutation) missing("mutation", spec_.family);
      break;
    case ModelFamily::AF:
      if (!spec_.fecundity) missing("fecundity", spec_.family);
      if (!spec_.offspring) missing("offspring", spec_.family);
      break;
    case ModelFamily::GNM:
      if (!spec_.ks) missing("ks", spec_.family);
      break;
    case ModelFamily::General:
      if (!spec_.general) missing("general", spec_.family);
      break;
  }

  if (spec_.mutation && spec_.mutation->eps() != spec_.eps) spec_.mutation = spec_.mutation->with_eps(spec_.eps);
  if (spec_.offspring && spec_.offspring->kernel().eps() != spec_.eps) {
    spec_.offspring = spec_.offspring->with_eps(spec_.eps);
  }

  if (spec_.k0) {
    const auto& k = *spec_.k0;
    k0_conv_.emplace(grid, [&k](double z) { return k(z); }, method);
  }
  if (spec_.mutation) {
    const auto& g = *spec_.mutation;
    g_conv_.emplace(grid, [&g](double z) { return g(z); }, method);
  }
  if (spec_.family == ModelFamily::AF) {
    const auto& g = spec_.offspring->kernel();
    g_conv_.emplace(grid, [&g](double z) { return g(z); }, method);
    b_values_ = spec_.fecundity->sample(grid);
    const std::size_t n = grid.n_points();
    offspring_mass_.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        s += grid.weight(i) * g_conv_->lattice(static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(j));
      }
      if (!(s > 0.0)) throw DomainError("offspring kernel has no mass on the grid");
      offspring_mass_[j] = s;
    }
    offspring_norm_ = spec_.normalize_offspring ? offspring_mass_ : std::vector<double>(n, 1.0);
    double worst = 0.0;
    for (double c : offspring_mass_) worst = std::max(worst, std::abs(c - 1.0));
    if (worst > 1e-8) {
      std::ostringstream os;
      os << "offspring kernel loses up to " << worst << " of its mass at the grid boundary";
      log::debug("model", os.str());
    }
  }
  if (spec_.k1) {
    const auto& k1 = *spec_.k1;
    if (k1.translation_invariant()) {
      const auto& p = k1.profile();
      k1_conv_.emplace(grid, [&p](double z) { return p(z); }, method);
    } else {
      k1_dense_ = k1.matrix(grid);
    }
  }
  if (spec_.ks) {
    const auto& ks = *spec_.ks;
    if (ks.translation_invariant()) {
      const auto& p = ks.profile();
      ks_conv_.emplace(grid, [&p](double z) { return p(z); }, method);
    } else {
      ks_dense_ = ks.matrix(grid);
    }
  }
}

const SymmetricKernel& Model::k0() const {
  if (!spec_.k0) throw CapabilityError("model " + to_string(family()) + " has no kernel k0");
  return *spec_.k0;
}

const MutationKernel& Model::mutation() const {
  if (spec_.mutation) return *spec_.mutation;
  if (spec_.offspring) return spec_.offspring->kernel();
  throw CapabilityError("model " + to_string(family()) + " has no mutation kernel");
}

const Fecundity& Model::fecundity() const {
  if (!spec_.fecundity) throw CapabilityError("model " + to_string(family()) + " has no fecundity");
  return *spec_.fecundity;
}

const OffspringDistribution& Model::offspring() const {
  if (!spec_.offspring) throw CapabilityError("model " + to_string(family()) + " has no offspring distribution");
  return *spec_.offspring;
}

const TwoPointKernel& Model::ks() const {
  if (!spec_.ks) throw CapabilityError("model " + to_string(family()) + " has no kernel ks");
  return *spec_.ks;
}

const std::vector<double>& Model::fecundity_values() const {
  if (b_values_.empty()) throw CapabilityError("model " + to_string(family()) + " has no fecundity");
  return b_values_;
}

const std::vector<double>& Model::offspring_norm() const {
  if (offspring_norm_.empty()) throw CapabilityError("model " + to_string(family()) + " has no offspring distribution");
  return offspring_norm_;
}

std::vector<double> Model::convolve_k0(std::span<const double> f) const {
  if (!k0_conv_) throw CapabilityError("model " + to_string(family()) + " has no kernel k0");
  return k0_conv_->apply(f);
}

std::vector<double> Model::convolve_g(std::span<const double> f) const {
  if (!g_conv_) throw CapabilityError("model " + to_string(family()) + " has no mutation kernel");
  return g_conv_->apply(f);
}

std::vector<double> Model::apply_k1(std::span<const double> f) const {
  if (k1_conv_) return k1_conv_->apply(f);
  if (!k1_dense_.empty()) return dense_apply(k1_dense_, grid(), f);
  return convolve_k0(f);
}

std::vector<double> Model::apply_ks(std::span<const double> f) const {
  if (ks_conv_) return ks_conv_->apply(f);
  if (!ks_dense_.empty()) return dense_apply(ks_dense_, grid(), f);
  throw CapabilityError("model " + to_string(family()) + " has no kernel ks");
}

void Model::check_state(std::span<const double> n) const { require_size(n, grid(), "density"); }

std::vector<double> Model::offspring_spread(std::span<const double> f) const {
  std::vector<double> g(f.begin(), f.end());
  for (std::size_t j = 0; j < g.size(); ++j) g[j] /= offspring_norm_[j];
  return g_conv_->apply(g);
}

std::vector<double> Model::birth_term(const DensityState& n) const {
  if (!(n.grid() == grid())) throw DimensionError("density grid does not match the model grid");
  return birth_term(n.values());
}

std::vector<double> Model::birth_term(std::span<const double> n) const {
  check_state(n);
  const Grid& g = grid();
  const std::size_t N = g.n_points();
  const double rho = quadrature(n, g);
  if (!(rho > 0.0)) throw ExtinctionError("population mass is not positive");
  std::vector<double> out(N);

  switch (family()) {
    case ModelFamily::NM: {
      const auto k = convolve_k0(n);
      for (std::size_t i = 0; i < N; ++i) out[i] = k[i] * n[i] / rho;
      break;
    }
    case ModelFamily::GNM: {
      const auto k = apply_ks(n);
      for (std::size_t i = 0; i < N; ++i) out[i] = n[i] * k[i] / rho;
      break;
    }
    case ModelFamily::ATH: {
      const auto k = apply_k1(n);
      const auto gn = convolve_g(n);
      for (std::size_t i = 0; i < N; ++i) out[i] = k[i] * gn[i] / rho;
      break;
    }
    case ModelFamily::AF: {
      std::vector<double> bn(N);
      for (std::size_t j = 0; j < N; ++j) bn[j] = b_values_[j] * n[j];
      if (offspring().form() == OffspringForm::FemaleCentered) {
        out = offspring_spread(bn);
      } else {
        const double fertile = quadrature(bn, g) / rho;
        out = offspring_spread(n);
        for (double& v : out) v *= fertile;
      }
      break;
    }
    case ModelFamily::General: {
      const auto& K = spec_.general;
      for (std::size_t i = 0; i < N; ++i) {
        const double x = g.node(i);
        double s = 0.0;
        for (std::size_t j = 0; j < N; ++j) {
          if (n[j] == 0.0) continue;
          const double y = g.node(j);
          double inner = 0.0;
          for (std::size_t k = 0; k < N; ++k) inner += g.weight(k) * K(x, y, g.node(k)) * n[k];
          s += g.weight(j) * n[j] * inner;
        }
        out[i] = s / rho;
      }
      break;
    }
  }
  return out;
}

std::vector<double> Model::death_rate(double rho) const { return spec_.saturation.sample(grid(), rho); }

std::vector<double> Model::rhs(const DensityState& n) const {
  if (!(n.grid() == grid())) throw DimensionError("density grid does not match the model grid");
  return rhs(n.values());
}

std::vector<double> Model::rhs(std::span<const double> n) const {
  auto out = birth_term(n);
  const double rho = quadrature(n, grid());
  const double inv_eps = 1.0 / eps();
  double peak = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (out[i] - spec_.saturation(grid().node(i), rho) * n[i]) * inv_eps;
    const double a = std::abs(out[i]);
    if (!std::isfinite(a)) throw StiffnessError("right-hand side is not finite");
    peak = std::max(peak, a);
  }
  if (peak > spec_.rhs_ceiling) {
    std::ostringstream os;
    os << "right-hand side magnitude " << peak << " exceeds the ceiling " << spec_.rhs_ceiling;
    throw StiffnessError(os.str());
  }
  return out;
}

double Model::rho_rhs(const DensityState& n) const { return quadrature(rhs(n), grid()); }

std::vector<double> Model::birth_tangent(std::span<const double> n, std::span<const double> v) const {
  check_state(n);
  check_state(v);
  const Grid& g = grid();
  const std::size_t N = g.n_points();
  const double rho = quadrature(n, g);
  if (!(rho > 0.0)) throw ExtinctionError("population mass is not positive");
  const double sigma = quadrature(v, g);
  std::vector<double> out(N);

  switch (family()) {
    case ModelFamily::NM:
    case ModelFamily::GNM: {
      const bool nm = family() == ModelFamily::NM;
      const auto kn = nm ? convolve_k0(n) : apply_ks(n);
      const auto kv = nm ? convolve_k0(v) : apply_ks(v);
      for (std::size_t i = 0; i < N; ++i) {
        out[i] = (kv[i] * n[i] + kn[i] * v[i]) / rho - kn[i] * n[i] * sigma / (rho * rho);
      }
      break;
    }
    case ModelFamily::ATH: {
      const auto kn = apply_k1(n);
      const auto kv = apply_k1(v);
      const auto gn = convolve_g(n);
      const auto gv = convolve_g(v);
      for (std::size_t i = 0; i < N; ++i) {
        out[i] = (kv[i] * gn[i] + kn[i] * gv[i]) / rho - kn[i] * gn[i] * sigma / (rho * rho);
      }
      break;
    }
    case ModelFamily::AF: {
      std::vector<double> bv(N);
      for (std::size_t j = 0; j < N; ++j) bv[j] = b_values_[j] * v[j];
      if (offspring().form() == OffspringForm::FemaleCentered) {
        out = offspring_spread(bv);
      } else {
        std::vector<double> bn(N);
        for (std::size_t j = 0; j < N; ++j) bn[j] = b_values_[j] * n[j];
        const double fn = quadrature(bn, g);
        const double fv = quadrature(bv, g);
        const auto sn = offspring_spread(n);
        const auto sv = offspring_spread(v);
        const double c1 = fv / rho - fn * sigma / (rho * rho);
        const double c2 = fn / rho;
        for (std::size_t i = 0; i < N; ++i) out[i] = c1 * sn[i] + c2 * sv[i];
      }
      break;
    }
    case ModelFamily::General: {
      const auto& K = spec_.general;
      const auto b = birth_term(n);
      for (std::size_t i = 0; i < N; ++i) {
        const double x = g.node(i);
        double s = 0.0;
        for (std::size_t j = 0; j < N; ++j) {
          const double y = g.node(j);
          for (std::size_t k = 0; k < N; ++k) {
            s += g.weight(j) * g.weight(k) * K(x, y, g.node(k)) * (v[j] * n[k] + n[j] * v[k]);
          }
        }
        out[i] = s / rho - b[i] * sigma / rho;
      }
      break;
    }
  }
  return out;
}

std::vector<double> Model::rhs_tangent(std::span<const double> n, std::span<const double> v) const {
  auto out = birth_tangent(n, v);
  const Grid& g = grid();
  const double rho = quadrature(n, g);
  const double sigma = quadrature(v, g);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = g.node(i);
    out[i] = (out[i] - spec_.saturation(x, rho) * v[i] - spec_.saturation.d_rho(x, rho) * sigma * n[i]) / eps();
  }
  return out;
}

double Model::rho_second_derivative(const DensityState& n) const {
  const auto f = rhs(n);
  return quadrature(rhs_tangent(n.values(), f), grid());
}

bool Model::has_pointwise_kernel() const noexcept {
  return family() == ModelFamily::AF || family() == ModelFamily::ATH || family() == ModelFamily::General;
}

double Model::kernel3(double x, double y, double z) const {
  switch (family()) {
    case ModelFamily::AF: return fecundity()(y) * offspring()(x, y, z);
    case ModelFamily::ATH: {
      const double k = spec_.k1 ? (*spec_.k1)(x, z) : k0()(x - z);
      return k * mutation()(x - y);
    }
    case ModelFamily::General: return spec_.general(x, y, z);
    default:
      throw CapabilityError("model " + to_string(family()) + " has no pointwise kernel K_eps(x, y, z)");
  }
}

std::vector<double> Model::mass_matrix() const {
  const Grid& g = grid();
  const std::size_t N = g.n_points();
  std::vector<double> q(N * N, 0.0);
  switch (family()) {
    case ModelFamily::NM:
      for (std::size_t j = 0; j < N; ++j)
        for (std::size_t k = 0; k < N; ++k) q[j * N + k] = k0_conv_->lattice(static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(k));
      break;
    case ModelFamily::GNM: {
      const auto& ks = *spec_.ks;
      for (std::size_t j = 0; j < N; ++j)
        for (std::size_t k = 0; k < N; ++k) q[j * N + k] = ks(g.node(j), g.node(k));
      break;
    }
    case ModelFamily::AF: {
      const bool female = offspring().form() == OffspringForm::FemaleCentered;
      for (std::size_t j = 0; j < N; ++j)
        for (std::size_t k = 0; k < N; ++k) {
          const std::size_t parent = female ? j : k;
          q[j * N + k] = b_values_[j] * offspring_mass_[parent] / offspring_norm_[parent];
        }
      break;
    }
    case ModelFamily::ATH: {
      // sum_x w_x K1(x, z) G(x - y)
      for (std::size_t k = 0; k < N; ++k) {
        std::vector<double> col(N);
        for (std::size_t i = 0; i < N; ++i) {
          col[i] = spec_.k1 ? (*spec_.k1)(g.node(i), g.node(k)) : k0_conv_->lattice(static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(k));
        }
        const auto gc = g_conv_->apply(col, ConvolutionMethod::Direct);
        for (std::size_t j = 0; j < N; ++j) q[j * N + k] = gc[j];
      }
      break;
    }
    case ModelFamily::General:
      for (std::size_t j = 0; j < N; ++j)
        for (std::size_t k = 0; k < N; ++k) {
          double s = 0.0;
          for (std::size_t i = 0; i < N; ++i) s += g.weight(i) * spec_.general(g.node(i), g.node(j), g.node(k));
          q[j * N + k] = s;
        }
      break;
  }
  return q;
}

}  // namespace selmut
