#include "selmut/bounds.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>

#include "selmut/convolution.hpp"
#include "selmut/errors.hpp"
#include "selmut/log.hpp"

namespace selmut {

std::vector<ProbabilityState> standard_probes(const Grid& grid, std::span<const ProbabilityState> extra) {
  std::vector<ProbabilityState> out;
  out.reserve(grid.n_points() + 1 + extra.size());
  for (std::size_t j = 0; j < grid.n_points(); ++j) out.emplace_back(grid, grid_delta(grid, j));
  out.push_back(make_probability(grid, std::vector<double>(grid.n_points(), 1.0)));
  for (const auto& p : extra) {
    if (!(p.grid() == grid)) throw DimensionError("probe measure lives on a different grid");
    out.push_back(p);
  }
  return out;
}

std::vector<double> probe_masses(const ProbabilityState& q) {
  std::vector<double> m(q.size());
  for (std::size_t j = 0; j < m.size(); ++j) m[j] = q.grid().weight(j) * q[j];
  return m;
}

namespace {

void project_simplex(std::vector<double>& v) {
  std::vector<double> u(v);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cum += u[k];
    const double t = (cum - 1.0) / static_cast<double>(k + 1);
    if (u[k] - t > 0.0) theta = t;
  }
  for (double& x : v) x = std::max(0.0, x - theta);
}

struct Objective {
  Eigen::MatrixXd s;
  Eigen::VectorXd c;

  Objective(std::span<const double> q, std::span<const double> lin, std::size_t n)
      : s(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)), c(static_cast<Eigen::Index>(n)) {
    for (std::size_t i = 0; i < n; ++i) {
      c(static_cast<Eigen::Index>(i)) = lin[i];
      for (std::size_t j = 0; j < n; ++j)
        s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 0.5 * (q[i * n + j] + q[j * n + i]);
    }
  }

  // returns f and writes gradient 2 S m + c
  double eval(const Eigen::VectorXd& m, Eigen::VectorXd& grad) const {
    grad.noalias() = s * m;
    const double f = m.dot(grad) + c.dot(m);
    grad = 2.0 * grad + c;
    return f;
  }

  double gap(const Eigen::VectorXd& m, const Eigen::VectorXd& grad) const {
    return std::max(0.0, grad.dot(m) - grad.minCoeff());
  }

  // exact minimiser on the face spanned by the current support, if it stays feasible
  std::optional<Eigen::VectorXd> polish(const Eigen::VectorXd& m) const {
    std::vector<Eigen::Index> sup;
    const double cut = 1e-14 * m.maxCoeff();
    for (Eigen::Index i = 0; i < m.size(); ++i)
      if (m(i) > cut) sup.push_back(i);
    const auto k = static_cast<Eigen::Index>(sup.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k + 1, k + 1);
    Eigen::VectorXd b(k + 1);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) a(i, j) = 2.0 * s(sup[i], sup[j]);
      a(i, k) = 1.0;
      a(k, i) = 1.0;
      b(i) = -c(sup[i]);
    }
    b(k) = 1.0;
    const Eigen::VectorXd x = a.partialPivLu().solve(b);
    if (!x.allFinite()) return std::nullopt;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m.size());
    for (Eigen::Index i = 0; i < k; ++i) {
      if (x(i) < 0.0) return std::nullopt;
      out(sup[i]) = x(i);
    }
    const double sum = out.sum();
    if (!(std::abs(sum - 1.0) < 1e-9)) return std::nullopt;
    return out / sum;
  }
};

void project_simplex(Eigen::VectorXd& v) {
  std::vector<double> w(v.data(), v.data() + v.size());
  project_simplex(w);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = w[static_cast<std::size_t>(i)];
}

double power_norm(const Eigen::MatrixXd& s) {
  const auto n = s.rows();
  Eigen::VectorXd v = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n))), w(n);
  double lam = 0.0;
  for (int it = 0; it < 200; ++it) {
    w.noalias() = s * v;
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
    if (std::abs(nw - lam) <= 1e-10 * nw) return nw;
    lam = nw;
  }
  return lam;
}

}  // namespace

SimplexQp minimize_on_simplex(std::span<const double> q, std::span<const double> c, std::size_t n, bool convex,
                              int max_iter, double gap_tol) {
  if (q.size() != n * n || c.size() != n || n == 0) throw DimensionError("simplex QP dimensions do not match");
  const Objective obj(q, c, n);
  const double lip = 2.0 * power_norm(obj.s) * 1.05 + 1e-300;
  const auto nn = static_cast<Eigen::Index>(n);
  Eigen::VectorXd m = Eigen::VectorXd::Constant(nn, 1.0 / static_cast<double>(n)), y(m), prev(m), grad(nn), gy(nn),
                  next(nn);
  double fm = obj.eval(m, grad);
  double t = 1.0;
  int it = 0;
  auto done = [&] { return obj.gap(m, grad) <= gap_tol * std::max(1.0, std::abs(fm)); };
  for (; it < max_iter; ++it) {
    obj.eval(y, gy);
    next = y - gy / lip;
    project_simplex(next);
    const double fn = obj.eval(next, grad);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if (fn > fm) {
      // restart the momentum
      y = m;
      t = 1.0;
      obj.eval(m, grad);
      continue;
    }
    prev = m;
    m = next;
    fm = fn;
    y = m + (t - 1.0) / tn * (m - prev);
    t = tn;
    if (it % 10 == 0 && done()) break;
    if (convex && it % 100 == 99) {
      if (auto p = obj.polish(m)) {
        Eigen::VectorXd gp(nn);
        const double fp = obj.eval(*p, gp);
        if (fp <= fm && obj.gap(*p, gp) < obj.gap(m, grad)) {
          m = *p;
          y = m;
          t = 1.0;
          fm = fp;
          grad = gp;
          if (done()) break;
        }
      }
    }
  }
  fm = obj.eval(m, grad);
  SimplexQp out;
  out.upper = fm;
  out.lower = fm - obj.gap(m, grad);
  out.certified = convex;
  out.masses.assign(m.data(), m.data() + m.size());
  out.iterations = it;
  return out;
}

namespace {

std::pair<double, double> eigen_range(const std::vector<double>& q, std::size_t n) {
  Eigen::MatrixXd a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (q[i * n + j] + q[j * n + i]);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw Error("eigenvalue computation failed");
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

bool psd_from(std::pair<double, double> r) { return r.first >= -1e-10 * std::max(std::abs(r.second), 1e-300); }

}  // namespace

KappaAnalysis::KappaAnalysis(const Model& model, std::vector<ProbabilityState> probes)
    : grid_(model.grid()), saturation_(model.saturation()), n_(model.grid().n_points()), probes_(std::move(probes)) {
  if (probes_.empty()) throw ConfigurationError("probe family is empty");
  q_ = model.mass_matrix();
  k_max_ = *std::max_element(q_.begin(), q_.end());
  row_min_.resize(n_);
  for (std::size_t y = 0; y < n_; ++y) {
    row_min_[y] = *std::min_element(q_.begin() + static_cast<std::ptrdiff_t>(y * n_),
                                    q_.begin() + static_cast<std::ptrdiff_t>((y + 1) * n_));
  }
  masses_.reserve(probes_.size());
  for (const auto& p : probes_) {
    if (!(p.grid() == grid_)) throw DimensionError("probe measure lives on a different grid");
    masses_.push_back(probe_masses(p));
  }
  const auto range = eigen_range(q_, n_);
  lambda_min_ = range.first;
  lambda_max_ = range.second;
  psd_ = psd_from(range);
  const std::vector<double> zero(n_, 0.0);
  kappa2_qp_ = minimize_on_simplex(q_, zero, n_, psd_);

  if (model.family() == ModelFamily::ATH && model.has_k0()) {
    std::vector<double> k(n_ * n_);
    const auto& k0 = model.k0();
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) k[i * n_ + j] = k0(grid_.node(i) - grid_.node(j));
    const bool convex = psd_from(eigen_range(k, n_));
    kappa2_k0_ = minimize_on_simplex(k, zero, n_, convex);
  } else if (model.family() == ModelFamily::NM) {
    kappa2_k0_ = kappa2_qp_;
  }
}

double KappaAnalysis::quadratic(std::span<const double> m) const {
  std::size_t nz = 0, idx = 0;
  for (std::size_t j = 0; j < n_; ++j) {
    if (m[j] != 0.0) {
      ++nz;
      idx = j;
    }
  }
  if (nz == 1) return m[idx] * m[idx] * q_[idx * n_ + idx];
  double s = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    if (m[i] == 0.0) continue;
    double row = 0.0;
    for (std::size_t j = 0; j < n_; ++j) row += q_[i * n_ + j] * m[j];
    s += m[i] * row;
  }
  return s;
}

ProbeEstimate KappaAnalysis::K_M_probe() const {
  double best = -std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t p = 0; p < masses_.size(); ++p) {
    const auto& m = masses_[p];
    for (std::size_t y = 0; y < n_; ++y) {
      double s = 0.0;
      for (std::size_t z = 0; z < n_; ++z) s += q_[y * n_ + z] * m[z];
      if (s > best) {
        best = s;
        arg = p;
      }
    }
  }
  return {best, arg};
}

double KappaAnalysis::kappa_m(double rho) const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t y = 0; y < n_; ++y) best = std::min(best, row_min_[y] - saturation_(grid_.node(y), rho));
  return best;
}

ProbeEstimate KappaAnalysis::kappa1_probe(double rho) const {
  const auto r = saturation_.sample(grid_, rho);
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t p = 0; p < masses_.size(); ++p) {
    const auto& m = masses_[p];
    double lin = 0.0;
    for (std::size_t j = 0; j < n_; ++j) lin += r[j] * m[j];
    const double v = quadratic(m) - lin;
    if (v < best) {
      best = v;
      arg = p;
    }
  }
  return {best, arg};
}

SimplexQp KappaAnalysis::kappa1_qp(double rho) const {
  auto c = saturation_.sample(grid_, rho);
  for (double& v : c) v = -v;
  return minimize_on_simplex(q_, c, n_, psd_);
}

ProbeEstimate KappaAnalysis::kappa2_probe() const {
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t p = 0; p < masses_.size(); ++p) {
    const double v = quadratic(masses_[p]);
    if (v < best) {
      best = v;
      arg = p;
    }
  }
  return {best, arg};
}

bool Validation::has(const std::string& check) const {
  return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.check == check; });
}

namespace {

double bisect_increasing(const std::function<double(double)>& f, double target) {
  // smallest rho >= 0 with f(rho) >= target, f increasing
  if (f(0.0) >= target) return 0.0;
  double hi = 1.0;
  int guard = 0;
  while (f(hi) < target) {
    hi *= 2.0;
    if (++guard > 200) throw DomainError("saturation envelope never reaches the target value");
  }
  double lo = 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double invert_lower_envelope(const SaturationTerm& r, const Grid& grid, double target) {
  if (r.is_linear()) return target / r.nu();
  return bisect_increasing([&](double rho) { return r.R_m(rho, grid); }, target);
}

double invert_upper_envelope(const SaturationTerm& r, const Grid& grid, double target) {
  if (r.is_linear()) return target / r.nu();
  return bisect_increasing([&](double rho) { return r.R_M(rho, grid); }, target);
}

Validation validate(const Model& model, std::span<const ProbabilityState> probes, const DensityState* initial) {
  if (probes.empty()) throw ConfigurationError("probe family is empty");
  const Grid& grid = model.grid();
  const auto& sat = model.saturation();
  Validation out;
  auto& cert = out.certificate;
  auto flag = [&](std::string check, std::string detail) {
    log::warn("validate", check + ": " + detail);
    out.violations.push_back({std::move(check), std::move(detail)});
  };

  KappaAnalysis ka(model, std::vector<ProbabilityState>(probes.begin(), probes.end()));
  cert.K_M = ka.K_M();
  cert.rho_M = invert_lower_envelope(sat, grid, cert.K_M);
  if (!(cert.rho_M > 0.0)) flag("rho_M_positive", "upper mass bound is not positive");

  // saturation monotone in rho
  {
    const std::size_t stride = std::max<std::size_t>(1, grid.n_points() / 64);
    const double top = 2.0 * std::max(cert.rho_M, 1e-3);
    for (int k = 0; k <= 40; ++k) {
      const double rho = top * k / 40.0;
      for (std::size_t i = 0; i < grid.n_points(); i += stride) {
        const double x = grid.node(i);
        const double d = sat.d_rho(x, rho);
        if (!(d > 0.0)) {
          std::ostringstream os;
          os << "dR/drho = " << d << " at x=" << x << ", rho=" << rho;
          flag("saturation_increasing", os.str());
          k = 41;
          break;
        }
      }
    }
    if (sat.R_m(0.0, grid) < 0.0) flag("saturation_nonnegative", "R(x, 0) is negative somewhere");
  }

  if (model.has_mutation()) {
    const double m = model.mutation().grid_mass(grid);
    if (std::abs(m - 1.0) > 1e-8) {
      std::ostringstream os;
      os << "grid mass of the mutation kernel is " << m << "; the grid is too coarse or too narrow";
      flag("mutation_mass", os.str());
    }
  }

  if (model.family() == ModelFamily::GNM) {
    const auto& ks = model.ks();
    double asym = 0.0;
    for (std::size_t i = 0; i < grid.n_points(); ++i)
      for (std::size_t j = 0; j < i; ++j) asym = std::max(asym, std::abs(ks(grid.node(i), grid.node(j)) - ks(grid.node(j), grid.node(i))));
    if (asym > 1e-12) flag("ks_symmetric", "K_S(x, y) differs from K_S(y, x) by " + std::to_string(asym));
    if (ka.kappa2_probe().value <= 0.0) flag("ks_positive", "quadratic form of K_S vanishes on a probe measure");
    if (sat.form() == SaturationForm::General) flag("saturation_separable", "gnM expects R0(x) + R1(rho)");
  }

  if (model.spec().k1) {
    const double kb = model.spec().k1->sup_on(grid);
    if (!std::isfinite(kb)) flag("k1_bounded", "K1 is unbounded on the grid");
    cert.K_bar = kb;
  } else if (model.family() == ModelFamily::ATH) {
    cert.K_bar = model.k0().sup();
  }

  // lower mass bound, in order of applicability
  cert.kappa2_upper = ka.kappa2_probe().value;
  cert.kappa2_lower = ka.kappa2_qp().lower;
  cert.kappa2_certified = ka.kappa2_qp().certified;
  if (!cert.kappa2_certified) flag("kappa2_certified", "bilinear form is not positive semidefinite; kappa'' is a probe estimate only");
  if (ka.kappa_m(0.0) > 0.0) {
    const double r = bisect_increasing([&](double rho) { return -ka.kappa_m(rho); }, 0.0);
    cert.rho_m_candidates.emplace_back("kappa_m root", r);
  }
  {
    const bool separable = sat.form() != SaturationForm::General;
    std::optional<SimplexQp> base;
    if (separable) {
      auto c = sat.sample(grid, 0.0);
      const double r1_0 = sat.r1(0.0);
      for (double& v : c) v = -(v - r1_0);
      base = minimize_on_simplex(ka.form(), c, grid.n_points(), ka.psd());
    }
    auto k1_lower = [&](double rho) {
      if (base) return base->lower - sat.r1(rho);
      return ka.kappa1_qp(rho).lower;
    };
    if (ka.psd() && k1_lower(0.0) > 0.0) {
      const double r = bisect_increasing([&](double rho) { return -k1_lower(rho); }, 0.0);
      cert.rho_m_candidates.emplace_back("kappa1 root", r);
    }
  }
  if (cert.kappa2_certified && cert.kappa2_lower > sat.R_M(0.0, grid)) {
    cert.rho_m_candidates.emplace_back("kappa2 inversion", invert_upper_envelope(sat, grid, cert.kappa2_lower));
  }
  if (!cert.rho_m_candidates.empty()) {
    cert.rho_m = cert.rho_m_candidates.front().second;
    cert.rho_m_rule = cert.rho_m_candidates.front().first;
    if (!(*cert.rho_m < cert.rho_M)) flag("rho_bounds_order", "rho_m is not below rho_M");
  } else {
    flag("rho_m_absent", "no non-extinction certificate applies");
  }

  if (model.family() == ModelFamily::ATH && model.has_k0()) {
    // the ATH mass matrix is the eta form itself, so its certified lower bound applies
    cert.eta0 = cert.kappa2_certified ? cert.kappa2_lower : eta_estimate(grid, model.k0(), model.mutation(), probes).value;
    if (!(*cert.eta0 > 0.0)) flag("eta_positive", "eta estimate is not positive");
    if (sat.is_linear() && cert.rho_m) cert.C1 = *cert.eta0 + 2.0 * sat.nu() * *cert.rho_m;
  }

  if (model.family() == ModelFamily::AF) {
    const double e = model.eps();
    const auto rep = check_alpha_assumption(grid, model.fecundity(), model.offspring(), std::span(&e, 1), probes,
                                            model.spec().normalize_offspring);
    // constant B makes the mixing term vanish identically; the probe only sees round-off
    cert.alpha_C = model.fecundity().is_constant() ? 0.0 : cert.rho_M * rep.C_hat;
    double cf = 0.0;
    const auto b = model.fecundity_values();
    for (int k = 0; k <= 40; ++k) {
      const double rho = cert.rho_M * k / 40.0;
      for (std::size_t i = 0; i < grid.n_points(); ++i) cf = std::max(cf, std::abs(b[i] - sat(grid.node(i), rho)));
    }
    cert.C_f_bar = cf;
  }

  if (initial) {
    const double rd = model.rho_rhs(*initial);
    if (!std::isfinite(rd)) flag("initial_rho_dot", "initial mass derivative is not finite");
    cert.eps_rho_dot_neg0 = model.eps() * std::max(0.0, -rd);
  }
  return out;
}

namespace {

// (G~B)(p) = sum_x w_x G(x - p) B(x) / c_p
std::vector<double> spread_fecundity(const Grid& grid, const std::vector<double>& b, const MutationKernel& g,
                                     bool normalize) {
  const std::size_t n = grid.n_points();
  std::vector<double> out(n);
  for (std::size_t p = 0; p < n; ++p) {
    double s = 0.0, c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double k = grid.weight(i) * g(grid.node(i) - grid.node(p));
      s += k * b[i];
      c += k;
    }
    out[p] = normalize ? s / c : s;
  }
  return out;
}

double alpha_value(const std::vector<double>& m, const std::vector<double>& b, const std::vector<double>& gb,
                   OffspringForm form) {
  double bm = 0.0, bgm = 0.0, gm = 0.0;
  for (std::size_t j = 0; j < m.size(); ++j) {
    bm += b[j] * m[j];
    bgm += b[j] * gb[j] * m[j];
    gm += gb[j] * m[j];
  }
  return (form == OffspringForm::FemaleCentered ? bgm : bm * gm) - bm * bm;
}

}  // namespace

double alpha_functional(const Grid& grid, const Fecundity& b, const OffspringDistribution& alpha,
                        const ProbabilityState& phi, bool normalize) {
  const auto bv = b.sample(grid);
  const auto gb = spread_fecundity(grid, bv, alpha.kernel(), normalize);
  return alpha_value(probe_masses(phi), bv, gb, alpha.form());
}

AlphaReport check_alpha_assumption(const Grid& grid, const Fecundity& b, const OffspringDistribution& alpha,
                                   std::span<const double> eps_list, std::span<const ProbabilityState> probes,
                                   bool normalize) {
  if (probes.empty()) throw ConfigurationError("probe family is empty");
  AlphaReport rep;
  const auto bv = b.sample(grid);
  std::vector<std::vector<double>> masses;
  masses.reserve(probes.size());
  for (const auto& p : probes) masses.push_back(probe_masses(p));
  for (double eps : eps_list) {
    const auto a = alpha.with_eps(eps);
    const auto gb = spread_fecundity(grid, bv, a.kernel(), normalize);
    AlphaLevel lvl{eps, std::numeric_limits<double>::infinity(), 0, 0.0};
    for (std::size_t p = 0; p < masses.size(); ++p) {
      const double l = alpha_value(masses[p], bv, gb, a.form());
      if (l < lvl.min_L) {
        lvl.min_L = l;
        lvl.argmin = p;
      }
    }
    lvl.C_hat = std::max(0.0, -lvl.min_L / eps);
    rep.C_hat = std::max(rep.C_hat, lvl.C_hat);
    rep.levels.push_back(lvl);
  }
  // a finite constant that does not blow up as eps shrinks
  rep.holds = std::isfinite(rep.C_hat);
  if (rep.levels.size() >= 2) {
    const double first = rep.levels.front().C_hat;
    const double last = rep.levels.back().C_hat;
    if (last > 1.5 * first + 1e-12) rep.holds = false;
  }
  return rep;
}

GeReport check_ge_convergence(const Grid& grid, const Profile& g, std::span<const double> eps_list,
                              std::span<const double> phi, std::span<const double> psi, double tol) {
  require_size(phi, grid, "phi");
  require_size(psi, grid, "psi");
  GeReport rep;
  rep.phi_variation = 0.0;
  for (std::size_t i = 1; i < phi.size(); ++i) rep.phi_variation += std::abs(phi[i] - phi[i - 1]);
  const double base = quadrature([&] {
    std::vector<double> v(phi.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = psi[i] * phi[i];
    return v;
  }(), grid);
  for (double eps : eps_list) {
    const MutationKernel ge(g, eps);
    const Convolver conv(grid, [&](double z) { return ge(z); }, ConvolutionMethod::Direct);
    const auto gphi = conv.apply(phi);
    std::vector<double> v(phi.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = psi[i] * gphi[i];
    GeLevel lvl{eps, std::abs(quadrature(v, grid) - base), 2.0 * rep.phi_variation * eps / std::sqrt(2.0 * std::numbers::pi), false};
    lvl.pass = lvl.discrepancy <= lvl.bound + tol;
    rep.pass = rep.pass && lvl.pass;
    rep.levels.push_back(lvl);
  }
  return rep;
}

ProbeEstimate eta_estimate(const Grid& grid, const SymmetricKernel& k0, const MutationKernel& g,
                           std::span<const ProbabilityState> probes) {
  if (probes.empty()) throw ConfigurationError("probe family is empty");
  const Convolver ck(grid, [&](double z) { return k0(z); });
  const Convolver cg(grid, [&](double z) { return g(z); });
  ProbeEstimate best{std::numeric_limits<double>::infinity(), 0};
  std::vector<double> prod(grid.n_points());
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const auto a = ck.apply(probes[p].values());
    const auto b = cg.apply(probes[p].values());
    for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = a[i] * b[i];
    const double v = quadrature(prod, grid);
    if (v < best.value) best = {v, p};
  }
  return best;
}

}  // namespace selmut
