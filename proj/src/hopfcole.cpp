#include "selmut/hopfcole.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <numbers>

#include "selmut/errors.hpp"

namespace selmut {

namespace {

constexpr double kTiny = std::numeric_limits<double>::min();

double simpson(const std::function<double(double)>& f, double a, double b, std::size_t intervals) {
  if (intervals % 2) ++intervals;
  const double h = (b - a) / static_cast<double>(intervals);
  double s = f(a) + f(b);
  for (std::size_t i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + static_cast<double>(i) * h);
  return s * h / 3.0;
}

// 8-point Gauss-Legendre on each of `pieces` equal parts of [a, b].
double gauss_legendre(const std::function<double(double)>& f, double a, double b, std::size_t pieces) {
  static constexpr double x[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363};
  static constexpr double w[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
  const double h = (b - a) / static_cast<double>(pieces);
  double s = 0.0;
  for (std::size_t k = 0; k < pieces; ++k) {
    const double c = a + (static_cast<double>(k) + 0.5) * h, r = 0.5 * h;
    for (int j = 0; j < 4; ++j) s += w[j] * r * (f(c - r * x[j]) + f(c + r * x[j]));
  }
  return s;
}

// Integral of f over the line for an integrand decaying away from 0.
double line_integral(const std::function<double(double)>& f, double scale, const char* what) {
  double L = 8.0 * scale;
  double prev = simpson(f, -L, L, 4096);
  for (int k = 0; k < 40; ++k) {
    const double edge = std::max(std::abs(f(L)), std::abs(f(-L)));
    const double inner = std::max(std::abs(f(0.5 * L)), std::abs(f(-0.5 * L)));
    if (edge > inner && edge > 0.0) throw DomainError(std::string(what) + " diverges: integrand grows at the truncation boundary");
    const double next = simpson(f, -2.0 * L, 2.0 * L, 8192);
    if (std::abs(next - prev) <= 1e-12 * std::max(1.0, std::abs(next))) return next;
    prev = next;
    L *= 2.0;
  }
  throw DomainError(std::string(what) + " did not converge under domain doubling");
}

// Integral of G(z) w(z) with the support of compact or tabulated profiles handled exactly.
double profile_integral(const Profile& g, const std::function<double(double)>& w, const char* what) {
  auto f = [&](double z) { return g(z) * w(z); };
  switch (g.family()) {
    case ProfileFamily::CompactBump: return simpson(f, -g.a(), g.a(), 20000);
    case ProfileFamily::Table: {
      const auto& z = g.table_z();
      double s = 0.0;
      for (std::size_t i = 1; i < z.size(); ++i) s += gauss_legendre(f, z[i - 1], z[i], 8);
      return s;
    }
    case ProfileFamily::Constant: throw DomainError(std::string(what) + " of a constant profile is infinite");
    case ProfileFamily::Cauchy: return line_integral(f, g.a(), what);
    default: return line_integral(f, std::max(g.a(), 1e-3), what);
  }
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Integral of G(z) exp(A |z|).
double exp_moment(const Profile& g, double A) {
  switch (g.family()) {
    case ProfileFamily::Gaussian: {
      const double s = g.a();
      return g.mass() * 2.0 * std::exp(0.5 * A * A * s * s) * std_normal_cdf(A * s);
    }
    case ProfileFamily::TwoAtom: return std::exp(A * g.a());
    default: return profile_integral(g, [A](double z) { return std::exp(A * std::abs(z)); }, "exponential moment");
  }
}

double fd_derivative(const std::function<double(double)>& f, double x) {
  const double h = 1e-6 * std::max(1.0, std::abs(x));
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace

double HopfColeField::max() const { return u[argmax()]; }

std::size_t HopfColeField::argmax() const {
  return static_cast<std::size_t>(std::max_element(u.begin(), u.end()) - u.begin());
}

std::size_t HopfColeField::floored_count() const {
  return static_cast<std::size_t>(std::count(floored.begin(), floored.end(), true));
}

HopfColeField hopf_cole(const DensityState& n, double eps) {
  if (!(eps > 0.0)) throw DomainError("eps must be positive");
  HopfColeField f{n.grid(), std::vector<double>(n.size()), eps, eps * std::log(kTiny), std::vector<bool>(n.size(), false)};
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (n[i] <= kTiny) {
      f.u[i] = f.floor_value;
      f.floored[i] = true;
    } else {
      f.u[i] = eps * std::log(n[i]);
    }
  }
  return f;
}

DensityState inverse_hopf_cole(const Grid& grid, std::span<const double> u, double eps) {
  require_size(u, grid, "u field");
  std::vector<double> n(u.size());
  for (std::size_t i = 0; i < n.size(); ++i) n[i] = std::exp(u[i] / eps);
  return DensityState(grid, std::move(n));
}

double laplace_transform(const Profile& g, double p) {
  if (p == 0.0) {
    const double m = g.mass();
    if (!std::isfinite(m)) throw DomainError("Laplace transform of a constant profile is infinite");
    return m;
  }
  switch (g.family()) {
    case ProfileFamily::Gaussian: return g.mass() * std::exp(0.5 * p * p * g.a() * g.a());
    case ProfileFamily::TwoAtom: return std::cosh(p * g.a());
    default: return profile_integral(g, [p](double z) { return std::exp(-p * z); }, "Laplace transform");
  }
}

void write_laplace_table(const Profile& g, const std::vector<double>& p, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path);
  os << "# p L[G](p) for " << g.describe() << '\n' << std::setprecision(17);
  for (double v : p) os << v << ' ' << laplace_transform(g, v) << '\n';
}

HjResidual eps_level_hj_residual(const Model& model, const DensityState& n, const HopfColeField& u) {
  const ModelFamily fam = model.family();
  if (fam != ModelFamily::ATH && fam != ModelFamily::AF) {
    throw CapabilityError("eps-level Hamilton-Jacobi form is defined for ATH and AF, not " + to_string(fam));
  }
  const Grid& g = model.grid();
  if (!(n.grid() == g) || !(u.grid == g)) throw DimensionError("state, field and model grids differ");
  const std::size_t N = g.n_points();
  const double eps = model.eps();
  const double rho = n.mass();
  if (!(rho > 0.0)) throw ExtinctionError("population mass is not positive");
  const auto& G = model.mutation();

  // per-parent weight in front of G_eps(x - x_j) e^{D}, and the x-dependent prefactor
  std::vector<double> weight(N), pre(N, 1.0);
  if (fam == ModelFamily::ATH) {
    std::vector<double> q(N);
    for (std::size_t j = 0; j < N; ++j) q[j] = n[j] / rho;
    pre = model.apply_k1(q);
    std::fill(weight.begin(), weight.end(), 1.0);
  } else {
    const auto& b = model.fecundity_values();
    const auto& c = model.offspring_norm();
    if (model.offspring().form() == OffspringForm::FemaleCentered) {
      for (std::size_t j = 0; j < N; ++j) weight[j] = b[j] / c[j];
    } else {
      double bq = 0.0;
      for (std::size_t j = 0; j < N; ++j) bq += g.weight(j) * b[j] * n[j] / rho;
      std::fill(pre.begin(), pre.end(), bq);
      for (std::size_t j = 0; j < N; ++j) weight[j] = 1.0 / c[j];
    }
  }

  const auto dn = model.rhs(n);
  const double top = n.max_value();
  HjResidual out;
  out.residual.assign(N, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    if (u.floored[i] || n[i] < 1e-8 * top) {
      out.excluded.push_back(i);
      continue;
    }
    const double x = g.node(i);
    double s = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      if (u.floored[j]) continue;
      s += g.weight(j) * weight[j] * G(x - g.node(j)) * std::exp((u.u[j] - u.u[i]) / eps);
    }
    const double r = model.saturation()(x, rho);
    const double rhs = pre[i] * s - r;
    const double lhs = eps * dn[i] / n[i];
    out.residual[i] = std::abs(lhs - rhs) / std::max({1.0, std::abs(pre[i] * s), std::abs(r)});
    out.max_residual = std::max(out.max_residual, out.residual[i]);
  }
  return out;
}

void certify_hj_constants(const Model& model, const DensityState& n0, BoundCertificate& cert,
                          const HjConstantsConfig& config) {
  const Grid& g = model.grid();
  const auto& sat = model.saturation();
  const double lo = cert.rho_m.value_or(0.0), hi = cert.rho_M;
  double c0 = 0.0, lr = 0.0;
  for (int k = 0; k <= 20; ++k) {
    const double rho = lo + (hi - lo) * k / 20.0;
    for (std::size_t i = 0; i < g.n_points(); ++i) {
      const double x = g.node(i);
      c0 = std::max(c0, sat(x, rho) / (1.0 + std::abs(x)));
      lr = std::max(lr, std::abs(sat.d_x(x, rho)));
    }
  }
  cert.C0 = c0;
  cert.L_r = lr;
  const auto u0 = hopf_cole(n0, model.eps());
  double l0 = 0.0, usup = 0.0;
  for (std::size_t i = 0; i < g.n_points(); ++i) {
    if (u0.floored[i]) continue;
    usup = std::max(usup, std::abs(u0.u[i]));
    if (i + 1 < g.n_points() && !u0.floored[i + 1]) l0 = std::max(l0, std::abs(u0.u[i + 1] - u0.u[i]) / g.spacing());
  }
  cert.L0 = l0;
  cert.A = config.A;
  if (model.family() == ModelFamily::AF) {
    cert.C = l0 + lr;
    return;
  }
  if (model.family() != ModelFamily::ATH) throw CapabilityError("appendix constants are defined for ATH and AF");
  // log-derivative bound of K1 over the grid, so |d_x k| <= L_K k for any q
  double lk = 0.0;
  const std::size_t N = g.n_points();
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      const double x = g.node(i), y = g.node(j);
      double k, dk;
      if (model.spec().k1) {
        const auto& k1 = *model.spec().k1;
        k = k1(x, y);
        dk = fd_derivative([&](double s) { return k1(s, y); }, x);
      } else {
        k = model.k0()(x - y);
        dk = model.k0().profile().differentiable() ? model.k0().derivative(x - y)
                                                   : fd_derivative([&](double s) { return model.k0()(s - y); }, x);
      }
      if (k > 0.0) lk = std::max(lk, std::abs(dk) / k);
    }
  }
  if (!cert.K_bar) throw CapabilityError("certificate is missing K_bar");
  const double lam = config.lambda;
  cert.lambda = lam;
  cert.C_lambda = lam * *cert.K_bar * std::exp(lk / lam);
  const std::size_t zero = g.nearest(0.0);
  const double c1 = std::max(std::max(0.0, -u0.u[zero]), l0) + c0;
  cert.C = l0 + *cert.C_lambda + lr + lam * (usup + c1);
}

double g_xA(double x, double A, double y) {
  const double m = 1.0 + std::max(std::abs(x), std::abs(y));
  const double d = std::abs(y - x) * A * m;
  return A * m / -std::expm1(-d);
}

MxA m_xA(double x, double A) {
  if (!(A > 0.0)) throw DomainError("m_xA needs A > 0");
  auto golden = [&](double a, double b) {
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = g_xA(x, A, c), fd = g_xA(x, A, d);
    for (int k = 0; k < 300 && b - a > 1e-14 * std::max(1.0, std::abs(a)); ++k) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - phi * (b - a);
        fc = g_xA(x, A, c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + phi * (b - a);
        fd = g_xA(x, A, d);
      }
    }
    const double y = 0.5 * (a + b);
    return MxA{g_xA(x, A, y), y};
  };
  // g blows up at y = x and grows like |y| far away; bracket each side
  const double reach = 10.0 + std::abs(x) + 50.0 / A;
  const double gap = 1e-12 * std::max(1.0, std::abs(x));
  const auto L = golden(x - reach, x - gap);
  const auto R = golden(x + gap, x + reach);
  return L.value <= R.value ? L : R;
}

bool AppendixReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const AppendixCheck& c) { return c.pass(); });
}

AppendixReport appendix_bound_suite(const Model& model, const Trajectory& tr, const BoundCertificate& cert) {
  auto need = [](const std::optional<double>& v, const char* name) {
    if (!v) throw CapabilityError(std::string("certificate is missing ") + name);
    return *v;
  };
  const ModelFamily fam = model.family();
  if (fam != ModelFamily::ATH && fam != ModelFamily::AF) throw CapabilityError("appendix bounds are defined for ATH and AF");
  if (tr.states.empty()) throw PreconditionError("trajectory has no snapshots");
  const double C0 = need(cert.C0, "C0"), Lr = need(cert.L_r, "L_r"), L0 = need(cert.L0, "L0");
  const double A = need(cert.A, "A"), C = need(cert.C, "C");
  const bool ath = fam == ModelFamily::ATH;
  double lam = 0.0, Cl = 0.0, Kb = 0.0;
  if (ath) {
    lam = need(cert.lambda, "lambda");
    Cl = need(cert.C_lambda, "C_lambda");
    Kb = need(cert.K_bar, "K_bar");
  }
  const Grid& g = model.grid();
  const double eps = model.eps();
  const double h = g.spacing();
  const double rhoM = cert.rho_M;

  AppendixReport rep;
  const auto u0 = hopf_cole(tr.states.front(), eps);
  const std::size_t zero = g.nearest(0.0);
  rep.C1 = std::max(std::max(0.0, -u0.u[zero]), L0) + C0;
  const Profile& G = model.mutation().base();
  const double moment = exp_moment(G, A);
  double c2 = ath ? Kb * moment : model.fecundity().sup_on(g) * moment;
  double shift = -std::numeric_limits<double>::infinity(), usup = 0.0;
  for (std::size_t i = 0; i < g.n_points(); ++i) {
    if (u0.floored[i]) continue;
    shift = std::max(shift, u0.u[i] + A * std::abs(g.node(i)));
    usup = std::max(usup, std::abs(u0.u[i]));
  }
  rep.u0_shift = shift;
  rep.C2 = std::max(c2, shift);
  rep.C = C;

  const double inf = std::numeric_limits<double>::infinity();
  AppendixCheck lower{"lower_bound", inf, {}, {}};
  AppendixCheck upper{"upper_bound", inf, {}, {}};
  AppendixCheck lip{"space_lipschitz", inf, {}, {}};
  AppendixCheck global{"global_upper", inf, {}, {}};
  AppendixCheck refined{"refined_upper", inf, {}, {}};
  auto note = [](AppendixCheck& c, double margin, double t, double x) {
    if (margin < c.min_margin) {
      c.min_margin = margin;
      c.worst_t = t;
      c.worst_x = x;
    }
  };
  const std::size_t snaps = tr.states.size();
  for (std::size_t k = 0; k < snaps; ++k) {
    const auto& n = tr.states[k];
    const double t = tr.times[k];
    const auto u = hopf_cole(n, eps);
    for (std::size_t i = 0; i < g.n_points(); ++i) {
      if (u.floored[i]) continue;
      const double x = g.node(i), ax = std::abs(x);
      note(lower, u.u[i] + rep.C1 * (1.0 + t) * (1.0 + ax), t, x);
      note(upper, -A * ax + rep.C2 * (1.0 + t) - u.u[i], t, x);
      if (i + 1 < g.n_points() && !u.floored[i + 1]) {
        const double slope = std::abs(u.u[i + 1] - u.u[i]) / h;
        const double mx = std::max(ax, std::abs(g.node(i + 1)));
        const double bound = ath ? L0 + (Cl + Lr) * t + lam * (usup + rep.C1 * (1.0 + t) * (1.0 + mx)) : L0 + Lr * t;
        note(lip, bound - slope, t, x + 0.5 * h);
      }
    }
    const std::size_t am = u.argmax();
    const double mu = u.u[am];
    const double a_t = C * (1.0 + t) / eps;
    const double gb = eps * std::log(rhoM * (1.5 + a_t));
    const double rb = eps * std::log(rhoM * m_xA(g.node(am), a_t).value);
    note(global, gb - mu, t, g.node(am));
    note(refined, rb - mu, t, g.node(am));
    rep.snapshots.push_back({t, mu, gb, rb});
  }
  rep.checks = {lower, upper, lip, global, refined};
  return rep;
}

Hamiltonian Hamiltonian::gaussian_ath(Grid grid, std::vector<double> k, std::vector<double> r, double p_max) {
  require_size(k, grid, "k coefficient");
  require_size(r, grid, "r coefficient");
  return {grid, std::move(k), std::move(r), [](double p) { return std::exp(0.5 * p * p); }, p_max, "gaussian-ATH"};
}

Hamiltonian Hamiltonian::from_profile(const Profile& g, Grid grid, std::vector<double> k, std::vector<double> r,
                                      double p_max) {
  require_size(k, grid, "k coefficient");
  require_size(r, grid, "r coefficient");
  if (!(p_max > 0.0)) throw DomainError("p_max must be positive");
  if (g.family() == ProfileFamily::Gaussian) {
    const double s = g.a(), m = g.mass();
    return {grid, std::move(k), std::move(r), [s, m](double p) { return m * std::exp(0.5 * p * p * s * s); }, p_max, "ATH"};
  }
  // tabulate once; the transform is expensive for generic profiles
  const std::size_t M = 4000;
  const double lo = -1.01 * p_max, step = 2.02 * p_max / static_cast<double>(M);
  auto table = std::make_shared<std::vector<double>>(M + 1);
  for (std::size_t i = 0; i <= M; ++i) (*table)[i] = laplace_transform(g, lo + static_cast<double>(i) * step);
  auto L = [table, lo, step, M](double p) {
    const double s = (p - lo) / step;
    if (s < 0.0 || s > static_cast<double>(M)) throw DomainError("gradient outside the tabulated Laplace range");
    const auto i = std::min(static_cast<std::size_t>(s), M - 1);
    const double f = s - static_cast<double>(i);
    return (1.0 - f) * (*table)[i] + f * (*table)[i + 1];
  };
  return {grid, std::move(k), std::move(r), L, p_max, "ATH"};
}

Hamiltonian Hamiltonian::from_state(const Model& model, const DensityState& n, double p_max) {
  const Grid& g = model.grid();
  const std::size_t N = g.n_points();
  const double rho = n.mass();
  if (!(rho > 0.0)) throw ExtinctionError("population mass is not positive");
  std::vector<double> q(N), k(N), r(N);
  for (std::size_t i = 0; i < N; ++i) q[i] = n[i] / rho;
  if (model.family() == ModelFamily::ATH) {
    k = model.apply_k1(q);
  } else if (model.family() == ModelFamily::AF) {
    const auto& b = model.fecundity_values();
    double bq = 0.0;
    for (std::size_t i = 0; i < N; ++i) bq += g.weight(i) * b[i] * q[i];
    std::fill(k.begin(), k.end(), bq);
  } else {
    throw CapabilityError("limit Hamiltonian is defined for ATH and AF");
  }
  for (std::size_t i = 0; i < N; ++i) r[i] = model.saturation()(g.node(i), rho);
  auto h = from_profile(model.mutation().base(), g, std::move(k), std::move(r), p_max);
  h.family = model.family() == ModelFamily::AF ? "AF" : (model.mutation().gaussian() ? "gaussian-ATH" : "ATH");
  return h;
}

double Hamiltonian::sigma() const {
  const double kmax = *std::max_element(k.begin(), k.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
  double d = 0.0;
  const int M = 200;
  for (int i = 0; i <= M; ++i) {
    const double p = -p_max + 2.0 * p_max * i / M;
    const double dp = 1e-4 * p_max;
    const double a = std::clamp(p - dp, -p_max, p_max), b = std::clamp(p + dp, -p_max, p_max);
    d = std::max(d, std::abs(laplace(b) - laplace(a)) / (b - a));
  }
  return 1.01 * std::abs(kmax) * d;
}

std::vector<double> limit_hj_step(const Hamiltonian& H, std::span<const double> u, double dt, bool constrain) {
  const Grid& g = H.grid;
  require_size(u, g, "u field");
  const std::size_t N = g.n_points();
  const double h = g.spacing();
  const double sigma = H.sigma();
  if (sigma * dt > h * (1.0 + 1e-12)) {
    throw CflError("limit HJ step violates CFL: dt = " + std::to_string(dt) + " > h / sigma", h / sigma);
  }
  std::vector<double> out(N);
  for (std::size_t i = 0; i < N; ++i) {
    const double um = i > 0 ? u[i - 1] : u[i];
    const double up = i + 1 < N ? u[i + 1] : u[i];
    const double pm = (u[i] - um) / h, pp = (up - u[i]) / h;
    if (std::abs(pm) > H.p_max || std::abs(pp) > H.p_max) {
      throw PreconditionError("gradient exceeds p_max = " + std::to_string(H.p_max) + " at x = " + std::to_string(g.node(i)));
    }
    out[i] = u[i] + dt * (H(i, 0.5 * (pm + pp)) + 0.5 * sigma * (pp - pm));
  }
  if (constrain) {
    const double m = *std::max_element(out.begin(), out.end());
    for (double& v : out) v -= m;
  }
  return out;
}

SupportReport support_identification(const Grid& grid, std::span<const double> u, double tol,
                                     std::span<const double> fitness_residual) {
  require_size(u, grid, "u field");
  const std::size_t N = grid.n_points();
  const double top = *std::max_element(u.begin(), u.end());
  SupportReport rep;
  for (std::size_t i = 0; i < N;) {
    if (u[i] < top - tol) {
      ++i;
      continue;
    }
    std::size_t best = i;
    while (i < N && u[i] >= top - tol) {
      if (u[i] > u[best]) best = i;
      ++i;
    }
    rep.points.push_back(grid.node(best));
  }
  rep.monomorphic = rep.points.size() == 1;
  if (!fitness_residual.empty()) {
    require_size(fitness_residual, grid, "fitness residual");
    const auto& f = fitness_residual;
    double scale = 0.0;
    for (double v : f) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i + 1 < N; ++i) {
      if ((f[i] < 0.0) != (f[i + 1] < 0.0)) {
        const double s = f[i] / (f[i] - f[i + 1]);
        rep.residual_zeros.push_back(grid.node(i) + s * grid.spacing());
      }
    }
    for (std::size_t i = 0; i < N; ++i) {
      const bool peak = (i == 0 || f[i] >= f[i - 1]) && (i + 1 == N || f[i] >= f[i + 1]);
      if (peak && std::abs(f[i]) <= 1e-3 * scale) rep.residual_zeros.push_back(grid.node(i));
    }
    std::sort(rep.residual_zeros.begin(), rep.residual_zeros.end());
    for (double p : rep.points) {
      const bool near = std::any_of(rep.residual_zeros.begin(), rep.residual_zeros.end(),
                                    [&](double z) { return std::abs(z - p) <= 2.0 * grid.spacing() * (1.0 + 1e-9); });
      rep.matches_residual = rep.matches_residual && near;
    }
  }
  return rep;
}

}  // namespace selmut
