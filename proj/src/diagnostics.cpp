#include "selmut/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "selmut/errors.hpp"

namespace selmut {

namespace {

bool supports_concentration(const Model& m) {
  return (m.family() == ModelFamily::NM || m.family() == ModelFamily::ATH) && m.saturation().is_linear() && m.has_k0();
}

}  // namespace

double concentration_functional(const Model& model, const DensityState& n) {
  if (!supports_concentration(model)) {
    throw CapabilityError("concentration functional needs nM or ATH with linear saturation, got " + to_string(model.family()));
  }
  const double rho = n.mass();
  if (!(rho > 0.0)) throw ExtinctionError("population mass is not positive");
  const double nu = model.saturation().nu();
  const auto k = model.convolve_k0(n.values());
  const auto w = model.family() == ModelFamily::NM ? n.values() : model.convolve_g(n.values());
  std::vector<double> f(n.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double r = k[i] / rho - nu * rho;
    f[i] = w[i] * r * r;
  }
  return quadrature(f, n.grid());
}

double RunTrace::integrated_concentration() const {
  double s = 0.0;
  for (std::size_t k = 1; k < rows.size(); ++k) s += 0.5 * (rows[k].conc + rows[k - 1].conc) * (rows[k].t - rows[k - 1].t);
  return s;
}

TraceRecorder::TraceRecorder(const Model& model, std::function<void(const TraceRow&)> sink)
    : model_(&model), conc_supported_(supports_concentration(model)), sink_(std::move(sink)) {
  trace_.eps = model.eps();
}

void TraceRecorder::operator()(const StepSample& s, const DensityState& n) {
  TraceRow row{};
  row.t = s.t;
  row.rho = s.rho;
  row.rho_dot = s.rho_dot;
  row.rho_dot_neg = std::max(0.0, -s.rho_dot);
  if (trace_.rows.empty()) {
    row.bv_cum = 0.0;
  } else {
    const auto& p = trace_.rows.back();
    row.bv_cum = p.bv_cum + 0.5 * (std::abs(p.rho_dot) + std::abs(s.rho_dot)) * (s.t - p.t);
  }
  row.conc = conc_supported_ ? concentration_functional(*model_, n) : std::numeric_limits<double>::quiet_NaN();
  const auto mom = moments(normalize(n));
  row.mean = mom.mean;
  row.var = mom.variance;
  row.max_u = model_->eps() * std::log(n.max_value());
  row.support = support_width(n.values(), n.grid());
  trace_.rows.push_back(row);
  if (sink_) sink_(row);
}

EnvelopeFit fit_envelope(const RunTrace& trace, double rate, double forcing) {
  EnvelopeFit fit;
  fit.certified_rate = rate;
  if (trace.rows.empty()) return fit;
  const double eps = trace.eps;
  const double d0 = trace.rows.front().rho_dot_neg;
  std::vector<double> ts, ls;
  for (const auto& r : trace.rows) {
    const double decay = std::exp(-rate * r.t / eps);
    const double env = d0 * decay + (rate > 0.0 ? forcing / rate * (1.0 - decay) : forcing * r.t / eps);
    const double ratio = r.rho_dot_neg / std::max(env, 1e-300);
    if (r.rho_dot_neg > 1e-10) fit.worst_ratio = std::max(fit.worst_ratio, ratio);
    if (r.rho_dot_neg > 1.1 * env + 1e-10) fit.pointwise_pass = false;
    if (r.rho_dot_neg > 1e-12) {
      ts.push_back(r.t);
      ls.push_back(std::log(r.rho_dot_neg));
    }
  }
  fit.fit_points = ts.size();
  if (ts.size() >= 3 && d0 > 0.0) {
    const double n = static_cast<double>(ts.size());
    double st = 0, sl = 0, stt = 0, stl = 0;
    for (std::size_t k = 0; k < ts.size(); ++k) {
      st += ts[k];
      sl += ls[k];
      stt += ts[k] * ts[k];
      stl += ts[k] * ls[k];
    }
    const double den = n * stt - st * st;
    if (den > 0.0) {
      const double slope = (n * stl - st * sl) / den;
      fit.fitted_rate = -slope * eps;
      if (forcing == 0.0) fit.rate_pass = fit.fitted_rate >= rate * (1.0 - 0.3);
    }
  }
  return fit;
}

BvReport bv_budget(const RunTrace& trace, const BoundCertificate& cert, const Model& model, double slack) {
  if (trace.rows.empty()) throw PreconditionError("empty trace");
  const auto& sat = model.saturation();
  if (!sat.is_linear()) throw CapabilityError("BV budget needs linear saturation");
  const double eps = trace.eps;
  const double T = trace.rows.back().t;
  const double d0 = trace.initial_rho_dot_neg();
  const double nu = sat.nu();
  BvReport rep;
  rep.observed = trace.final_bv();
  switch (model.family()) {
    case ModelFamily::NM: {
      const double k2 = cert.kappa2_lower;
      if (!(k2 > 0.0)) throw CapabilityError("certificate has no positive kappa'' lower bound");
      rep.claim = "bv_budget_nm";
      rep.bound = cert.rho_M + 2.0 * eps / k2 * d0;
      rep.envelope = fit_envelope(trace, k2);
      break;
    }
    case ModelFamily::AF: {
      if (!cert.rho_m) throw CapabilityError("certificate is missing rho_m");
      if (!cert.alpha_C) throw CapabilityError("certificate is missing the fecundity-mixing constant C");
      const double a = nu * *cert.rho_m;
      const double C = *cert.alpha_C;
      rep.claim = "bv_budget_af";
      rep.bound = cert.rho_M + 2.0 * eps / a * d0 + 2.0 * C / a * (T + eps / a * (std::exp(-a * T / eps) - 1.0));
      rep.envelope = fit_envelope(trace, a, C);
      rep.constant_suspect = C > 0.0;
      break;
    }
    case ModelFamily::ATH: {
      if (!cert.C1) throw CapabilityError("certificate is missing C1");
      if (!cert.C2) throw CapabilityError("certificate is missing C2");
      const double c1 = *cert.C1, c2 = *cert.C2;
      const double e = std::exp(-c1 * T / eps);
      rep.claim = "bv_budget_ath";
      rep.bound = cert.rho_M + 2.0 * d0 * eps / c1 * (1.0 - e) + 2.0 * eps * c2 / (c1 * c1) * (e - 1.0) + 2.0 * c2 / c1 * T;
      rep.envelope = fit_envelope(trace, c1, c2);
      rep.constant_suspect = true;
      break;
    }
    default: throw CapabilityError("no BV budget for model family " + to_string(model.family()));
  }
  rep.pass = rep.observed <= rep.bound + slack;
  if (rep.pass) rep.constant_suspect = false;
  return rep;
}

double fit_ath_forcing(const Model& model, const Trajectory& tr) {
  if (model.family() != ModelFamily::ATH || !model.saturation().is_linear()) {
    throw CapabilityError("ATH forcing constant needs the ATH family with linear saturation");
  }
  const double eps = model.eps();
  const double nu = model.saturation().nu();
  double worst = 0.0;
  for (const auto& n : tr.states) {
    const double rho = n.mass();
    const double rd = model.rho_rhs(n);
    if (rd > 0.0) continue;
    const auto k = model.convolve_k0(n.values());
    const auto g = model.convolve_g(n.values());
    std::vector<double> p(k.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = k[i] * g[i];
    const double I = quadrature(p, n.grid());
    const double lhs = 0.5 * eps * model.rho_second_derivative(n);
    const double rem = lhs - (-nu * rho * rd - rd * I / (2.0 * rho * rho) + concentration_functional(model, n) / eps);
    worst = std::max(worst, -rem);
  }
  return 2.0 * worst;
}

DdrhoResidual ddrho_identity_residual(const Model& model, const DensityState& n) {
  const auto& sat = model.saturation();
  if (!sat.is_linear()) throw CapabilityError("second-derivative identity needs linear saturation");
  const double eps = model.eps();
  const double rho = n.mass();
  const double nu = sat.nu();
  const double rd = model.rho_rhs(n);
  const double ddr = model.rho_second_derivative(n);
  const Grid& grid = n.grid();
  DdrhoResidual out{};
  if (model.family() == ModelFamily::NM) {
    const auto k = model.convolve_k0(n.values());
    std::vector<double> p(k.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = n[i] * k[i];
    const double I = quadrature(p, grid);
    const double t1 = -rd / (2.0 * rho * rho) * I;
    const double t2 = concentration_functional(model, n) / eps;
    out.lhs = 0.5 * eps * ddr;
    out.rhs = t1 + t2;
    out.residual = std::abs(out.lhs - out.rhs) / std::max(std::abs(out.lhs) + std::abs(t1) + std::abs(t2), 1e-300);
    return out;
  }
  if (model.family() == ModelFamily::AF) {
    const auto& b = model.fecundity_values();
    std::vector<double> bn(n.size());
    for (std::size_t i = 0; i < bn.size(); ++i) bn[i] = b[i] * n[i];
    const double fb = quadrature(bn, grid);
    const auto birth = model.birth_term(n);
    std::vector<double> bb(n.size());
    for (std::size_t i = 0; i < bb.size(); ++i) bb[i] = b[i] * birth[i];
    // rho * int B birth equals the triple integral of alpha B(x) B(y) n n
    const double mixing = rho * quadrature(bb, grid) - fb * fb;
    const double t1 = -nu * rho * rd;
    const double s = fb / rho - nu * rho;
    const double t2 = rho / eps * s * s;
    const double t3 = mixing / (eps * rho);
    out.lhs = eps * ddr;
    out.rhs = t1 + t2 + t3;
    out.residual = std::abs(out.lhs - out.rhs) / std::max(std::abs(out.lhs) + std::abs(t1) + std::abs(t2) + std::abs(t3), 1e-300);
    return out;
  }
  throw CapabilityError("second-derivative identity is implemented for nM and AF, not " + to_string(model.family()));
}

GeneralRDiagnostics general_R_diagnostics(const Model& model, const DensityState& n) {
  const Grid& grid = n.grid();
  const auto& sat = model.saturation();
  const double rho = n.mass();
  if (!(rho > 0.0)) throw ExtinctionError("population mass is not positive");
  GeneralRDiagnostics d;
  if (model.family() == ModelFamily::ATH) {
    d.zeta = model.convolve_k0(n.values());
    for (double& z : d.zeta) z /= rho;
  } else if (model.family() == ModelFamily::AF) {
    d.zeta = model.fecundity_values();
  } else {
    throw CapabilityError("general-R diagnostics are defined for ATH and AF");
  }
  const std::size_t N = n.size();
  std::vector<double> dq(N), q(N), qz(N), qzr(N);
  double cf = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double x = grid.node(i);
    const double r = sat(x, rho);
    dq[i] = sat.d_rho(x, rho) * n[i];
    q[i] = n[i] / rho;
    qz[i] = q[i] * d.zeta[i];
    qzr[i] = q[i] * (d.zeta[i] - r);
    cf = std::max(cf, std::abs(d.zeta[i] - r));
  }
  d.Q = quadrature(dq, grid);
  d.C_f = cf;
  d.net_fitness = quadrature(qzr, grid);
  const double mean_zeta = quadrature(qz, grid);
  std::vector<double> pr(N);
  for (std::size_t i = 0; i < N; ++i) {
    const double r = sat(grid.node(i), rho);
    pr[i] = q[i] * (d.zeta[i] - r) * (d.zeta[i] - 0.5 * (r + d.Q) - mean_zeta);
  }
  d.predicate_value = quadrature(pr, grid);
  d.predicate_applicable = d.net_fitness <= 0.0;
  d.predicate_pass = !d.predicate_applicable || d.predicate_value >= -1e-12 * std::max(1.0, std::abs(mean_zeta * mean_zeta));
  if (sat.form() != SaturationForm::General) {
    bool ok = true;
    for (int k = 1; k <= 50; ++k) {
      const double r = 0.1 * k;
      if (r * sat.dr1(r) < sat.r1(r) * (1.0 - 1e-9)) ok = false;
    }
    d.r1_condition = ok;
  }
  return d;
}

SlopeFit loglog_slope(const std::vector<double>& x, const std::vector<double>& y, double target, double tol) {
  if (x.size() != y.size() || x.size() < 2) throw PreconditionError("slope fit needs at least two matching points");
  SlopeFit fit;
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0)) throw DomainError("slope fit needs positive data");
    const double lx = std::log(x[k]), ly = std::log(y[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / n;
  fit.pass = std::abs(fit.slope - target) <= tol;
  return fit;
}

}  // namespace selmut
