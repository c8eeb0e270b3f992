#include "selmut/replicator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "selmut/errors.hpp"
#include "selmut/log.hpp"

namespace selmut {

namespace {

double weighted_dot(std::span<const double> a, std::span<const double> b, const Grid& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += g.weight(i) * a[i] * b[i];
  return s;
}

}  // namespace

Replicator::Replicator(ReplicatorSpec spec) : spec_(std::move(spec)) {
  if (!spec_.r0) throw ConfigurationError("replicator needs R0");
  const Grid& g = spec_.grid;
  const std::size_t N = g.n_points();
  r0_.resize(N);
  for (std::size_t i = 0; i < N; ++i) r0_[i] = spec_.r0(g.node(i));
  if (spec_.ks.translation_invariant()) {
    const Profile p = spec_.ks.profile();
    conv_.emplace(g, [p](double z) { return p(z); });
  } else {
    dense_ = spec_.ks.matrix(g);
  }
  const std::size_t m = g.nearest(spec_.x_M);
  const double xm = g.node(m);
  double best = -std::numeric_limits<double>::infinity(), other = best;
  std::size_t arg = 0;
  for (std::size_t j = 0; j < N; ++j) {
    const double v = spec_.ks(xm, g.node(j)) - r0_[j];
    if (v > best) {
      other = best;
      best = v;
      arg = j;
    } else {
      other = std::max(other, v);
    }
  }
  xm_margin_ = best - other;
  xm_certified_ = arg == m && xm_margin_ > 1e-12 * std::max(1.0, std::abs(best));
}

void Replicator::check(std::span<const double> q) const { require_size(q, spec_.grid, "replicator state"); }

std::vector<double> Replicator::apply_ks(std::span<const double> f) const {
  if (conv_) return conv_->apply(f);
  const Grid& g = spec_.grid;
  const std::size_t N = g.n_points();
  std::vector<double> out(N, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < N; ++j) s += dense_[i * N + j] * g.weight(j) * f[j];
    out[i] = s;
  }
  return out;
}

std::vector<double> Replicator::fitness(std::span<const double> q) const {
  check(q);
  auto f = apply_ks(q);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] -= r0_[i];
  return f;
}

std::vector<double> Replicator::rhs(std::span<const double> q) const {
  auto f = fitness(q);
  const double mean = weighted_dot(q, f, spec_.grid);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = q[i] * (f[i] - mean);
  return f;
}

double Replicator::J(std::span<const double> q) const {
  check(q);
  const auto k = apply_ks(q);
  return 0.5 * weighted_dot(q, k, spec_.grid) - weighted_dot(q, r0_, spec_.grid);
}

double Replicator::dJdt(std::span<const double> q) const {
  const auto f = fitness(q);
  const Grid& g = spec_.grid;
  const double mean = weighted_dot(q, f, g);
  double var = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) var += g.weight(i) * q[i] * (f[i] - mean) * (f[i] - mean);
  return var;
}

double Replicator::dJdt_chain(std::span<const double> q) const {
  // dJ = int (K_S q - R0) dq by symmetry of K_S
  return weighted_dot(rhs(q), fitness(q), spec_.grid);
}

double Replicator::flatness_residual(std::span<const double> q) const {
  const auto f = fitness(q);
  const double top = *std::max_element(q.begin(), q.end());
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (q[i] > 1e-10 * top) {
      lo = std::min(lo, f[i]);
      hi = std::max(hi, f[i]);
    }
  }
  return hi >= lo ? hi - lo : 0.0;
}

double Replicator::quadratic_form(std::span<const double> xi) const {
  check(xi);
  return weighted_dot(xi, apply_ks(xi), spec_.grid);
}

ConvexityReport convexity_certificate(const Replicator& rep,
                                      const std::vector<std::pair<ProbabilityState, ProbabilityState>>& pairs,
                                      const std::vector<double>& thetas) {
  ConvexityReport out;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& q1 = pairs[p].first.values();
    const auto& q2 = pairs[p].second.values();
    std::vector<double> xi(q1.size());
    for (std::size_t i = 0; i < xi.size(); ++i) xi[i] = q1[i] - q2[i];
    const double form = rep.quadratic_form(xi);
    const double j1 = rep.J(q1), j2 = rep.J(q2);
    for (double th : thetas) {
      std::vector<double> mix(q1.size());
      for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = th * q1[i] + (1.0 - th) * q2[i];
      const double lhs = rep.J(mix);
      const double rhs = th * j1 + (1.0 - th) * j2 - 0.5 * th * (1.0 - th) * form;
      const double res = std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs));
      out.entries.push_back({p, th, res, form});
      out.max_identity_residual = std::max(out.max_identity_residual, res);
    }
    bool same = true;
    for (double v : xi) same = same && v == 0.0;
    if (!same && !(form > 0.0)) out.violations.push_back(p);
  }
  return out;
}

Counterexample oscillatory_counterexample() {
  Grid g(0.0, 3.0, 4);
  const double h = g.spacing();
  auto box = TwoPointKernel::custom([h](double x, double y) { return std::abs(x - y) <= 1.5 * h ? 1.0 : 0.0; }, "box(1.5h)");
  Replicator rep({g, box, [](double) { return 0.0; }, 0.0, "0"});
  ProbabilityState q1(g, {1.0, 0.0, 0.5, 0.0});
  ProbabilityState q2(g, {0.0, 0.5, 0.0, 1.0});
  return {std::move(rep), std::move(q1), std::move(q2)};
}

MutationalLyapunovReport lyapunov_mutational(const Model& model, std::function<double(double)> r0,
                                             const ProbabilityState& q, const std::vector<ProbabilityState>& probes) {
  if (!model.has_pointwise_kernel()) {
    throw CapabilityError("model " + to_string(model.family()) + " cannot expose K_eps(x, y, z) pointwise");
  }
  if (!(q.grid() == model.grid())) throw DimensionError("state grid differs from the model grid");
  const Grid& g = model.grid();
  const std::size_t N = g.n_points();
  std::vector<double> k(N * N * N);
  auto at = [N](std::size_t x, std::size_t y, std::size_t z) { return (x * N + y) * N + z; };
  for (std::size_t x = 0; x < N; ++x)
    for (std::size_t y = 0; y < N; ++y)
      for (std::size_t z = 0; z < N; ++z) k[at(x, y, z)] = model.kernel3(g.node(x), g.node(y), g.node(z));
  const bool af = model.family() == ModelFamily::AF;
  if (af && model.spec().normalize_offspring) {
    const auto& b = model.fecundity_values();
    for (std::size_t y = 0; y < N; ++y)
      for (std::size_t z = 0; z < N; ++z) {
        double s = 0.0;
        for (std::size_t x = 0; x < N; ++x) s += g.weight(x) * k[at(x, y, z)];
        if (s > 0.0)
          for (std::size_t x = 0; x < N; ++x) k[at(x, y, z)] *= b[y] / s;
      }
  }
  std::vector<double> ks(k.size());
  for (std::size_t x = 0; x < N; ++x)
    for (std::size_t y = 0; y < N; ++y)
      for (std::size_t z = 0; z < N; ++z) ks[at(x, y, z)] = 0.5 * (k[at(x, z, y)] + k[at(x, y, z)]);

  std::vector<double> r(N);
  for (std::size_t i = 0; i < N; ++i) r[i] = r0(g.node(i));

  // b(x) = iint K^S(x, y, z) xi(y) xi(z), a(y) = iint K^S(x, y, z) xi(z) dx dz
  auto birth = [&](std::span<const double> xi) {
    std::vector<double> b(N, 0.0);
    for (std::size_t x = 0; x < N; ++x) {
      double s = 0.0;
      for (std::size_t y = 0; y < N; ++y) {
        double t = 0.0;
        for (std::size_t z = 0; z < N; ++z) t += ks[at(x, y, z)] * g.weight(z) * xi[z];
        s += g.weight(y) * xi[y] * t;
      }
      b[x] = s;
    }
    return b;
  };
  auto parent = [&](std::span<const double> xi) {
    std::vector<double> a(N, 0.0);
    for (std::size_t y = 0; y < N; ++y) {
      double s = 0.0;
      for (std::size_t x = 0; x < N; ++x)
        for (std::size_t z = 0; z < N; ++z) s += g.weight(x) * g.weight(z) * ks[at(x, y, z)] * xi[z];
      a[y] = s;
    }
    return a;
  };

  MutationalLyapunovReport rep;
  {
    const auto b = birth(q.values());
    rep.J = 0.5 * quadrature(b, g) - weighted_dot(q.values(), r, g);
  }
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const auto& xi = probes[p].values();
    const auto b = birth(xi);
    const auto a = parent(xi);
    const double total = quadrature(b, g);
    rep.lyap1.push_back({p, weighted_dot(a, b, g), total * total});
  }
  if (af && model.fecundity().is_constant()) {
    const double B = model.fecundity_values().front();
    // with K = B alpha, the R0-weighted offspring term is int R0 b / B
    auto lyap2 = [&](std::span<const double> xi) {
      const auto b = birth(xi);
      return std::pair{weighted_dot(xi, r, g), weighted_dot(b, r, g) / B};
    };
    for (std::size_t p = 0; p < probes.size(); ++p) {
      const auto [l, rr] = lyap2(probes[p].values());
      rep.lyap2.push_back({p, l, rr});
    }
    const auto& qv = q.values();
    const double m1 = weighted_dot(qv, r, g);
    std::vector<double> r2(N);
    for (std::size_t i = 0; i < N; ++i) r2[i] = r[i] * r[i];
    rep.variance_term = weighted_dot(qv, r2, g) - m1 * m1;
    rep.fecundity_term = B * (m1 - lyap2(qv).second);
    rep.dJdt = *rep.variance_term + *rep.fecundity_term;
  }
  return rep;
}

void LyapunovTrace::write_csv(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path);
  os << "t,J,dJdt,flatness_residual,mean,variance\n" << std::setprecision(17);
  for (std::size_t k = 0; k < t.size(); ++k) {
    os << t[k] << ',' << J[k] << ',' << dJdt[k] << ',' << flatness_residual[k] << ',' << mean[k] << ',' << variance[k] << '\n';
  }
}

std::string to_string(StabilityVerdict v) {
  switch (v) {
    case StabilityVerdict::Converged: return "converged";
    case StabilityVerdict::NotConverged: return "not-converged";
    case StabilityVerdict::Degenerate: return "degenerate";
  }
  return "?";
}

namespace {

std::vector<double> rk4(const Replicator& rep, const std::vector<double>& q, double dt) {
  const std::size_t N = q.size();
  auto axpy = [N](const std::vector<double>& a, const std::vector<double>& b, double c) {
    std::vector<double> o(N);
    for (std::size_t i = 0; i < N; ++i) o[i] = a[i] + c * b[i];
    return o;
  };
  const auto k1 = rep.rhs(q);
  const auto k2 = rep.rhs(axpy(q, k1, 0.5 * dt));
  const auto k3 = rep.rhs(axpy(q, k2, 0.5 * dt));
  const auto k4 = rep.rhs(axpy(q, k3, dt));
  std::vector<double> o(N);
  for (std::size_t i = 0; i < N; ++i) o[i] = q[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return o;
}

void record(LyapunovTrace& tr, const Replicator& rep, double t, const std::vector<double>& q) {
  tr.t.push_back(t);
  tr.J.push_back(rep.J(q));
  tr.dJdt.push_back(rep.dJdt(q));
  tr.flatness_residual.push_back(rep.flatness_residual(q));
  const auto m = moments(make_probability(rep.grid(), q));
  tr.mean.push_back(m.mean);
  tr.variance.push_back(m.variance);
}

}  // namespace

StabilityResult run_to_stability(const Replicator& rep, const ProbabilityState& q0, const StabilityConfig& config) {
  const Grid& g = rep.grid();
  if (!(q0.grid() == g)) throw DimensionError("initial state grid differs from the replicator grid");
  const double xm = rep.spec().x_M;
  const double radius = config.locality_radius.value_or(0.1 * g.width());
  {
    std::vector<double> local(g.n_points(), 0.0);
    for (std::size_t i = 0; i < local.size(); ++i)
      if (std::abs(g.node(i) - xm) <= radius) local[i] = q0[i];
    const double m = quadrature(local, g);
    if (m < config.locality_mass) {
      throw PreconditionError("initial state has mass " + std::to_string(m) + " within " + std::to_string(radius) +
                              " of x_M, need at least " + std::to_string(config.locality_mass));
    }
  }
  const bool flat0 = rep.flatness_residual(q0.values()) < 1e-6;
  if (!rep.xm_certified() && !flat0) {
    throw PreconditionError("K_S(x_M, .) - R0 does not peak uniquely at the node nearest x_M");
  }

  StabilityResult res{{}, StabilityVerdict::NotConverged, q0, 0.0, true};
  std::vector<double> q = q0.values();
  double t = 0.0, dt = config.dt_init;
  record(res.trace, rep, t, q);
  double Jprev = res.trace.J.back();
  while (t < config.t_end) {
    dt = std::min({dt, config.dt_max, config.t_end - t});
    if (dt < 1e-14 * config.t_end) throw StiffnessError("replicator step size underflow at t = " + std::to_string(t));
    const auto full = rk4(rep, q, dt);
    const auto half = rk4(rep, rk4(rep, q, 0.5 * dt), 0.5 * dt);
    double err = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double sc = config.abs_tol + config.rel_tol * std::abs(half[i]);
      err = std::max(err, std::abs(half[i] - full[i]) / 15.0 / sc);
    }
    const double factor = err > 0.0 ? std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0) : 5.0;
    if (err > 1.0) {
      dt *= factor;
      continue;
    }
    t += dt;
    q = half;
    for (double& v : q) v = std::max(v, 0.0);
    const double mass = quadrature(q, g);
    for (double& v : q) v /= mass;
    record(res.trace, rep, t, q);
    const double Jnow = res.trace.J.back();
    const double drop = Jprev - Jnow;
    if (drop > 0.0) {
      res.max_J_decrease = std::max(res.max_J_decrease, drop);
      if (drop > 1e-10 + config.rel_tol * std::abs(Jnow)) res.monotone = false;
    }
    Jprev = Jnow;
    dt *= factor;
  }
  res.final_state = make_probability(g, q);
  const double jspan = *std::max_element(res.trace.J.begin(), res.trace.J.end()) -
                       *std::min_element(res.trace.J.begin(), res.trace.J.end());
  const double h = g.spacing();
  const auto m = moments(res.final_state);
  if (flat0 && jspan <= 1e-12) {
    res.verdict = StabilityVerdict::Degenerate;
  } else if (m.variance < 4.0 * h * h && std::abs(m.mean - xm) < 2.0 * h && res.monotone) {
    res.verdict = StabilityVerdict::Converged;
  }
  log::debug("replicator", "verdict " + to_string(res.verdict) + " at t = " + std::to_string(t));
  return res;
}

}  // namespace selmut
