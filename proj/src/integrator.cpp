#include "selmut/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "selmut/log.hpp"

namespace selmut {

std::string to_string(Scheme s) { return s == Scheme::Rk4 ? "explicit-rk4" : "exponential-split"; }

Scheme parse_scheme(const std::string& name) {
  if (name == "explicit-rk4" || name == "rk4") return Scheme::Rk4;
  if (name == "exponential-split") return Scheme::ExponentialSplit;
  throw ConfigurationError("unknown integration scheme '" + name + "'");
}

void IntegratorConfig::check() const {
  if (!(dt_init > 0.0) || !(dt_max >= dt_init)) throw ConfigurationError("need 0 < dt_init <= dt_max");
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw ConfigurationError("tolerances must be positive");
  if (!(t_end > 0.0)) throw ConfigurationError("t_end must be positive");
  if (!(positivity_clamp_threshold >= 0.0)) throw ConfigurationError("clamp threshold must be nonnegative");
  if (save_stride == 0 || snapshot_budget < 2) throw ConfigurationError("save_stride >= 1 and snapshot_budget >= 2 required");
}

namespace {

using Vec = std::vector<double>;

Vec axpy(std::span<const double> x, double a, std::span<const double> y) {
  Vec out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + a * y[i];
  return out;
}

Vec rk4(const Model& m, std::span<const double> n, std::span<const double> k1, double dt) {
  const Vec k2 = m.rhs(axpy(n, 0.5 * dt, k1));
  const Vec k3 = m.rhs(axpy(n, 0.5 * dt, k2));
  const Vec k4 = m.rhs(axpy(n, dt, k3));
  Vec out(n.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = n[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

double phi1(double z) { return std::abs(z) < 1e-5 ? 1.0 + z / 2.0 + z * z / 6.0 : std::expm1(z) / z; }
double phi2(double z) {
  return std::abs(z) < 1e-3 ? 0.5 + z / 6.0 + z * z / 24.0 + z * z * z / 120.0 : (std::expm1(z) - z) / (z * z);
}

// Exponential Heun: the death rate frozen at the step start is integrated
// exactly; the rest (birth plus the change of R) enters explicitly.
Vec etd2(const Model& m, std::span<const double> n, double dt) {
  const Grid& g = m.grid();
  const double rho = quadrature(n, g);
  const Vec d = m.death_rate(rho);
  const double inv_eps = 1.0 / m.eps();
  const Vec b = m.birth_term(n);
  const std::size_t N = n.size();
  Vec a(N);
  for (std::size_t i = 0; i < N; ++i) {
    const double z = -dt * d[i] * inv_eps;
    a[i] = std::exp(z) * n[i] + dt * phi1(z) * b[i] * inv_eps;
  }
  const Vec ba = m.birth_term(a);
  const double rho_a = quadrature(a, g);
  Vec out(N);
  for (std::size_t i = 0; i < N; ++i) {
    const double z = -dt * d[i] * inv_eps;
    const double na = (ba[i] - (m.saturation()(g.node(i), rho_a) - d[i]) * a[i]) * inv_eps;
    const double n0 = b[i] * inv_eps;
    out[i] = a[i] + dt * phi2(z) * (na - n0);
  }
  return out;
}

}  // namespace

std::vector<double> fixed_step(const Model& model, std::span<const double> n, double dt, Scheme scheme) {
  if (scheme == Scheme::Rk4) return rk4(model, n, model.rhs(n), dt);
  return etd2(model, n, dt);
}

StepResult step(const Model& model, std::span<const double> n, double dt, const IntegratorConfig& config) {
  if (!(dt > 0.0)) throw PreconditionError("step size must be positive");
  const std::size_t N = n.size();
  const bool rk = config.scheme == Scheme::Rk4;
  const double order = rk ? 4.0 : 2.0;
  const double richardson = std::pow(2.0, order) - 1.0;
  const Vec k1 = rk ? model.rhs(n) : Vec{};
  StepResult res{};
  for (;;) {
    if (dt < 1e-14 * config.t_end) {
      std::ostringstream os;
      os << "step size underflow: dt = " << dt << " after " << res.rejections << " rejections";
      throw StiffnessError(os.str());
    }
    try {
      Vec full, half, two;
      if (rk) {
        full = rk4(model, n, k1, dt);
        half = rk4(model, n, k1, 0.5 * dt);
        two = rk4(model, half, model.rhs(half), 0.5 * dt);
      } else {
        full = etd2(model, n, dt);
        half = etd2(model, n, 0.5 * dt);
        two = etd2(model, half, 0.5 * dt);
      }
      double err = 0.0, vmin = 0.0, vmax = 0.0;
      bool finite = true;
      for (std::size_t i = 0; i < N; ++i) {
        if (!std::isfinite(two[i])) finite = false;
        const double scale = config.abs_tol + config.rel_tol * std::abs(two[i]);
        err = std::max(err, std::abs(two[i] - full[i]) / richardson / scale);
        vmin = std::min(vmin, two[i]);
        vmax = std::max(vmax, two[i]);
      }
      if (!finite) err = 1e300;
      const bool positivity_ok = vmin >= -config.positivity_clamp_threshold * vmax;
      if (err <= 1.0 && positivity_ok) {
        double clamped = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
          if (two[i] < 0.0) {
            clamped += model.grid().weight(i) * -two[i];
            two[i] = 0.0;
          }
        }
        res.n = std::move(two);
        res.dt_used = dt;
        res.error_estimate = err;
        const double fac = err > 0.0 ? 0.9 * std::pow(err, -1.0 / (order + 1.0)) : 5.0;
        res.dt_next = std::min(config.dt_max, dt * std::clamp(fac, 0.2, 5.0));
        res.clamped_mass = clamped;
        res.min_before_clamp = vmax > 0.0 ? vmin / vmax : 0.0;
        return res;
      }
      const double fac = positivity_ok ? 0.9 * std::pow(err, -1.0 / (order + 1.0)) : 0.5;
      dt *= std::clamp(fac, 0.1, 0.5);
    } catch (const StiffnessError&) {
      dt *= 0.25;
    } catch (const ExtinctionError&) {
      dt *= 0.25;
    }
    ++res.rejections;
  }
}

Trajectory integrate(const Model& model, const DensityState& n0, const IntegratorConfig& config,
                     const StepObserver& observer) {
  config.check();
  if (!(n0.grid() == model.grid())) throw DimensionError("initial state grid does not match the model grid");
  if (!(n0.mass() > 0.0)) throw ExtinctionError("initial population has zero mass");
  Trajectory tr;
  tr.eps = model.eps();
  std::vector<double> n = n0.values();
  double t = 0.0;
  const double rd0 = model.rho_rhs(n0);
  tr.steps.push_back({0.0, n0.mass(), rd0});
  tr.times.push_back(0.0);
  tr.states.push_back(n0);
  if (observer) observer(tr.steps.back(), n0);

  std::size_t stride = config.save_stride;
  std::size_t since_save = 0;
  double dt = std::min(config.dt_init, config.t_end);
  try {
    while (t < config.t_end) {
      const double remaining = config.t_end - t;
      const bool last = dt >= remaining * (1.0 - 1e-12);
      StepResult r = step(model, n, last ? remaining : dt, config);
      tr.rejected_steps += static_cast<std::size_t>(r.rejections);
      tr.clamped_mass += r.clamped_mass;
      tr.min_relative_value = std::min(tr.min_relative_value, r.min_before_clamp);
      const bool hit_end = last && r.dt_used == remaining;
      t = hit_end ? config.t_end : t + r.dt_used;
      n = std::move(r.n);
      dt = r.dt_next;
      DensityState state(model.grid(), n);
      tr.steps.push_back({t, state.mass(), model.rho_rhs(state)});
      if (observer) observer(tr.steps.back(), state);
      if (++since_save >= stride || hit_end) {
        since_save = 0;
        tr.times.push_back(t);
        tr.states.push_back(std::move(state));
        if (tr.states.size() > config.snapshot_budget) {
          // keep every other snapshot, always retaining the first and the latest
          std::vector<double> times;
          std::vector<DensityState> states;
          for (std::size_t k = 0; k < tr.states.size(); ++k) {
            if (k % 2 == 0 || k + 1 == tr.states.size()) {
              times.push_back(tr.times[k]);
              states.push_back(std::move(tr.states[k]));
            }
          }
          tr.times = std::move(times);
          tr.states = std::move(states);
          stride *= 2;
        }
      }
    }
  } catch (const Error& e) {
    tr.complete = false;
    std::ostringstream os;
    os << "integration failed at t = " << t << ": " << e.what();
    throw IntegrationError(os.str(), std::move(tr));
  }
  tr.complete = true;
  if (tr.clamped_mass > 0.0) {
    std::ostringstream os;
    os << "clamped negative mass " << tr.clamped_mass << " over the run";
    log::debug("integrate", os.str());
  }
  return tr;
}

}  // namespace selmut
