#include <cmath>

#include "doctest.h"
#include "selmut/errors.hpp"
#include "selmut/integrator.hpp"
#include "selmut/model.hpp"
#include "selmut/replicator.hpp"
#include "support.hpp"

using namespace selmut;

namespace {

const double kUnitGaussSd = 1.0 / std::sqrt(2.0);

Replicator gaussian_quadratic(const Grid& g, double coef = 0.1) {
  return Replicator({g, TwoPointKernel::from_profile(Profile::gaussian(kUnitGaussSd)), [coef](double y) { return coef * y * y; }, 0.0, "quadratic"});
}

ProbabilityState random_q(const Grid& g, std::uint64_t seed) { return make_probability(g, testing::random_field(g.n_points(), seed)); }

ProbabilityState delta_q(const Grid& g, std::size_t i) { return ProbabilityState(g, grid_delta(g, i)); }

}  // namespace

TEST_CASE("replicator flow conserves mass") {
  Grid g(-1.0, 1.0, 48);
  const auto rep = gaussian_quadratic(g);
  for (std::uint64_t s = 0; s < 10; ++s) CHECK(std::abs(quadrature(rep.rhs(random_q(g, s)), g)) <= 1e-10);
}

TEST_CASE("rest points") {
  Grid g(-1.0, 1.0, 21);
  const auto rep = gaussian_quadratic(g);
  CHECK(testing::max_abs(rep.rhs(delta_q(g, 7))) < 1e-12);
  CHECK(rep.dJdt(delta_q(g, 7)) == doctest::Approx(0.0));
  CHECK(rep.flatness_residual(delta_q(g, 7).values()) == 0.0);

  Replicator flat({g, TwoPointKernel::from_profile(Profile::constant(1.3)), [](double) { return 0.0; }, 0.0, "0"});
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto q = random_q(g, s);
    CHECK(testing::max_abs(flat.rhs(q)) < 1e-12);
    CHECK(flat.J(q) == doctest::Approx(0.65).epsilon(1e-12));
    CHECK(std::abs(flat.dJdt(q)) < 1e-20);
  }
}

TEST_CASE("two-type replicator oracle") {
  Grid g(-1.0, 1.0, 21);
  const auto rep = gaussian_quadratic(g, 0.3);
  const std::size_t i = 5, j = 14;
  const double xi = g.node(i), xj = g.node(j), pi = 0.3, pj = 0.7;
  std::vector<double> v(21, 0.0);
  v[i] = pi / g.weight(i);
  v[j] = pj / g.weight(j);
  const auto k = [](double z) { return std::exp(-z * z); };
  const double fi = k(0) * pi + k(xi - xj) * pj - 0.3 * xi * xi;
  const double fj = k(xj - xi) * pi + k(0) * pj - 0.3 * xj * xj;
  const double mean = pi * fi + pj * fj;
  const auto r = rep.rhs(std::span<const double>(v));
  CHECK(r[i] * g.weight(i) == doctest::Approx(pi * (fi - mean)).epsilon(1e-12));
  CHECK(r[j] * g.weight(j) == doctest::Approx(pj * (fj - mean)).epsilon(1e-12));
  CHECK(r[j] > 0.0);
}

TEST_CASE("J against a brute-force double sum") {
  Grid g(-1.0, 1.0, 32);
  const auto rep = gaussian_quadratic(g);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto q = random_q(g, 100 + s);
    double b = 0.0, r = 0.0;
    for (std::size_t a = 0; a < 32; ++a) {
      for (std::size_t c = 0; c < 32; ++c) {
        const double z = g.node(a) - g.node(c);
        b += g.weight(a) * g.weight(c) * std::exp(-z * z) * q[a] * q[c];
      }
      r += g.weight(a) * 0.1 * g.node(a) * g.node(a) * q[a];
    }
    CHECK(rep.J(q) == doctest::Approx(0.5 * b - r).epsilon(1e-10));
  }
  const auto d = delta_q(g, 3);
  CHECK(rep.J(d) == doctest::Approx(0.5 - 0.1 * g.node(3) * g.node(3)).epsilon(1e-12));
}

TEST_CASE("dJ/dt: variance form, chain rule and finite difference agree") {
  Grid g(-1.0, 1.0, 40);
  const auto rep = gaussian_quadratic(g);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto q = random_q(g, 200 + s);
    const double d = rep.dJdt(q);
    CHECK(d >= -1e-12);
    CHECK(std::abs(d - rep.dJdt_chain(q.values())) <= 1e-9);
    const double h = 1e-5;
    const auto r = rep.rhs(q);
    std::vector<double> qp(40), qm(40);
    for (std::size_t i = 0; i < 40; ++i) {
      qp[i] = q[i] + h * r[i];
      qm[i] = q[i] - h * r[i];
    }
    CHECK(std::abs((rep.J(qp) - rep.J(qm)) / (2 * h) - d) <= 1e-6);
  }
}

TEST_CASE("dJ/dt vanishes exactly when the fitness is flat on the support") {
  Grid g(-1.0, 1.0, 41);
  const auto rep = gaussian_quadratic(g);
  std::vector<double> v(41, 0.0);
  v[10] = v[30] = 1.0;
  const auto q = make_probability(g, v);
  CHECK(rep.flatness_residual(q.values()) < 1e-6);
  CHECK(std::abs(rep.dJdt(q)) <= 1e-10);
  v[30] = 3.0;
  const auto q2 = make_probability(g, v);
  v[12] = 1.0;
  const auto q3 = make_probability(g, v);
  CHECK(rep.flatness_residual(q3.values()) >= 1e-6);
  CHECK(rep.dJdt(q3) > 1e-10);
  CHECK(rep.dJdt(q2) >= 0.0);
}

TEST_CASE("convexity certificate") {
  Grid g(-1.0, 1.0, 21);
  const auto rep = gaussian_quadratic(g);
  const std::vector<double> thetas = {0.1, 0.25, 0.5, 0.9};
  SUBCASE("identical pair") {
    const auto q = random_q(g, 5);
    const auto r = convexity_certificate(rep, {{q, q}}, thetas);
    CHECK(r.ok());
    CHECK(r.entries.front().quadratic_form == doctest::Approx(0.0));
  }
  SUBCASE("two deltas") {
    const auto r = convexity_certificate(rep, {{delta_q(g, 4), delta_q(g, 14)}}, thetas);
    const double d = g.node(14) - g.node(4);
    CHECK(r.ok());
    for (const auto& e : r.entries) CHECK(e.quadratic_form == doctest::Approx(2.0 * (1.0 - std::exp(-d * d))).epsilon(1e-12));
  }
  SUBCASE("random pairs") {
    std::vector<std::pair<ProbabilityState, ProbabilityState>> pairs;
    for (std::uint64_t s = 0; s < 6; ++s) pairs.emplace_back(random_q(g, 2 * s), random_q(g, 2 * s + 1));
    const auto r = convexity_certificate(rep, pairs, thetas);
    CHECK(r.ok());
    CHECK(r.max_identity_residual <= 1e-10);
  }
  SUBCASE("oscillatory kernel is flagged") {
    const auto ce = oscillatory_counterexample();
    const auto r = convexity_certificate(ce.replicator, {{ce.q1, ce.q2}}, thetas);
    CHECK(r.identity_ok());
    REQUIRE(r.violations.size() == 1);
    CHECK(r.entries.front().quadratic_form < 0.0);
  }
}

TEST_CASE("mutation-aware Lyapunov hypotheses") {
  Grid g(-1.0, 1.0, 16);
  ModelSpec s{ModelFamily::AF, g, 0.2, SaturationTerm::linear(1.0)};
  s.fecundity = Fecundity::constant(1.5);
  s.offspring = OffspringDistribution(MutationKernel(Profile::normal(1.0), 0.2), OffspringForm::FemaleCentered);
  const Model m(s);
  std::vector<ProbabilityState> probes;
  for (std::uint64_t k = 0; k < 3; ++k) probes.push_back(random_q(g, 300 + k));
  probes.push_back(delta_q(g, 8));
  const auto q = random_q(g, 9);

  const auto flat = lyapunov_mutational(m, [](double) { return 0.0; }, q, probes);
  for (const auto& p : flat.lyap1) {
    CHECK(p.lhs == doctest::Approx(1.5 * 1.5).epsilon(1e-10));
    CHECK(std::abs(p.margin()) <= 1e-10);
  }
  CHECK(flat.J == doctest::Approx(0.75).epsilon(1e-10));

  const auto c = lyapunov_mutational(m, [](double) { return 0.4; }, q, probes);
  REQUIRE(c.lyap2.size() == probes.size());
  for (const auto& p : c.lyap2) CHECK(std::abs(p.margin()) <= 1e-12);
  REQUIRE(c.dJdt);
  CHECK(std::abs(*c.variance_term) < 1e-14);
  CHECK(std::abs(*c.dJdt - *c.variance_term - *c.fecundity_term) < 1e-15);

  const auto conv = lyapunov_mutational(m, [](double y) { return y * y; }, q, probes);
  CHECK(*conv.variance_term >= 0.0);
  CHECK(std::isfinite(conv.lyap2.back().margin()));

  ModelSpec n{ModelFamily::NM, g, 0.2, SaturationTerm::linear(1.0)};
  n.k0 = SymmetricKernel(Profile::gaussian(1.0));
  CHECK_THROWS_AS(lyapunov_mutational(Model(n), [](double) { return 0.0; }, q, probes), CapabilityError);
}

TEST_CASE("local stability of the maximizer") {
  Grid g(-1.0, 1.0, 101);
  const auto rep = gaussian_quadratic(g);
  CHECK(rep.xm_certified());
  std::vector<double> v(101);
  for (std::size_t i = 0; i < 101; ++i) v[i] = std::exp(-0.5 * std::pow((g.node(i) - 0.01) / 0.05, 2));
  StabilityConfig cfg;
  const auto res = run_to_stability(rep, make_probability(g, v), cfg);
  CHECK(res.verdict == StabilityVerdict::Converged);
  CHECK(res.monotone);
  for (double d : res.trace.dJdt) CHECK(d >= -1e-12);
  CHECK(std::abs(moments(res.final_state).mean) < 2 * g.spacing());

  SUBCASE("flat fitness is degenerate") {
    Replicator flat({g, TwoPointKernel::from_profile(Profile::constant(1.0)), [](double) { return 0.0; }, 0.0, "0"});
    cfg.t_end = 10.0;
    CHECK(run_to_stability(flat, make_probability(g, v), cfg).verdict == StabilityVerdict::Degenerate);
  }
  SUBCASE("locality precondition") {
    std::vector<double> far(101, 0.0);
    far[95] = 1.0;
    CHECK_THROWS_AS(run_to_stability(rep, make_probability(g, far), cfg), PreconditionError);
  }
}

TEST_CASE("normalized nM orbit follows the replicator on the fast time scale") {
  Grid g(-1.0, 1.0, 64);
  const double eps = 0.1, T = 2.0;
  ModelSpec s{ModelFamily::NM, g, eps, SaturationTerm::linear(1.0)};
  s.k0 = SymmetricKernel(Profile::gaussian(kUnitGaussSd));
  const Model m(s);
  const Replicator rep({g, TwoPointKernel::from_profile(Profile::gaussian(kUnitGaussSd)), [](double) { return 0.0; }, 0.0, "0"});
  const auto q0 = random_q(g, 11);
  IntegratorConfig cfg;
  cfg.t_end = eps * T;
  cfg.rel_tol = 1e-10;
  cfg.abs_tol = 1e-13;
  cfg.scheme = Scheme::Rk4;
  const auto tr = integrate(m, q0.as_density().scaled(0.5), cfg);
  const auto qn = normalize(tr.states.back());

  std::vector<double> q = q0.values();
  const int steps = 2000;
  const double dt = T / steps;
  for (int k = 0; k < steps; ++k) {
    const auto k1 = rep.rhs(q);
    std::vector<double> a(q.size()), b(q.size()), c(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) a[i] = q[i] + 0.5 * dt * k1[i];
    const auto k2 = rep.rhs(a);
    for (std::size_t i = 0; i < q.size(); ++i) b[i] = q[i] + 0.5 * dt * k2[i];
    const auto k3 = rep.rhs(b);
    for (std::size_t i = 0; i < q.size(); ++i) c[i] = q[i] + dt * k3[i];
    const auto k4 = rep.rhs(c);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += dt / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  }
  CHECK(testing::max_abs_diff(qn.values(), q) <= 1e-6 * testing::max_abs(q));
}
