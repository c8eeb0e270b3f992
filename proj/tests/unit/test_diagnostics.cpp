#include <cmath>

#include "doctest.h"
#include "selmut/bounds.hpp"
#include "selmut/diagnostics.hpp"
#include "selmut/dirac.hpp"
#include "selmut/errors.hpp"
#include "selmut/integrator.hpp"
#include "selmut/model.hpp"
#include "support.hpp"

using namespace selmut;

namespace {

ModelSpec nm(const Grid& g, Profile k0, double nu = 1.0, double eps = 0.1) {
  ModelSpec s{ModelFamily::NM, g, eps, SaturationTerm::linear(nu)};
  s.k0 = SymmetricKernel(std::move(k0));
  return s;
}

ModelSpec ath(const Grid& g, Profile k0, double eps, SaturationTerm sat = SaturationTerm::linear(1.0)) {
  ModelSpec s{ModelFamily::ATH, g, eps, std::move(sat)};
  s.k0 = SymmetricKernel(std::move(k0));
  s.mutation = MutationKernel(Profile::normal(1.0), eps);
  return s;
}

ModelSpec af(const Grid& g, double eps, OffspringForm form) {
  ModelSpec s{ModelFamily::AF, g, eps, SaturationTerm::linear(1.0)};
  s.fecundity = Fecundity::gaussian_peak(0.4, 1.0, 0.1, 0.5);
  s.offspring = OffspringDistribution(MutationKernel(Profile::normal(1.0), eps), form);
  return s;
}

RunTrace run(const Model& m, const DensityState& n0, double t_end) {
  TraceRecorder rec(m);
  IntegratorConfig cfg;
  cfg.t_end = t_end;
  cfg.rel_tol = 1e-9;
  integrate(m, n0, cfg, [&](const StepSample& s, const DensityState& n) { rec(s, n); });
  return rec.take();
}

DensityState bumps(const Grid& g, double mass) {
  DensityState n(g, testing::sample(g, [](double x) { return std::exp(-30 * (x - 0.5) * (x - 0.5)) + std::exp(-30 * (x + 0.5) * (x + 0.5)); }));
  return n.scaled(mass / n.mass());
}

}  // namespace

TEST_CASE("concentration functional vanishes at the flat equilibrium") {
  Grid g(0.0, 1.0, 32);
  Model m(nm(g, Profile::constant(2.0), 0.5));
  CHECK(std::abs(concentration_functional(m, DensityState(g, std::vector<double>(32, 4.0)))) < 1e-24);
}

TEST_CASE("concentration functional vanishes at a one-point stationary state") {
  Grid g(-1.0, 1.0, 51);
  const double nu = 1.0;
  Model m(nm(g, Profile::gaussian(0.5), nu));
  auto v = grid_delta(g, 20);
  for (double& x : v) x *= 1.0 / nu;
  CHECK(concentration_functional(m, DensityState(g, v)) < 1e-20);
}

TEST_CASE("concentration functional vanishes on a stationary Dirac combination") {
  Grid g(-2.0, 2.0, 81);
  const SymmetricKernel k0(Profile::gaussian(0.5));
  Model m(nm(g, Profile::gaussian(0.5)));
  const auto sys = solve_dirac_system(k0, {g.node(20), g.node(60)}, 1.0);
  REQUIRE(sys.feasible());
  std::vector<double> v(g.n_points(), 0.0);
  v[20] = sys.masses[0] / g.weight(20);
  v[60] = sys.masses[1] / g.weight(60);
  CHECK(concentration_functional(m, DensityState(g, v)) < 1e-20);
  v[60] *= 3.0;
  CHECK(concentration_functional(m, DensityState(g, v)) > 1e-4);
}

TEST_CASE("concentration functional against a double-loop oracle") {
  Grid g(-1.0, 1.0, 64);
  const double nu = 0.7;
  auto k = [](double z) { return std::exp(-z * z / 0.5); };
  DensityState n(g, testing::random_field(64, 8));
  for (auto fam : {ModelFamily::NM, ModelFamily::ATH}) {
    const double eps = 0.2;
    const Model m(fam == ModelFamily::NM ? nm(g, Profile::gaussian(0.5), nu) : ath(g, Profile::gaussian(0.5), eps, SaturationTerm::linear(nu)));
    const MutationKernel ge(Profile::normal(1.0), eps);
    double s = 0.0;
    for (std::size_t i = 0; i < 64; ++i) {
      double kn = 0.0, gn = 0.0;
      for (std::size_t j = 0; j < 64; ++j) {
        kn += g.weight(j) * k(g.node(i) - g.node(j)) * n[j];
        gn += g.weight(j) * ge(g.node(i) - g.node(j)) * n[j];
      }
      const double r = kn / n.mass() - nu * n.mass();
      s += g.weight(i) * (fam == ModelFamily::NM ? n[i] : gn) * r * r;
    }
    const double c = concentration_functional(m, n);
    CHECK(c >= 0.0);
    CHECK(c == doctest::Approx(s).epsilon(1e-10));
  }
}

TEST_CASE("concentration functional is unsupported outside nM and ATH") {
  Grid g(-1.0, 1.0, 16);
  CHECK_THROWS_AS(concentration_functional(Model(af(g, 0.1, OffspringForm::FemaleCentered)), DensityState(g, std::vector<double>(16, 1.0))), CapabilityError);
  CHECK_THROWS_AS(concentration_functional(Model(ath(g, Profile::gaussian(1.0), 0.1, SaturationTerm::power(1.0, 2.0))), DensityState(g, std::vector<double>(16, 1.0))),
                  CapabilityError);
}

TEST_CASE("trace bookkeeping") {
  Grid g(-2.0, 2.0, 96);
  Model m(nm(g, Profile::gaussian(1.0), 1.0, 0.05));
  const auto tr = run(m, bumps(g, 1.4), 0.5);
  REQUIRE(tr.rows.size() > 3);
  for (std::size_t k = 1; k < tr.rows.size(); ++k) CHECK(tr.rows[k].bv_cum >= tr.rows[k - 1].bv_cum);
  for (const auto& r : tr.rows) {
    CHECK(r.rho_dot_neg >= 0.0);
    CHECK(r.conc >= 0.0);
    CHECK(r.var >= 0.0);
  }
  CHECK(std::isnan(run(Model(af(g, 0.1, OffspringForm::FemaleCentered)), bumps(g, 0.5), 0.05).rows.front().conc));
}

TEST_CASE("BV of a monotone increasing run is the mass gain") {
  Grid g(-2.0, 2.0, 96);
  Model m(nm(g, Profile::gaussian(1.0), 1.0, 0.1));
  const auto tr = run(m, bumps(g, 0.2), 1.0);
  for (const auto& r : tr.rows) REQUIRE(r.rho_dot >= 0.0);
  CHECK(tr.final_bv() == doctest::Approx(tr.rows.back().rho - tr.rows.front().rho).epsilon(1e-6));
  const auto v = validate(m, standard_probes(g));
  const auto rep = bv_budget(tr, v.certificate, m);
  CHECK(rep.pass);
  CHECK(rep.observed <= v.certificate.rho_M);
}

TEST_CASE("overshoot decays at least at the certified rate") {
  Grid g(-2.0, 2.0, 128);
  Model m(nm(g, Profile::gaussian(1.0), 1.0, 0.05));
  const auto v = validate(m, standard_probes(g));
  const auto tr = run(m, bumps(g, 1.5), 1.0);
  const auto rep = bv_budget(tr, v.certificate, m);
  CHECK(rep.pass);
  CHECK(rep.envelope.pointwise_pass);
  CHECK(rep.envelope.fit_points >= 3);
  CHECK(rep.envelope.fitted_rate >= 0.7 * v.certificate.kappa2_lower);
}

TEST_CASE("envelope fit on a synthetic exponential") {
  RunTrace tr;
  tr.eps = 0.1;
  for (int k = 0; k <= 50; ++k) {
    const double t = 0.01 * k;
    tr.rows.push_back({t, 1.0, -2.0 * std::exp(-3.0 * t / 0.1), 2.0 * std::exp(-3.0 * t / 0.1), 0.0, 0.0, 0.0, 0.0, 0.0, 0.0});
  }
  const auto a = fit_envelope(tr, 3.0);
  CHECK(a.fitted_rate == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(a.pointwise_pass);
  CHECK(a.rate_pass);
  const auto b = fit_envelope(tr, 10.0);
  CHECK_FALSE(b.pointwise_pass);
  CHECK_FALSE(b.rate_pass);
}

TEST_CASE("second-derivative identity for nM") {
  SUBCASE("flat equilibrium") {
    Grid g(0.0, 1.0, 16);
    Model m(nm(g, Profile::constant(1.0)));
    const auto r = ddrho_identity_residual(m, DensityState(g, std::vector<double>(16, 1.0)));
    CHECK(std::abs(r.lhs) < 1e-12);
    CHECK(std::abs(r.rhs) < 1e-12);
  }
  SUBCASE("logistic reduction") {
    Grid g(0.0, 1.0, 16);
    const double k0 = 2.0, nu = 1.0, eps = 0.1, rho = 0.5;
    Model m(nm(g, Profile::constant(k0), nu, eps));
    const auto r = ddrho_identity_residual(m, DensityState(g, std::vector<double>(16, rho)));
    const double f = rho * (k0 - nu * rho);
    const double rd = f / eps, rdd = (k0 - 2 * nu * rho) * f / (eps * eps);
    CHECK(r.lhs == doctest::Approx(0.5 * eps * rdd).epsilon(1e-12));
    CHECK(r.rhs == doctest::Approx(-rd / (2 * rho * rho) * k0 * rho * rho + rho / eps * (k0 - nu * rho) * (k0 - nu * rho)).epsilon(1e-12));
  }
  SUBCASE("random states") {
    Grid g(-1.0, 1.0, 64);
    Model m(nm(g, Profile::gaussian(0.4), 1.3, 0.05));
    for (std::uint64_t seed = 0; seed < 10; ++seed) CHECK(ddrho_identity_residual(m, DensityState(g, testing::random_field(64, seed))).residual <= 1e-8);
  }
}

TEST_CASE("second-derivative identity for AF") {
  Grid g(-1.0, 1.0, 64);
  for (auto form : {OffspringForm::FemaleCentered, OffspringForm::MaleCentered}) {
    Model m(af(g, 0.1, form));
    for (std::uint64_t seed = 0; seed < 5; ++seed) CHECK(ddrho_identity_residual(m, DensityState(g, testing::random_field(64, 50 + seed))).residual <= 1e-8);
  }
  CHECK_THROWS_AS(ddrho_identity_residual(Model(ath(g, Profile::gaussian(1.0), 0.1)), DensityState(g, std::vector<double>(64, 1.0))), CapabilityError);
}

TEST_CASE("fitted ATH forcing is nonnegative") {
  Grid g(-2.0, 2.0, 64);
  Model m(ath(g, Profile::gaussian(1.0), 0.1));
  IntegratorConfig cfg;
  cfg.t_end = 0.3;
  const auto tr = integrate(m, bumps(g, 1.5), cfg);
  CHECK(fit_ath_forcing(m, tr) >= 0.0);
  CHECK_THROWS_AS(fit_ath_forcing(Model(nm(g, Profile::gaussian(1.0))), tr), CapabilityError);
}

TEST_CASE("general-R diagnostics") {
  Grid g(-1.0, 1.0, 40);
  DensityState n(g, testing::random_field(40, 77));
  SUBCASE("power saturation satisfies the growth predicate") {
    for (double gamma : {1.0, 1.5, 3.0}) {
      Model m(ath(g, Profile::gaussian(1.0), 0.1, SaturationTerm::power(0.8, gamma, [](double x) { return x * x; })));
      const auto d = general_R_diagnostics(m, n);
      REQUIRE(d.r1_condition);
      CHECK(*d.r1_condition);
    }
  }
  SUBCASE("constant kernel gives constant zeta") {
    Model m(ath(g, Profile::constant(1.7), 0.1));
    for (double z : general_R_diagnostics(m, n).zeta) CHECK(z == doctest::Approx(1.7).epsilon(1e-12));
  }
  SUBCASE("Q matches a finite-difference quadrature") {
    const auto sat = SaturationTerm::general([](double x, double r) { return (1.0 + x * x) * r * r + r; });
    Model m(ath(g, Profile::gaussian(1.0), 0.1, sat));
    const auto d = general_R_diagnostics(m, n);
    const double rho = n.mass(), h = 1e-5;
    std::vector<double> f(40);
    for (std::size_t i = 0; i < 40; ++i) {
      const double x = g.node(i);
      f[i] = (sat(x, rho + h) - sat(x, rho - h)) / (2 * h) * n[i];
    }
    CHECK(d.Q == doctest::Approx(quadrature(f, g)).epsilon(1e-6));
    CHECK_FALSE(d.r1_condition);
  }
  SUBCASE("AF uses the fecundity as fitness") {
    Model m(af(g, 0.1, OffspringForm::FemaleCentered));
    const auto d = general_R_diagnostics(m, n);
    for (std::size_t i = 0; i < 40; ++i) CHECK(d.zeta[i] == doctest::Approx(m.fecundity_values()[i]));
  }
  CHECK_THROWS_AS(general_R_diagnostics(Model(nm(g, Profile::gaussian(1.0))), n), CapabilityError);
}

TEST_CASE("log-log slope") {
  const std::vector<double> x = {0.1, 0.05, 0.025};
  const std::vector<double> y = {3.0 * 0.1, 3.0 * 0.05, 3.0 * 0.025};
  const auto f = loglog_slope(x, y);
  CHECK(f.slope == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f.pass);
  CHECK_FALSE(loglog_slope(x, {0.01, 0.0025, 0.000625}).pass);
  CHECK_THROWS(loglog_slope({1.0}, {1.0}));
}
