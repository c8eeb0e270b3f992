#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "selmut/bounds.hpp"
#include "selmut/convolution.hpp"
#include "selmut/errors.hpp"
#include "selmut/kernels.hpp"
#include "selmut/model.hpp"
#include "support.hpp"

using namespace selmut;

namespace {

std::vector<double> direct_convolution(const Grid& g, const std::function<double(double)>& k, const std::vector<double>& f) {
  std::vector<double> out(f.size(), 0.0);
  for (std::size_t i = 0; i < f.size(); ++i)
    for (std::size_t j = 0; j < f.size(); ++j) out[i] += g.weight(j) * k(g.node(i) - g.node(j)) * f[j];
  return out;
}

ModelSpec nm_spec(const Grid& g, Profile k0, double eps = 0.1) {
  ModelSpec s{ModelFamily::NM, g, eps, SaturationTerm::linear(1.0)};
  s.k0 = SymmetricKernel(std::move(k0));
  return s;
}

}  // namespace

TEST_CASE("constant kernel convolution is c times the mass") {
  Grid g(-1.0, 1.0, 64);
  DensityState n(g, testing::random_field(64, 11));
  for (auto m : {ConvolutionMethod::Direct, ConvolutionMethod::Fft}) {
    Convolver c(g, [](double) { return 2.5; }, m);
    for (double v : c.apply(n)) CHECK(v == doctest::Approx(2.5 * n.mass()).epsilon(1e-12));
  }
}

TEST_CASE("delta sifting through a convolution") {
  Grid g(-2.0, 2.0, 81);
  const std::size_t j = 30;
  Convolver c(g, [](double z) { return std::exp(-z * z); }, ConvolutionMethod::Direct);
  const auto out = c.apply(grid_delta(g, j));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double z = g.node(i) - g.node(j);
    CHECK(out[i] == doctest::Approx(std::exp(-z * z)).epsilon(1e-12));
  }
}

TEST_CASE("fft and direct convolution agree") {
  for (std::size_t n : {32u, 64u, 256u}) {
    Grid g(-3.0, 3.0, n);
    const auto f = testing::random_field(n, 100 + n);
    auto k = [](double z) { return std::exp(-0.5 * z * z); };
    Convolver c(g, k, ConvolutionMethod::Direct);
    const auto a = c.apply(f, ConvolutionMethod::Direct), b = c.apply(f, ConvolutionMethod::Fft);
    CHECK(testing::max_abs_diff(a, b) <= 1e-10 * testing::max_abs(a));
    CHECK(testing::max_abs_diff(a, direct_convolution(g, k, f)) <= 1e-12 * testing::max_abs(a));
  }
}

TEST_CASE("auto method picks fft on large grids") {
  CHECK(Convolver(Grid(0, 1, 512), [](double) { return 1.0; }).method() == ConvolutionMethod::Fft);
  CHECK(Convolver(Grid(0, 1, 16), [](double) { return 1.0; }).method() == ConvolutionMethod::Direct);
}

TEST_CASE("convolution rejects a grid mismatch") {
  Convolver c(Grid(0, 1, 10), [](double) { return 1.0; });
  CHECK_THROWS_AS(c.apply(DensityState(Grid(0, 1, 11), std::vector<double>(11, 1.0))), DimensionError);
}

TEST_CASE("symmetric kernel rejects odd tables") {
  CHECK_THROWS(SymmetricKernel(Profile::table({-1.0, 0.0, 1.0}, {0.0, 1.0, 0.5})));
  CHECK_NOTHROW(SymmetricKernel(Profile::table({-1.0, 0.0, 1.0}, {0.5, 1.0, 0.5})));
}

TEST_CASE("profile tables load from text") {
  const auto p = std::filesystem::temp_directory_path() / "selmut_profile_table.txt";
  {
    std::ofstream os(p);
    os << "# z K\n-1 0\n0 1\n1 0\n";
  }
  const auto prof = load_profile_table(p);
  CHECK(prof(0.5) == doctest::Approx(0.5));
  CHECK(prof(2.0) == 0.0);
  {
    std::ofstream os(p);
    os << "0 1\n0 2\n";
  }
  CHECK_THROWS(load_profile_table(p));
  std::filesystem::remove(p);
}

TEST_CASE("gaussian mutation kernel has the scaled normal form and unit grid mass") {
  Grid g(-2.0, 2.0, 801);
  for (double eps : {0.1, 0.05, 0.025}) {
    MutationKernel m(Profile::normal(1.0), eps);
    CHECK(m.gaussian());
    CHECK(m(0.03) == doctest::Approx(std::exp(-0.03 * 0.03 / (2 * eps * eps)) / std::sqrt(2 * std::numbers::pi * eps * eps)));
    CHECK(std::abs(m.grid_mass(g) - 1.0) < 1e-8);
  }
}

TEST_CASE("saturation envelopes and monotonicity") {
  Grid g(-1.0, 1.0, 21);
  const auto s = SaturationTerm::power(2.0, 1.5, [](double x) { return x * x; });
  CHECK(s.R_m(0.5, g) == doctest::Approx(2.0 * std::pow(0.5, 1.5)));
  CHECK(s.R_M(0.5, g) == doctest::Approx(1.0 + 2.0 * std::pow(0.5, 1.5)));
  CHECK(s.d_rho(0.3, 0.5) == doctest::Approx(2.0 * 1.5 * std::sqrt(0.5)).epsilon(1e-6));
  CHECK(SaturationTerm::linear(3.0).is_linear());
  CHECK_THROWS_AS(SaturationTerm::general([](double, double r) { return r; }).r0(0.0), CapabilityError);
}

TEST_CASE("two point kernels") {
  const auto k = TwoPointKernel::from_profile(Profile::gaussian(1.0));
  CHECK(k.translation_invariant());
  CHECK(k(0.5, -0.5) == doctest::Approx(std::exp(-0.5)));
  const auto c = TwoPointKernel::custom([](double x, double y) { return 1.0 + x * y; }, "c");
  CHECK_FALSE(c.translation_invariant());
  CHECK(c.matrix(Grid(0, 1, 3))[8] == doctest::Approx(2.0));
}

TEST_CASE("nM birth term with a constant kernel") {
  Grid g(0.0, 1.0, 40);
  Model m(nm_spec(g, Profile::constant(1.7)));
  DensityState n(g, testing::random_field(40, 5));
  const auto b = m.birth_term(n);
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(b[i] == doctest::Approx(1.7 * n[i]).epsilon(1e-12));
}

TEST_CASE("ATH birth term of a delta is the product of the kernels") {
  Grid g(-1.0, 1.0, 101);
  ModelSpec s{ModelFamily::ATH, g, 0.1, SaturationTerm::linear(1.0)};
  s.k0 = SymmetricKernel(Profile::gaussian(1.0));
  s.mutation = MutationKernel(Profile::normal(1.0), 0.1);
  Model m(s);
  const auto mid = g.nearest(0.0);
  const auto b = m.birth_term(DensityState(g, grid_delta(g, mid)));
  const MutationKernel ge(Profile::normal(1.0), 0.1);
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double x = g.node(i) - g.node(mid);
    CHECK(b[i] == doctest::Approx(std::exp(-0.5 * x * x) * ge(x)).epsilon(1e-10));
  }
}

TEST_CASE("AF birth term with constant fecundity") {
  Grid g(-1.0, 1.0, 32);
  const double eps = 0.2, bconst = 1.3;
  auto spec = [&](bool normalize) {
    ModelSpec s{ModelFamily::AF, g, eps, SaturationTerm::linear(1.0)};
    s.fecundity = Fecundity::constant(bconst);
    s.offspring = OffspringDistribution(MutationKernel(Profile::normal(1.0), eps), OffspringForm::FemaleCentered);
    s.normalize_offspring = normalize;
    return s;
  };
  DensityState n(g, testing::random_field(32, 9));
  const MutationKernel ge(Profile::normal(1.0), eps);

  SUBCASE("unnormalized kernel collapses to b G*n") {
    Model m(spec(false));
    const auto b = m.birth_term(n);
    const auto gn = direct_convolution(g, [&](double z) { return ge(z); }, n.values());
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(b[i] == doctest::Approx(bconst * gn[i]).epsilon(1e-12));
  }
  SUBCASE("normalized kernel matches the triple quadrature") {
    Model m(spec(true));
    const auto b = m.birth_term(n);
    std::vector<double> norm(32, 0.0);
    for (std::size_t y = 0; y < 32; ++y)
      for (std::size_t x = 0; x < 32; ++x) norm[y] += g.weight(x) * ge(g.node(x) - g.node(y));
    for (std::size_t x = 0; x < 32; ++x) {
      double s = 0.0;
      for (std::size_t y = 0; y < 32; ++y)
        for (std::size_t z = 0; z < 32; ++z)
          s += g.weight(y) * g.weight(z) * ge(g.node(x) - g.node(y)) / norm[y] * bconst * n[y] * n[z];
      CHECK(b[x] == doctest::Approx(s / n.mass()).epsilon(1e-12));
      CHECK(m.kernel3(g.node(x), g.node(3), g.node(5)) == doctest::Approx(bconst * ge(g.node(x) - g.node(3))).epsilon(1e-12));
    }
  }
}

TEST_CASE("birth term is 1-homogeneous and bounded by K_M rho") {
  Grid g(-1.0, 1.0, 48);
  std::vector<ModelSpec> specs;
  specs.push_back(nm_spec(g, Profile::gaussian(0.5)));
  {
    ModelSpec s{ModelFamily::ATH, g, 0.1, SaturationTerm::linear(1.0)};
    s.k0 = SymmetricKernel(Profile::gaussian(1.0));
    s.mutation = MutationKernel(Profile::normal(1.0), 0.1);
    specs.push_back(s);
  }
  {
    ModelSpec s{ModelFamily::AF, g, 0.1, SaturationTerm::linear(1.0)};
    s.fecundity = Fecundity::gaussian_peak(0.5, 1.0, 0.2, 0.3);
    s.offspring = OffspringDistribution(MutationKernel(Profile::normal(1.0), 0.1), OffspringForm::MaleCentered);
    specs.push_back(s);
  }
  {
    ModelSpec s{ModelFamily::GNM, g, 0.1, SaturationTerm::separable([](double x) { return x * x; }, [](double r) { return r; })};
    s.ks = TwoPointKernel::from_profile(Profile::gaussian(0.7));
    specs.push_back(s);
  }
  for (const auto& s : specs) {
    Model m(s);
    DensityState n(g, testing::random_field(48, 21));
    const auto b = m.birth_term(n);
    for (double c : {0.5, 2.0, 10.0}) {
      const auto bc = m.birth_term(n.scaled(c));
      for (std::size_t i = 0; i < b.size(); ++i) CHECK(std::abs(bc[i] - c * b[i]) <= 1e-12 * std::abs(c * b[i]) + 1e-300);
    }
    KappaAnalysis ka(m, standard_probes(g));
    CHECK(quadrature(b, g) <= ka.K_M() * n.mass() * (1.0 + 1e-12));
  }
}

TEST_CASE("K_M for nM is the peak of the kernel") {
  Grid g(-2.0, 2.0, 101);
  Model m(nm_spec(g, Profile::gaussian(1.0, 2.0)));
  KappaAnalysis ka(m, standard_probes(g));
  CHECK(ka.K_M() == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(ka.K_M_probe().value == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("kappa'' for a constant kernel") {
  Grid g(-1.0, 1.0, 41);
  Model m(nm_spec(g, Profile::constant(0.8)));
  KappaAnalysis ka(m, standard_probes(g));
  CHECK(ka.kappa2_probe().value == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(ka.kappa2_qp().lower == doctest::Approx(0.8).epsilon(1e-8));
  CHECK(ka.kappa2_qp().certified);
}

TEST_CASE("kappa'' probe estimate over deltas is K0(0)") {
  Grid g(-2.0, 2.0, 81);
  Model m(nm_spec(g, Profile::gaussian(std::sqrt(0.5))));
  std::vector<ProbabilityState> deltas;
  for (std::size_t j = 0; j < g.n_points(); ++j) deltas.emplace_back(g, grid_delta(g, j));
  KappaAnalysis ka(m, deltas);
  CHECK(ka.kappa2_probe().value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ka.kappa2_qp().lower <= 1.0);
  CHECK(ka.kappa2_qp().lower > 0.0);
  CHECK(ka.kappa2_qp().lower <= ka.kappa2_qp().upper);
}

TEST_CASE("kappa analysis needs probes") {
  Grid g(-1.0, 1.0, 11);
  Model m(nm_spec(g, Profile::gaussian(1.0)));
  CHECK_THROWS_AS(KappaAnalysis(m, {}), ConfigurationError);
}

TEST_CASE("simplex QP on a diagonal form") {
  // min sum d_i m_i^2 on the simplex has m_i proportional to 1/d_i and value 1 / sum(1/d_i)
  const std::vector<double> d = {1.0, 2.0, 4.0};
  std::vector<double> q(9, 0.0);
  for (int i = 0; i < 3; ++i) q[i * 4] = d[i];
  const std::vector<double> c(3, 0.0);
  const auto r = minimize_on_simplex(q, c, 3, true);
  const double v = 1.0 / (1.0 + 0.5 + 0.25);
  CHECK(r.upper == doctest::Approx(v).epsilon(1e-9));
  CHECK(r.lower <= r.upper);
  CHECK(r.lower >= v - 1e-9);
}

TEST_CASE("alpha assumption is trivial for constant fecundity") {
  Grid g(-1.0, 1.0, 81);
  const double eps_list[] = {0.1, 0.05, 0.025};
  for (auto form : {OffspringForm::FemaleCentered, OffspringForm::MaleCentered}) {
    const auto rep = check_alpha_assumption(g, Fecundity::constant(2.0), OffspringDistribution(MutationKernel(Profile::normal(1.0), 0.1), form),
                                            eps_list, standard_probes(g));
    for (const auto& l : rep.levels) CHECK(std::abs(l.min_L) < 1e-12);
    CHECK(rep.C_hat < 1e-10);
    CHECK(rep.holds);
  }
}

TEST_CASE("alpha functional at a fecundity peak is second order in eps") {
  Grid g(-2.0, 2.0, 1601);
  const auto b = Fecundity::gaussian_peak(0.5, 1.0, 0.0, 0.5);
  const ProbabilityState delta(g, grid_delta(g, g.nearest(0.0)));
  std::vector<double> L;
  for (double eps : {0.1, 0.05, 0.025}) {
    const OffspringDistribution a(MutationKernel(Profile::normal(1.0), eps), OffspringForm::MaleCentered);
    L.push_back(alpha_functional(g, b, a, delta));
    // B(x_M) (int G_eps B - B(x_M)) with B'' = -peak / width^2 = -4
    CHECK(L.back() == doctest::Approx(1.5 * 0.5 * eps * eps * -4.0).epsilon(0.05));
  }
  CHECK(L[0] / L[1] == doctest::Approx(4.0).epsilon(0.05));
  CHECK(L[1] / L[2] == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("alpha functional off the peak stays within C eps") {
  Grid g(-2.0, 2.0, 801);
  const auto b = Fecundity::gaussian_peak(0.5, 1.0, 0.0, 0.5);
  const double eps_list[] = {0.1, 0.05, 0.025};
  const std::vector<ProbabilityState> probes = {ProbabilityState(g, grid_delta(g, g.nearest(0.4)))};
  const auto rep = check_alpha_assumption(g, b, OffspringDistribution(MutationKernel(Profile::normal(1.0), 0.1), OffspringForm::FemaleCentered),
                                          eps_list, probes);
  CHECK(rep.holds);
  CHECK(std::isfinite(rep.C_hat));
  for (const auto& l : rep.levels) CHECK(l.min_L >= -rep.C_hat * l.eps - 1e-15);
}

TEST_CASE("gaussian convergence check") {
  Grid g(-3.0, 3.0, 1201);
  const double eps_list[] = {0.1, 0.05, 0.025};
  SUBCASE("plateau") {
    const auto phi = testing::sample(g, [](double x) { return 0.5 * (std::tanh((x + 2.0) / 0.05) - std::tanh((x - 2.0) / 0.05)); });
    const auto psi = testing::sample(g, [](double x) { return std::abs(x) < 1.0 ? 1.0 : 0.0; });
    const auto rep = check_ge_convergence(g, Profile::normal(1.0), eps_list, phi, psi);
    CHECK(rep.pass);
    for (const auto& l : rep.levels) CHECK(l.discrepancy < 1e-10);
  }
  SUBCASE("mass preservation") {
    const auto phi = testing::sample(g, [](double x) { return std::exp(-2.0 * x * x); });
    const auto rep = check_ge_convergence(g, Profile::normal(1.0), eps_list, phi, std::vector<double>(g.n_points(), 1.0));
    for (const auto& l : rep.levels) CHECK(l.discrepancy < 1e-8);
  }
  SUBCASE("smoothed step against a sign profile") {
    const auto phi = testing::sample(g, [](double x) { return 0.5 * (1.0 + std::tanh(x / 0.1)); });
    const auto psi = testing::sample(g, [](double x) { return std::tanh(x / 0.01) * std::exp(-std::pow(x / 1.5, 8)); });
    const auto rep = check_ge_convergence(g, Profile::normal(1.0), eps_list, phi, psi);
    CHECK(rep.phi_variation == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(rep.pass);
    CHECK(rep.levels[1].bound == doctest::Approx(2.0 * 0.05 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-5));
    CHECK(rep.levels[1].discrepancy <= 0.0399);
  }
}

TEST_CASE("eta estimate") {
  Grid g(-2.0, 2.0, 201);
  const MutationKernel ge(Profile::normal(1.0), 0.1);
  SUBCASE("constant kernel") {
    const auto e = eta_estimate(g, SymmetricKernel(Profile::constant(0.7)), ge, standard_probes(g));
    // probes near the boundary lose part of G_eps * phi to truncation
    const std::vector<ProbabilityState> inner = {ProbabilityState(g, grid_delta(g, 100)), make_probability(g, testing::sample(g, [](double x) { return std::exp(-20 * x * x); }))};
    CHECK(eta_estimate(g, SymmetricKernel(Profile::constant(0.7)), ge, inner).value == doctest::Approx(0.7).epsilon(1e-8));
    CHECK(e.value <= 0.7);
  }
  SUBCASE("delta at the origin") {
    const std::vector<ProbabilityState> d = {ProbabilityState(g, grid_delta(g, 100))};
    const SymmetricKernel k0(Profile::gaussian(1.0));
    double expected = 0.0;
    for (std::size_t i = 0; i < g.n_points(); ++i) expected += g.weight(i) * k0(g.node(i)) * ge(g.node(i));
    CHECK(eta_estimate(g, k0, ge, d).value == doctest::Approx(expected).epsilon(1e-12));
  }
  CHECK_THROWS_AS(eta_estimate(g, SymmetricKernel(Profile::constant(1.0)), ge, {}), ConfigurationError);
}
