#include "selmut/dirac.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "selmut/errors.hpp"

namespace selmut {

std::string to_string(DiracVerdict v) {
  switch (v) {
    case DiracVerdict::Feasible: return "feasible";
    case DiracVerdict::SignInfeasible: return "sign-infeasible";
    case DiracVerdict::Singular: return "singular";
  }
  return "?";
}

DiracSystem solve_dirac_system(const SymmetricKernel& k0, std::vector<double> points, double nu) {
  if (points.empty()) throw PreconditionError("need at least one point");
  if (!(nu > 0.0)) throw DomainError("nu must be positive");
  std::sort(points.begin(), points.end());
  for (std::size_t i = 1; i < points.size(); ++i)
    if (points[i] == points[i - 1]) throw PreconditionError("points must be distinct");
  const auto N = static_cast<Eigen::Index>(points.size());
  DiracSystem sys;
  sys.points = points;
  sys.nu = nu;
  Eigen::MatrixXd K(N, N);
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index j = 0; j < N; ++j) K(i, j) = k0(points[i] - points[j]);
  sys.matrix.assign(K.data(), K.data() + K.size());
  const double norm = K.cwiseAbs().rowwise().sum().maxCoeff();
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);
  sys.det_ratio = norm > 0.0 ? std::abs(lu.determinant()) / std::pow(norm, static_cast<double>(N)) : 0.0;
  if (!(sys.det_ratio >= 1e-12)) {
    sys.verdict = DiracVerdict::Singular;
    return sys;
  }
  const Eigen::VectorXd P = lu.solve(Eigen::VectorXd::Ones(N));
  sys.residual = (K * P - Eigen::VectorXd::Ones(N)).cwiseAbs().maxCoeff();
  sys.P.assign(P.data(), P.data() + N);
  if ((P.array() <= 0.0).any()) {
    sys.verdict = DiracVerdict::SignInfeasible;
    return sys;
  }
  sys.verdict = DiracVerdict::Feasible;
  sys.rho = 1.0 / (nu * P.sum());
  sys.masses.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) sys.masses[i] = nu * sys.P[i] * sys.rho * sys.rho;
  return sys;
}

double verify_kdd(const DiracSystem& sys, const SymmetricKernel& k0) {
  if (!sys.feasible()) throw PreconditionError("KDD check needs a feasible system, got " + to_string(sys.verdict));
  double worst = 0.0;
  for (std::size_t i = 0; i < sys.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < sys.size(); ++j) s += sys.masses[j] / sys.rho * k0(sys.points[i] - sys.points[j]);
    worst = std::max(worst, std::abs(s - sys.nu * sys.rho));
  }
  return worst;
}

namespace {

template <class Field>
EsdVerdict audit(const Field& kbar, double level, const std::vector<double>& support, const Grid& grid) {
  EsdVerdict v;
  v.tolerance = 1e-8 * level;
  for (double x : support) v.equality_residual = std::max(v.equality_residual, std::abs(kbar(x) - level));
  double worst = -std::numeric_limits<double>::infinity();
  auto visit = [&](double x) {
    const double e = kbar(x) - level;
    v.max_excess = std::max(v.max_excess, e);
    if (e > worst) {
      worst = e;
      v.worst_point = x;
      v.worst_value = e;
    }
  };
  for (std::size_t i = 0; i < grid.n_points(); ++i) visit(grid.node(i));
  for (double x : support) visit(x);
  v.esd = v.equality_residual <= v.tolerance && v.max_excess <= v.tolerance;
  if (v.esd && v.worst_value <= v.tolerance) v.worst_point.reset();
  return v;
}

}  // namespace

EsdVerdict esd_check(const SymmetricKernel& k0, const DiracSystem& c, const Grid& grid) {
  if (!c.feasible()) throw PreconditionError("ESD check needs a feasible system");
  auto kbar = [&](double x) {
    double s = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) s += c.masses[j] * k0(x - c.points[j]);
    return s;
  };
  auto v = audit(kbar, c.nu * c.rho * c.rho, c.points, grid);
  v.rho = c.rho;
  return v;
}

EsdVerdict esd_check(const SymmetricKernel& k0, const DensityState& n, double nu, const Grid& grid) {
  const double rho = n.mass();
  if (!(rho > 0.0)) throw PreconditionError("ESD candidate must have positive mass");
  const Grid& g = n.grid();
  const double top = n.max_value();
  std::vector<double> support;
  for (std::size_t i = 0; i < n.size(); ++i)
    if (n[i] > 1e-10 * top) support.push_back(g.node(i));
  auto kbar = [&](double x) {
    double s = 0.0;
    for (std::size_t j = 0; j < n.size(); ++j)
      if (n[j] != 0.0) s += g.weight(j) * n[j] * k0(x - g.node(j));
    return s;
  };
  auto v = audit(kbar, nu * rho * rho, support, grid);
  v.rho = rho;
  return v;
}

MonomorphismWitness monomorphism_witness(const SymmetricKernel& k0, const DiracSystem& sys) {
  if (sys.size() < 2) throw PreconditionError("witness needs at least two morphs");
  if (!sys.feasible()) throw PreconditionError("witness needs a feasible system");
  if (!k0.profile().differentiable()) throw CapabilityError("kernel " + k0.profile().describe() + " is not differentiable");
  MonomorphismWitness w;
  w.leftmost = sys.points.front();
  for (std::size_t i = 0; i < sys.size(); ++i) w.derivative += sys.masses[i] * k0.derivative(w.leftmost - sys.points[i]);
  return w;
}

}  // namespace selmut
