#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "selmut/bounds.hpp"
#include "selmut/config.hpp"
#include "selmut/diagnostics.hpp"
#include "selmut/dirac.hpp"
#include "selmut/errors.hpp"
#include "selmut/experiment.hpp"
#include "selmut/hopfcole.hpp"
#include "selmut/integrator.hpp"
#include "selmut/model.hpp"
#include "selmut/replicator.hpp"

namespace py = pybind11;
using namespace selmut;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vec(const Array& a) {
  if (a.ndim() != 1) throw DimensionError("expected a one-dimensional array");
  return {a.data(), a.data() + a.size()};
}

Array to_array(const std::vector<double>& v) {
  Array out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

DensityState density(const Model& m, const Array& n) { return DensityState(m.grid(), to_vec(n)); }

py::dict certificate_dict(const BoundCertificate& c) {
  py::dict d;
  d["K_M"] = c.K_M;
  d["rho_M"] = c.rho_M;
  d["rho_m"] = c.rho_m;
  d["rho_m_rule"] = c.rho_m_rule;
  d["kappa2_lower"] = c.kappa2_lower;
  d["kappa2_upper"] = c.kappa2_upper;
  d["kappa2_certified"] = c.kappa2_certified;
  d["eta0"] = c.eta0;
  d["alpha_C"] = c.alpha_C;
  d["C1"] = c.C1;
  d["C2"] = c.C2;
  d["C"] = c.C;
  d["A"] = c.A;
  return d;
}

py::dict dirac_dict(const DiracSystem& s) {
  py::dict d;
  d["points"] = s.points;
  d["P"] = s.P;
  d["masses"] = s.masses;
  d["rho"] = s.rho;
  d["nu"] = s.nu;
  d["verdict"] = to_string(s.verdict);
  d["det_ratio"] = s.det_ratio;
  d["residual"] = s.residual;
  return d;
}

ModelSpec base_spec(ModelFamily family, const Grid& grid, double eps, double nu, std::optional<Profile> k0,
                    std::optional<Profile> mutation, ConvolutionMethod method) {
  ModelSpec s{family, grid, eps, SaturationTerm::linear(nu)};
  if (k0) s.k0 = SymmetricKernel(*k0);
  if (mutation) s.mutation = MutationKernel(*mutation, eps);
  s.method = method;
  return s;
}

ConvolutionMethod parse_method(const std::string& m) {
  if (m == "auto") return ConvolutionMethod::Auto;
  if (m == "direct") return ConvolutionMethod::Direct;
  if (m == "fft") return ConvolutionMethod::Fft;
  throw ConfigurationError("unknown convolution method '" + m + "'");
}

}  // namespace

PYBIND11_MODULE(_selmut, m) {
  m.doc() = "Selection-mutation models with nonlocal competition";

  static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<ExtinctionError>(m, "ExtinctionError", base.ptr());
  py::register_exception<ConfigurationError>(m, "ConfigurationError", base.ptr());
  py::register_exception<CapabilityError>(m, "CapabilityError", base.ptr());
  py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<StiffnessError>(m, "StiffnessError", base.ptr());
  py::register_exception<CflError>(m, "CflError", base.ptr());
  py::register_exception<UsageError>(m, "UsageError", base.ptr());

  py::class_<Grid>(m, "Grid")
      .def(py::init<double, double, std::size_t>(), py::arg("x_min"), py::arg("x_max"), py::arg("n"))
      .def_property_readonly("x_min", &Grid::x_min)
      .def_property_readonly("x_max", &Grid::x_max)
      .def_property_readonly("n", &Grid::n_points)
      .def_property_readonly("spacing", &Grid::spacing)
      .def("nodes", [](const Grid& g) { return to_array(g.nodes()); })
      .def("weights", [](const Grid& g) { return to_array(g.weights()); })
      .def("integrate", [](const Grid& g, const Array& f) { return quadrature(to_vec(f), g); })
      .def("__repr__", [](const Grid& g) {
        return "Grid(" + std::to_string(g.x_min()) + ", " + std::to_string(g.x_max()) + ", " +
               std::to_string(g.n_points()) + ")";
      });

  py::class_<Profile>(m, "Profile")
      .def_static("gaussian", &Profile::gaussian, py::arg("sd"), py::arg("amplitude") = 1.0)
      .def_static("normal", &Profile::normal, py::arg("sd"))
      .def_static("cauchy", &Profile::cauchy, py::arg("scale"), py::arg("amplitude") = 1.0)
      .def_static("compact_bump", &Profile::compact_bump, py::arg("radius"), py::arg("amplitude") = 1.0)
      .def_static("constant", &Profile::constant, py::arg("value"))
      .def_static("two_atom", &Profile::two_atom, py::arg("h"))
      .def_static("table", [](const Array& z, const Array& k) { return Profile::table(to_vec(z), to_vec(k)); })
      .def("__call__", [](const Profile& p, double z) { return p(z); })
      .def("derivative", &Profile::derivative)
      .def("sample", [](const Profile& p, const Array& z) {
        std::vector<double> v = to_vec(z);
        for (double& x : v) x = p(x);
        return to_array(v);
      })
      .def_property_readonly("mass", &Profile::mass)
      .def_property_readonly("sup", &Profile::sup)
      .def_property_readonly("radial_decreasing", &Profile::radial_decreasing)
      .def("__repr__", &Profile::describe);

  py::class_<Model>(m, "Model")
      .def_static(
          "nm",
          [](const Grid& g, double eps, const Profile& k0, const Profile& mutation, double nu, const std::string& method) {
            return Model(base_spec(ModelFamily::NM, g, eps, nu, k0, mutation, parse_method(method)));
          },
          py::arg("grid"), py::arg("eps"), py::arg("k0"), py::arg("mutation"), py::arg("nu") = 1.0,
          py::arg("method") = "auto")
      .def_static(
          "ath",
          [](const Grid& g, double eps, const Profile& k0, const Profile& mutation, double nu, const std::string& method) {
            return Model(base_spec(ModelFamily::ATH, g, eps, nu, k0, mutation, parse_method(method)));
          },
          py::arg("grid"), py::arg("eps"), py::arg("k0"), py::arg("mutation"), py::arg("nu") = 1.0,
          py::arg("method") = "auto")
      .def_property_readonly("grid", &Model::grid)
      .def_property_readonly("eps", &Model::eps)
      .def_property_readonly("family", [](const Model& md) { return to_string(md.family()); })
      .def("rhs", [](const Model& md, const Array& n) { return to_array(md.rhs(density(md, n))); })
      .def("rho_rhs", [](const Model& md, const Array& n) { return md.rho_rhs(density(md, n)); })
      .def("concentration", [](const Model& md, const Array& n) { return concentration_functional(md, density(md, n)); })
      .def("ddrho_residual", [](const Model& md, const Array& n) {
        const auto r = ddrho_identity_residual(md, density(md, n));
        return py::dict(py::arg("lhs") = r.lhs, py::arg("rhs") = r.rhs, py::arg("residual") = r.residual);
      });

  py::class_<ExperimentConfig>(m, "Config")
      .def_readonly("name", &ExperimentConfig::name)
      .def_readonly("eps", &ExperimentConfig::eps)
      .def_property_readonly("has_model", [](const ExperimentConfig& c) { return c.model.has_value(); })
      .def("model", [](const ExperimentConfig& c, double eps) { return Model(c.spec_for(eps)); }, py::arg("eps"))
      .def(
          "initial_state",
          [](const ExperimentConfig& c, double eps) {
            if (!c.model) throw CapabilityError("config has no model block");
            return to_array(c.initial.build(c.model->grid, eps).values());
          },
          py::arg("eps"));

  m.def("load_config", &load_config, py::arg("path"));
  m.def("parse_config", [](const std::string& text) { return parse_config(text); }, py::arg("text"));

  m.def(
      "run_experiment",
      [](const ExperimentConfig& c, std::optional<std::filesystem::path> out, std::optional<std::string> only,
         bool write_files) {
        RunOptions opt;
        opt.quiet = true;
        opt.out = std::move(out);
        opt.only = std::move(only);
        opt.write_files = write_files;
        RunReport rep;
        {
          py::gil_scoped_release release;
          rep = run_experiment(c, opt);
        }
        return py::make_tuple(rep.to_json(), rep.exit_code());
      },
      py::arg("config"), py::arg("out") = py::none(), py::arg("only") = py::none(), py::arg("write_files") = false);

  m.def(
      "integrate",
      [](const Model& md, const Array& n0, double t_end, const std::string& scheme, double rel_tol, double abs_tol,
         double dt_max) {
        IntegratorConfig cfg;
        cfg.t_end = t_end;
        cfg.scheme = parse_scheme(scheme);
        cfg.rel_tol = rel_tol;
        cfg.abs_tol = abs_tol;
        cfg.dt_max = dt_max;
        cfg.dt_init = std::min(cfg.dt_init, dt_max);
        const Trajectory tr = integrate(md, density(md, n0), cfg);
        const std::size_t N = md.grid().n_points();
        Array states({static_cast<py::ssize_t>(tr.states.size()), static_cast<py::ssize_t>(N)});
        double* out = states.mutable_data();
        for (const auto& s : tr.states) out = std::copy(s.values().begin(), s.values().end(), out);
        std::vector<double> t, rho, rd;
        for (const auto& s : tr.steps) {
          t.push_back(s.t);
          rho.push_back(s.rho);
          rd.push_back(s.rho_dot);
        }
        py::dict d;
        d["times"] = to_array(tr.times);
        d["states"] = states;
        d["t"] = to_array(t);
        d["rho"] = to_array(rho);
        d["rho_dot"] = to_array(rd);
        d["rejected_steps"] = tr.rejected_steps;
        d["complete"] = tr.complete;
        return d;
      },
      py::arg("model"), py::arg("n0"), py::arg("t_end"), py::arg("scheme") = "exponential-split",
      py::arg("rel_tol") = 1e-7, py::arg("abs_tol") = 1e-14, py::arg("dt_max") = 0.05);

  m.def(
      "validate",
      [](const Model& md, std::optional<Array> n0) {
        const auto probes = standard_probes(md.grid());
        std::optional<DensityState> init;
        if (n0) init.emplace(density(md, *n0));
        const auto v = validate(md, probes, init ? &*init : nullptr);
        py::list viol;
        for (const auto& x : v.violations) viol.append(py::make_tuple(x.check, x.detail));
        py::dict d = certificate_dict(v.certificate);
        d["violations"] = viol;
        return d;
      },
      py::arg("model"), py::arg("n0") = py::none());

  m.def(
      "solve_dirac",
      [](const Profile& k0, std::vector<double> points, double nu) {
        return dirac_dict(solve_dirac_system(SymmetricKernel(k0), std::move(points), nu));
      },
      py::arg("k0"), py::arg("points"), py::arg("nu") = 1.0);

  m.def(
      "esd_check",
      [](const Profile& k0, std::vector<double> points, double nu, const Grid& audit) {
        const SymmetricKernel k(k0);
        const auto sys = solve_dirac_system(k, std::move(points), nu);
        if (!sys.feasible()) throw PreconditionError("Dirac system is " + to_string(sys.verdict));
        const auto v = esd_check(k, sys, audit);
        py::dict d;
        d["esd"] = v.esd;
        d["rho"] = v.rho;
        d["equality_residual"] = v.equality_residual;
        d["max_excess"] = v.max_excess;
        d["worst_point"] = v.worst_point;
        if (sys.size() >= 2 && k0.differentiable()) d["witness"] = monomorphism_witness(k, sys).derivative;
        return d;
      },
      py::arg("k0"), py::arg("points"), py::arg("nu"), py::arg("audit"));

  m.def(
      "hopf_cole",
      [](const Grid& g, const Array& n, double eps) { return to_array(hopf_cole(DensityState(g, to_vec(n)), eps).u); },
      py::arg("grid"), py::arg("n"), py::arg("eps"));
  m.def(
      "inverse_hopf_cole",
      [](const Grid& g, const Array& u, double eps) { return to_array(inverse_hopf_cole(g, to_vec(u), eps).values()); },
      py::arg("grid"), py::arg("u"), py::arg("eps"));
  m.def("laplace_transform", &laplace_transform, py::arg("g"), py::arg("p"));
  m.def(
      "m_xA",
      [](double x, double A) {
        const auto r = m_xA(x, A);
        return py::make_tuple(r.value, r.argmin);
      },
      py::arg("x"), py::arg("A"));

  py::class_<Replicator>(m, "Replicator")
      .def(py::init([](const Grid& g, const Profile& ks, std::function<double(double)> r0, double x_M) {
             return Replicator({g, TwoPointKernel::from_profile(ks), std::move(r0), x_M});
           }),
           py::arg("grid"), py::arg("ks"), py::arg("r0"), py::arg("x_M") = 0.0)
      .def("J", [](const Replicator& r, const Array& q) { return r.J(to_vec(q)); })
      .def("dJdt", [](const Replicator& r, const Array& q) { return r.dJdt(to_vec(q)); })
      .def("rhs", [](const Replicator& r, const Array& q) { return to_array(r.rhs(to_vec(q))); })
      .def(
          "run_to_stability",
          [](const Replicator& r, const Array& q0, double t_end) {
            StabilityConfig cfg;
            cfg.t_end = t_end;
            const auto res = run_to_stability(r, make_probability(r.grid(), to_vec(q0)), cfg);
            py::dict d;
            d["verdict"] = to_string(res.verdict);
            d["t"] = to_array(res.trace.t);
            d["J"] = to_array(res.trace.J);
            d["dJdt"] = to_array(res.trace.dJdt);
            d["final"] = to_array(res.final_state.values());
            d["monotone"] = res.monotone;
            return d;
          },
          py::arg("q0"), py::arg("t_end") = 400.0);
}
