#include "selmut/experiment.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include "json.hpp"
#include "selmut/dirac.hpp"
#include "selmut/errors.hpp"
#include "selmut/io.hpp"
#include "selmut/log.hpp"
#include "selmut/replicator.hpp"

namespace selmut {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string eps_tag(double eps) {
  std::array<char, 32> buf{};
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), eps);
  return {buf.data(), r.ptr};
}

bool wants(const RunOptions& opt, const char* suite) { return !opt.only || *opt.only == suite; }

std::vector<ProbabilityState> random_probes(const Grid& grid, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ProbabilityState> out;
  for (std::size_t k = 0; k < count; ++k) {
    std::vector<double> v(grid.n_points());
    for (double& x : v) x = u(rng);
    out.push_back(make_probability(grid, std::move(v)));
  }
  return out;
}

json cert_json(const BoundCertificate& c) {
  json j;
  j["K_M"] = c.K_M;
  j["rho_M"] = c.rho_M;
  if (c.rho_m) j["rho_m"] = *c.rho_m;
  j["rho_m_rule"] = c.rho_m_rule;
  j["rho_m_candidates"] = json::array();
  for (const auto& [rule, v] : c.rho_m_candidates) j["rho_m_candidates"].push_back({{"rule", rule}, {"value", v}});
  j["kappa2_upper"] = c.kappa2_upper;
  j["kappa2_lower"] = c.kappa2_lower;
  j["kappa2_certified"] = c.kappa2_certified;
  auto opt = [&](const char* k, const std::optional<double>& v) {
    if (v) j[k] = *v;
  };
  opt("eta0", c.eta0);
  opt("alpha_C", c.alpha_C);
  opt("C1", c.C1);
  opt("C2", c.C2);
  opt("C_f_bar", c.C_f_bar);
  opt("C0", c.C0);
  opt("L_r", c.L_r);
  opt("L0", c.L0);
  opt("lambda", c.lambda);
  opt("C_lambda", c.C_lambda);
  opt("K_bar", c.K_bar);
  opt("A", c.A);
  opt("C", c.C);
  opt("eps_rho_dot_neg0", c.eps_rho_dot_neg0);
  return j;
}

json verdict_json(const Verdict& v) {
  auto num = [](double x) { return std::isfinite(x) ? json(x) : json(io::format_double(x)); };
  json j{{"claim_id", v.claim_id}, {"bound_value", num(v.bound_value)}, {"observed_value", num(v.observed_value)}, {"pass", v.pass}};
  if (!v.detail.empty()) j["detail"] = v.detail;
  return j;
}

void run_level(const ExperimentConfig& cfg, const RunOptions& opt, const std::filesystem::path& dir, std::size_t index,
               LevelResult& res) {
  const auto t0 = Clock::now();
  const double eps = res.eps;
  const std::string tag = eps_tag(eps);
  Model model(cfg.spec_for(eps));
  const Grid& grid = model.grid();
  const DensityState n0 = cfg.initial.build(grid, eps);
  const auto extra = random_probes(grid, cfg.random_probes, cfg.seed + 7919 * index);
  const auto probes = standard_probes(grid, extra);
  auto val = validate(model, probes, &n0);
  res.certificate = val.certificate;
  res.violations = val.violations;
  auto& cert = res.certificate;
  const bool hj = cfg.diagnostics.hj && wants(opt, "hj");
  if (hj) certify_hj_constants(model, n0, cert, cfg.hj.constants);

  std::optional<io::TraceCsvWriter> csv;
  if (opt.write_files) csv.emplace(dir / ("trace_eps_" + tag + ".csv"));
  TraceRecorder rec(model, [&](const TraceRow& r) {
    if (csv) csv->write(r);
  });
  Trajectory tr;
  try {
    tr = integrate(model, n0, cfg.integrator, [&](const StepSample& s, const DensityState& n) { rec(s, n); });
  } catch (const IntegrationError& e) {
    res.error = e.what();
    tr = e.partial();
  }
  res.trace = rec.take();
  res.steps = tr.steps.size();
  res.rejected = tr.rejected_steps;
  res.complete = tr.complete && res.error.empty();
  const auto& rows = res.trace.rows;
  if (rows.empty()) throw Error("integration produced no samples");
  res.max_rho = res.min_rho = rows.front().rho;
  std::size_t counter = 0;
  const double above = cert.rho_M + 1e-12 * std::max(1.0, cert.rho_M);
  for (const auto& r : rows) {
    res.max_rho = std::max(res.max_rho, r.rho);
    res.min_rho = std::min(res.min_rho, r.rho);
    if (r.rho > above && r.rho_dot >= 0.0) ++counter;
  }
  res.final_max_u = rows.back().max_u;
  const double rho0 = rows.front().rho;
  auto add = [&](std::string id, double bound, double observed, bool pass, std::string detail = {}) {
    res.verdicts.push_back({std::move(id) + "@eps=" + tag, bound, observed, pass, std::move(detail)});
  };
  if (wants(opt, "bv")) {
    add("rho_upper_bound", std::max(cert.rho_M, rho0) + 1e-6, res.max_rho, res.max_rho <= std::max(cert.rho_M, rho0) + 1e-6);
    add("rho_above_max_decreasing", 0.0, static_cast<double>(counter), counter == 0, "samples with rho > rho_M (1e-12 relative) and rho_dot >= 0");
    if (cert.rho_m) {
      const double lo = std::min(*cert.rho_m, rho0) - 1e-6;
      add("rho_lower_bound", lo, res.min_rho, res.min_rho >= lo, cert.rho_m_rule);
    }
  }

  if (model.family() == ModelFamily::ATH && model.saturation().is_linear() && !tr.states.empty()) {
    cert.C2 = fit_ath_forcing(model, tr);
  }
  const bool bv_family = model.saturation().is_linear() &&
                         (model.family() == ModelFamily::NM || model.family() == ModelFamily::AF || model.family() == ModelFamily::ATH);
  if (cfg.diagnostics.bv && wants(opt, "bv") && bv_family) {
    try {
      BvReport b = bv_budget(res.trace, cert, model);
      add(b.claim, b.bound, b.observed, b.pass, b.constant_suspect ? "certificate constant may be too small" : "");
      add("rho_dot_neg_envelope", 1.1, b.envelope.worst_ratio, b.envelope.pointwise_pass, "worst ratio to the envelope");
      if (model.family() == ModelFamily::NM && b.envelope.fit_points >= 3 && res.trace.initial_rho_dot_neg() > 0.0) {
        add("rho_dot_neg_rate", 0.7 * b.envelope.certified_rate, b.envelope.fitted_rate, b.envelope.rate_pass);
      }
      res.bv = std::move(b);
    } catch (const CapabilityError& e) {
      add("bv_budget", NAN, NAN, false, e.what());
    }
  }
  if (hj) {
    res.appendix = appendix_bound_suite(model, tr, cert);
    for (const auto& c : res.appendix->checks) add("hj_" + c.name, 0.0, c.min_margin, c.pass(), "smallest margin over snapshots");
  }
  if (opt.write_files && !tr.states.empty()) {
    const auto& nf = tr.states.back();
    io::write_field(dir / ("n_eps_" + tag + ".f64"), nf.values());
    io::write_field(dir / ("u_eps_" + tag + ".f64"), hopf_cole(nf, eps).u);
  }
  res.seconds = seconds_since(t0);
  if (!opt.quiet) {
    log::info("experiment", "eps = " + tag + ": " + std::to_string(res.steps) + " steps, " + std::to_string(res.seconds) + " s");
  }
}

json level_json(const LevelResult& r) {
  json j;
  j["eps"] = r.eps;
  j["certificate"] = cert_json(r.certificate);
  j["violations"] = json::array();
  for (const auto& v : r.violations) j["violations"].push_back({{"check", v.check}, {"detail", v.detail}});
  j["steps"] = r.steps;
  j["rejected_steps"] = r.rejected;
  j["complete"] = r.complete;
  if (!r.error.empty()) j["error"] = r.error;
  j["max_rho"] = r.max_rho;
  j["min_rho"] = r.min_rho;
  if (!r.trace.rows.empty()) {
    j["final_rho"] = r.trace.rows.back().rho;
    j["final_bv"] = r.trace.final_bv();
    j["final_max_u"] = r.final_max_u;
    const double c = r.trace.integrated_concentration();
    if (std::isfinite(c)) j["integrated_concentration"] = c;
  }
  if (r.bv) {
    j["bv_bound"] = r.bv->bound;
    j["envelope"] = {{"certified_rate", r.bv->envelope.certified_rate},
                     {"fitted_rate", r.bv->envelope.fitted_rate},
                     {"fit_points", r.bv->envelope.fit_points},
                     {"worst_ratio", r.bv->envelope.worst_ratio}};
  }
  if (r.appendix) {
    j["appendix"] = {{"C1", r.appendix->C1}, {"C2", r.appendix->C2}, {"C", r.appendix->C}};
  }
  return j;
}

}  // namespace

std::size_t default_workers() {
  if (const char* env = std::getenv("SELMUT_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("SELMUT_WORKERS must be a positive integer, got '") + env + "'", "SELMUT_WORKERS");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<Verdict> RunReport::all_verdicts() const {
  std::vector<Verdict> out;
  for (const auto& l : levels) out.insert(out.end(), l.verdicts.begin(), l.verdicts.end());
  out.insert(out.end(), verdicts.begin(), verdicts.end());
  return out;
}

bool RunReport::verdicts_pass() const {
  const auto v = all_verdicts();
  return std::all_of(v.begin(), v.end(), [](const Verdict& x) { return x.pass; });
}

int RunReport::exit_code() const {
  if (!errors.empty() || !complete) return 3;
  return verdicts_pass() ? 0 : 4;
}

std::string RunReport::to_json() const {
  json j;
  j["name"] = name;
  j["config_hash"] = config_hash;
  j["complete"] = complete;
  j["seconds"] = seconds;
  j["runs"] = json::array();
  for (const auto& l : levels) j["runs"].push_back(level_json(l));
  j["verdicts"] = json::array();
  for (const auto& v : all_verdicts()) j["verdicts"].push_back(verdict_json(v));
  j["errors"] = errors;
  return j.dump(2) + "\n";
}

RunReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opt) {
  const auto t0 = Clock::now();
  if (opt.only) {
    static const std::vector<std::string> suites{"bv", "concentration", "lyapunov", "dirac", "hj"};
    if (std::find(suites.begin(), suites.end(), *opt.only) == suites.end()) {
      throw UsageError("--only expects one of bv, concentration, lyapunov, dirac, hj; got '" + *opt.only + "'", "--only");
    }
  }
  RunReport rep;
  rep.name = cfg.name;
  rep.config_hash = io::hex64(cfg.hash());
  rep.output = opt.out.value_or(cfg.output);
  if (opt.write_files) {
    std::filesystem::create_directories(rep.output);
    io::write_text(rep.output / "report.json", rep.to_json());
    io::write_plot_script(rep.output);
  }
  if (opt.quiet) log::set_level(log::Level::Warn);

  const bool integrate_levels = cfg.model && (wants(opt, "bv") || wants(opt, "concentration") || wants(opt, "hj")) &&
                                (cfg.diagnostics.bv || cfg.diagnostics.concentration || cfg.diagnostics.hj);
  if (integrate_levels) {
    rep.levels.resize(cfg.eps.size());
    for (std::size_t k = 0; k < cfg.eps.size(); ++k) rep.levels[k].eps = cfg.eps[k];
    std::vector<std::string> errors(cfg.eps.size());
    std::atomic<std::size_t> next{0};
    const std::size_t workers = std::min(opt.workers ? opt.workers : default_workers(), cfg.eps.size());
    auto worker = [&] {
      for (std::size_t k; (k = next++) < cfg.eps.size();) {
        try {
          run_level(cfg, opt, rep.output, k, rep.levels[k]);
        } catch (const std::exception& e) {
          errors[k] = "eps = " + eps_tag(cfg.eps[k]) + ": " + e.what();
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (std::size_t k = 0; k < errors.size(); ++k) {
      if (!errors[k].empty()) rep.errors.push_back(errors[k]);
      if (!rep.levels[k].error.empty()) rep.errors.push_back("eps = " + eps_tag(cfg.eps[k]) + ": " + rep.levels[k].error);
    }

    const bool all_ok = rep.errors.empty();
    if (all_ok && cfg.diagnostics.concentration && wants(opt, "concentration") && cfg.eps.size() >= 3) {
      std::vector<double> e, c;
      for (const auto& l : rep.levels) {
        const double v = l.trace.integrated_concentration();
        if (std::isfinite(v) && v > 0.0) {
          e.push_back(l.eps);
          c.push_back(v);
        }
      }
      if (e.size() >= 3) {
        const auto fit = loglog_slope(e, c);
        rep.verdicts.push_back({"concentration_slope", 1.0, fit.slope, fit.pass, "log-log slope of the integrated concentration functional"});
      }
    }
    if (all_ok && cfg.diagnostics.hj && wants(opt, "hj") && rep.levels.size() >= 2) {
      const double first = rep.levels.front().final_max_u, last = rep.levels.back().final_max_u;
      rep.verdicts.push_back({"max_u_decreasing", first, last, last < first, "final max u at the smallest vs largest eps"});
    }
  }

  if (cfg.replicator && cfg.diagnostics.lyapunov && wants(opt, "lyapunov")) {
    try {
      const auto& rc = *cfg.replicator;
      Replicator r({rc.grid, TwoPointKernel::from_profile(rc.ks), rc.r0.fn, rc.x_M, rc.r0.name});
      std::vector<double> q(rc.grid.n_points());
      for (std::size_t i = 0; i < q.size(); ++i) {
        const double z = (rc.grid.node(i) - rc.q0_center) / rc.q0_sd;
        q[i] = std::exp(-0.5 * z * z);
      }
      const auto q0 = make_probability(rc.grid, q);
      const auto res = run_to_stability(r, q0, rc.stability);
      if (opt.write_files) res.trace.write_csv((rep.output / "lyapunov.csv").string());
      const auto m = moments(res.final_state);
      const double h = rc.grid.spacing();
      const double min_dj = *std::min_element(res.trace.dJdt.begin(), res.trace.dJdt.end());
      const double dual = std::max(std::abs(r.dJdt(q0) - r.dJdt_chain(q0.values())),
                                   std::abs(r.dJdt(res.final_state) - r.dJdt_chain(res.final_state.values())));
      rep.verdicts.push_back({"lyapunov_verdict", 0.0, 0.0, res.verdict == StabilityVerdict::Converged, to_string(res.verdict)});
      rep.verdicts.push_back({"lyapunov_monotone", rc.stability.rel_tol, res.max_J_decrease, res.monotone, "largest one-step decrease of J"});
      rep.verdicts.push_back({"lyapunov_dJdt_nonnegative", -1e-12, min_dj, min_dj >= -1e-12});
      rep.verdicts.push_back({"lyapunov_terminal_variance", 4.0 * h * h, m.variance, m.variance < 4.0 * h * h});
      rep.verdicts.push_back({"lyapunov_terminal_mean", 2.0 * h, std::abs(m.mean - rc.x_M), std::abs(m.mean - rc.x_M) < 2.0 * h});
      rep.verdicts.push_back({"lyapunov_dual_derivative", 1e-9, dual, dual <= 1e-9});
    } catch (const std::exception& e) {
      rep.errors.push_back(std::string("lyapunov: ") + e.what());
    }
  }

  if (cfg.dirac && cfg.diagnostics.dirac && wants(opt, "dirac")) {
    try {
      const auto& dc = *cfg.dirac;
      for (const auto& p : dc.kernels) {
        SymmetricKernel k0(p);
        for (const auto& pts : dc.point_sets) {
          std::string label = p.describe() + " at {";
          for (std::size_t i = 0; i < pts.size(); ++i) label += (i ? ", " : "") + eps_tag(pts[i]);
          label += "}";
          const auto sys = solve_dirac_system(k0, pts, dc.nu);
          if (!sys.feasible()) {
            rep.verdicts.push_back({"dirac_feasibility", 0.0, sys.det_ratio, true, label + ": " + to_string(sys.verdict)});
            continue;
          }
          const double kdd = verify_kdd(sys, k0);
          const double scale = 1e-10 * std::max(1.0, dc.nu * sys.rho);
          rep.verdicts.push_back({"dirac_kdd", scale, kdd, kdd <= scale, label});
          const auto esd = esd_check(k0, sys, dc.audit);
          if (sys.size() == 1) {
            rep.verdicts.push_back({"esd_single_dirac", esd.tolerance, std::max(esd.equality_residual, esd.max_excess), esd.esd, label});
          } else {
            rep.verdicts.push_back({"esd_multi_dirac_rejected", esd.tolerance, esd.max_excess, !esd.esd, label});
            if (p.differentiable() && p.radial_decreasing()) {
              const auto w = monomorphism_witness(k0, sys);
              rep.verdicts.push_back({"monomorphism_witness", 0.0, w.derivative, w.certifies(), label});
            }
          }
        }
      }
    } catch (const std::exception& e) {
      rep.errors.push_back(std::string("dirac: ") + e.what());
    }
  }

  rep.complete = true;
  rep.seconds = seconds_since(t0);
  if (opt.write_files) io::write_text(rep.output / "report.json", rep.to_json());
  return rep;
}

}  // namespace selmut
