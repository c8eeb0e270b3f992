#include "selmut/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "json.hpp"
#include "selmut/errors.hpp"
#include "selmut/io.hpp"

namespace selmut {

using nlohmann::json;

namespace {

class Node {
 public:
  /// `from` is the text offset of the block, so key lookups stay inside it.
  Node(const json& j, std::string path, std::string_view text, std::size_t from = 0)
      : j_(&j), path_(std::move(path)), text_(text), from_(from) {
    if (!j.is_object()) fail("", "expected an object");
  }
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;
  ~Node() = default;

  bool has(const std::string& key) const { return j_->contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    if (!j_->contains(key)) fail(key, "missing required key");
    return (*j_)[key];
  }

  template <class T>
  T get(const std::string& key) {
    const json& v = raw(key);
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      fail(key, "has the wrong type");
    }
  }

  template <class T>
  T get_or(const std::string& key, T fallback) {
    if (!has(key)) {
      seen_.insert(key);
      return fallback;
    }
    return get<T>(key);
  }

  Node child(const std::string& key) {
    const json& v = raw(key);
    return Node(v, join(key), text_, locate(key).value_or(from_));
  }
  Node element(const std::string& key, std::size_t k) {
    const json& a = raw(key);
    return Node(a.at(k), join(key) + "[" + std::to_string(k) + "]", text_, locate(key).value_or(from_));
  }

  /// Rejects any key that was never looked at.
  void finish() const {
    for (auto it = j_->begin(); it != j_->end(); ++it)
      if (!seen_.count(it.key())) fail(it.key(), "unknown key");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    const std::string p = key.empty() ? path_ : join(key);
    std::ostringstream os;
    os << "config key '" << (p.empty() ? "<root>" : p) << "': " << what;
    const auto at = key.empty() ? std::nullopt : locate(key);
    if (at || from_ > 0) os << " (line " << line_at(at.value_or(from_)) << ")";
    throw UsageError(os.str(), p);
  }

  const std::string& path() const noexcept { return path_; }
  std::string_view text() const noexcept { return text_; }

 private:
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  std::optional<std::size_t> locate(const std::string& key) const {
    const auto pos = text_.find("\"" + key + "\"", from_);
    if (pos == std::string_view::npos) return std::nullopt;
    return pos;
  }
  std::size_t line_at(std::size_t pos) const {
    return 1 + static_cast<std::size_t>(std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
  }

  const json* j_;
  std::string path_;
  std::string_view text_;
  std::size_t from_;
  std::set<std::string> seen_;
};

Profile parse_profile(Node n, const std::filesystem::path& base) {
  const auto fam = n.get<std::string>("family");
  Profile p = Profile::constant(1.0);
  if (fam == "gaussian") {
    p = Profile::gaussian(n.get<double>("sd"), n.get_or("amplitude", 1.0));
  } else if (fam == "normal") {
    p = Profile::normal(n.get<double>("sd"));
  } else if (fam == "cauchy") {
    p = Profile::cauchy(n.get<double>("scale"), n.get_or("amplitude", 1.0));
  } else if (fam == "bump") {
    p = Profile::compact_bump(n.get<double>("radius"), n.get_or("amplitude", 1.0));
  } else if (fam == "constant") {
    p = Profile::constant(n.get<double>("value"));
  } else if (fam == "table") {
    std::filesystem::path f = n.get<std::string>("path");
    p = load_profile_table(f.is_absolute() ? f : base / f);
  } else if (fam == "two_atom") {
    p = Profile::two_atom(n.get<double>("h"));
  } else {
    n.fail("family", "unknown profile family '" + fam + "'");
  }
  n.finish();
  return p;
}

ScalarFunction parse_function(Node n) {
  const auto kind = n.get<std::string>("kind");
  ScalarFunction f;
  if (kind == "zero") {
    f = {[](double) { return 0.0; }, "0"};
  } else if (kind == "constant") {
    const double v = n.get<double>("value");
    f = {[v](double) { return v; }, io::format_double(v)};
  } else if (kind == "quadratic") {
    const double c = n.get<double>("coef"), m = n.get_or("center", 0.0), b = n.get_or("offset", 0.0);
    f = {[c, m, b](double x) { return b + c * (x - m) * (x - m); }, "quadratic"};
  } else {
    n.fail("kind", "unknown function kind '" + kind + "'");
  }
  n.finish();
  return f;
}

SaturationTerm parse_saturation(Node n) {
  const auto form = n.get<std::string>("form");
  SaturationTerm s = SaturationTerm::linear(1.0);
  if (form == "linear") {
    s = SaturationTerm::linear(n.get<double>("nu"));
  } else if (form == "power") {
    const double nu = n.get<double>("nu"), gamma = n.get_or("gamma", 1.0);
    if (n.has("r0")) {
      auto r0 = parse_function(n.child("r0"));
      s = SaturationTerm::power(nu, gamma, r0.fn);
    } else {
      s = SaturationTerm::power(nu, gamma);
    }
  } else {
    n.fail("form", "unknown saturation form '" + form + "'");
  }
  n.finish();
  return s;
}

Fecundity parse_fecundity(Node n) {
  const auto kind = n.get<std::string>("kind");
  Fecundity f = Fecundity::constant(1.0);
  if (kind == "constant") {
    f = Fecundity::constant(n.get<double>("value"));
  } else if (kind == "gaussian_peak") {
    f = Fecundity::gaussian_peak(n.get<double>("base"), n.get<double>("peak"), n.get_or("center", 0.0), n.get<double>("width"));
  } else {
    n.fail("kind", "unknown fecundity kind '" + kind + "'");
  }
  n.finish();
  return f;
}

Grid parse_grid(Node n) {
  const double a = n.get<double>("x_min"), b = n.get<double>("x_max");
  const auto N = n.get<std::size_t>("n");
  n.finish();
  try {
    return Grid(a, b, N);
  } catch (const Error& e) {
    n.fail("", e.what());
  }
}

ConvolutionMethod parse_method(Node& n, const std::string& key) {
  const auto m = n.get_or<std::string>(key, "auto");
  if (m == "auto") return ConvolutionMethod::Auto;
  if (m == "fft") return ConvolutionMethod::Fft;
  if (m == "direct") return ConvolutionMethod::Direct;
  n.fail(key, "expected auto, fft or direct");
}

InitialCondition parse_initial(Node n) {
  InitialCondition ic;
  const auto kind = n.get<std::string>("kind");
  if (kind == "bumps") {
    ic.kind = InitialCondition::Kind::Bumps;
    ic.centers = n.get<std::vector<double>>("centers");
    ic.sd = n.get<double>("sd");
    ic.mass = n.get_or("mass", 1.0);
  } else if (kind == "gaussian") {
    ic.kind = InitialCondition::Kind::Gaussian;
    ic.centers = {n.get_or("mean", 0.0)};
    ic.sd = n.get<double>("sd");
    ic.mass = n.get_or("mass", 1.0);
  } else if (kind == "uniform") {
    ic.kind = InitialCondition::Kind::Uniform;
    ic.mass = n.get_or("mass", 1.0);
  } else if (kind == "hopf_cole") {
    ic.kind = InitialCondition::Kind::HopfCole;
    ic.shape = n.get_or<std::string>("shape", "abs");
    if (ic.shape != "abs" && ic.shape != "quadratic") n.fail("shape", "expected abs or quadratic");
    ic.slope = n.get_or("slope", 1.0);
    ic.center = n.get_or("center", 0.0);
    ic.shift = n.get_or("shift", 0.0);
  } else {
    n.fail("kind", "unknown initial condition '" + kind + "'");
  }
  if (!(ic.mass > 0.0)) n.fail("mass", "must be positive");
  n.finish();
  return ic;
}

IntegratorConfig parse_integrator(Node n) {
  IntegratorConfig c;
  c.scheme = parse_scheme(n.get_or<std::string>("scheme", to_string(c.scheme)));
  c.dt_init = n.get_or("dt_init", c.dt_init);
  c.dt_max = n.get_or("dt_max", c.dt_max);
  c.rel_tol = n.get_or("rel_tol", c.rel_tol);
  c.abs_tol = n.get_or("abs_tol", c.abs_tol);
  c.t_end = n.get_or("t_end", c.t_end);
  c.positivity_clamp_threshold = n.get_or("positivity_clamp_threshold", c.positivity_clamp_threshold);
  c.save_stride = n.get_or("save_stride", c.save_stride);
  c.snapshot_budget = n.get_or("snapshot_budget", c.snapshot_budget);
  n.finish();
  try {
    c.check();
  } catch (const Error& e) {
    n.fail("", e.what());
  }
  return c;
}

}  // namespace

DensityState InitialCondition::build(const Grid& grid, double eps) const {
  const std::size_t N = grid.n_points();
  std::vector<double> v(N, 0.0);
  switch (kind) {
    case Kind::Bumps:
    case Kind::Gaussian:
      for (std::size_t i = 0; i < N; ++i)
        for (double c : centers) {
          const double z = (grid.node(i) - c) / sd;
          v[i] += std::exp(-0.5 * z * z);
        }
      break;
    case Kind::Uniform: std::fill(v.begin(), v.end(), 1.0); break;
    case Kind::HopfCole:
      for (std::size_t i = 0; i < N; ++i) {
        const double d = grid.node(i) - center;
        const double u = shape == "abs" ? shift - slope * std::abs(d) : shift - 0.5 * slope * d * d;
        v[i] = std::exp(u / eps);
      }
      return DensityState(grid, std::move(v));
  }
  DensityState n(grid, std::move(v));
  return n.scaled(mass / n.mass());
}

ModelSpec ExperimentConfig::spec_for(double e) const {
  if (!model) throw ConfigurationError("experiment has no model");
  ModelSpec s = *model;
  s.eps = e;
  return s;
}

std::uint64_t ExperimentConfig::hash() const { return io::fnv1a64(text); }

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("config is not valid JSON: ") + e.what(), "");
  }
  Node root(doc, "", text);
  ExperimentConfig cfg;
  cfg.text = std::string(text);
  cfg.name = root.get_or<std::string>("name", "experiment");
  cfg.seed = root.get_or<std::uint64_t>("seed", 1);
  cfg.random_probes = root.get_or<std::size_t>("random_probes", 8);
  {
    cfg.output = root.get_or<std::string>("output", "out/" + cfg.name);
  }

  std::optional<Grid> grid;
  if (root.has("grid")) grid = parse_grid(root.child("grid"));

  if (root.has("model")) {
    if (!grid) root.fail("grid", "a model needs a grid");
    Node m = root.child("model");
    const auto fam_name = m.get<std::string>("family");
    ModelFamily fam;
    try {
      fam = parse_family(fam_name);
    } catch (const Error&) {
      m.fail("family", "unknown model family '" + fam_name + "'");
    }
    SaturationTerm sat = SaturationTerm::linear(1.0);
    if (m.has("saturation")) {
      sat = parse_saturation(m.child("saturation"));
    } else {
      sat = SaturationTerm::linear(m.get<double>("nu"));
    }
    ModelSpec spec{fam, *grid, 1.0, sat};
    auto profile = [&](const char* key) { return parse_profile(m.child(key), base); };
    auto need = [&](const char* key) {
      if (!m.has(key)) m.fail(key, std::string("missing kernel '") + key + "' required by the " + fam_name + " family");
    };
    switch (fam) {
      case ModelFamily::NM: need("k0"); break;
      case ModelFamily::GNM: need("ks"); break;
      case ModelFamily::ATH: need("mutation"); if (!m.has("k1")) need("k0"); break;
      case ModelFamily::AF: need("fecundity"); need("offspring"); break;
      case ModelFamily::General: m.fail("family", "the general family needs a programmatic kernel and is not configurable");
    }
    try {
      if (m.has("k0")) spec.k0 = SymmetricKernel(profile("k0"));
      if (m.has("mutation")) spec.mutation = MutationKernel(profile("mutation"), 1.0);
      if (m.has("k1")) spec.k1 = TwoPointKernel::from_profile(profile("k1"));
      if (m.has("ks")) spec.ks = TwoPointKernel::from_profile(profile("ks"));
      if (m.has("fecundity")) spec.fecundity = parse_fecundity(m.child("fecundity"));
      if (m.has("offspring")) {
        Node o = m.child("offspring");
        const auto form = o.get_or<std::string>("form", "female");
        if (form != "female" && form != "male") o.fail("form", "expected female or male");
        spec.offspring = OffspringDistribution(MutationKernel(parse_profile(o.child("profile"), base), 1.0),
                                               form == "female" ? OffspringForm::FemaleCentered : OffspringForm::MaleCentered);
        o.finish();
      }
    } catch (const UsageError&) {
      throw;
    } catch (const Error& e) {
      m.fail("", e.what());
    }
    spec.method = parse_method(m, "method");
    spec.normalize_offspring = m.get_or("normalize_offspring", true);
    spec.rhs_ceiling = m.get_or("rhs_ceiling", spec.rhs_ceiling);
    m.finish();
    cfg.model = std::move(spec);

    cfg.eps = root.get<std::vector<double>>("eps");
    if (cfg.eps.empty()) root.fail("eps", "needs at least one level");
    for (std::size_t k = 0; k < cfg.eps.size(); ++k) {
      if (!(cfg.eps[k] > 0.0 && cfg.eps[k] <= 1.0)) root.fail("eps", "levels must lie in (0, 1]");
      if (k && !(cfg.eps[k] < cfg.eps[k - 1])) root.fail("eps", "levels must be strictly decreasing");
    }
    cfg.initial = parse_initial(root.child("initial"));
  }
  if (root.has("integrator")) cfg.integrator = parse_integrator(root.child("integrator"));

  if (root.has("diagnostics")) {
    Node d = root.child("diagnostics");
    auto& t = cfg.diagnostics;
    t.bv = d.get_or("bv", t.bv);
    t.concentration = d.get_or("concentration", t.concentration);
    t.lyapunov = d.get_or("lyapunov", t.lyapunov);
    t.dirac = d.get_or("dirac", t.dirac);
    t.hj = d.get_or("hj", t.hj);
    d.finish();
  }
  if (!cfg.model) {
    cfg.diagnostics.bv = cfg.diagnostics.concentration = cfg.diagnostics.hj = false;
  }

  if (root.has("replicator")) {
    Node r = root.child("replicator");
    Grid g = parse_grid(r.child("grid"));
    Profile ks = parse_profile(r.child("ks"), base);
    ScalarFunction r0 = parse_function(r.child("r0"));
    ReplicatorConfig rc{g, ks, r0, 0.0, 0.0, 0.05, {}};
    rc.x_M = r.get_or("x_M", 0.0);
    rc.q0_center = r.get_or("q0_center", rc.x_M);
    rc.q0_sd = r.get_or("q0_sd", rc.q0_sd);
    rc.stability.t_end = r.get_or("t_end", rc.stability.t_end);
    if (r.has("locality_radius")) rc.stability.locality_radius = r.get<double>("locality_radius");
    r.finish();
    cfg.replicator = std::move(rc);
  }
  if (cfg.diagnostics.lyapunov && !cfg.replicator) root.fail("replicator", "lyapunov diagnostics need a replicator block");

  if (root.has("dirac")) {
    Node d = root.child("dirac");
    std::vector<Profile> kernels;
    const json& ks = d.raw("kernels");
    if (!ks.is_array() || ks.empty()) d.fail("kernels", "expected a non-empty array of profiles");
    for (std::size_t k = 0; k < ks.size(); ++k) kernels.push_back(parse_profile(d.element("kernels", k), base));
    auto pts = d.get<std::vector<std::vector<double>>>("point_sets");
    Grid audit = parse_grid(d.child("audit"));
    DiracConfig dc{kernels, pts, d.get_or("nu", 1.0), audit};
    d.finish();
    cfg.dirac = std::move(dc);
  }
  if (cfg.diagnostics.dirac && !cfg.dirac) root.fail("dirac", "dirac diagnostics need a dirac block");

  if (root.has("hj")) {
    Node h = root.child("hj");
    cfg.hj.constants.A = h.get_or("A", cfg.hj.constants.A);
    cfg.hj.constants.lambda = h.get_or("lambda", cfg.hj.constants.lambda);
    h.finish();
  }
  root.finish();
  if (!cfg.model && !cfg.replicator && !cfg.dirac) root.fail("model", "nothing to run: need a model, replicator or dirac block");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw UsageError("cannot read config " + path.string(), "");
  std::ostringstream os;
  os << is.rdbuf();
  return parse_config(os.str(), path.parent_path().empty() ? "." : path.parent_path());
}

}  // namespace selmut
