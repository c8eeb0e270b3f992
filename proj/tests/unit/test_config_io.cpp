#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "selmut/config.hpp"
#include "selmut/errors.hpp"
#include "selmut/experiment.hpp"
#include "selmut/io.hpp"

using namespace selmut;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = SELMUT_SOURCE_DIR;

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("selmut_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kBase = R"({
  "name": "t",
  "model": {
    "family": "nM",
    "nu": 1.0,
    "k0": {"family": "gaussian", "sd": 1.0}
  },
  "grid": {"x_min": -1.0, "x_max": 1.0, "n": 32},
  "eps": [0.1, 0.05],
  "initial": {"kind": "bumps", "centers": [0.0], "sd": 0.1, "mass": 0.5}
})";

UsageError usage_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const UsageError& e) {
    return e;
  }
  FAIL("expected a usage error");
  return UsageError("");
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto p = s.find(from);
  REQUIRE(p != std::string::npos);
  return s.replace(p, from.size(), to);
}

}  // namespace

TEST_CASE("config parses the bundled benchmarks") {
  for (const char* name : {"nm_gaussian", "nm_overshoot", "ath_gaussian", "af_constant", "replicator", "dirac"}) {
    CAPTURE(name);
    const auto cfg = load_config(kSource / "configs" / (std::string(name) + ".json"));
    CHECK(cfg.name == name);
  }
  const auto cfg = parse_config(kBase);
  REQUIRE(cfg.model);
  CHECK(cfg.model->family == ModelFamily::NM);
  CHECK(cfg.eps == std::vector<double>{0.1, 0.05});
  CHECK(cfg.spec_for(0.05).eps == 0.05);
  CHECK(cfg.hash() == io::fnv1a64(kBase));
}

TEST_CASE("config errors name the key and the line") {
  SUBCASE("missing kernel") {
    const auto e = usage_error(replace(kBase, R"(,
    "k0": {"family": "gaussian", "sd": 1.0})", ""));
    CHECK(e.key() == "model.k0");
    CHECK(std::string(e.what()).find("k0") != std::string::npos);
    CHECK(std::string(e.what()).find("(line 3)") != std::string::npos);
  }
  SUBCASE("unknown key points at its own line") {
    const auto e = usage_error(replace(kBase, R"("sd": 0.1,)", R"("sd": 0.1, "sdd": 1,)"));
    CHECK(e.key() == "initial.sdd");
    CHECK(std::string(e.what()).find("(line 10)") != std::string::npos);
  }
  SUBCASE("repeated key names resolve inside their block") {
    const auto e = usage_error(replace(kBase, R"("centers": [0.0], "sd": 0.1)", R"("centers": [0.0], "sd": "wide")"));
    CHECK(e.key() == "initial.sd");
    CHECK(std::string(e.what()).find("(line 10)") != std::string::npos);
  }
  SUBCASE("wrong type") { CHECK(usage_error(replace(kBase, R"("n": 32)", R"("n": "many")")).key() == "grid.n"); }
  SUBCASE("eps not decreasing") { CHECK(usage_error(replace(kBase, "[0.1, 0.05]", "[0.05, 0.1]")).key() == "eps"); }
  SUBCASE("eps out of range") { CHECK(usage_error(replace(kBase, "[0.1, 0.05]", "[2.0]")).key() == "eps"); }
  SUBCASE("unknown family") { CHECK(usage_error(replace(kBase, R"("nM")", R"("mM")")).key() == "model.family"); }
  SUBCASE("invalid grid") { CHECK(usage_error(replace(kBase, R"("x_min": -1.0)", R"("x_min": 1.0)")).key() == "grid"); }
  SUBCASE("not JSON") { CHECK_THROWS_AS(parse_config("{ nope"), UsageError); }
  SUBCASE("nothing to run") { CHECK_THROWS_AS(parse_config(R"({"name": "x"})"), UsageError); }
  SUBCASE("unreadable file") { CHECK_THROWS_AS(load_config(kSource / "no_such.json"), UsageError); }
  SUBCASE("bundled missing-kernel config") { CHECK(usage_error(slurp(kSource / "tests/data/missing_kernel.json")).key() == "model.k0"); }
}

TEST_CASE("table profiles resolve against the config directory") {
  const auto dir = scratch("table");
  {
    std::ofstream os(dir / "tri.csv");
    os << "z,k\n-1,0\n0,1\n1,0\n";
  }
  const auto text = replace(kBase, R"({"family": "gaussian", "sd": 1.0})", R"({"family": "table", "path": "tri.csv"})");
  const auto cfg = parse_config(text, dir);
  CHECK((*cfg.model->k0)(0.5) == doctest::Approx(0.5));
  CHECK_THROWS(parse_config(text, dir / "elsewhere"));
  fs::remove_all(dir);
}

TEST_CASE("number formatting") {
  CHECK(io::format_double(0.1) == "0.10000000000000001");
  CHECK(io::format_double(1.0) == "1");
  CHECK(io::format_double(-2.5e-300) == "-2.5e-300");
  CHECK(io::format_double(NAN) == "nan");
  CHECK(io::format_double(-INFINITY) == "-inf");
  for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -1e-310}) CHECK(std::strtod(io::format_double(v).c_str(), nullptr) == v);
}

TEST_CASE("trace CSV layout") {
  const auto dir = scratch("csv");
  RunTrace tr;
  tr.rows.push_back({0.0, 1.0, -0.5, 0.5, 0.0, NAN, 0.1, 0.01, 0.0, 0.0});
  tr.rows.push_back({0.1, 0.95, -0.25, 0.25, 0.05, NAN, 0.1, 0.01, 0.0, 0.0});
  io::write_trace_csv(dir / "t.csv", tr);
  const auto s = slurp(dir / "t.csv");
  CHECK(s.find('\r') == std::string::npos);
  std::istringstream is(s);
  std::string line;
  std::getline(is, line);
  CHECK(line == io::kTraceHeader);
  std::getline(is, line);
  CHECK(line == "0,1,-0.5,0.5,0,nan,0.10000000000000001,0.01,0");
  std::getline(is, line);
  CHECK(line.rfind("0.10000000000000001,0.94999999999999996,", 0) == 0);
  CHECK_FALSE(std::getline(is, line));

  {
    io::TraceCsvWriter w(dir / "partial.csv");
    w.write(tr.rows[0]);
    CHECK(slurp(dir / "partial.csv") == std::string(io::kTraceHeader) + "\n0,1,-0.5,0.5,0,nan,0.10000000000000001,0.01,0\n");
  }
  fs::remove_all(dir);
}

TEST_CASE("field binaries") {
  const auto dir = scratch("field");
  const std::vector<double> v = {0.0, -1.5, 1e-300, 3.141592653589793};
  io::write_field(dir / "f.f64", v);
  CHECK(fs::file_size(dir / "f.f64") == 16 + 8 * v.size());
  const auto raw = slurp(dir / "f.f64");
  CHECK(raw.compare(0, 8, std::string("SELMF64\0", 8)) == 0);
  CHECK(static_cast<unsigned char>(raw[8]) == 4);
  CHECK(io::read_field(dir / "f.f64") == v);

  {
    std::ofstream os(dir / "short.f64", std::ios::binary);
    os.write(raw.data(), static_cast<std::streamsize>(raw.size() - 3));
  }
  CHECK_THROWS_AS(io::read_field(dir / "short.f64"), Error);
  {
    std::ofstream os(dir / "bad.f64", std::ios::binary);
    os << "NOTAFILE________";
  }
  CHECK_THROWS_AS(io::read_field(dir / "bad.f64"), Error);
  fs::remove_all(dir);
}

TEST_CASE("hashing and atomic text") {
  CHECK(io::fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(io::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(io::hex64(0xaf63dc4c8601ec8cULL) == "af63dc4c8601ec8c");
  CHECK(io::hex64(1) == "0000000000000001");
  const auto dir = scratch("text");
  io::write_text(dir / "a.txt", "one\n");
  io::write_text(dir / "a.txt", "two\n");
  CHECK(slurp(dir / "a.txt") == "two\n");
  CHECK_FALSE(fs::exists(dir / "a.txt.tmp"));
  fs::remove_all(dir);
}

TEST_CASE("experiment runs are deterministic and report verdicts") {
  const auto cfg = load_config(kSource / "tests/data/small_nm.json");
  const auto a = scratch("run_a"), b = scratch("run_b");
  RunOptions oa;
  oa.out = a;
  oa.quiet = true;
  RunOptions ob = oa;
  ob.out = b;
  ob.workers = 1;
  const auto ra = run_experiment(cfg, oa);
  const auto rb = run_experiment(cfg, ob);
  CHECK(ra.exit_code() == 0);
  CHECK(rb.exit_code() == 0);
  for (const char* f : {"trace_eps_0.1.csv", "trace_eps_0.05.csv", "trace_eps_0.025.csv", "n_eps_0.025.f64", "u_eps_0.1.f64"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  CHECK(fs::exists(a / "report.json"));
  CHECK(fs::exists(a / "plot.py"));
  const auto report = slurp(a / "report.json");
  CHECK(report.find("\"complete\": true") != std::string::npos);
  CHECK(report.find("concentration_slope") != std::string::npos);
  CHECK(report.find(ra.config_hash) != std::string::npos);
  bool bv = false;
  for (const auto& v : ra.all_verdicts()) bv = bv || v.claim_id.rfind("bv_budget", 0) == 0;
  CHECK(bv);

  RunOptions bad = oa;
  bad.only = "nonsense";
  CHECK_THROWS_AS(run_experiment(cfg, bad), UsageError);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("exit codes") {
  RunReport r;
  r.complete = true;
  CHECK(r.exit_code() == 0);
  r.verdicts.push_back({"x", 0.0, 1.0, false});
  CHECK(r.exit_code() == 4);
  r.errors.push_back("boom");
  CHECK(r.exit_code() == 3);
  RunReport partial;
  CHECK(partial.exit_code() == 3);
}
