// selmut <config.json> [--only suite] [--out dir] [--quiet]
#include <iostream>

#include "CLI11.hpp"
#include "selmut/config.hpp"
#include "selmut/errors.hpp"
#include "selmut/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Selection-mutation experiment runner"};
  std::string config;
  std::string only;
  std::string out;
  bool quiet = false;
  app.add_option("config", config, "experiment config (JSON)")->required();
  app.add_option("--only", only, "run one suite: bv, concentration, lyapunov, dirac or hj");
  app.add_option("--out", out, "output directory (overrides the config)");
  app.add_flag("--quiet", quiet, "only warnings and errors on stderr");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto cfg = selmut::load_config(config);
    selmut::RunOptions opt;
    if (!only.empty()) opt.only = only;
    if (!out.empty()) opt.out = out;
    opt.quiet = quiet;
    const auto report = selmut::run_experiment(cfg, opt);
    if (!quiet) {
      for (const auto& v : report.all_verdicts()) {
        std::cout << (v.pass ? "pass " : "FAIL ") << v.claim_id << "  observed " << v.observed_value << "  bound " << v.bound_value;
        if (!v.detail.empty()) std::cout << "  (" << v.detail << ")";
        std::cout << '\n';
      }
    }
    for (const auto& e : report.errors) std::cerr << "error: " << e << '\n';
    return report.exit_code();
  } catch (const selmut::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
