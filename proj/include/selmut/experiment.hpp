#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "selmut/bounds.hpp"
#include "selmut/config.hpp"
#include "selmut/diagnostics.hpp"
#include "selmut/hopfcole.hpp"

namespace selmut {

struct Verdict {
  std::string claim_id;
  double bound_value;
  double observed_value;
  bool pass;
  std::string detail{};
};

struct LevelResult {
  double eps = 0.0;
  BoundCertificate certificate;
  std::vector<Violation> violations;
  RunTrace trace;
  std::vector<Verdict> verdicts;
  std::optional<BvReport> bv;
  std::optional<AppendixReport> appendix;
  double final_max_u = 0.0;
  double max_rho = 0.0;
  double min_rho = 0.0;
  std::size_t steps = 0;
  std::size_t rejected = 0;
  bool complete = false;
  std::string error;
  double seconds = 0.0;
};

struct RunOptions {
  /// One of bv, concentration, lyapunov, dirac, hj.
  std::optional<std::string> only;
  std::optional<std::filesystem::path> out;
  bool quiet = false;
  /// 0 reads SELMUT_WORKERS, falling back to the hardware concurrency.
  std::size_t workers = 0;
  bool write_files = true;
};

struct RunReport {
  std::string name;
  std::string config_hash;
  std::filesystem::path output;
  std::vector<LevelResult> levels;
  std::vector<Verdict> verdicts;
  std::vector<std::string> errors;
  bool complete = false;
  double seconds = 0.0;

  /// Every verdict, run-level ones first.
  std::vector<Verdict> all_verdicts() const;
  bool verdicts_pass() const;
  /// 0 ok, 3 runtime failure, 4 verdict failures only.
  int exit_code() const;
  std::string to_json() const;
};

RunReport run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Worker count from SELMUT_WORKERS, else hardware concurrency.
std::size_t default_workers();

}  // namespace selmut
