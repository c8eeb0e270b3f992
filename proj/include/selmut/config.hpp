#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "selmut/grid.hpp"
#include "selmut/hopfcole.hpp"
#include "selmut/integrator.hpp"
#include "selmut/model.hpp"
#include "selmut/profile.hpp"
#include "selmut/replicator.hpp"

namespace selmut {

struct ScalarFunction {
  std::function<double(double)> fn;
  std::string name;
};

struct InitialCondition {
  enum class Kind { Bumps, Gaussian, Uniform, HopfCole };
  Kind kind = Kind::Bumps;
  std::vector<double> centers{0.0};
  double sd = 0.1;
  double mass = 1.0;
  /// HopfCole: u0(x) = shift - slope |x - center| ("abs") or shift - slope (x - center)^2 / 2 ("quadratic").
  std::string shape = "abs";
  double slope = 1.0;
  double center = 0.0;
  double shift = 0.0;

  DensityState build(const Grid& grid, double eps) const;
};

struct DiagnosticsToggles {
  bool bv = true;
  bool concentration = true;
  bool lyapunov = false;
  bool dirac = false;
  bool hj = false;
};

struct ReplicatorConfig {
  Grid grid;
  Profile ks;
  ScalarFunction r0;
  double x_M = 0.0;
  double q0_center = 0.0;
  double q0_sd = 0.05;
  StabilityConfig stability;
};

struct DiracConfig {
  std::vector<Profile> kernels;
  std::vector<std::vector<double>> point_sets;
  double nu = 1.0;
  Grid audit;
};

struct HjConfig {
  HjConstantsConfig constants;
};

struct ExperimentConfig {
  std::string name;
  std::string text;
  std::optional<ModelSpec> model;
  std::vector<double> eps;
  InitialCondition initial;
  IntegratorConfig integrator;
  DiagnosticsToggles diagnostics;
  std::optional<ReplicatorConfig> replicator;
  std::optional<DiracConfig> dirac;
  HjConfig hj;
  std::filesystem::path output = "out";
  std::uint64_t seed = 1;
  std::size_t random_probes = 8;

  /// Model spec at one level of the eps ladder.
  ModelSpec spec_for(double eps) const;
  std::uint64_t hash() const;
};

/// JSON document; unknown keys raise UsageError naming the key path and line.
/// Profile table paths resolve against base_dir; output stays relative to the working directory.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace selmut
