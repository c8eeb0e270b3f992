#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "selmut/bounds.hpp"
#include "selmut/grid.hpp"
#include "selmut/integrator.hpp"
#include "selmut/model.hpp"

namespace selmut {

/// Weighted squared fitness residual: int w (K0*n/rho - nu rho)^2 with
/// w = n (nM) or G_eps * n (ATH). Needs linear saturation.
double concentration_functional(const Model& model, const DensityState& n);

struct TraceRow {
  double t;
  double rho;
  double rho_dot;
  double rho_dot_neg;
  double bv_cum;
  double conc;
  double mean;
  double var;
  double max_u;
  double support;
};

struct RunTrace {
  double eps = 0.0;
  std::vector<TraceRow> rows;

  double final_bv() const { return rows.empty() ? 0.0 : rows.back().bv_cum; }
  /// Trapezoid integral of the concentration functional over the trace.
  double integrated_concentration() const;
  double initial_rho_dot_neg() const { return rows.empty() ? 0.0 : rows.front().rho_dot_neg; }
};

/// Step observer that accumulates a RunTrace; optionally forwards each row.
class TraceRecorder {
 public:
  explicit TraceRecorder(const Model& model, std::function<void(const TraceRow&)> sink = {});

  void operator()(const StepSample& s, const DensityState& n);
  const RunTrace& trace() const noexcept { return trace_; }
  RunTrace take() { return std::move(trace_); }

 private:
  const Model* model_;
  bool conc_supported_;
  std::function<void(const TraceRow&)> sink_;
  RunTrace trace_;
};

struct EnvelopeFit {
  double certified_rate = 0.0;  // in units of 1/eps
  double fitted_rate = 0.0;
  std::size_t fit_points = 0;
  double worst_ratio = 0.0;     // max observed / envelope
  bool pointwise_pass = true;
  bool rate_pass = true;
};

struct BvReport {
  std::string claim;
  double bound = 0.0;
  double observed = 0.0;
  bool pass = false;
  EnvelopeFit envelope;
  /// True when failure is attributable to a fitted constant rather than the bound itself.
  bool constant_suspect = false;
};

/// BV budget for the model family (nM, AF, ATH with linear saturation).
BvReport bv_budget(const RunTrace& trace, const BoundCertificate& cert, const Model& model, double slack = 1e-6);

/// Envelope (rho_dot)_-(t) <= D0 e^{-rate t/eps} + (c/rate)(1 - e^{-rate t/eps}), checked within 10%.
EnvelopeFit fit_envelope(const RunTrace& trace, double rate, double forcing = 0.0);

/// C2 for the ATH budget: twice the largest negative part of the remainder
/// (eps/2) rho'' - [-nu rho rho' - rho' I/(2 rho^2) + conc/eps] over the trace states.
double fit_ath_forcing(const Model& model, const Trajectory& tr);

struct DdrhoResidual {
  double lhs;
  double rhs;
  double residual;  // |lhs - rhs| / (|lhs| + sum of |terms|)
};

/// Second-derivative identity for rho: nM (eps/2 form) or AF (mixing form).
DdrhoResidual ddrho_identity_residual(const Model& model, const DensityState& n);

struct GeneralRDiagnostics {
  std::vector<double> zeta;
  double Q = 0.0;
  double C_f = 0.0;
  double net_fitness = 0.0;   // int q (zeta - R)
  double predicate_value = 0.0;
  bool predicate_applicable = false;
  bool predicate_pass = true;
  std::optional<bool> r1_condition;  // rho R1'(rho) >= R1(rho) on a ladder
};

GeneralRDiagnostics general_R_diagnostics(const Model& model, const DensityState& n);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  bool pass = false;
};

/// Least squares of log y against log x.
SlopeFit loglog_slope(const std::vector<double>& x, const std::vector<double>& y, double target = 1.0, double tol = 0.3);

}  // namespace selmut
