#pragma once

#include <optional>
#include <string>

#include "cpsc/corrector.hpp"

namespace cpsc {

struct IterationRecord {
  int k = 0;
  double residual = 0.0;   // ||N(u_T + v)||_{0,-delta}
  double increment = 0.0;  // weighted norm of the update
  double ratio = 0.0;      // increment contraction ratio
};

struct EndParameterEstimate {
  int summand = 0;
  int end = +1;
  double eps_prescribed = 0.0;
  double eps_hat = 0.0;
  double width = 0.0;  // fit confidence width
  bool deficiency = false;
  bool cylindrical = false;
  bool degenerate = false;
};

struct SolveReport {
  bool converged = false;
  int exit_code = 2;  // 0 converged, 2 numerical failure, 3 config error
  std::string message;
  double delta = 0.0;
  int thread_count = 1;
  std::vector<IterationRecord> iterations;
  double final_residual = 0.0;
  double contraction_ratio = 0.0;  // max ratio past the burn-in
  double curvature_defect_sup = 0.0;
  Eigen::VectorXd coefficients;  // (a, b) per deficiency end
  std::vector<EndParameterEstimate> end_parameters;
  int kernel_count = -1;
  double kernel_scale = 0.0;
  std::optional<double> L_end_sensitivity;

  // final data for artifacts
  std::vector<DiscreteField> final_factor;  // total factor per chart (background-relative)
  std::vector<DiscreteField> correction;    // increment v per chart (g_{c,T}-relative)
};

// Fixed-point corrector  v <- -G_T (f_T + Q_T(v))  run to the residual
// target, followed by certification: the scalar-curvature defect measured
// with fourth-order stencils, end Delaunay parameters, and the near-kernel
// count at the solution.
SolveReport contraction_solve(const GluedManifold& glued, const CorrectorOptions& opt = {});

// Reads the asymptotic Delaunay parameter off one end of a body chart by
// fitting the (eps, phase) orbit family to the zonal average of the factor
// over the last full period before the truncation boundary.
EndParameterEstimate end_parameter_estimate(const GluedManifold& glued,
                                            const std::vector<DiscreteField>& total_factor,
                                            int summand, int end);

// sup over the first body's weight core of the factor change between two
// solves (the correction tracked by the iterated-gluing schedule)
double first_body_correction(const GluedManifold& glued, const SolveReport& report);

struct ScheduleStep {
  int junction = 0;
  double T = 0.0;
  double correction = 0.0;  // measured on the first-body window
  double bound = 0.0;       // 2^{-k-2}
};

struct ScheduleResult {
  std::vector<ScheduleStep> steps;
  bool satisfied = false;
  std::vector<SolveReport> reports;  // one per prefix chain (N = 2, 3, ...)
};

// Chooses neck parameters for an iterated chain left to right: for the k-th
// gluing the smallest candidate T whose solved correction on the fixed
// first-body window stays below 2^{-k-2}.
ScheduleResult chain_schedule_search(Dimension n, const std::vector<SummandSpec>& summands,
                                     const GridSpec& grids,
                                     const std::vector<double>& T_candidates,
                                     const CorrectorOptions& opt = {});

}  // namespace cpsc
