#pragma once

#include <Eigen/SparseCore>
#include <memory>
#include <optional>

#include "cpsc/gluing.hpp"
#include "cpsc/modeline.hpp"

namespace cpsc {

// Weighted linear solves with the deficiency space W and the fixed-point
// corrector perturbing the approximate metric g_T to an exact CPSC metric.
//
// Increment fields v are conformal-factor increments relative to g_{c,T}
// (chart-independent scalars); operators act chart-wise through the
// conjugation with Omega onto the standard backgrounds.

// ---------------------------------------------------------------------------
// weights

struct WeightFunction {
  double delta = 0.5;                 // decay rate per unit t
  std::vector<DiscreteField> values;  // the weight function alpha per chart (>= 1)

  double alpha_pow(int chart, int i, int j, double expo) const {
    return std::pow(values[std::size_t(chart)](i, j), expo);
  }
};

// Admissible decay rate: below the j = 1 Floquet growth rate per unit t,
// delta_1(eps) / P_eps, of every summand.
double admissible_rate_bound(const GluedManifold& glued);

// Builds the weight: identically one on necks and on each body's core
// (all gluing features plus one period), growing like e^{sqrt(1+tau^2)-1}
// along the ends.  The exponent saturates at max_exponent: a few e-foldings
// suffice to pin the deficiency split, while uncapped weights amplify
// double-precision noise at the far ends beyond any residual target.
// Throws when delta is inadmissible, naming the summand.
WeightFunction weight(const GluedManifold& glued, double delta, double max_exponent = 8.0);

// ---------------------------------------------------------------------------
// deficiency space

struct DeficiencyEnd {
  int summand = 0;
  int end = +1;          // s -> +infinity (+1) or -infinity (-1)
  double s_cut = 0.0;    // center of the end cutoff
  double period = 0.0;
  bool degenerate = false;  // eps = ubar: parameter direction replaced
};

// W = span{chi phi_0^+, chi phi_0^-} per designated end, stored as global
// increment vectors scaled so that they are exactly the (a, b) derivatives
// of the end modification at 0.  l_fields carries the analytic image
// L(chi phi) = 2 chi' phi' + chi'' phi (conjugated), which is exactly
// supported in the cutoff collars because phi solves the mode equation.
struct DeficiencyBasis {
  std::vector<DeficiencyEnd> ends;
  std::vector<Eigen::VectorXd> fields;    // 2 per end: [a_0, b_0, a_1, b_1, ...]
  std::vector<Eigen::VectorXd> l_fields;  // analytic L applied to each field
  int dim() const { return int(fields.size()); }
};

struct CorrectorOptions {
  double delta = 0.5;
  double weight_cap = 8.0;  // saturation of the weight exponent
  int max_iterations = 60;
  double residual_target = 1e-8;
  int contraction_window = 3;
  bool newton = false;           // reassemble the linearization at each iterate
  double end_cutoff_offset = 2.0;  // cutoff center distance past the gluing point
  double end_cutoff_width = 1.0;
  unsigned seed = 12345;
};

DeficiencyBasis deficiency_basis(const GluedManifold& glued, const CorrectorOptions& opt = {});

// Monotone smooth reparameterizations of the end family:
//   tau_eps(a) = (P/2) tanh a,   d_eps(b) a logistic onto (-eps, ubar - eps)
// normalized to unit derivative at 0.
double end_translation(double period, double a);
double end_parameter_shift(Dimension n, double eps, double b);
// quarter-range trust region bounds for (a, b)
double trust_bound_a();
double trust_bound_b(Dimension n, double eps);

// The end-modified total background factor (b-relative): F0 with the
// designated-end profiles replaced beyond the cutoff by the reparameterized
// Delaunay family (for a degenerate summand, by the Fowler solution with
// perturbed initial data at the cutoff).  coefficients = (a_e, b_e) per
// end.  Throws outside the trust region.
std::vector<DiscreteField> end_modification(const GluedManifold& glued,
                                            const DeficiencyBasis& basis,
                                            const Eigen::VectorXd& coefficients);

// End modification together with the analytic residual of the blended
// profile (product-rule form, supported in the cutoff collars, exactly
// zero beyond them where the profile is an exact solution).
struct EndModification {
  std::vector<DiscreteField> F;
  Eigen::VectorXd f_mod;  // g_{c,T}-relative residual contribution
};
EndModification apply_end_modification(const GluedManifold& glued, const DeficiencyBasis& basis,
                                       const Eigen::VectorXd& coefficients);

// ---------------------------------------------------------------------------
// assembled operator

struct AssembledOperator {
  Eigen::SparseMatrix<double> L;   // unknown space; PDE + coupling + edge rows
  std::vector<char> row_kind;      // 0 = pde, 1 = coupling, 2 = edge
  Eigen::VectorXd volume;          // g_{c,T} volume per unknown
  Eigen::SparseMatrix<double> lap; // bare chart Laplacian rows (b-relative)
  Eigen::VectorXd omega;           // Omega per unknown
  Eigen::VectorXd pot0;            // -co R0 per unknown (chart background)
};

// Linearization of N_{g_{c,T}} at the total factor F (b-relative, per chart).
// Body rows use fourth-order length stencils where they fit.
AssembledOperator assemble_linearization(const GluedManifold& glued,
                                         const std::vector<DiscreteField>& F);

// vector <-> field conversions over the compressed unknown space
Eigen::VectorXd fields_to_vec(const GluedManifold& glued,
                              const std::vector<DiscreteField>& fields);
std::vector<DiscreteField> vec_to_fields(const GluedManifold& glued, const Eigen::VectorXd& v);

// Nonlinear residual of the defect-corrected discrete problem at increment v
// (g_{c,T}-relative) with end coefficients c:
//   R = Omega^{-crit} [N_h(F(c) + Omega v) - N_h(F0)] + f_T
// evaluated with the same discrete Laplacian as the assembled operator.
Eigen::VectorXd nonlinear_residual(const GluedManifold& glued, const AssembledOperator& op,
                                   const std::vector<DiscreteField>& f_T,
                                   const DeficiencyBasis& basis, const Eigen::VectorXd& v,
                                   const Eigen::VectorXd& coefficients);

// ---------------------------------------------------------------------------
// bordered solve

class BorderedSolver {
 public:
  BorderedSolver(const GluedManifold& glued, const AssembledOperator& op,
                 const DeficiencyBasis& basis, const WeightFunction& w);
  ~BorderedSolver();
  BorderedSolver(BorderedSolver&&) noexcept;
  BorderedSolver& operator=(BorderedSolver&&) noexcept;

  struct Result {
    Eigen::VectorXd v;       // minimal-weighted-norm representative
    Eigen::VectorXd coeffs;  // W components
    double linear_residual = 0.0;  // ||L(v+w) - f|| / ||f||
  };
  // Solves L(v + w) = f with w in W and v of minimal ||.||_{0,-delta} norm.
  Result solve(const Eigen::VectorXd& f) const;

  // Splits an increment into its minimal-norm part and W components.
  Result split(const Eigen::VectorXd& total) const;

  // weighted norms used throughout
  double norm_minus_delta(const Eigen::VectorXd& f) const;
  double solution_norm(const Result& r) const;

  double condition_hint() const;  // reciprocal pivot ratio from the factorization

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// ---------------------------------------------------------------------------
// diagnostics

struct KernelDiagnostic {
  int count = 0;                      // singular values below window * scale
  std::vector<double> sigmas;         // smallest singular values found
  double scale = 1.0;                 // operator norm estimate
  std::vector<Eigen::VectorXd> vectors;
};

// Near-kernel of the weighted conjugated operator alpha^{s} L alpha^{-s},
// s = sign_delta * delta; window is relative to the mass-term scale.
// With truncated ends the temperate family tangents appear here at small
// sigma: they are the directions the deficiency space absorbs.
KernelDiagnostic kernel_diagnostic(const GluedManifold& glued, const AssembledOperator& op,
                                   const WeightFunction& w, double sign_delta,
                                   double window = 1e-6, int howmany = 6,
                                   unsigned seed = 12345);

// Near-kernel of the deficiency-augmented (bordered) operator: the discrete
// counterpart of the nondegeneracy of L on H_{-delta} + W.
KernelDiagnostic kernel_diagnostic_bordered(const GluedManifold& glued,
                                            const AssembledOperator& op,
                                            const DeficiencyBasis& basis,
                                            const WeightFunction& w, double window = 1e-6,
                                            int howmany = 6, unsigned seed = 12345);

// The bordered matrix [L B; W^T D 0] shared by the solver and diagnostics.
Eigen::SparseMatrix<double> bordered_matrix(const GluedManifold& glued,
                                            const AssembledOperator& op,
                                            const DeficiencyBasis& basis,
                                            const WeightFunction& w);

// Pairing matrix M[k][w] = integral (L w) phi_k between a near-kernel basis
// and the deficiency fields, rows/columns scale-normalized; the smallest
// singular value is the surjectivity proxy.
struct PairingResult {
  Eigen::MatrixXd M;
  double smallest_singular_value = 0.0;
};
PairingResult deficiency_pairing(const std::vector<Eigen::VectorXd>& near_kernel,
                                 const DeficiencyBasis& basis, const AssembledOperator& op);

// Probe-based estimate of the bordered-inverse norm for each T in T_list.
struct InverseNormScan {
  std::vector<double> T;
  std::vector<double> norm_estimate;
  bool plateau = false;  // max/min <= 1.5
};
InverseNormScan right_inverse_norm_scan(const GluingConfig& config,
                                        const std::vector<double>& T_list,
                                        const CorrectorOptions& opt = {});

}  // namespace cpsc
