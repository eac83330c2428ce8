#pragma once

#include <complex>
#include <utility>
#include <vector>

#include "cpsc/fowler.hpp"

namespace cpsc {

// Mode-by-mode analysis of the linearized Yamabe operator on a Delaunay
// cylinder.  Separating variables on S^{n-1} with eigenvalue
// lambda_j = j(j+n-2) reduces the linearization to the Hill-type operators
//
//   L_j phi = phi'' - (lambda_j + (n-2)^2/4) phi + (n(n+2)/4) u_eps^{4/(n-2)} phi.

// Eigenvalue of -Laplace on S^{n-1} for spherical-harmonic degree j.
double sphere_eigenvalue(Dimension n, int j);

struct ModeSystem {
  const DelaunayOrbit* orbit;
  int j;
  double lambda;
  std::vector<double> potential;  // q(t) = (n(n+2)/4) u^{4/(n-2)} on the orbit grid

  // Coefficient m_j(t) in phi'' = m_j(t) phi, from the interpolated orbit.
  double coefficient(double t) const;
};

ModeSystem mode_operator(const DelaunayOrbit& orbit, int j);

struct FloquetResult {
  int j = 0;
  std::complex<double> multipliers[2];  // eigenvalues of the period monodromy matrix
  double delta = 0.0;                   // log of the largest multiplier magnitude (per period)
  bool oscillatory = false;             // multipliers on the unit circle
  double period = 0.0;
  double monodromy_trace = 0.0;
  double monodromy_det = 0.0;
};

// Floquet analysis of L_j via the monodromy matrix of the first-order
// 2x2 system over one period.  Requires eps < ubar; throws numeric_error
// when the predicted growth would overflow (delta > 50).
FloquetResult floquet(const DelaunayOrbit& orbit, int j);

// Largest deviation of the Wronskian of the fundamental system from its
// initial value along one period, scaled by the running solution size.
double wronskian_drift(const DelaunayOrbit& orbit, int j);

struct JacobiField {
  enum class Label { translation, parameter, explicit_plus, explicit_minus };
  Label label;
  int j = 0;
  bool degenerate = false;
  std::vector<OrbitSample> samples;  // (t, phi, phi')

  void write_csv(std::ostream& os) const;  // columns t,phi,phip
};

struct JacobiOptions {
  int samples_per_period = 16384;
  double periods = 1.0;  // sampled span in units of the orbit period
};

// phi_0^+ : the periodic translation field u_eps'(t), unit sup-norm.
// At eps = ubar the field vanishes identically and is flagged degenerate.
JacobiField jacobi_translation(const DelaunayOrbit& orbit, const JacobiOptions& opt = {});

// phi_0^- : the Delaunay-parameter field du/d(eps), from the variational
// equation with phi(0) = 1, phi'(0) = 0; grows linearly in t.  At eps = ubar
// reports the bounded constant-coefficient solution cos(sqrt(n-2) t).
JacobiField jacobi_parameter(const DelaunayOrbit& orbit, const JacobiOptions& opt = {});

// The explicit j = 1 fields  w_pm(t) = e^{pm t}((n-2)/2 u_eps pm u_eps').
JacobiField jacobi_explicit(const DelaunayOrbit& orbit, int sign, const JacobiOptions& opt = {});

// Indicial roots of the constant-coefficient mode operator at eps = ubar:
// pm sqrt(j(j+n-2) - (n-2)), imaginary when the radicand is negative.
std::pair<std::complex<double>, std::complex<double>> indicial_roots_cylinder(Dimension n, int j);

// The Fredholm-critical weights {delta_j} for j = 0..jmax, growth per
// period.  delta_0 = 0; strictly increasing for j >= 1.
std::vector<double> fredholm_weights(const DelaunayOrbit& orbit, int jmax);

// Largest eigenvalue of Delta_{S^n} + n on zonal functions of the geodesic
// cap of radius r, with Dirichlet boundary; equals the smallest-magnitude
// eigenvalue near the degeneracy and crosses zero exactly at r = pi/2.
double cap_kernel_eigenvalue(Dimension n, double r, int grid = 3000);

// Locates the zero crossing of cap_kernel_eigenvalue by bisection in r.
double cap_degeneracy_radius(Dimension n, double rtol = 1e-6, int grid = 3000);

// Zonal Dirichlet eigenpair closest to zero on the cap (for eigenfunction
// inspection); returns colatitude grid nodes and eigenfunction values.
std::pair<std::vector<double>, std::vector<double>> cap_kernel_eigenfunction(Dimension n, double r,
                                                                             int grid = 800);

// Shooting diagnostic for the half-cylinder: integrates L_j phi = 0 with
// phi(0) = 0, phi'(0) = 1 over the given span and returns the ratio of the
// final to initial phase-space norms.  Growth certifies that no nontrivial
// Dirichlet solution decays along the end.
double half_cylinder_dirichlet_growth(const DelaunayOrbit& orbit, int j, double t_span);

}  // namespace cpsc
