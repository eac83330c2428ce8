#pragma once

#include <iosfwd>
#include <vector>

#include "cpsc/types.hpp"

namespace cpsc {

// The Fowler ODE on the product cylinder R x S^{n-1},
//
//   u'' = ((n-2)^2/4) u - (n(n-2)/4) u^{(n+2)/(n-2)},
//
// whose positive bounded solutions are the conformal factors of the
// Delaunay metrics g_eps = u_eps^{4/(n-2)} (dt^2 + dtheta^2).

// Right-hand side u''(u).  Requires u > 0.
double fowler_rhs(Dimension n, double u);

// d/du of fowler_rhs, used by the mode analysis and Newton refinements.
double fowler_rhs_du(Dimension n, double u);

// The cylinder constant ubar = ((n-2)/n)^{(n-2)/4}: the unique positive
// fixed point of the ODE and the largest admissible Delaunay parameter.
double cylinder_constant(Dimension n);

// Potential V(u) = ((n-2)^2/4)(u^{2n/(n-2)} - u^2), so that
// H = (u')^2 + V(u) is conserved along solutions.
double fowler_potential(Dimension n, double u);
double fowler_potential_du(Dimension n, double u);

// Conserved energy H(u, u').  Requires u > 0.
double hamiltonian(Dimension n, double u, double up);

// The unique root u_max in [ubar, 1) of V(u_max) = V(eps); independent
// oracle for the maximum of an orbit.  At eps = ubar returns ubar.
double umax_from_energy(Dimension n, double eps);

// Inverts eps -> V(eps) on (0, ubar]:  given H = V(eps) returns eps.
// Used to read a Delaunay parameter off a measured energy.
double eps_from_energy(Dimension n, double H);

// The H = 0 homoclinic profile cosh(t - t0)^{-(n-2)/2} (round sphere
// of radius one in cylindrical coordinates).
double sphere_profile(Dimension n, double t, double t0);
double sphere_profile_deriv(Dimension n, double t, double t0);

struct OrbitSample {
  double t, u, up;
};

struct OrbitOptions {
  double tol = 1e-10;      // local integration error per unit t
  int samples = 2048;      // stored samples over one period
  double horizon = 0.0;    // 0 = automatic; otherwise search budget in t
};

// One period of a Delaunay solution, sampled on a uniform grid with both
// endpoints stored.  Immutable after construction; evaluation elsewhere is
// by periodic extension with cubic Hermite interpolation.
class DelaunayOrbit {
 public:
  DelaunayOrbit(Dimension n, double eps, double period, double energy, double u_max,
                std::vector<OrbitSample> samples, double tol, bool degenerate);

  Dimension dim() const { return n_; }
  double eps() const { return eps_; }
  double period() const { return period_; }
  double energy() const { return energy_; }
  double u_max() const { return u_max_; }
  double tol() const { return tol_; }
  bool degenerate() const { return degenerate_; }
  const std::vector<OrbitSample>& samples() const { return samples_; }

  // Periodic evaluation at arbitrary t (cubic Hermite between samples).
  double u(double t) const;
  double up(double t) const;
  // u'' from the ODE itself, exact in u(t).
  double upp(double t) const { return fowler_rhs(n_, u(t)); }

  // Largest relative energy drift over the stored samples.
  double energy_drift() const;

  void write_csv(std::ostream& os) const;        // columns t,u,up
  void write_json_header(std::ostream& os) const;

 private:
  Dimension n_;
  double eps_, period_, energy_, u_max_, tol_;
  bool degenerate_;
  std::vector<OrbitSample> samples_;
};

// Integrates the Fowler ODE from the neck minimum u(0) = eps, u'(0) = 0,
// detects the period from the first return to a minimum, and samples one
// period.  Throws std::domain_error for eps outside (0, ubar] and
// numeric_error if no period is found within the horizon budget.
DelaunayOrbit solve_orbit(Dimension n, double eps, const OrbitOptions& opt = {});
DelaunayOrbit solve_orbit(Dimension n, double eps, double horizon, double tol);

// Maximum |H(t) - H(0)| / |H(0)| along an integration over t_span.
// Diagnostic used by the energy-conservation gates.
double max_energy_drift(Dimension n, double eps, double t_span, double tol);

}  // namespace cpsc
