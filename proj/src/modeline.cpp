#include "cpsc/modeline.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <ostream>

namespace odeint = boost::numeric::odeint;

namespace cpsc {

namespace {

// Augmented state (u, u', phi1, phi1', phi2, phi2'): the orbit and two
// columns of the fundamental system integrated together, so the mode
// coefficients are exactly consistent with the orbit.
using State6 = std::array<double, 6>;
using Stepper6 = odeint::runge_kutta_fehlberg78<State6>;

struct ModeSystem6 {
  Dimension n;
  double mu;  // lambda_j + (n-2)^2/4
  void operator()(const State6& y, State6& dy, double) const {
    const double q = 0.25 * n.n * (n.n + 2) * std::pow(y[0], n.cl());
    dy[0] = y[1];
    dy[1] = fowler_rhs(n, y[0]);
    dy[2] = y[3];
    dy[3] = (mu - q) * y[2];
    dy[4] = y[5];
    dy[5] = (mu - q) * y[4];
  }
};

double mode_mu(const DelaunayOrbit& orbit, int j) {
  const Dimension n = orbit.dim();
  return sphere_eigenvalue(n, j) + 0.25 * double(n.n - 2) * double(n.n - 2);
}

// Fresh integration of the orbit at the requested sampling resolution.
// Fields built from these states can be second-differenced without
// inheriting interpolation noise from the orbit storage grid.
std::vector<OrbitSample> sample_orbit_states(const DelaunayOrbit& orbit, double span,
                                             std::size_t count) {
  const Dimension n = orbit.dim();
  using State2 = std::array<double, 2>;
  struct Sys {
    Dimension n;
    void operator()(const State2& y, State2& dy, double) const {
      dy[0] = y[1];
      dy[1] = fowler_rhs(n, y[0]);
    }
  };
  std::vector<OrbitSample> out;
  out.reserve(count + 1);
  State2 y{orbit.eps(), 0.0};
  auto obs = [&](const State2& s, double t) { out.push_back({t, s[0], s[1]}); };
  auto st = odeint::make_controlled<odeint::runge_kutta_fehlberg78<State2>>(1e-12, 1e-12);
  odeint::integrate_const(st, Sys{n}, y, 0.0, span * (1.0 + 1e-15), span / double(count), obs);
  while (out.size() < count + 1) {
    // integrate_const may drop the final observation to rounding
    State2 ye = y;
    out.push_back({span, ye[0], ye[1]});
  }
  return out;
}

std::vector<OrbitSample> integrate_mode(const DelaunayOrbit& orbit, double mu, double phi0,
                                        double phip0, double span, std::size_t count) {
  const Dimension n = orbit.dim();
  using State4 = std::array<double, 4>;
  struct Sys {
    Dimension n;
    double mu;
    void operator()(const State4& y, State4& dy, double) const {
      const double q = 0.25 * n.n * (n.n + 2) * std::pow(y[0], n.cl());
      dy[0] = y[1];
      dy[1] = fowler_rhs(n, y[0]);
      dy[2] = y[3];
      dy[3] = (mu - q) * y[2];
    }
  };
  std::vector<OrbitSample> out;
  out.reserve(count + 1);
  State4 y{orbit.eps(), 0.0, phi0, phip0};
  auto obs = [&](const State4& s, double t) { out.push_back({t, s[2], s[3]}); };
  auto st = odeint::make_controlled<odeint::runge_kutta_fehlberg78<State4>>(1e-12, 1e-12);
  odeint::integrate_const(st, Sys{n, mu}, y, 0.0, span * (1.0 + 1e-15), span / double(count), obs);
  while (out.size() < count + 1) out.push_back({span, y[2], y[3]});
  return out;
}

}  // namespace

double sphere_eigenvalue(Dimension n, int j) {
  if (j < 0) throw std::domain_error("sphere_eigenvalue: j must be >= 0");
  return double(j) * double(j + n.n - 2);
}

double ModeSystem::coefficient(double t) const {
  const Dimension n = orbit->dim();
  const double q = 0.25 * n.n * (n.n + 2) * std::pow(orbit->u(t), n.cl());
  return lambda + 0.25 * double(n.n - 2) * double(n.n - 2) - q;
}

ModeSystem mode_operator(const DelaunayOrbit& orbit, int j) {
  ModeSystem m;
  m.orbit = &orbit;
  m.j = j;
  m.lambda = sphere_eigenvalue(orbit.dim(), j);
  const Dimension n = orbit.dim();
  m.potential.reserve(orbit.samples().size());
  for (const auto& s : orbit.samples())
    m.potential.push_back(0.25 * n.n * (n.n + 2) * std::pow(s.u, n.cl()));
  return m;
}

FloquetResult floquet(const DelaunayOrbit& orbit, int j) {
  const Dimension n = orbit.dim();
  if (orbit.degenerate())
    throw std::domain_error("floquet: eps = ubar is degenerate; use indicial_roots_cylinder");
  const double P = orbit.period();
  const double mu = mode_mu(orbit, j);

  // Sturm bound on the growth rate; refuse hopeless overflow up front.
  const double qmin = 0.25 * n.n * (n.n + 2) * std::pow(orbit.eps(), n.cl());
  const double rate_bound = std::sqrt(std::max(0.0, mu - qmin));
  if (rate_bound * P > 50.0)
    throw numeric_error("floquet: growth exceeds the overflow guard (delta > 50)");

  ModeSystem6 sys{n, mu};
  State6 y{orbit.eps(), 0.0, 1.0, 0.0, 0.0, 1.0};
  auto stepper = odeint::make_controlled<Stepper6>(1e-12, 1e-12);
  odeint::integrate_adaptive(stepper, sys, y, 0.0, P, 1e-4);

  // Monodromy matrix columns (phi1, phi2).
  const double a = y[2], c = y[3], b = y[4], d = y[5];
  FloquetResult r;
  r.j = j;
  r.period = P;
  r.monodromy_trace = a + d;
  r.monodromy_det = a * d - b * c;  // Wronskian: should be 1

  // Multipliers lie on the unit circle exactly when tr^2 <= 4 det.  The
  // discriminant is the well-conditioned classifier; at the j = 0 Jordan
  // point the multiplier magnitudes themselves see its square root.
  const double disc = r.monodromy_trace * r.monodromy_trace - 4.0 * r.monodromy_det;
  r.oscillatory = disc <= 4.0 * std::abs(r.monodromy_det) * 1e-6;
  const std::complex<double> tr(r.monodromy_trace, 0.0);
  const std::complex<double> sq = std::sqrt(tr * tr - 4.0 * r.monodromy_det);
  r.multipliers[0] = 0.5 * (tr + sq);
  r.multipliers[1] = 0.5 * (tr - sq);
  if (r.oscillatory) {
    r.delta = 0.0;
  } else {
    r.delta = std::log(std::max(std::abs(r.multipliers[0]), std::abs(r.multipliers[1])));
    if (r.delta > 50.0) throw numeric_error("floquet: delta exceeds the overflow guard");
  }
  return r;
}

double wronskian_drift(const DelaunayOrbit& orbit, int j) {
  const Dimension n = orbit.dim();
  ModeSystem6 sys{n, mode_mu(orbit, j)};
  State6 y{orbit.eps(), 0.0, 1.0, 0.0, 0.0, 1.0};
  double worst = 0.0;
  auto obs = [&](const State6& s, double) {
    const double w = s[2] * s[5] - s[4] * s[3];
    const double scale = std::hypot(s[2], s[3]) * std::hypot(s[4], s[5]);
    worst = std::max(worst, std::abs(w - 1.0) / std::max(1.0, scale));
  };
  auto st = odeint::make_controlled<Stepper6>(1e-12, 1e-12);
  odeint::integrate_adaptive(st, sys, y, 0.0, orbit.period(), 1e-4, obs);
  return worst;
}

void JacobiField::write_csv(std::ostream& os) const {
  os << "t,phi,phip\n";
  os.precision(17);
  for (const auto& s : samples) os << s.t << ',' << s.u << ',' << s.up << '\n';
}

JacobiField jacobi_translation(const DelaunayOrbit& orbit, const JacobiOptions& opt) {
  JacobiField f;
  f.label = JacobiField::Label::translation;
  f.j = 0;
  const Dimension n = orbit.dim();
  const std::size_t count = std::size_t(opt.samples_per_period * opt.periods);
  const double span = opt.periods * orbit.period();
  if (orbit.degenerate()) {
    f.degenerate = true;
    for (std::size_t i = 0; i <= count; ++i)
      f.samples.push_back({span * double(i) / double(count), 0.0, 0.0});
    return f;
  }
  // phi = u' and phi' = u'' from the ODE; normalize to unit sup norm.
  auto states = sample_orbit_states(orbit, span, count);
  double norm = 0.0;
  for (const auto& s : states) norm = std::max(norm, std::abs(s.up));
  for (const auto& s : states) f.samples.push_back({s.t, s.up / norm, fowler_rhs(n, s.u) / norm});
  return f;
}

JacobiField jacobi_parameter(const DelaunayOrbit& orbit, const JacobiOptions& opt) {
  JacobiField f;
  f.label = JacobiField::Label::parameter;
  f.j = 0;
  const Dimension n = orbit.dim();
  const std::size_t count = std::size_t(opt.samples_per_period * opt.periods);
  const double span = opt.periods * orbit.period();
  if (orbit.degenerate()) {
    f.degenerate = true;
    const double w = std::sqrt(double(n.n - 2));
    for (std::size_t i = 0; i <= count; ++i) {
      const double t = span * double(i) / double(count);
      f.samples.push_back({t, std::cos(w * t), -w * std::sin(w * t)});
    }
    return f;
  }
  f.samples = integrate_mode(orbit, mode_mu(orbit, 0), 1.0, 0.0, span, count);
  return f;
}

JacobiField jacobi_explicit(const DelaunayOrbit& orbit, int sign, const JacobiOptions& opt) {
  if (sign != 1 && sign != -1) throw std::domain_error("jacobi_explicit: sign must be +-1");
  JacobiField f;
  f.label = sign > 0 ? JacobiField::Label::explicit_plus : JacobiField::Label::explicit_minus;
  f.j = 1;
  const Dimension n = orbit.dim();
  const double k = n.half_nm2();
  const std::size_t count = std::size_t(opt.samples_per_period * opt.periods);
  const double span = opt.periods * orbit.period();
  auto states = sample_orbit_states(orbit, span, count);
  for (const auto& s : states) {
    const double e = std::exp(sign * s.t);
    const double upp = fowler_rhs(n, s.u);
    const double w = e * (k * s.u + sign * s.up);
    const double wp = sign * w + e * (k * s.up + sign * upp);
    f.samples.push_back({s.t, w, wp});
  }
  return f;
}

std::pair<std::complex<double>, std::complex<double>> indicial_roots_cylinder(Dimension n, int j) {
  const std::complex<double> rad(sphere_eigenvalue(n, j) - double(n.n - 2), 0.0);
  const auto root = std::sqrt(rad);
  return {root, -root};
}

std::vector<double> fredholm_weights(const DelaunayOrbit& orbit, int jmax) {
  if (jmax < 1) throw std::domain_error("fredholm_weights: jmax must be >= 1");
  std::vector<double> deltas;
  deltas.push_back(0.0);  // delta_0 = 0 by the Jordan structure of the j=0 mode
  for (int j = 1; j <= jmax; ++j) deltas.push_back(floquet(orbit, j).delta);
  return deltas;
}

namespace {

// Node-centered symmetric tridiagonal discretization of
// f -> (1/S)(S f')' + n f on (0, r), S = sin^{n-1}, with the exact pole
// limit n f''(0) at rho = 0 and a Dirichlet node at rho = r (dropped).
// Returns the symmetrized matrix and the similarity weights.
void cap_tridiagonal(Dimension n, double r, int m, Eigen::VectorXd& diag, Eigen::VectorXd& off,
                     Eigen::VectorXd& weights) {
  const double h = r / m;
  auto S = [&](double rho) { return std::pow(std::sin(rho), double(n.n - 1)); };
  diag.resize(m);
  off.resize(m - 1);
  weights.resize(m);
  weights[0] = S(0.5 * h) / (2.0 * n.n);
  for (int i = 1; i < m; ++i) weights[i] = S(i * h);
  diag[0] = -2.0 * n.n / (h * h) + double(n.n);
  off[0] = (2.0 * n.n / (h * h)) * std::sqrt(weights[0] / weights[1]);
  for (int i = 1; i < m; ++i) {
    const double Sp = S((i + 0.5) * h);
    const double Sm = S((i - 0.5) * h);
    diag[i] = -(Sp + Sm) / (h * h * weights[i]) + double(n.n);
    if (i < m - 1) off[i] = Sp / (h * h * std::sqrt(weights[i] * weights[i + 1]));
  }
}

}  // namespace

double cap_kernel_eigenvalue(Dimension n, double r, int grid) {
  if (!(r > 0.0) || !(r < M_PI)) throw std::domain_error("cap_kernel_eigenvalue: r outside (0, pi)");
  Eigen::VectorXd diag, off, w;
  cap_tridiagonal(n, r, grid, diag, off, w);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, off, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw numeric_error("cap_kernel_eigenvalue: eigensolve failed");
  return es.eigenvalues().maxCoeff();
}

double cap_degeneracy_radius(Dimension n, double rtol, int grid) {
  double lo = 1.2, hi = 1.9;
  double flo = cap_kernel_eigenvalue(n, lo, grid);
  double fhi = cap_kernel_eigenvalue(n, hi, grid);
  if (flo * fhi >= 0.0) throw numeric_error("cap_degeneracy_radius: crossing not bracketed");
  while (hi - lo > rtol * 0.25) {
    const double mid = 0.5 * (lo + hi);
    const double fm = cap_kernel_eigenvalue(n, mid, grid);
    if (fm * flo <= 0.0) {
      hi = mid;
      fhi = fm;
    } else {
      lo = mid;
      flo = fm;
    }
  }
  return 0.5 * (lo + hi);
}

std::pair<std::vector<double>, std::vector<double>> cap_kernel_eigenfunction(Dimension n, double r,
                                                                             int grid) {
  Eigen::VectorXd diag, off, w;
  cap_tridiagonal(n, r, grid, diag, off, w);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, off, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success)
    throw numeric_error("cap_kernel_eigenfunction: eigensolve failed");
  int best = 0;
  for (int i = 1; i < es.eigenvalues().size(); ++i)
    if (std::abs(es.eigenvalues()[i]) < std::abs(es.eigenvalues()[best])) best = i;
  const double h = r / grid;
  std::vector<double> rho(grid), f(grid);
  for (int i = 0; i < grid; ++i) {
    rho[i] = i * h;
    // undo the symmetrizing similarity transform
    f[i] = es.eigenvectors()(i, best) / std::sqrt(w[i]);
  }
  return {rho, f};
}

double half_cylinder_dirichlet_growth(const DelaunayOrbit& orbit, int j, double t_span) {
  const double P = orbit.period();
  const std::size_t per = 64;
  const std::size_t count = std::size_t(per * t_span / P);
  auto field = integrate_mode(orbit, mode_mu(orbit, j), 0.0, 1.0, t_span, count);
  auto window_sup = [&](std::size_t lo, std::size_t hi) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi && i < field.size(); ++i)
      s = std::max(s, std::hypot(field[i].u, field[i].up));
    return s;
  };
  const double first = window_sup(0, per);
  const double last = window_sup(field.size() - per, field.size());
  return last / first;
}

}  // namespace cpsc
