#include "cpsc/fowler.hpp"

#include <algorithm>
#include <array>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <limits>
#include <ostream>

namespace odeint = boost::numeric::odeint;

namespace cpsc {

namespace {

using State = std::array<double, 2>;
using Stepper = odeint::runge_kutta_fehlberg78<State>;

struct FowlerSystem {
  Dimension n;
  void operator()(const State& y, State& dy, double) const {
    dy[0] = y[1];
    dy[1] = fowler_rhs(n, y[0]);
  }
};

auto make_stepper(double tol) { return odeint::make_controlled<Stepper>(tol, tol); }

// Integrates the state from (t0, y0) to t1 with a fresh controlled stepper.
State advance(Dimension n, State y, double t0, double t1, double tol) {
  if (t1 == t0) return y;
  auto stepper = make_stepper(tol);
  odeint::integrate_adaptive(stepper, FowlerSystem{n}, y, t0, t1, 1e-3 * (t1 - t0));
  return y;
}

}  // namespace

double fowler_rhs(Dimension n, double u) {
  if (!(u > 0.0)) throw std::domain_error("fowler_rhs: u must be positive");
  const double a = 0.25 * double(n.n - 2) * double(n.n - 2);
  const double b = 0.25 * double(n.n) * double(n.n - 2);
  return a * u - b * std::pow(u, n.crit());
}

double fowler_rhs_du(Dimension n, double u) {
  if (!(u > 0.0)) throw std::domain_error("fowler_rhs_du: u must be positive");
  const double a = 0.25 * double(n.n - 2) * double(n.n - 2);
  const double b = 0.25 * double(n.n) * double(n.n + 2);
  return a - b * std::pow(u, n.cl());
}

double cylinder_constant(Dimension n) {
  return std::pow(double(n.n - 2) / double(n.n), 0.25 * double(n.n - 2));
}

double fowler_potential(Dimension n, double u) {
  const double a = 0.25 * double(n.n - 2) * double(n.n - 2);
  return a * (std::pow(u, 2.0 * n.n / double(n.n - 2)) - u * u);
}

double fowler_potential_du(Dimension n, double u) {
  const double a = 0.25 * double(n.n - 2) * double(n.n - 2);
  return a * (2.0 * n.n / double(n.n - 2) * std::pow(u, n.crit()) - 2.0 * u);
}

double hamiltonian(Dimension n, double u, double up) {
  if (!(u > 0.0)) throw std::domain_error("hamiltonian: u must be positive");
  return up * up + fowler_potential(n, u);
}

double umax_from_energy(Dimension n, double eps) {
  const double ubar = cylinder_constant(n);
  if (!(eps > 0.0) || eps > ubar * (1.0 + 1e-12))
    throw std::domain_error("umax_from_energy: eps outside (0, ubar]");
  if (eps >= ubar * (1.0 - 1e-14)) return ubar;
  const double target = fowler_potential(n, eps);
  // V is strictly decreasing on (0, ubar) and increasing on (ubar, 1) with
  // V(1) = 0 > target, so the upper root is bracketed by [ubar, 1].
  double lo = ubar, hi = 1.0;
  if (fowler_potential(n, hi) <= target) throw numeric_error("umax_from_energy: bracket failure");
  for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
    const double mid = 0.5 * (lo + hi);
    (fowler_potential(n, mid) <= target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double eps_from_energy(Dimension n, double H) {
  const double ubar = cylinder_constant(n);
  const double Hmin = fowler_potential(n, ubar);
  if (H < Hmin - 1e-12 || H > 0.0) throw std::domain_error("eps_from_energy: H outside [V(ubar), 0)");
  if (H <= Hmin) return ubar;
  double lo = 1e-300, hi = ubar;
  // V decreasing on (0, ubar): V(lo) ~ 0 >= H >= V(ubar).
  for (int it = 0; it < 200 && hi - lo > 1e-16 * (1.0 + hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (fowler_potential(n, mid) > H ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double sphere_profile(Dimension n, double t, double t0) {
  return std::pow(std::cosh(t - t0), -n.half_nm2());
}

double sphere_profile_deriv(Dimension n, double t, double t0) {
  const double c = std::cosh(t - t0);
  return -n.half_nm2() * std::pow(c, -n.half_nm2() - 1.0) * std::sinh(t - t0);
}

DelaunayOrbit::DelaunayOrbit(Dimension n, double eps, double period, double energy, double u_max,
                             std::vector<OrbitSample> samples, double tol, bool degenerate)
    : n_(n),
      eps_(eps),
      period_(period),
      energy_(energy),
      u_max_(u_max),
      tol_(tol),
      degenerate_(degenerate),
      samples_(std::move(samples)) {}

namespace {
// Cubic Hermite on [0,1] given endpoint values and scaled derivatives.
inline double hermite(double y0, double m0, double y1, double m1, double s) {
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * m0 + (-2 * s3 + 3 * s2) * y1 +
         (s3 - s2) * m1;
}
inline double hermite_deriv(double y0, double m0, double y1, double m1, double s) {
  const double s2 = s * s;
  return (6 * s2 - 6 * s) * y0 + (3 * s2 - 4 * s + 1) * m0 + (-6 * s2 + 6 * s) * y1 +
         (3 * s2 - 2 * s) * m1;
}
}  // namespace

double DelaunayOrbit::u(double t) const {
  if (degenerate_) return eps_;
  double s = std::fmod(t, period_);
  if (s < 0) s += period_;
  const double h = period_ / double(samples_.size() - 1);
  std::size_t i = std::min<std::size_t>(std::size_t(s / h), samples_.size() - 2);
  const double frac = (s - double(i) * h) / h;
  const auto& a = samples_[i];
  const auto& b = samples_[i + 1];
  return hermite(a.u, h * a.up, b.u, h * b.up, frac);
}

double DelaunayOrbit::up(double t) const {
  if (degenerate_) return 0.0;
  double s = std::fmod(t, period_);
  if (s < 0) s += period_;
  const double h = period_ / double(samples_.size() - 1);
  std::size_t i = std::min<std::size_t>(std::size_t(s / h), samples_.size() - 2);
  const double frac = (s - double(i) * h) / h;
  const auto& a = samples_[i];
  const auto& b = samples_[i + 1];
  return hermite_deriv(a.u, h * a.up, b.u, h * b.up, frac) / h;
}

double DelaunayOrbit::energy_drift() const {
  if (degenerate_) return 0.0;
  double worst = 0.0;
  for (const auto& s : samples_)
    worst = std::max(worst, std::abs(hamiltonian(n_, s.u, s.up) - energy_));
  return worst / std::abs(energy_);
}

void DelaunayOrbit::write_csv(std::ostream& os) const {
  os << "t,u,up\n";
  os.precision(17);
  for (const auto& s : samples_) os << s.t << ',' << s.u << ',' << s.up << '\n';
}

void DelaunayOrbit::write_json_header(std::ostream& os) const {
  os.precision(17);
  os << "{\"n\":" << n_.n << ",\"eps\":" << eps_ << ",\"period\":" << period_
     << ",\"energy\":" << energy_ << ",\"u_max\":" << u_max_ << ",\"tol\":" << tol_
     << ",\"degenerate\":" << (degenerate_ ? "true" : "false") << "}\n";
}

namespace {

// Locates the root of u'(t) inside [t0, t1] starting from state y0 at t0.
// Newton on u' (u'' from the ODE) with bisection safeguard.
double refine_crossing(Dimension n, const State& y0, double t0, double t1, double tol) {
  double lo = t0, hi = t1;
  double t = 0.5 * (lo + hi);
  const double sign_lo = advance(n, y0, t0, lo + 1e-15 * (hi - lo), tol)[1] >= 0 ? 1.0 : -1.0;
  for (int it = 0; it < 80; ++it) {
    State y = advance(n, y0, t0, t, tol);
    const double g = y[1];
    const double dg = fowler_rhs(n, y[0]);
    if (g * sign_lo > 0)
      lo = t;
    else
      hi = t;
    double tn = t - g / dg;
    if (!(tn > lo && tn < hi)) tn = 0.5 * (lo + hi);
    if (std::abs(tn - t) < 1e-13) return tn;
    t = tn;
  }
  return t;
}

}  // namespace

DelaunayOrbit solve_orbit(Dimension n, double eps, const OrbitOptions& opt) {
  const double ubar = cylinder_constant(n);
  if (!(eps > 0.0) || eps > ubar * (1.0 + 1e-12))
    throw std::domain_error("solve_orbit: eps outside (0, ubar]");
  const double lin_period = 2.0 * M_PI / std::sqrt(double(n.n - 2));

  if (eps >= ubar * (1.0 - 1e-13)) {
    // Degenerate cylinder solution: constant orbit, linearized period.
    std::vector<OrbitSample> samples(std::size_t(opt.samples) + 1);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double t = lin_period * double(i) / double(opt.samples);
      samples[i] = {t, ubar, 0.0};
    }
    return DelaunayOrbit(n, ubar, lin_period, hamiltonian(n, ubar, 0.0), ubar,
                         std::move(samples), opt.tol, true);
  }

  const double tol = opt.tol;
  double horizon = opt.horizon > 0 ? opt.horizon
                                   : 4.0 * (lin_period + 4.0 / double(n.n - 2) * std::log(1.0 / eps));

  // March with the controlled stepper watching for sign changes of u'.
  // The first - to + crossing after t = 0 is the period; the + to -
  // crossing before it gives u_max.
  auto stepper = make_stepper(tol);
  FowlerSystem sys{n};
  State y{eps, 0.0};
  double t = 0.0, dt = 1e-3;
  double period = -1.0, u_max = -1.0;
  while (t < horizon) {
    State y_prev = y;
    double t_prev = t;
    auto res = stepper.try_step(sys, y, t, dt);
    if (res == odeint::fail) continue;
    if (y_prev[1] > 0.0 && y[1] <= 0.0) {
      const double tc = refine_crossing(n, y_prev, t_prev, t, tol);
      u_max = advance(n, y_prev, t_prev, tc, tol)[0];
    } else if (y_prev[1] < 0.0 && y[1] >= 0.0) {
      period = refine_crossing(n, y_prev, t_prev, t, tol);
      break;
    }
  }
  if (period <= 0.0 || u_max <= 0.0)
    throw numeric_error("solve_orbit: no period detected within horizon budget");

  // Resample one period on the uniform output grid.
  std::vector<OrbitSample> samples;
  samples.reserve(std::size_t(opt.samples) + 1);
  {
    State ys{eps, 0.0};
    auto obs = [&](const State& s, double ts) { samples.push_back({ts, s[0], s[1]}); };
    auto st = make_stepper(tol);
    odeint::integrate_const(st, sys, ys, 0.0, period * (1.0 + 1e-15), period / double(opt.samples),
                            obs);
  }
  if (samples.size() == std::size_t(opt.samples)) {
    // integrate_const may drop the final observation to rounding; close the period.
    State ye = advance(n, {eps, 0.0}, 0.0, period, tol);
    samples.push_back({period, ye[0], ye[1]});
  }
  samples.back().t = period;

  return DelaunayOrbit(n, eps, period, hamiltonian(n, eps, 0.0), u_max, std::move(samples), tol,
                       false);
}

DelaunayOrbit solve_orbit(Dimension n, double eps, double horizon, double tol) {
  OrbitOptions opt;
  opt.tol = tol;
  opt.horizon = horizon;
  return solve_orbit(n, eps, opt);
}

double max_energy_drift(Dimension n, double eps, double t_span, double tol) {
  const double H0 = hamiltonian(n, eps, 0.0);
  State y{eps, 0.0};
  double worst = 0.0;
  auto obs = [&](const State& s, double) {
    worst = std::max(worst, std::abs(hamiltonian(n, s[0], s[1]) - H0));
  };
  auto st = make_stepper(tol);
  odeint::integrate_adaptive(st, FowlerSystem{n}, y, 0.0, t_span, 1e-3, obs);
  return worst / std::abs(H0);
}

}  // namespace cpsc
