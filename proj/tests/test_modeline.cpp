#include "cpsc/modeline.hpp"

#include <cmath>

#include "doctest.h"

using namespace cpsc;

namespace {

const Dimension n3{3};
const Dimension n4{4};

// Independent residual oracle: second differences of the sampled field
// against the mode ODE phi'' = m(t) phi.  Returns sup|residual| / sup|phi|.
double mode_residual(const DelaunayOrbit& orbit, int j, const JacobiField& f) {
  auto sys = mode_operator(orbit, j);
  const double h = f.samples[1].t - f.samples[0].t;
  double rmax = 0.0, fmax = 0.0;
  for (std::size_t i = 1; i + 1 < f.samples.size(); ++i) {
    const double dd =
        (f.samples[i + 1].u - 2.0 * f.samples[i].u + f.samples[i - 1].u) / (h * h);
    rmax = std::max(rmax, std::abs(dd - sys.coefficient(f.samples[i].t) * f.samples[i].u));
    fmax = std::max(fmax, std::abs(f.samples[i].u));
  }
  return rmax / fmax;
}

double linear_fit_r2(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t m = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const double icpt = (sy - slope * sx) / m;
  double ssr = 0, sst = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double e = y[i] - (icpt + slope * x[i]);
    ssr += e * e;
    const double d = y[i] - sy / m;
    sst += d * d;
  }
  return 1.0 - ssr / sst;
}

}  // namespace

TEST_CASE("mode operator coefficients") {
  CHECK(sphere_eigenvalue(n3, 0) == 0.0);
  CHECK(sphere_eigenvalue(n3, 1) == 2.0);   // n - 1
  CHECK(sphere_eigenvalue(n3, 2) == 6.0);
  CHECK(sphere_eigenvalue(n4, 1) == 3.0);

  // At eps = ubar the mode ODE has constant coefficients:
  // j=0: phi'' + (n-2) phi = 0, j=1: phi'' = phi.
  auto cyl = solve_orbit(n3, cylinder_constant(n3));
  auto m0 = mode_operator(cyl, 0);
  auto m1 = mode_operator(cyl, 1);
  CHECK(m0.coefficient(0.7) == doctest::Approx(-(n3.n - 2)).epsilon(1e-12));
  CHECK(m1.coefficient(0.2) == doctest::Approx(1.0).epsilon(1e-12));

  // the potential is positive and periodic
  auto orbit = solve_orbit(n3, 0.3);
  auto ms = mode_operator(orbit, 2);
  CHECK(ms.lambda == 6.0);
  for (double q : ms.potential) CHECK(q > 0.0);
  CHECK(ms.potential.front() == doctest::Approx(ms.potential.back()).epsilon(1e-9));
}

TEST_CASE("translation field: periodic kernel of L_0") {
  auto orbit = solve_orbit(n3, 0.3);
  auto f = jacobi_translation(orbit);
  CHECK(!f.degenerate);
  CHECK(mode_residual(orbit, 0, f) < 1e-6);
  // periodicity and zeros at the extrema of u
  CHECK(f.samples.front().u == doctest::Approx(f.samples.back().u).epsilon(1e-9));
  CHECK(std::abs(f.samples.front().u) < 1e-12);  // minimum at t=0
  double sup = 0.0;
  for (const auto& s : f.samples) sup = std::max(sup, std::abs(s.u));
  CHECK(sup == doctest::Approx(1.0).epsilon(1e-12));

  auto cyl = solve_orbit(n3, cylinder_constant(n3));
  CHECK(jacobi_translation(cyl).degenerate);
}

TEST_CASE("parameter field: variational equation and linear growth") {
  auto orbit = solve_orbit(n3, 0.3);
  JacobiOptions opt;
  opt.periods = 11.0;
  opt.samples_per_period = 2048;
  auto f = jacobi_parameter(orbit, opt);
  CHECK(f.samples.front().u == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(f.samples.front().up == doctest::Approx(0.0).epsilon(1e-14));

  // central-difference oracle against re-solved orbits, compared at the
  // exact sample times
  const double h = 1e-5;
  auto op = solve_orbit(n3, 0.3 + h);
  auto om = solve_orbit(n3, 0.3 - h);
  for (std::size_t i : {200u, 900u, 1700u}) {
    const auto& s = f.samples[i];
    const double fd = (op.u(s.t) - om.u(s.t)) / (2.0 * h);
    CHECK(s.u == doctest::Approx(fd).epsilon(2e-5));
  }

  // |phi| sampled once per period off the symmetry axis grows affinely in k
  auto value_at = [&](double t) {
    const double span = orbit.period() * opt.periods;
    const auto idx = std::size_t(std::lround(t / span * double(f.samples.size() - 1)));
    return f.samples[idx].u;
  };
  std::vector<double> ks, vals;
  for (int k = 1; k <= 10; ++k) {
    ks.push_back(k);
    vals.push_back(std::abs(value_at((k + 0.25) * orbit.period())));
  }
  CHECK(linear_fit_r2(ks, vals) > 0.999);

  auto cyl = solve_orbit(n3, cylinder_constant(n3));
  auto fc = jacobi_parameter(cyl);
  CHECK(fc.degenerate);
  CHECK(fc.samples.front().u == doctest::Approx(1.0));
}

TEST_CASE("parameter field residual") {
  auto orbit = solve_orbit(n3, 0.3);
  auto f = jacobi_parameter(orbit);
  CHECK(mode_residual(orbit, 0, f) < 1e-6);
}

TEST_CASE("explicit j=1 fields solve L_1 to grid tolerance") {
  auto orbit = solve_orbit(n3, 0.3);
  JacobiOptions opt;
  opt.periods = 2.0;
  for (int sign : {+1, -1}) {
    auto f = jacobi_explicit(orbit, sign, opt);
    CHECK(mode_residual(orbit, 1, f) < 1e-6);
    // log|w| - (sign t) stays bounded: periodic remainder
    double lo = 1e300, hi = -1e300;
    for (const auto& s : f.samples) {
      if (std::abs(s.u) < 1e-12) continue;
      const double rem = std::log(std::abs(s.u)) - sign * s.t;
      lo = std::min(lo, rem);
      hi = std::max(hi, rem);
    }
    CHECK(hi - lo < 3.0);
  }

  // at the cylinder the field is exactly ((n-2)/2) ubar e^{+-t}
  auto cyl = solve_orbit(n4, cylinder_constant(n4));
  auto f = jacobi_explicit(cyl, +1);
  const double k = 1.0;  // (n-2)/2 for n=4
  for (std::size_t i = 0; i < f.samples.size(); i += 999) {
    const auto& s = f.samples[i];
    CHECK(s.u == doctest::Approx(k * cylinder_constant(n4) * std::exp(s.t)).epsilon(1e-10));
  }
}

TEST_CASE("jacobi residuals refine at second order") {
  auto orbit = solve_orbit(n3, 0.4);
  JacobiOptions coarse, fine;
  coarse.samples_per_period = 1024;
  fine.samples_per_period = 2048;
  for (int which = 0; which < 3; ++which) {
    auto make = [&](const JacobiOptions& o) {
      if (which == 0) return jacobi_translation(orbit, o);
      if (which == 1) return jacobi_parameter(orbit, o);
      return jacobi_explicit(orbit, +1, o);
    };
    const int j = which == 2 ? 1 : 0;
    const double rc = mode_residual(orbit, j, make(coarse));
    const double rf = mode_residual(orbit, j, make(fine));
    CHECK(rc / rf > 3.5);
    CHECK(rc / rf < 4.5);
  }
}

TEST_CASE("floquet: j=1 growth equals the period") {
  for (int n : {3, 4}) {
    for (double eps : {0.1, 0.3, 0.5, 0.99 * cylinder_constant(Dimension{n})}) {
      auto orbit = solve_orbit(Dimension{n}, eps);
      auto r = floquet(orbit, 1);
      CHECK(std::abs(r.delta - orbit.period()) / orbit.period() < 1e-6);
    }
  }
}

TEST_CASE("floquet: j=0 is a Jordan block at multiplier one") {
  auto orbit = solve_orbit(n3, 0.3);
  auto r = floquet(orbit, 0);
  CHECK(std::abs(r.monodromy_trace - 2.0) < 1e-6);
  CHECK(std::abs(r.monodromy_det - 1.0) < 1e-8);
  CHECK(r.delta == 0.0);
}

TEST_CASE("floquet: Sturm comparison bracket for large j") {
  auto orbit = solve_orbit(n3, 0.3);
  const int j = 4;
  const double mu = sphere_eigenvalue(n3, j) + 0.25;
  const double qmin = 0.25 * 15.0 * std::pow(orbit.eps(), 4.0);
  const double qmax = 0.25 * 15.0 * std::pow(orbit.u_max(), 4.0);
  auto r = floquet(orbit, j);
  const double rate = r.delta / orbit.period();
  CHECK(rate >= std::sqrt(mu - qmax) - 1e-6);
  CHECK(rate <= std::sqrt(mu - qmin) + 1e-6);
}

TEST_CASE("floquet rejects the degenerate orbit and guards overflow") {
  auto cyl = solve_orbit(n3, cylinder_constant(n3));
  CHECK_THROWS_AS(floquet(cyl, 1), std::domain_error);
  auto orbit = solve_orbit(n3, 0.01);  // long period
  CHECK_THROWS_AS(floquet(orbit, 12), numeric_error);
}

TEST_CASE("indicial roots at the cylinder") {
  for (int n : {3, 4, 5, 6}) {
    auto [rp, rm] = indicial_roots_cylinder(Dimension{n}, 1);
    CHECK(std::abs(rp - std::complex<double>(1.0, 0.0)) < 1e-10);
    CHECK(std::abs(rm - std::complex<double>(-1.0, 0.0)) < 1e-10);
    auto [ip, im] = indicial_roots_cylinder(Dimension{n}, 0);
    CHECK(std::abs(ip - std::complex<double>(0.0, std::sqrt(double(n - 2)))) < 1e-12);
  }
  auto [p2, m2] = indicial_roots_cylinder(n3, 2);
  CHECK(p2.real() == doctest::Approx(std::sqrt(5.0)).epsilon(1e-12));
}

TEST_CASE("fredholm weights: zero, period, monotone") {
  auto orbit = solve_orbit(n3, 0.3);
  auto d = fredholm_weights(orbit, 4);
  CHECK(d[0] == 0.0);
  CHECK(d[1] == doctest::Approx(orbit.period()).epsilon(1e-6));
  for (std::size_t j = 1; j + 1 < d.size(); ++j) CHECK(d[j] < d[j + 1]);
}

TEST_CASE("floquet matches indicial roots near the cylinder") {
  for (int n : {3, 4}) {
    auto orbit = solve_orbit(Dimension{n}, cylinder_constant(Dimension{n}) * (1.0 - 1e-4));
    for (int j = 1; j <= 3; ++j) {
      auto r = floquet(orbit, j);
      const double expect = std::abs(indicial_roots_cylinder(Dimension{n}, j).first) *
                            orbit.period();
      CHECK(std::abs(r.delta - expect) / expect < 1e-2);
    }
  }
}

TEST_CASE("Wronskian stays constant along mode solves") {
  auto orbit = solve_orbit(n4, 0.2);
  for (int j : {0, 1, 2, 3}) {
    CHECK(wronskian_drift(orbit, j) < 1e-8);
  }
}

TEST_CASE("spherical cap: degenerate exactly at the equator") {
  const double at_half = cap_kernel_eigenvalue(n3, M_PI / 2.0);
  CHECK(std::abs(at_half) < 1e-6);
  CHECK(std::abs(cap_kernel_eigenvalue(n3, M_PI / 4.0)) > 0.1);

  const double rc = cap_degeneracy_radius(n3, 1e-6);
  CHECK(std::abs(rc - M_PI / 2.0) < 1e-4);
  const double rc4 = cap_degeneracy_radius(n4, 1e-6);
  CHECK(std::abs(rc4 - M_PI / 2.0) < 1e-4);

  // kernel element is the zonal linear function cos(rho)
  auto [rho, f] = cap_kernel_eigenfunction(n3, M_PI / 2.0);
  const double scale = f[0] / std::cos(rho[0]);
  for (std::size_t i = 0; i < rho.size(); i += 37) {
    CHECK(f[i] == doctest::Approx(scale * std::cos(rho[i])).epsilon(5e-3));
  }
}

TEST_CASE("half-cylinder Dirichlet data admits no decaying solution") {
  auto orbit = solve_orbit(n3, 0.3);
  // j = 0: the Dirichlet shot is the periodic translation field (bounded,
  // non-decaying); j = 1: it picks up the exponentially growing branch.
  CHECK(half_cylinder_dirichlet_growth(orbit, 0, 10.0 * orbit.period()) > 0.5);
  const double g1 = half_cylinder_dirichlet_growth(orbit, 1, 10.0 * orbit.period());
  CHECK(g1 > 100.0);
}
