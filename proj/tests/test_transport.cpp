#include "cpsc/transport.hpp"

#include <cmath>

#include "cpsc/chart.hpp"
#include "cpsc/conformal.hpp"
#include "cpsc/fowler.hpp"

#include "doctest.h"

using namespace cpsc;

namespace {
const Dimension n3{3};
const Dimension n5{5};
}  // namespace

TEST_CASE("cylinder factor transports to the flat Green-type factor") {
  // u = ubar on the cylinder -> ubar r^{(2-n)/2} on flat space
  for (int n : {3, 4, 6}) {
    const Dimension dn{n};
    const double ub = cylinder_constant(dn);
    TransportPath path({MeridianMap::cyl_to_euc(dn)});
    for (double r : {0.2, 1.0, 3.7}) {
      const double got = path.pull_factor([&](MapPoint) { return ub; }, {r, 0.4});
      CHECK(got == doctest::Approx(ub * std::pow(r, 0.5 * (2 - n))).epsilon(1e-12));
    }
  }
}

TEST_CASE("round trips are the identity") {
  TransportPath fwd({MeridianMap::cyl_to_euc(n3, 0.7), MeridianMap::euc_invert(n3, 2.0),
                     MeridianMap::euc_to_sphere(n3)});
  MapPoint p{0.9, 1.1};
  MapPoint q = fwd.apply(p);
  MapPoint back = fwd.invert(q);
  CHECK(back.a == doctest::Approx(p.a).epsilon(1e-12));
  CHECK(back.theta == doctest::Approx(p.theta).epsilon(1e-12));

  // factor of F composed with factor of F^{-1} cancels
  TransportPath id({MeridianMap::euc_invert(n5, 3.0), MeridianMap::euc_invert(n5, 3.0)});
  MapPoint r = id.apply({1.3, 0.2});
  CHECK(r.a == doctest::Approx(1.3).epsilon(1e-12));
  CHECK(std::abs(id.factor({1.3, 0.2}) - 1.0) < 1e-12);
}

TEST_CASE("composition multiplies factors") {
  auto m1 = MeridianMap::cyl_to_euc(n3, 0.3);
  auto m2 = MeridianMap::euc_scale(n3, 1.7);
  auto m3 = MeridianMap::euc_to_sphere(n3);
  TransportPath path({m1, m2, m3});
  MapPoint p{-0.4, 0.8};
  const MapPoint p1 = m1.apply(p);
  const MapPoint p2 = m2.apply(p1);
  const double manual = m1.factor(p) * m2.factor(p1) * m3.factor(p2);
  CHECK(path.factor(p) == doctest::Approx(manual).epsilon(1e-12));

  // transport of a composition is the composition of transports
  auto u_src = [](MapPoint q) { return 1.0 + 0.3 * std::cos(q.a); };
  TransportPath first({m1});
  TransportPath second({m2, m3});
  const MapPoint tgt = path.apply(p);
  const double direct = path.pull_factor(u_src, tgt);
  auto u_mid = [&](MapPoint q) { return first.pull_factor(u_src, q); };
  const double staged = second.pull_factor(u_mid, tgt);
  CHECK(direct == doctest::Approx(staged).epsilon(1e-12));
}

TEST_CASE("sphere profile uniformizes to the round sphere") {
  // the homoclinic factor transports to the constant 1 on S^n ...
  for (int n : {3, 5}) {
    const Dimension dn{n};
    TransportPath path({MeridianMap::cyl_to_euc(dn), MeridianMap::euc_to_sphere(dn)});
    for (double rho : {0.3, 1.0, 2.2}) {
      const double got =
          path.pull_factor([&](MapPoint q) { return sphere_profile(dn, q.a, 0.0); }, {rho, 0.5});
      CHECK(got == doctest::Approx(1.0).epsilon(1e-11));
    }
  }

  // ... equivalently, to the standard stereographic factor on flat space,
  // which solves the Yamabe equation with target n(n-1)
  TransportPath toflat({MeridianMap::cyl_to_euc(n3)});
  Chart ch{MetricDescriptor{MetricKind::euclidean, n3}, 0.4, 2.5, 2049, 8};
  auto uf = DiscreteField::sample(ch, [&](double r, double th) {
    return toflat.pull_factor([&](MapPoint q) { return sphere_profile(n3, q.a, 0.0); },
                              {r, th});
  });
  for (int i = 0; i < ch.na; i += 512) {
    const double r = ch.a(i);
    CHECK(uf(i, 0) == doctest::Approx(std::pow(2.0 / (1.0 + r * r), 0.5)).epsilon(1e-11));
  }
  CHECK(yamabe_residual(uf, 6.0).sup_interior() < 1e-5);
}

TEST_CASE("translation maps shift along the axis") {
  auto tr = MeridianMap::euc_translate(n3, 0.5);
  MapPoint p{1.0, 0.0};  // on the axis at z = 1
  MapPoint q = tr.apply(p);
  CHECK(q.a == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(tr.factor(p) == doctest::Approx(1.0));
  MapPoint b = tr.invert(q);
  CHECK(b.a == doctest::Approx(1.0).epsilon(1e-14));

  // off-axis point
  MapPoint s{1.0, M_PI / 2};
  MapPoint sq = tr.apply(s);
  CHECK(sq.a == doctest::Approx(std::sqrt(1.25)).epsilon(1e-14));
  CHECK(std::tan(sq.theta) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("puncture evaluation is rejected") {
  TransportPath path({MeridianMap::euc_to_cyl(n3)});
  CHECK_THROWS_AS(path.pull_factor([](MapPoint) { return 1.0; },
                                   MapPoint{std::log(1.0 / 0.0), 0.1}),
                  std::domain_error);
  auto inv = MeridianMap::euc_invert(n3, 1.0);
  CHECK_THROWS_AS(inv.apply(MapPoint{0.0, 0.3}), std::domain_error);
}
