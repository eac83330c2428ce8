#include "cpsc/transport.hpp"

#include <cmath>

namespace cpsc {

MeridianMap MeridianMap::cyl_to_euc(Dimension n, double t0) { return {Kind::cyl_to_euc, n, t0}; }
MeridianMap MeridianMap::euc_to_cyl(Dimension n, double t0) { return {Kind::euc_to_cyl, n, t0}; }
MeridianMap MeridianMap::euc_scale(Dimension n, double s) {
  if (!(s > 0.0)) throw std::domain_error("euc_scale: s must be positive");
  return {Kind::euc_scale, n, s};
}
MeridianMap MeridianMap::euc_translate(Dimension n, double c) {
  return {Kind::euc_translate, n, c};
}
MeridianMap MeridianMap::euc_invert(Dimension n, double k) {
  if (!(k > 0.0)) throw std::domain_error("euc_invert: k must be positive");
  return {Kind::euc_invert, n, k};
}
MeridianMap MeridianMap::euc_to_sphere(Dimension n) { return {Kind::euc_to_sphere, n, 0.0}; }
MeridianMap MeridianMap::sphere_to_euc(Dimension n) { return {Kind::sphere_to_euc, n, 0.0}; }

namespace {
void check_radius(double r) {
  if (!(r > 0.0)) throw std::domain_error("transport: evaluation at a puncture");
}
}  // namespace

MapPoint MeridianMap::apply(MapPoint p) const {
  switch (kind_) {
    case Kind::cyl_to_euc: return {std::exp(-(p.a - param_)), p.theta};
    case Kind::euc_to_cyl: check_radius(p.a); return {param_ - std::log(p.a), p.theta};
    case Kind::euc_scale: return {param_ * p.a, p.theta};
    case Kind::euc_translate: {
      const double z = p.a * std::cos(p.theta) + param_;
      const double rho = p.a * std::sin(p.theta);
      const double r = std::hypot(rho, z);
      check_radius(r);
      return {r, std::atan2(rho, z)};
    }
    case Kind::euc_invert: check_radius(p.a); return {param_ / p.a, p.theta};
    case Kind::euc_to_sphere: return {2.0 * std::atan(p.a), p.theta};
    case Kind::sphere_to_euc: {
      if (p.a >= M_PI - 1e-300) throw std::domain_error("transport: evaluation at a puncture");
      return {std::tan(0.5 * p.a), p.theta};
    }
  }
  return p;
}

MapPoint MeridianMap::invert(MapPoint p) const {
  switch (kind_) {
    case Kind::cyl_to_euc: check_radius(p.a); return {param_ - std::log(p.a), p.theta};
    case Kind::euc_to_cyl: return {std::exp(-(p.a - param_)), p.theta};
    case Kind::euc_scale: return {p.a / param_, p.theta};
    case Kind::euc_translate: {
      const double z = p.a * std::cos(p.theta) - param_;
      const double rho = p.a * std::sin(p.theta);
      const double r = std::hypot(rho, z);
      check_radius(r);
      return {r, std::atan2(rho, z)};
    }
    case Kind::euc_invert: check_radius(p.a); return {param_ / p.a, p.theta};
    case Kind::euc_to_sphere: return {std::tan(0.5 * p.a), p.theta};
    case Kind::sphere_to_euc: return {2.0 * std::atan(p.a), p.theta};
  }
  return p;
}

double MeridianMap::factor(MapPoint src) const {
  const double k = n_.half_nm2();
  switch (kind_) {
    case Kind::cyl_to_euc: return std::exp(-k * (src.a - param_));
    case Kind::euc_to_cyl: check_radius(src.a); return std::pow(src.a, -k);
    case Kind::euc_scale: return std::pow(param_, k);
    case Kind::euc_translate: return 1.0;
    case Kind::euc_invert: check_radius(src.a); return std::pow(param_ / (src.a * src.a), k);
    case Kind::euc_to_sphere: return std::pow(2.0 / (1.0 + src.a * src.a), k);
    case Kind::sphere_to_euc: {
      const double r = std::tan(0.5 * src.a);
      return std::pow(0.5 * (1.0 + r * r), k);
    }
  }
  return 1.0;
}

MapPoint TransportPath::apply(MapPoint p) const {
  for (const auto& m : maps_) p = m.apply(p);
  return p;
}

MapPoint TransportPath::invert(MapPoint p) const {
  for (auto it = maps_.rbegin(); it != maps_.rend(); ++it) p = it->invert(p);
  return p;
}

double TransportPath::factor(MapPoint src) const {
  double w = 1.0;
  for (const auto& m : maps_) {
    w *= m.factor(src);
    src = m.apply(src);
  }
  return w;
}

double TransportPath::pull_factor(const std::function<double(MapPoint)>& u_src,
                                  MapPoint target) const {
  const MapPoint x = invert(target);
  return u_src(x) / factor(x);
}

}  // namespace cpsc
