#pragma once

#include <functional>
#include <vector>

#include "cpsc/types.hpp"

namespace cpsc {

// Conformal maps between the axisymmetric model geometries, restricted to
// the meridian plane.  Points are (a, theta) in the conventions of the
// charts: cylinder (t, theta), flat polar (r, theta) about the origin,
// sphere (colatitude, theta).
//
// Every map F: (M, g) -> (M', g') carries the factor omega with
// F* g' = omega^{4/(n-2)} g, so that a conformal factor u of a metric over
// g transports to u' = u / omega over g' (composition multiplies factors).

struct MapPoint {
  double a, theta;
};

class MeridianMap {
 public:
  enum class Kind {
    cyl_to_euc,    // t -> r = e^{-(t - t0)}
    euc_to_cyl,    // r -> t = t0 - log r
    euc_scale,     // x -> s x
    euc_translate, // x -> x + c e_z (axis shift)
    euc_invert,    // x -> k x / |x|^2
    euc_to_sphere, // stereographic, r = tan(rho/2)
    sphere_to_euc
  };

  static MeridianMap cyl_to_euc(Dimension n, double t0 = 0.0);
  static MeridianMap euc_to_cyl(Dimension n, double t0 = 0.0);
  static MeridianMap euc_scale(Dimension n, double s);
  static MeridianMap euc_translate(Dimension n, double c);
  static MeridianMap euc_invert(Dimension n, double k);
  static MeridianMap euc_to_sphere(Dimension n);
  static MeridianMap sphere_to_euc(Dimension n);

  MapPoint apply(MapPoint p) const;
  MapPoint invert(MapPoint p) const;
  double factor(MapPoint src) const;  // omega at the source point
  Kind kind() const { return kind_; }

 private:
  MeridianMap(Kind k, Dimension n, double p) : kind_(k), n_(n), param_(p) {}
  Kind kind_;
  Dimension n_;
  double param_;
};

// A composition F = maps[last] o ... o maps[0].
class TransportPath {
 public:
  TransportPath() = default;
  explicit TransportPath(std::vector<MeridianMap> maps) : maps_(std::move(maps)) {}
  void push(const MeridianMap& m) { maps_.push_back(m); }

  MapPoint apply(MapPoint p) const;
  MapPoint invert(MapPoint p) const;
  double factor(MapPoint src) const;

  // Transported conformal factor evaluated at a target-chart point:
  // u'(y) = u(F^{-1} y) / omega(F^{-1} y).  Throws on evaluation at a
  // puncture (source point escapes the chart domain).
  double pull_factor(const std::function<double(MapPoint)>& u_src, MapPoint target) const;

 private:
  std::vector<MeridianMap> maps_;
};

}  // namespace cpsc
