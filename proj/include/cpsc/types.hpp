#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace cpsc {

// Manifold dimension n >= 3.  All conformal exponents are derived from it.
struct Dimension {
  int n = 3;

  Dimension() = default;
  explicit Dimension(int n_) : n(n_) {
    if (n < 3) throw std::domain_error("Dimension: n must be >= 3, got " + std::to_string(n_));
  }

  // (n+2)/(n-2), the critical Sobolev exponent of the Yamabe nonlinearity.
  double crit() const { return double(n + 2) / double(n - 2); }
  // 4/(n-2), the conformal-factor exponent in g = u^{4/(n-2)} g0.
  double cl() const { return 4.0 / double(n - 2); }
  // (n-2)/(4(n-1)), the curvature coefficient of the conformal Laplacian.
  double co() const { return double(n - 2) / (4.0 * double(n - 1)); }
  // (n+2)/(4(n-1)), the coefficient appearing in the linearized operator.
  double com() const { return double(n + 2) / (4.0 * double(n - 1)); }
  // (n-2)/2, the decay rate of Green-type factors r^{(n-2)/2}.
  double half_nm2() const { return 0.5 * double(n - 2); }

  bool operator==(const Dimension& o) const { return n == o.n; }
};

// Thrown when an algorithm fails for numerical (as opposed to usage) reasons.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown on invalid run/gluing configurations.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Quintic smoothstep: 0 for x<=0, 1 for x>=1, C^2 with two vanishing
// derivatives at both ends.
inline double smoothstep(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}

inline double smoothstep_d1(double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  return x * x * (30.0 + x * (-60.0 + 30.0 * x));
}

inline double smoothstep_d2(double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  return x * (60.0 + x * (-180.0 + 120.0 * x));
}

// Ascending cutoff over [a, b] with value 0 at a and 1 at b.
struct Cutoff {
  double a = 0.0, b = 1.0;
  double operator()(double t) const { return smoothstep((t - a) / (b - a)); }
  double d1(double t) const { return smoothstep_d1((t - a) / (b - a)) / (b - a); }
  double d2(double t) const { return smoothstep_d2((t - a) / (b - a)) / ((b - a) * (b - a)); }
};

}  // namespace cpsc
