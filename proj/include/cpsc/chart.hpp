#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <iosfwd>

#include "cpsc/types.hpp"

namespace cpsc {

enum class MetricKind {
  cylinder_product,     // dt^2 + dtheta^2 on R x S^{n-1},  R = (n-1)(n-2)
  cylinder_normalized,  // ((n-2)/n)(dt^2 + dtheta^2),      R = n(n-1)
  round_sphere,         // unit S^n,                        R = n(n-1)
  euclidean             // flat R^n,                        R = 0
};

struct MetricDescriptor {
  MetricKind kind;
  Dimension n;

  double scalar_curvature() const {
    switch (kind) {
      case MetricKind::cylinder_product: return double((n.n - 1) * (n.n - 2));
      case MetricKind::cylinder_normalized: return double(n.n * (n.n - 1));
      case MetricKind::round_sphere: return double(n.n * (n.n - 1));
      case MetricKind::euclidean: return 0.0;
    }
    return 0.0;
  }

  // Constant conformal factor relating the metric to its coordinate form;
  // nontrivial only for the normalized cylinder.
  double laplace_scale() const {
    return kind == MetricKind::cylinder_normalized ? double(n.n) / double(n.n - 2) : 1.0;
  }

  const char* name() const {
    switch (kind) {
      case MetricKind::cylinder_product: return "cylinder_product";
      case MetricKind::cylinder_normalized: return "cylinder_normalized";
      case MetricKind::round_sphere: return "round_sphere";
      case MetricKind::euclidean: return "euclidean";
    }
    return "?";
  }
};

// 2D chart for SO(n-1)-invariant fields: a length coordinate `a` (t on
// cylinders, colatitude rho on the sphere, radius r on flat space) times the
// polar angle theta in [0, pi] of S^{n-1}.  theta is cell-centered with
// even-parity ghosts at the poles.  The length coordinate is node-centered
// with endpoints, except on the sphere where it is cell-centered over the
// full [0, pi] so that both poles are regular interior faces.
struct Chart {
  MetricDescriptor background;
  double a0 = 0.0, a1 = 1.0;
  int na = 64;      // number of length samples (nodes or cells)
  int ntheta = 32;  // theta cells

  bool length_cell_centered() const { return background.kind == MetricKind::round_sphere; }
  double da() const {
    return length_cell_centered() ? (a1 - a0) / na : (a1 - a0) / (na - 1);
  }
  double dtheta() const { return M_PI / ntheta; }
  double a(int i) const {
    return length_cell_centered() ? a0 + (i + 0.5) * da() : a0 + i * da();
  }
  double theta(int j) const { return (j + 0.5) * dtheta(); }
  long size() const { return long(na) * ntheta; }
  long index(int i, int j) const { return long(i) * ntheta + j; }

  // Exact cell measures.  Normalizing conservative stencils by these keeps
  // the scheme consistent at the coordinate poles, where the center-density
  // approximation of the cell mass is off by an O(1) factor.
  double theta_measure(int j) const;   // integral of sin^{n-2} over the cell
  double length_measure(int i) const;  // integral of the length density over the cell

  // Riemannian volume weight of the node cell (constant S^{n-2} factor dropped).
  double volume_weight(int i, int j) const;

  void validate() const;
};

// A sampled SO(n-1)-invariant scalar field on a chart.
class DiscreteField {
 public:
  DiscreteField() = default;
  DiscreteField(const Chart& chart, double value = 0.0);

  static DiscreteField sample(const Chart& chart, const std::function<double(double, double)>& f);

  const Chart& chart() const { return chart_; }
  double operator()(int i, int j) const { return v_(i, j); }
  double& at(int i, int j) { return v_(i, j); }
  const Eigen::ArrayXXd& values() const { return v_; }
  Eigen::ArrayXXd& values() { return v_; }

  bool positive() const { return (v_ > 0.0).all(); }
  double sup() const { return v_.abs().maxCoeff(); }
  double min() const { return v_.minCoeff(); }
  // sup over rows untouched by one-sided boundary closures
  double sup_interior() const;

  DiscreteField& operator+=(const DiscreteField& o);
  DiscreteField& operator-=(const DiscreteField& o);
  DiscreteField& operator*=(double s);
  friend DiscreteField operator+(DiscreteField a, const DiscreteField& b) { return a += b; }
  friend DiscreteField operator-(DiscreteField a, const DiscreteField& b) { return a -= b; }
  friend DiscreteField operator*(double s, DiscreteField a) { return a *= s; }

  double volume_weight(int i, int j) const { return chart_.volume_weight(i, j); }

  void write_csv(std::ostream& os) const;
  void write_json_header(std::ostream& os) const;
  static DiscreteField read_csv(const Chart& chart, std::istream& is);

 private:
  Chart chart_;
  Eigen::ArrayXXd v_;
};

}  // namespace cpsc
