#include "cpsc/chart.hpp"

#include <istream>
#include <ostream>
#include <sstream>

namespace cpsc {

void Chart::validate() const {
  if (!(a1 > a0)) throw config_error("Chart: empty length range");
  if (na < 4 || ntheta < 4) throw config_error("Chart: grid too coarse");
  if (background.kind == MetricKind::round_sphere) {
    if (std::abs(a0) > 1e-12 || std::abs(a1 - M_PI) > 1e-12)
      throw config_error("Chart: sphere charts must cover colatitude [0, pi]");
  }
  if (background.kind == MetricKind::euclidean && !(a0 > 0.0))
    throw config_error("Chart: euclidean charts require r0 > 0");
}

DiscreteField::DiscreteField(const Chart& chart, double value) : chart_(chart) {
  chart_.validate();
  v_ = Eigen::ArrayXXd::Constant(chart.na, chart.ntheta, value);
}

DiscreteField DiscreteField::sample(const Chart& chart,
                                    const std::function<double(double, double)>& f) {
  DiscreteField out(chart);
  for (int i = 0; i < chart.na; ++i)
    for (int j = 0; j < chart.ntheta; ++j) out.at(i, j) = f(chart.a(i), chart.theta(j));
  return out;
}

double DiscreteField::sup_interior() const {
  const int skip = chart_.length_cell_centered() ? 0 : 1;
  double s = 0.0;
  for (int i = skip; i < chart_.na - skip; ++i)
    for (int j = 0; j < chart_.ntheta; ++j) s = std::max(s, std::abs(v_(i, j)));
  return s;
}

DiscreteField& DiscreteField::operator+=(const DiscreteField& o) {
  v_ += o.v_;
  return *this;
}

DiscreteField& DiscreteField::operator-=(const DiscreteField& o) {
  v_ -= o.v_;
  return *this;
}

DiscreteField& DiscreteField::operator*=(double s) {
  v_ *= s;
  return *this;
}

namespace {
// 4-point Gauss-Legendre integral of sin^p over [a, b].
double sin_pow_integral(double p, double a, double b) {
  static const double x[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                              0.8611363115940526};
  static const double w[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                              0.3478548451374538};
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double acc = 0.0;
  for (int k = 0; k < 4; ++k) acc += w[k] * std::pow(std::sin(mid + half * x[k]), p);
  return acc * half;
}
}  // namespace

double Chart::theta_measure(int j) const {
  const double h = dtheta();
  return sin_pow_integral(double(background.n.n - 2), j * h, (j + 1) * h);
}

double Chart::length_measure(int i) const {
  const double h = da();
  switch (background.kind) {
    case MetricKind::cylinder_product:
    case MetricKind::cylinder_normalized:
      return (i == 0 || i == na - 1) ? 0.5 * h : h;
    case MetricKind::round_sphere:
      return sin_pow_integral(double(background.n.n - 1), a0 + i * h, a0 + (i + 1) * h);
    case MetricKind::euclidean: {
      const double lo = std::max(a0, a(i) - 0.5 * h);
      const double hi = std::min(a1, a(i) + 0.5 * h);
      const double p = double(background.n.n);
      return (std::pow(hi, p) - std::pow(lo, p)) / p;
    }
  }
  return h;
}

double Chart::volume_weight(int i, int j) const {
  double w = length_measure(i) * theta_measure(j);
  if (background.kind == MetricKind::cylinder_normalized)
    w *= std::pow(double(background.n.n - 2) / double(background.n.n), 0.5 * background.n.n);
  return w;
}

void DiscreteField::write_csv(std::ostream& os) const {
  os.precision(17);
  for (int i = 0; i < chart_.na; ++i) {
    for (int j = 0; j < chart_.ntheta; ++j) {
      os << v_(i, j);
      os << (j + 1 == chart_.ntheta ? '\n' : ',');
    }
  }
}

void DiscreteField::write_json_header(std::ostream& os) const {
  os.precision(17);
  os << "{\"background\":\"" << chart_.background.name() << "\",\"n\":" << chart_.background.n.n
     << ",\"a0\":" << chart_.a0 << ",\"a1\":" << chart_.a1 << ",\"na\":" << chart_.na
     << ",\"ntheta\":" << chart_.ntheta << "}\n";
}

DiscreteField DiscreteField::read_csv(const Chart& chart, std::istream& is) {
  DiscreteField out(chart);
  std::string line;
  for (int i = 0; i < chart.na; ++i) {
    if (!std::getline(is, line)) throw config_error("field csv: unexpected end of data");
    std::istringstream row(line);
    std::string cell;
    for (int j = 0; j < chart.ntheta; ++j) {
      if (!std::getline(row, cell, ',')) throw config_error("field csv: short row");
      out.at(i, j) = std::stod(cell);
    }
  }
  return out;
}

}  // namespace cpsc
