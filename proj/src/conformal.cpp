#include "cpsc/conformal.hpp"

#include <cmath>
#include <vector>

namespace cpsc {

namespace {

// Metric-inverse coefficient of the angular block at length coordinate a.
double angular_coeff(const Chart& c, double a) {
  switch (c.background.kind) {
    case MetricKind::cylinder_product:
    case MetricKind::cylinder_normalized: return 1.0;
    case MetricKind::round_sphere: {
      const double s = std::sin(a);
      return 1.0 / (s * s);
    }
    case MetricKind::euclidean: return 1.0 / (a * a);
  }
  return 1.0;
}

// Conservative weight of the length direction: measure density J(a) with
// the 1D operator (1/J)(J f')'.
double length_density(const Chart& c, double a) {
  switch (c.background.kind) {
    case MetricKind::cylinder_product:
    case MetricKind::cylinder_normalized: return 1.0;
    case MetricKind::round_sphere: return std::pow(std::sin(a), double(c.background.n.n - 1));
    case MetricKind::euclidean: return std::pow(a, double(c.background.n.n - 1));
  }
  return 1.0;
}

}  // namespace

bool laplace_row_interior(const Chart& chart, int i) {
  if (chart.length_cell_centered()) return true;
  return i >= 1 && i <= chart.na - 2;
}

int laplace_stencil(const Chart& chart, int i, int j, int order, StencilEntry out[12]) {
  const Dimension n = chart.background.n;
  const double scale = chart.background.laplace_scale();
  const double ha = chart.da();
  const double ht = chart.dtheta();
  int m = 0;

  // length direction
  if (chart.length_cell_centered()) {
    if (order != 2) return 0;
    const double Mi = chart.length_measure(i);
    const double Jp = (i == chart.na - 1) ? 0.0 : length_density(chart, chart.a(i) + 0.5 * ha);
    const double Jm = (i == 0) ? 0.0 : length_density(chart, chart.a(i) - 0.5 * ha);
    if (i > 0) out[m++] = {i - 1, j, scale * Jm / (ha * Mi)};
    if (i < chart.na - 1) out[m++] = {i + 1, j, scale * Jp / (ha * Mi)};
    out[m++] = {i, j, -scale * (Jp + Jm) / (ha * Mi)};
  } else if (order == 2) {
    if (i < 1 || i > chart.na - 2) return 0;
    if (chart.background.kind == MetricKind::euclidean) {
      const double Mi = chart.length_measure(i);
      const double Jp = length_density(chart, chart.a(i) + 0.5 * ha);
      const double Jm = length_density(chart, chart.a(i) - 0.5 * ha);
      out[m++] = {i - 1, j, scale * Jm / (ha * Mi)};
      out[m++] = {i + 1, j, scale * Jp / (ha * Mi)};
      out[m++] = {i, j, -scale * (Jp + Jm) / (ha * Mi)};
    } else {
      out[m++] = {i - 1, j, scale / (ha * ha)};
      out[m++] = {i + 1, j, scale / (ha * ha)};
      out[m++] = {i, j, -2.0 * scale / (ha * ha)};
    }
  } else if (order == 4) {
    if (chart.background.kind == MetricKind::euclidean) return 0;
    if (i < 2 || i > chart.na - 3) return 0;
    const double c = scale / (12.0 * ha * ha);
    out[m++] = {i - 2, j, -c};
    out[m++] = {i - 1, j, 16.0 * c};
    out[m++] = {i, j, -30.0 * c};
    out[m++] = {i + 1, j, 16.0 * c};
    out[m++] = {i + 2, j, -c};
  } else {
    return 0;
  }

  // angular direction, conservative in sin^{n-2}(theta)
  const double cang = scale * angular_coeff(chart, chart.a(i));
  const double Mj = chart.theta_measure(j);
  const double Sp = (j == chart.ntheta - 1)
                        ? 0.0
                        : std::pow(std::sin(chart.theta(j) + 0.5 * ht), double(n.n - 2));
  const double Sm = (j == 0) ? 0.0 : std::pow(std::sin(chart.theta(j) - 0.5 * ht), double(n.n - 2));
  if (j > 0) out[m++] = {i, j - 1, cang * Sm / (ht * Mj)};
  if (j < chart.ntheta - 1) out[m++] = {i, j + 1, cang * Sp / (ht * Mj)};
  out[m++] = {i, j, -cang * (Sp + Sm) / (ht * Mj)};
  return m;
}

DiscreteField laplace_beltrami(const DiscreteField& f, int order) {
  const Chart& c = f.chart();
  DiscreteField out(c, 0.0);
  StencilEntry row[12];
  for (int i = 0; i < c.na; ++i)
    for (int j = 0; j < c.ntheta; ++j) {
      int m = laplace_stencil(c, i, j, order, row);
      if (m == 0 && order == 4) m = laplace_stencil(c, i, j, 2, row);
      double acc = 0.0;
      for (int k = 0; k < m; ++k) acc += row[k].c * f(row[k].i, row[k].j);
      out.at(i, j) = m ? acc : 0.0;
    }
  return out;
}

DiscreteField yamabe_residual(const DiscreteField& u, double target_R, int order) {
  if (!u.positive()) throw std::domain_error("yamabe_residual: u must be positive");
  const Chart& c = u.chart();
  const Dimension n = c.background.n;
  const double co = n.co();
  const double R0 = c.background.scalar_curvature();
  DiscreteField out = laplace_beltrami(u, order);
  for (int i = 0; i < c.na; ++i) {
    const bool full = laplace_row_interior(c, i);
    for (int j = 0; j < c.ntheta; ++j) {
      if (!full) {
        out.at(i, j) = 0.0;
        continue;
      }
      const double uv = u(i, j);
      out.at(i, j) += -co * R0 * uv + co * target_R * std::pow(uv, n.crit());
    }
  }
  return out;
}

DiscreteField linearize_apply(const DiscreteField& u, double target_R, const DiscreteField& v,
                              int order) {
  if (!u.positive()) throw std::domain_error("linearize_apply: u must be positive");
  const Chart& c = u.chart();
  const Dimension n = c.background.n;
  DiscreteField out = laplace_beltrami(v, order);
  const double co = n.co();
  const double com = n.com();
  const double R0 = c.background.scalar_curvature();
  for (int i = 0; i < c.na; ++i) {
    const bool full = laplace_row_interior(c, i);
    for (int j = 0; j < c.ntheta; ++j) {
      if (!full) {
        out.at(i, j) = 0.0;
        continue;
      }
      out.at(i, j) += (-co * R0 + com * target_R * std::pow(u(i, j), n.cl())) * v(i, j);
    }
  }
  return out;
}

Eigen::SparseMatrix<double> linearize(const DiscreteField& u, double target_R) {
  if (!u.positive()) throw std::domain_error("linearize: u must be positive");
  const Chart& c = u.chart();
  const Dimension n = c.background.n;
  const double co = n.co();
  const double com = n.com();
  const double R0 = c.background.scalar_curvature();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(std::size_t(c.size()) * 6);
  StencilEntry row[12];
  for (int i = 0; i < c.na; ++i)
    for (int j = 0; j < c.ntheta; ++j) {
      const long r = c.index(i, j);
      const int m = laplace_stencil(c, i, j, 2, row);
      if (m == 0) {
        trips.emplace_back(r, r, 1.0);
        continue;
      }
      for (int k = 0; k < m; ++k) trips.emplace_back(r, c.index(row[k].i, row[k].j), row[k].c);
      trips.emplace_back(r, r, -co * R0 + com * target_R * std::pow(u(i, j), n.cl()));
    }
  Eigen::SparseMatrix<double> L(c.size(), c.size());
  L.setFromTriplets(trips.begin(), trips.end());
  return L;
}

DiscreteField scalar_curvature_of(const DiscreteField& u, int order) {
  if (!u.positive()) throw std::domain_error("scalar_curvature_of: u must be positive");
  const Chart& c = u.chart();
  const Dimension n = c.background.n;
  const double co = n.co();
  const double R0 = c.background.scalar_curvature();
  DiscreteField lap = laplace_beltrami(u, order);
  DiscreteField out(c, 0.0);
  for (int i = 0; i < c.na; ++i)
    for (int j = 0; j < c.ntheta; ++j)
      out.at(i, j) = (co * R0 * u(i, j) - lap(i, j)) / (co * std::pow(u(i, j), n.crit()));
  if (!c.length_cell_centered()) {
    const int skip = (order == 4) ? 2 : 1;
    for (int j = 0; j < c.ntheta; ++j) {
      for (int i = 0; i < skip; ++i) {
        out.at(i, j) = out(skip, j);
        out.at(c.na - 1 - i, j) = out(c.na - 1 - skip, j);
      }
    }
  }
  return out;
}

double grad_dot(const DiscreteField& u, const DiscreteField& v, int i, int j) {
  const Chart& c = u.chart();
  const double ha = c.da(), ht = c.dtheta();
  auto da = [&](const DiscreteField& f) { return (f(i + 1, j) - f(i - 1, j)) / (2.0 * ha); };
  auto dth = [&](const DiscreteField& f) {
    const double fp = (j == c.ntheta - 1) ? f(i, j) : f(i, j + 1);
    const double fm = (j == 0) ? f(i, j) : f(i, j - 1);
    return (fp - fm) / (2.0 * ht);
  };
  const double scale = c.background.laplace_scale();
  return scale * (da(u) * da(v) + angular_coeff(c, c.a(i)) * dth(u) * dth(v));
}

double equivariance_defect(const DiscreteField& u, const DiscreteField& phi) {
  if (!u.positive()) throw std::domain_error("equivariance_defect: u must be positive");
  const Chart& c = u.chart();
  const Dimension n = c.background.n;
  const double co = n.co();
  const double R0 = c.background.scalar_curvature();

  DiscreteField uphi(c);
  for (int i = 0; i < c.na; ++i)
    for (int j = 0; j < c.ntheta; ++j) uphi.at(i, j) = u(i, j) * phi(i, j);

  DiscreteField lap_uphi = laplace_beltrami(uphi);
  DiscreteField lap_phi = laplace_beltrami(phi);
  DiscreteField Rg = scalar_curvature_of(u);

  double defect = 0.0;
  for (int i = 1; i < c.na - 1; ++i)
    for (int j = 0; j < c.ntheta; ++j) {
      const double uv = u(i, j);
      const double lhs = lap_uphi(i, j) - co * R0 * uphi(i, j);
      const double lap_gp = std::pow(uv, -n.cl()) *
                            (lap_phi(i, j) + 2.0 / uv * grad_dot(u, phi, i, j));
      const double rhs = std::pow(uv, n.crit()) * (lap_gp - co * Rg(i, j) * phi(i, j));
      defect = std::max(defect, std::abs(lhs - rhs));
    }
  return defect;
}

double conjugation_defect(const DiscreteField& u, const DiscreteField& phi) {
  if (!u.positive()) throw std::domain_error("conjugation_defect: u must be positive");
  const Chart& c = u.chart();
  const Dimension n = c.background.n;
  const double co = n.co();
  const double R0 = c.background.scalar_curvature();
  const double q = 0.25 * n.n * (n.n + 2);

  DiscreteField uphi(c);
  for (int i = 0; i < c.na; ++i)
    for (int j = 0; j < c.ntheta; ++j) uphi.at(i, j) = u(i, j) * phi(i, j);

  DiscreteField lap_uphi = laplace_beltrami(uphi);
  DiscreteField lap_phi = laplace_beltrami(phi);

  double defect = 0.0;
  for (int i = 1; i < c.na - 1; ++i)
    for (int j = 0; j < c.ntheta; ++j) {
      const double uv = u(i, j);
      const double lhs =
          lap_uphi(i, j) - co * R0 * uphi(i, j) + q * std::pow(uv, n.cl()) * uphi(i, j);
      const double lap_gp = std::pow(uv, -n.cl()) *
                            (lap_phi(i, j) + 2.0 / uv * grad_dot(u, phi, i, j));
      const double rhs = std::pow(uv, n.crit()) * (lap_gp + double(n.n) * phi(i, j));
      defect = std::max(defect, std::abs(lhs - rhs));
    }
  return defect;
}

}  // namespace cpsc
