#include "cpsc/gluing.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

namespace cpsc {

namespace {

double norm2(Vec2 v) { return std::hypot(v.rho, v.z); }

// ((n-2)/n)^{(2-n)/4}: normalization putting the half-infinite cylinder
// inside the ball at scalar curvature n(n-1)
double switch_constant(Dimension n) {
  return std::pow(double(n.n - 2) / double(n.n), 0.25 * double(2 - n.n));
}

}  // namespace

void GluingConfig::validate() const {
  if (summands.empty()) throw config_error("gluing config: no summands");
  if (T.size() + 1 != summands.size())
    throw config_error("gluing config: need exactly one T per junction");
  const double ubar = cylinder_constant(n);
  for (const auto& s : summands) {
    if (!(s.eps > 0.0) || s.eps > ubar * (1.0 + 1e-12))
      throw config_error("gluing config: eps outside (0, ubar]");
    if (!(s.alpha > 0.0) || s.alpha > 0.45)
      throw config_error("gluing config: alpha outside (0, 0.45]");
    if (s.pole != 1 && s.pole != -1) throw config_error("gluing config: pole must be +-1");
    if (s.deficiency_end != 1 && s.deficiency_end != -1)
      throw config_error("gluing config: deficiency_end must be +-1");
  }
  for (double t : T) {
    if (!(t > 2.0 * (cutoff_width + 1.0))) {
      std::ostringstream msg;
      msg << "gluing config: T = " << t << " too small; T must exceed 2*(cutoff_width+1) = "
          << 2.0 * (cutoff_width + 1.0);
      throw config_error(msg.str());
    }
  }
  if (!(grids.body_dt > 0.0) || !(grids.neck_dt > 0.0) || grids.ntheta < 8)
    throw config_error("gluing config: invalid grid spec");
  for (const auto& s : summands) {
    if (s.alpha * std::exp(grids.overlap) > 0.85)
      throw config_error("gluing config: alpha * e^{overlap} must stay below 0.85");
  }
  if (!(grids.mask_fraction > 0.3) || !(grids.mask_fraction < 0.9))
    throw config_error("gluing config: mask_fraction outside (0.3, 0.9)");
}

GluingConfig chain_config(Dimension n, const std::vector<SummandSpec>& summands,
                          const std::vector<double>& T_list) {
  GluingConfig cfg;
  cfg.n = n;
  cfg.summands = summands;
  cfg.T = T_list;
  cfg.validate();
  return cfg;
}

Vec2 Attachment::body_to_flat(double s, double theta) const {
  const double scale = std::exp(-(s - s_p));
  return {scale * std::sin(theta), scale * std::cos(theta)};
}

Vec2 Attachment::neck_to_flat(double tau, double thetat) const {
  const double r = alpha * std::exp(-tau);
  // thetat measured from the inward axis direction -sigma e_z
  return {r * std::sin(thetat), sigma - sigma * r * std::cos(thetat)};
}

void Attachment::flat_to_body(Vec2 x, double& s, double& theta) const {
  const double m = norm2(x);
  if (!(m > 0.0)) throw numeric_error("flat_to_body: puncture");
  s = s_p - std::log(m);
  theta = std::atan2(x.rho, x.z);
}

void Attachment::flat_to_neck(Vec2 x, double& tau, double& thetat) const {
  const Vec2 d{x.rho, x.z - sigma};
  const double r = norm2(d);
  if (!(r > 0.0)) throw numeric_error("flat_to_neck: gluing point");
  tau = std::log(alpha / r);
  thetat = std::atan2(d.rho, -sigma * d.z);
}

double SummandGeometry::flat_factor(Vec2 x) const {
  const Dimension n = orbit_->dim();
  const double m = norm2(x);
  if (!(m > 0.0)) throw numeric_error("flat_factor: puncture");
  return orbit_->u(at_.s_p - std::log(m)) * std::pow(m, -n.half_nm2());
}

double SummandGeometry::pure_factor(Vec2 x) const {
  const Dimension n = orbit_->dim();
  const Vec2 d{x.rho, x.z - at_.sigma};
  return switch_constant(n) * std::pow(norm2(d), n.half_nm2()) * flat_factor(x);
}

double SummandGeometry::switch_cutoff(double r) const {
  return smoothstep(r / at_.alpha - 1.0);
}

double SummandGeometry::switch_factor(Vec2 x) const {
  const Vec2 d{x.rho, x.z - at_.sigma};
  const double rho = switch_cutoff(norm2(d));
  if (rho >= 1.0) return 1.0;
  return rho + (1.0 - rho) * pure_factor(x);
}

double SummandGeometry::switch_factor_dtau(double tau, double thetat) const {
  const Dimension n = orbit_->dim();
  const double k = n.half_nm2();
  const double r = at_.alpha * std::exp(-tau);
  const Vec2 dir{std::sin(thetat), -at_.sigma * std::cos(thetat)};
  const Vec2 x{r * dir.rho, at_.sigma + r * dir.z};
  const double m = norm2(x);
  const double s = at_.s_p - std::log(m);
  const double u = orbit_->u(s), up = orbit_->up(s);

  const double vhat = u * std::pow(m, -k);
  // d vhat / dr along the ray: grad vhat = -(u' + k u) |x|^{-k-1} xhat
  const double xdotdir = (x.rho * dir.rho + x.z * dir.z) / m;
  const double dvhat = -(up + k * u) * std::pow(m, -k - 1.0) * xdotdir;
  const double cn = switch_constant(n);
  const double pure = cn * std::pow(r, k) * vhat;
  const double dpure = cn * (k * std::pow(r, k - 1.0) * vhat + std::pow(r, k) * dvhat);

  const double rho = switch_cutoff(r);
  const double drho = smoothstep_d1(r / at_.alpha - 1.0) / at_.alpha;
  const double dG_dr = drho * (1.0 - pure) + (1.0 - rho) * dpure;
  return -r * dG_dr;
}

double GluedManifold::chi_right(int jn, double tau) const {
  const double cw = config.cutoff_width;
  return smoothstep((tau - (junctions[jn].T / 2.0 - cw)) / (2.0 * cw));
}

double GluedManifold::chi_left(int jn, double tau) const { return 1.0 - chi_right(jn, tau); }

double GluedManifold::node_volume(int c, int i, int j) const {
  const GluedChart& gc = charts[c];
  const double om = gc.Omega(i, j);
  const Dimension n = config.n;
  return gc.chart.volume_weight(i, j) * std::pow(om, 2.0 * n.n / double(n.n - 2));
}

namespace {

// All attachments of one summand (its + point for the junction to the right,
// its mirrored - point for the junction to the left).
std::vector<Attachment> summand_attachments(const GluingConfig& cfg, int i) {
  std::vector<Attachment> out;
  const auto& s = cfg.summands[i];
  const int N = int(cfg.summands.size());
  if (i + 1 < N) out.push_back({i, s.t_p, double(s.pole), s.alpha});
  if (i > 0) out.push_back({i, s.t_p, -double(s.pole), s.alpha});
  return out;
}

// Product of the switch factors of every attachment of the summand,
// evaluated at the summand-cylinder point (s, theta).
double switch_total(const GluedManifold& g, int summand, double s, double theta) {
  double acc = 1.0;
  for (const auto& at : summand_attachments(g.config, summand)) {
    SummandGeometry geo(&g.orbits[summand], at);
    acc *= geo.switch_factor(at.body_to_flat(s, theta));
  }
  return acc;
}

// Maps a neck node to the summand-cylinder coordinates of one side.
void neck_to_summand(const Junction& jct, bool left, double tau, double thetat, double& s,
                     double& theta) {
  const Attachment& at = left ? jct.left : jct.right;
  const double tau_own = left ? tau : jct.T - tau;
  at.flat_to_body(at.neck_to_flat(tau_own, thetat), s, theta);
}

// u_i of one side evaluated at a neck node (every switch of that summand).
double neck_tail(const GluedManifold& g, int jn, bool left, double tau, double thetat) {
  const Junction& jct = g.junctions[jn];
  double s, theta;
  neck_to_summand(jct, left, tau, thetat, s, theta);
  return switch_total(g, left ? jct.left.summand : jct.right.summand, s, theta);
}

// pts-point Lagrange weights at relative position x inside [0, m-1],
// window starting index written to i0.
void lagrange_weights(double x, int m, int pts, int& i0, double w[6]) {
  i0 = int(std::floor(x)) - pts / 2 + 1;
  i0 = std::max(0, std::min(i0, m - pts));
  for (int a = 0; a < pts; ++a) {
    w[a] = 1.0;
    for (int b = 0; b < pts; ++b) {
      if (a == b) continue;
      w[a] *= (x - (i0 + b)) / double(a - b);
    }
  }
}

// reflect a theta cell index into [0, m-1] by pole parity
int reflect_theta(int j, int m) {
  while (j < 0 || j >= m) {
    if (j < 0) j = -1 - j;
    if (j >= m) j = 2 * m - 1 - j;
  }
  return j;
}

// tensor Lagrange stencil into a chart at continuous position (ai, tj)
// given in index units (node index for length, cell index for theta);
// theta ghost cells are folded back by pole parity.
std::vector<InterpEntry> interp_stencil(int chart_id, const Chart& ch, double ai, double tj,
                                        int pts) {
  int i0, j0;
  double wi[6], wj[6];
  lagrange_weights(ai, ch.na, pts, i0, wi);
  lagrange_weights(tj + pts, ch.ntheta + 2 * pts, pts, j0, wj);
  std::vector<InterpEntry> out;
  out.reserve(std::size_t(pts) * pts);
  for (int a = 0; a < pts; ++a)
    for (int b = 0; b < pts; ++b) {
      const int jj = reflect_theta(j0 + b - pts, ch.ntheta);
      out.push_back({chart_id, ch.index(i0 + a, jj), wi[a] * wj[b]});
    }
  return out;
}

// Highest-order stencil whose sources avoid masked nodes of the chart.
std::vector<InterpEntry> interp_stencil_avoiding(int chart_id, const GluedChart& src, double ai,
                                                 double tj) {
  for (int pts : {6, 4, 3, 2}) {
    auto st = interp_stencil(chart_id, src.chart, ai, tj, pts);
    bool ok = true;
    for (const auto& e : st)
      if (src.cls[e.node] == NodeClass::masked) ok = false;
    if (ok) return st;
  }
  throw numeric_error("build: interpolation cannot avoid masked nodes; refine the grids");
}

}  // namespace

GluedManifold build_connected_sum(const GluingConfig& config) {
  config.validate();
  GluedManifold g;
  g.config = config;
  const Dimension n = config.n;
  const int N = int(config.summands.size());

  OrbitOptions oo;
  oo.tol = 1e-11;
  oo.samples = 4096;
  for (const auto& s : config.summands) g.orbits.push_back(solve_orbit(n, s.eps, oo));
  for (int i = 0; i < N; ++i) {
    if (config.summands[i].alpha > 0.25 * g.orbits[i].period())
      throw config_error("gluing config: alpha must not exceed a quarter period");
  }

  for (int j = 0; j + 1 < N; ++j) {
    Junction jct;
    const auto& L = config.summands[j];
    const auto& R = config.summands[j + 1];
    jct.left = {j, L.t_p, double(L.pole), L.alpha};
    jct.right = {j + 1, R.t_p, -double(R.pole), R.alpha};
    jct.T = config.T[j];
    g.junctions.push_back(jct);
  }

  // body charts
  for (int i = 0; i < N; ++i) {
    GluedChart bc;
    bc.is_neck = false;
    bc.owner = i;
    const double L_end = config.grids.L_end_periods * g.orbits[i].period();
    const double t_p = config.summands[i].t_p;
    Chart ch;
    ch.background = {MetricKind::cylinder_product, n};
    ch.a0 = t_p - L_end;
    ch.a1 = t_p + L_end;
    ch.na = int(std::llround((ch.a1 - ch.a0) / config.grids.body_dt)) + 1;
    ch.ntheta = config.grids.ntheta;
    ch.validate();
    bc.chart = ch;
    g.charts.push_back(std::move(bc));
  }

  // neck charts
  for (int j = 0; j < int(g.junctions.size()); ++j) {
    GluedChart nc;
    nc.is_neck = true;
    nc.owner = j;
    const double w = config.grids.overlap;
    Chart ch;
    ch.background = {MetricKind::cylinder_normalized, n};
    ch.a0 = -w;
    ch.a1 = g.junctions[j].T + w;
    ch.na = int(std::llround((ch.a1 - ch.a0) / config.grids.neck_dt)) + 1;
    ch.ntheta = config.grids.ntheta;
    ch.validate();
    nc.chart = ch;
    g.charts.push_back(std::move(nc));
  }

  // node classification
  for (int c = 0; c < int(g.charts.size()); ++c) {
    GluedChart& gc = g.charts[c];
    const Chart& ch = gc.chart;
    gc.cls.assign(std::size_t(ch.size()), NodeClass::interior);
    if (!gc.is_neck) {
      const auto ats = summand_attachments(config, gc.owner);
      auto masked = [&](int i, int j) {
        if (i < 0 || i >= ch.na || j < 0 || j >= ch.ntheta) return false;
        const double s = ch.a(i), th = ch.theta(j);
        for (const auto& at : ats) {
          const Vec2 x = at.body_to_flat(s, th);
          const Vec2 d{x.rho, x.z - at.sigma};
          if (norm2(d) < config.grids.mask_fraction * at.alpha) return true;
        }
        return false;
      };
      for (int i = 0; i < ch.na; ++i)
        for (int j = 0; j < ch.ntheta; ++j) {
          if (masked(i, j)) {
            gc.cls[ch.index(i, j)] = NodeClass::masked;
          }
        }
      for (int i = 0; i < ch.na; ++i)
        for (int j = 0; j < ch.ntheta; ++j) {
          if (gc.cls[ch.index(i, j)] == NodeClass::masked) continue;
          if (i == 0 || i == ch.na - 1) {
            gc.cls[ch.index(i, j)] = NodeClass::edge;
            continue;
          }
          bool touches = false;
          for (auto [di, dj] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
            if (masked(i + di, j + dj)) touches = true;
          }
          if (touches) gc.cls[ch.index(i, j)] = NodeClass::coupling;
        }
    } else {
      for (int j = 0; j < ch.ntheta; ++j) {
        gc.cls[ch.index(0, j)] = NodeClass::coupling;
        gc.cls[ch.index(ch.na - 1, j)] = NodeClass::coupling;
      }
    }
  }

  // interpolation stencils
  for (int c = 0; c < int(g.charts.size()); ++c) {
    GluedChart& gc = g.charts[c];
    const Chart& ch = gc.chart;
    if (!gc.is_neck) {
      const auto ats = summand_attachments(config, gc.owner);
      for (int i = 0; i < ch.na; ++i)
        for (int j = 0; j < ch.ntheta; ++j) {
          if (gc.cls[ch.index(i, j)] != NodeClass::coupling) continue;
          // nearest hole decides the source junction
          int best = -1;
          double rbest = 1e300;
          for (int a = 0; a < int(ats.size()); ++a) {
            const Vec2 x = ats[a].body_to_flat(ch.a(i), ch.theta(j));
            const Vec2 d{x.rho, x.z - ats[a].sigma};
            if (norm2(d) < rbest) {
              rbest = norm2(d);
              best = a;
            }
          }
          const Attachment& at = ats[best];
          // junction owning this attachment
          int jn = -1;
          bool left = true;
          for (int q = 0; q < int(g.junctions.size()); ++q) {
            if (g.junctions[q].left.summand == gc.owner &&
                g.junctions[q].left.sigma == at.sigma)
              jn = q, left = true;
            if (g.junctions[q].right.summand == gc.owner &&
                g.junctions[q].right.sigma == at.sigma)
              jn = q, left = false;
          }
          if (jn < 0) throw numeric_error("build: attachment without junction");
          double tau, thetat;
          at.flat_to_neck(at.body_to_flat(ch.a(i), ch.theta(j)), tau, thetat);
          if (!left) tau = g.junctions[jn].T - tau;
          const Chart& src = g.charts[N + jn].chart;
          const double ai = (tau - src.a0) / src.da();
          const double tj = thetat / src.dtheta() - 0.5;
          gc.coupling[ch.index(i, j)] = interp_stencil_avoiding(N + jn, g.charts[N + jn], ai, tj);
        }
    } else {
      const Junction& jct = g.junctions[gc.owner];
      for (int side = 0; side < 2; ++side) {
        const bool left = side == 0;
        const int i = left ? 0 : ch.na - 1;
        const int body_id = left ? jct.left.summand : jct.right.summand;
        const Chart& src = g.charts[body_id].chart;
        for (int j = 0; j < ch.ntheta; ++j) {
          double s, theta;
          neck_to_summand(jct, left, ch.a(i), ch.theta(j), s, theta);
          const double ai = (s - src.a0) / src.da();
          const double tj = theta / src.dtheta() - 0.5;
          gc.coupling[ch.index(i, j)] =
              interp_stencil_avoiding(body_id, g.charts[body_id], ai, tj);
        }
      }
    }
  }

  // compressed unknown ids and offsets
  g.offset.assign(g.charts.size(), 0);
  long total = 0;
  for (int c = 0; c < int(g.charts.size()); ++c) {
    GluedChart& gc = g.charts[c];
    g.offset[c] = total;
    gc.unknown.assign(std::size_t(gc.chart.size()), -1);
    long k = 0;
    for (long p = 0; p < gc.chart.size(); ++p)
      if (gc.cls[p] != NodeClass::masked) gc.unknown[p] = k++;
    gc.n_unknowns = k;
    total += k;
  }
  g.total_unknowns = total;

  // analytic background data: Omega and the total background factor F0
  for (int c = 0; c < int(g.charts.size()); ++c) {
    GluedChart& gc = g.charts[c];
    const Chart& ch = gc.chart;
    gc.Omega = DiscreteField(ch, 1.0);
    gc.F0 = DiscreteField(ch, 1.0);
    if (!gc.is_neck) {
      const auto& orbit = g.orbits[gc.owner];
      for (int i = 0; i < ch.na; ++i)
        for (int j = 0; j < ch.ntheta; ++j) {
          if (gc.cls[ch.index(i, j)] == NodeClass::masked) continue;
          const double sw = switch_total(g, gc.owner, ch.a(i), ch.theta(j));
          gc.Omega.at(i, j) = orbit.u(ch.a(i)) / sw;
          gc.F0.at(i, j) = orbit.u(ch.a(i));
        }
    } else {
      const Junction& jct = g.junctions[gc.owner];
      for (int i = 0; i < ch.na; ++i)
        for (int j = 0; j < ch.ntheta; ++j) {
          const double tau = ch.a(i), tt = ch.theta(j);
          double om = 1.0;
          for (int side = 0; side < 2; ++side) {
            const bool left = side == 0;
            const Attachment& at = left ? jct.left : jct.right;
            double s, theta;
            neck_to_summand(jct, left, tau, tt, s, theta);
            SummandGeometry geo(&g.orbits[at.summand], at);
            const double pure = geo.pure_factor(at.body_to_flat(s, theta));
            om *= pure / switch_total(g, at.summand, s, theta);
          }
          gc.Omega.at(i, j) = om;
          const double uT = g.chi_left(gc.owner, tau) * neck_tail(g, gc.owner, true, tau, tt) +
                            g.chi_right(gc.owner, tau) * neck_tail(g, gc.owner, false, tau, tt);
          gc.F0.at(i, j) = om * uT;
        }
    }
  }

  return g;
}

std::vector<DiscreteField> approximate_factor(const GluedManifold& g) {
  std::vector<DiscreteField> out;
  for (int c = 0; c < int(g.charts.size()); ++c) {
    const GluedChart& gc = g.charts[c];
    const Chart& ch = gc.chart;
    DiscreteField f(ch, 1.0);
    if (!gc.is_neck) {
      for (int i = 0; i < ch.na; ++i)
        for (int j = 0; j < ch.ntheta; ++j) {
          if (gc.cls[ch.index(i, j)] == NodeClass::masked) continue;
          f.at(i, j) = switch_total(g, gc.owner, ch.a(i), ch.theta(j));
        }
    } else {
      for (int i = 0; i < ch.na; ++i)
        for (int j = 0; j < ch.ntheta; ++j) {
          const double tau = ch.a(i), tt = ch.theta(j);
          f.at(i, j) = g.chi_left(gc.owner, tau) * neck_tail(g, gc.owner, true, tau, tt) +
                       g.chi_right(gc.owner, tau) * neck_tail(g, gc.owner, false, tau, tt);
        }
    }
    if (!f.positive()) throw numeric_error("approximate_factor: non-positive factor");
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<DiscreteField> error_field(const GluedManifold& g,
                                       const std::vector<DiscreteField>& u_T) {
  const Dimension n = g.config.n;
  const double cw = g.config.cutoff_width;
  const double lap_scale = double(n.n) / double(n.n - 2);
  const double c2 = 0.25 * n.n * (n.n - 2);
  std::vector<DiscreteField> out;
  for (int c = 0; c < int(g.charts.size()); ++c) {
    const GluedChart& gc = g.charts[c];
    DiscreteField f(gc.chart, 0.0);
    if (gc.is_neck) {
      const Junction& jct = g.junctions[gc.owner];
      const double mid = jct.T / 2.0;
      const Chart& ch = gc.chart;
      for (int i = 0; i < ch.na; ++i) {
        const double tau = ch.a(i);
        if (tau <= mid - cw || tau >= mid + cw) continue;
        const double x = (tau - (mid - cw)) / (2.0 * cw);
        const double chiR = smoothstep(x);
        const double chiL = 1.0 - chiR;
        const double dchiR = smoothstep_d1(x) / (2.0 * cw);
        const double ddchiR = smoothstep_d2(x) / (4.0 * cw * cw);
        for (int j = 0; j < ch.ntheta; ++j) {
          const double tt = ch.theta(j);
          double sL, thL, sR, thR;
          neck_to_summand(jct, true, tau, tt, sL, thL);
          neck_to_summand(jct, false, tau, tt, sR, thR);
          SummandGeometry geoL(&g.orbits[jct.left.summand], jct.left);
          SummandGeometry geoR(&g.orbits[jct.right.summand], jct.right);
          const double uL = geoL.switch_factor(jct.left.body_to_flat(sL, thL));
          const double uR = geoR.switch_factor(jct.right.body_to_flat(sR, thR));
          const double duL = geoL.switch_factor_dtau(tau, tt);
          const double duR = -geoR.switch_factor_dtau(jct.T - tau, tt);
          const double mix = u_T[c](i, j);  // equals chiL uL + chiR uR here
          f.at(i, j) = lap_scale * (2.0 * (-dchiR) * duL + (-ddchiR) * uL +
                                    2.0 * dchiR * duR + ddchiR * uR) +
                       c2 * (std::pow(mix, n.crit()) -
                             chiL * std::pow(uL, n.crit()) - chiR * std::pow(uR, n.crit()));
        }
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

std::pair<DiscreteField, DiscreteField> background_switch(const GluedManifold& g, int summand) {
  const Chart& ch = g.charts[summand].chart;
  DiscreteField u(ch, 1.0), rho(ch, 1.0);
  const auto ats = summand_attachments(g.config, summand);
  for (int i = 0; i < ch.na; ++i)
    for (int j = 0; j < ch.ntheta; ++j) {
      double uacc = 1.0, racc = 1.0;
      for (const auto& at : ats) {
        SummandGeometry geo(&g.orbits[summand], at);
        const Vec2 x = at.body_to_flat(ch.a(i), ch.theta(j));
        const Vec2 d{x.rho, x.z - at.sigma};
        uacc *= geo.switch_factor(x);
        racc *= geo.switch_cutoff(norm2(d));
      }
      u.at(i, j) = uacc;
      rho.at(i, j) = racc;
    }
  return {std::move(u), std::move(rho)};
}

double error_sup(const GluedManifold& g, const std::vector<DiscreteField>& f_T) {
  double s = 0.0;
  for (int c = 0; c < int(g.charts.size()); ++c)
    if (g.charts[c].is_neck) s = std::max(s, f_T[c].sup());
  return s;
}

double error_sup_outside_transition(const GluedManifold& g,
                                    const std::vector<DiscreteField>& f_T) {
  double s = 0.0;
  const double cw = g.config.cutoff_width;
  for (int c = 0; c < int(g.charts.size()); ++c) {
    const GluedChart& gc = g.charts[c];
    if (!gc.is_neck) {
      s = std::max(s, f_T[c].sup());
      continue;
    }
    const double mid = g.junctions[gc.owner].T / 2.0;
    for (int i = 0; i < gc.chart.na; ++i) {
      const double tau = gc.chart.a(i);
      if (tau > mid - cw && tau < mid + cw) continue;
      for (int j = 0; j < gc.chart.ntheta; ++j) s = std::max(s, std::abs(f_T[c](i, j)));
    }
  }
  return s;
}

double overlap_isometry_defect(const GluedManifold& g) {
  const Dimension n = g.config.n;
  const double k = n.half_nm2();
  const double cm = std::pow(double(n.n - 2) / double(n.n), 0.25 * double(n.n - 2));
  double worst = 0.0;
  for (int jn = 0; jn < g.n_necks(); ++jn) {
    const Junction& jct = g.junctions[jn];
    const double w = g.config.grids.overlap;
    for (int side = 0; side < 2; ++side) {
      const bool left = side == 0;
      const Attachment& at = left ? jct.left : jct.right;
      for (int a = 0; a <= 8; ++a)
        for (int b = 0; b < 8; ++b) {
          const double tau_own = -w + (w * a) / 8.0;  // collar of this side
          const double tt = (b + 0.5) * M_PI / 8.0;
          const Vec2 x = at.neck_to_flat(tau_own, tt);
          double s, theta;
          at.flat_to_body(x, s, theta);
          // neck route: g_{c,T} = Omega_neck^{4/(n-2)} ghat with
          // ghat = ((n-2)/n) r^{-2} delta in the flat chart
          const double r = at.alpha * std::exp(-tau_own);
          SummandGeometry geo(&g.orbits[at.summand], at);
          const double om_neck = geo.pure_factor(x) / switch_total(g, at.summand, s, theta);
          const double route_neck = om_neck * cm * std::pow(r, -k);
          // body route: g_{c,T} = Omega_body^{4/(n-2)} g_prod with
          // g_prod = |x|^{-2} delta
          const double om_body =
              g.orbits[at.summand].u(s) / switch_total(g, at.summand, s, theta);
          const double route_body = om_body * std::pow(norm2(x), -k);
          worst = std::max(worst, std::abs(route_neck - route_body) /
                                      std::max(1.0, std::abs(route_body)));
        }
    }
  }
  return worst;
}

double overlap_consistency_defect(const GluedManifold& g,
                                  const std::vector<DiscreteField>& fields) {
  double worst = 0.0;
  for (int c = 0; c < int(g.charts.size()); ++c) {
    const GluedChart& gc = g.charts[c];
    for (const auto& [node, stencil] : gc.coupling) {
      const int i = int(node / gc.chart.ntheta);
      const int j = int(node % gc.chart.ntheta);
      double acc = 0.0;
      for (const auto& e : stencil) {
        const GluedChart& src = g.charts[e.chart];
        acc += e.w * fields[e.chart](int(e.node / src.chart.ntheta),
                                     int(e.node % src.chart.ntheta));
      }
      worst = std::max(worst, std::abs(acc - fields[c](i, j)));
    }
  }
  return worst;
}

DecayScan error_decay_scan(const GluingConfig& config, const std::vector<double>& T_list) {
  if (T_list.size() < 4) throw config_error("error_decay_scan: need at least 4 values of T");
  DecayScan scan;
  for (double T : T_list) {
    GluingConfig cfg = config;
    for (auto& t : cfg.T) t = T;
    auto glued = build_connected_sum(cfg);
    auto uT = approximate_factor(glued);
    auto fT = error_field(glued, uT);
    scan.T.push_back(T);
    scan.sup_norm.push_back(error_sup(glued, fT));
  }
  for (std::size_t i = 0; i + 1 < scan.sup_norm.size(); ++i)
    if (scan.sup_norm[i + 1] >= scan.sup_norm[i]) scan.monotone = false;

  const std::size_t m = scan.T.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double y = std::log(scan.sup_norm[i]);
    sx += scan.T[i];
    sy += y;
    sxx += scan.T[i] * scan.T[i];
    sxy += scan.T[i] * y;
  }
  scan.rate = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const double icpt = (sy - scan.rate * sx) / m;
  double ssr = 0, sst = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double y = std::log(scan.sup_norm[i]);
    const double e = y - (icpt + scan.rate * scan.T[i]);
    ssr += e * e;
    const double d = y - sy / m;
    sst += d * d;
  }
  scan.r_squared = 1.0 - ssr / sst;
  return scan;
}

}  // namespace cpsc
