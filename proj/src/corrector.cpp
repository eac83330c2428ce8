#include "cpsc/corrector.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <algorithm>
#include <array>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <random>
#include <sstream>

#include "cpsc/conformal.hpp"

namespace cpsc {

// ---------------------------------------------------------------------------
// weights

double admissible_rate_bound(const GluedManifold& glued) {
  double bound = 1e300;
  for (const auto& orbit : glued.orbits) {
    const double rate =
        orbit.degenerate() ? 1.0 : floquet(orbit, 1).delta / orbit.period();
    bound = std::min(bound, rate);
  }
  return bound;
}

namespace {

// growth profile of the weight along an end: 0 on the core, ~|tau| beyond,
// smoothly saturating at the cap
double weight_exponent(double tau_past_core, double cap) {
  if (tau_past_core <= 0.0) return 0.0;
  const double m = (std::sqrt(1.0 + tau_past_core * tau_past_core) - 1.0) *
                   smoothstep(tau_past_core);
  return cap * std::tanh(m / cap);
}

// core interval of a body chart: all gluing features plus one period
void body_core(const GluedManifold& g, int summand, double& lo, double& hi) {
  const auto& spec = g.config.summands[summand];
  lo = spec.t_p - g.orbits[summand].period() - 1.0;
  hi = spec.t_p + g.orbits[summand].period() + 1.0;
}

}  // namespace

WeightFunction weight(const GluedManifold& glued, double delta, double max_exponent) {
  for (std::size_t i = 0; i < glued.orbits.size(); ++i) {
    const auto& orbit = glued.orbits[i];
    const double rate = orbit.degenerate() ? 1.0 : floquet(orbit, 1).delta / orbit.period();
    if (!(delta > 0.0) || delta >= rate) {
      std::ostringstream msg;
      msg << "weight: delta = " << delta << " is not admissible; summand " << i
          << " requires 0 < delta < delta_1/P = " << rate;
      throw config_error(msg.str());
    }
  }
  WeightFunction w;
  w.delta = delta;
  for (int c = 0; c < int(glued.charts.size()); ++c) {
    const GluedChart& gc = glued.charts[c];
    DiscreteField a(gc.chart, 1.0);
    if (!gc.is_neck) {
      double lo, hi;
      body_core(glued, gc.owner, lo, hi);
      for (int i = 0; i < gc.chart.na; ++i) {
        const double s = gc.chart.a(i);
        const double past = std::max(lo - s, s - hi);
        const double val = std::exp(weight_exponent(past, max_exponent));
        for (int j = 0; j < gc.chart.ntheta; ++j) a.at(i, j) = val;
      }
    }
    w.values.push_back(std::move(a));
  }
  return w;
}

// ---------------------------------------------------------------------------
// deficiency space

double end_translation(double period, double a) { return 0.5 * period * std::tanh(a); }

double end_parameter_shift(Dimension n, double eps, double b) {
  // smooth monotone surjection onto (-eps, ubar - eps) with unit slope at 0
  const double ubar = cylinder_constant(n);
  const double C = (ubar - eps) / eps;
  const double kappa = ubar / (eps * (ubar - eps));
  return -eps + ubar / (1.0 + C * std::exp(-kappa * b));
}

double trust_bound_a() { return std::atanh(0.25); }

double trust_bound_b(Dimension n, double eps) {
  // quarter of the one-sided ranges of d_eps
  const double ubar = cylinder_constant(n);
  const double target = 0.25 * std::min(eps, ubar - eps);
  double lo = 0.0, hi = 8.0;
  while (end_parameter_shift(n, eps, hi) < target && hi < 64.0) hi *= 2.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (end_parameter_shift(n, eps, mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

struct EndCutoff {
  double s_cut, width;
  int end;
  double arg(double s) const { return (end * (s - s_cut) + width) / (2.0 * width); }
  double operator()(double s) const { return smoothstep(arg(s)); }
  double d1(double s) const { return end * smoothstep_d1(arg(s)) / (2.0 * width); }
  double d2(double s) const { return smoothstep_d2(arg(s)) / (4.0 * width * width); }
};

// samples (du/deps, d/ds du/deps) on |s| <= span using the even symmetry
// of the orbit (the parameter field is even, its derivative odd)
void parameter_field_samples(const DelaunayOrbit& orbit, double span,
                             const std::vector<double>& s_values, std::vector<double>& phi,
                             std::vector<double>& phip) {
  JacobiOptions jo;
  jo.periods = std::ceil(span / orbit.period()) + 1.0;
  jo.samples_per_period = 4096;
  auto f = jacobi_parameter(orbit, jo);
  const double h = f.samples[1].t - f.samples[0].t;
  phi.clear();
  phip.clear();
  for (double s : s_values) {
    const double t = std::abs(s);
    const auto i = std::min(std::size_t(t / h), f.samples.size() - 2);
    const double frac = (t - double(i) * h) / h;
    phi.push_back((1.0 - frac) * f.samples[i].u + frac * f.samples[i + 1].u);
    const double d = (1.0 - frac) * f.samples[i].up + frac * f.samples[i + 1].up;
    phip.push_back(s >= 0 ? d : -d);
  }
}

}  // namespace

DeficiencyBasis deficiency_basis(const GluedManifold& glued, const CorrectorOptions& opt) {
  DeficiencyBasis basis;
  const Dimension n = glued.config.n;
  for (int i = 0; i < glued.n_bodies(); ++i) {
    const auto& spec = glued.config.summands[i];
    const auto& orbit = glued.orbits[i];
    DeficiencyEnd e;
    e.summand = i;
    e.end = spec.deficiency_end;
    e.s_cut = spec.t_p + e.end * opt.end_cutoff_offset;
    e.period = orbit.period();
    e.degenerate = orbit.degenerate();
    basis.ends.push_back(e);

    const GluedChart& gc = glued.charts[i];
    const Chart& ch = gc.chart;
    const EndCutoff chi{e.s_cut, opt.end_cutoff_width, e.end};
    Eigen::VectorXd va = Eigen::VectorXd::Zero(glued.total_unknowns);
    Eigen::VectorXd vb = Eigen::VectorXd::Zero(glued.total_unknowns);
    Eigen::VectorXd la = Eigen::VectorXd::Zero(glued.total_unknowns);
    Eigen::VectorXd lb = Eigen::VectorXd::Zero(glued.total_unknowns);

    std::vector<double> s_values(ch.na);
    for (int ii = 0; ii < ch.na; ++ii) s_values[ii] = ch.a(ii);
    std::vector<double> dude, dudep;
    if (!e.degenerate)
      parameter_field_samples(orbit, std::max(std::abs(ch.a0), std::abs(ch.a1)), s_values, dude,
                              dudep);

    const double omega0 = std::sqrt(double(n.n - 2));
    const double crit = n.crit();
    for (int ii = 0; ii < ch.na; ++ii) {
      const double s = ch.a(ii);
      const double c = chi(s);
      if (c == 0.0) continue;
      double fa, fb, fap, fbp;  // b-relative profiles and their s-derivatives
      if (e.degenerate) {
        // bounded constant-coefficient modes: the (a, b) derivatives of the
        // Fowler family launched from initial data (ubar + a, b) at s_cut
        fa = std::cos(omega0 * (s - e.s_cut));
        fap = -omega0 * std::sin(omega0 * (s - e.s_cut));
        fb = std::sin(omega0 * (s - e.s_cut)) / omega0;
        fbp = std::cos(omega0 * (s - e.s_cut));
      } else {
        fa = (-0.5 * orbit.period()) * orbit.up(s);
        fap = (-0.5 * orbit.period()) * orbit.upp(s);
        fb = dude[std::size_t(ii)];
        fbp = dudep[std::size_t(ii)];
      }
      // L applied to the cutoff field, by the product rule: the profile
      // itself solves the mode equation, so only 2 chi' phi' + chi'' phi
      // survives (exactly supported in the collar)
      const double c1 = chi.d1(s), c2d = chi.d2(s);
      const double lfa = 2.0 * c1 * fap + c2d * fa;
      const double lfb = 2.0 * c1 * fbp + c2d * fb;
      for (int jj = 0; jj < ch.ntheta; ++jj) {
        const long id = gc.unknown[ch.index(ii, jj)];
        if (id < 0) continue;
        const double om = gc.Omega(ii, jj);
        va[glued.offset[i] + id] = c * fa / om;
        vb[glued.offset[i] + id] = c * fb / om;
        if (gc.cls[ch.index(ii, jj)] == NodeClass::interior) {
          la[glued.offset[i] + id] = std::pow(om, -crit) * lfa;
          lb[glued.offset[i] + id] = std::pow(om, -crit) * lfb;
        }
      }
    }
    basis.fields.push_back(std::move(va));
    basis.fields.push_back(std::move(vb));
    basis.l_fields.push_back(std::move(la));
    basis.l_fields.push_back(std::move(lb));
  }
  return basis;
}

namespace {

// A sampled end profile with cubic Hermite evaluation (non-periodic).
struct EndProfile {
  double s0 = 0.0, h = 1.0;
  std::vector<OrbitSample> samples;

  double u(double s) const {
    const double x = (s - s0) / h;
    const auto i = std::min<std::size_t>(std::size_t(std::max(0.0, x)), samples.size() - 2);
    const double f = x - double(i);
    const auto& a = samples[i];
    const auto& b = samples[i + 1];
    const double f2 = f * f, f3 = f2 * f;
    return (2 * f3 - 3 * f2 + 1) * a.u + (f3 - 2 * f2 + f) * h * a.up +
           (-2 * f3 + 3 * f2) * b.u + (f3 - f2) * h * b.up;
  }
  double up(double s) const {
    const double x = (s - s0) / h;
    const auto i = std::min<std::size_t>(std::size_t(std::max(0.0, x)), samples.size() - 2);
    const double f = x - double(i);
    const auto& a = samples[i];
    const auto& b = samples[i + 1];
    const double f2 = f * f;
    return ((6 * f2 - 6 * f) * a.u + (3 * f2 - 4 * f + 1) * h * a.up +
            (-6 * f2 + 6 * f) * b.u + (3 * f2 - 2 * f) * h * b.up) / h;
  }
};

// Fowler solution from initial data (u0, up0) at s_mid, sampled over
// [s_lo, s_hi]; the exact family behind a degenerate (eps = ubar) end.
EndProfile integrate_profile(Dimension n, double u0, double up0, double s_mid, double s_lo,
                             double s_hi, double ds) {
  namespace odeint = boost::numeric::odeint;
  using State = std::array<double, 2>;
  struct Sys {
    Dimension n;
    void operator()(const State& y, State& dy, double) const {
      dy[0] = y[1];
      dy[1] = fowler_rhs(n, y[0]);
    }
  };
  EndProfile p;
  const int n_lo = int(std::ceil((s_mid - s_lo) / ds));
  const int n_hi = int(std::ceil((s_hi - s_mid) / ds));
  p.h = ds;
  p.s0 = s_mid - n_lo * ds;
  p.samples.assign(std::size_t(n_lo + n_hi) + 1, OrbitSample{});
  auto st = odeint::make_controlled<odeint::runge_kutta_fehlberg78<State>>(1e-12, 1e-12);
  // backward sweep via the time-reversed system
  {
    int idx = n_lo;
    auto obs = [&](const State& s, double t) { p.samples[std::size_t(idx--)] = {-t, s[0], -s[1]}; };
    State yr{u0, -up0};
    odeint::integrate_const(st, Sys{n}, yr, -s_mid, -s_mid + n_lo * ds * (1 + 1e-15), ds, obs);
    while (idx >= 0) p.samples[std::size_t(idx--)] = {p.s0, yr[0], -yr[1]};
  }
  // forward sweep
  {
    State y{u0, up0};
    int idx = n_lo;
    auto obs = [&](const State& s, double t) { p.samples[std::size_t(idx++)] = {t, s[0], s[1]}; };
    odeint::integrate_const(st, Sys{n}, y, s_mid, s_mid + n_hi * ds * (1 + 1e-15), ds, obs);
    while (idx <= n_lo + n_hi) p.samples[std::size_t(idx++)] = {s_hi, y[0], y[1]};
  }
  return p;
}

}  // namespace

EndModification apply_end_modification(const GluedManifold& glued, const DeficiencyBasis& basis,
                                       const Eigen::VectorXd& coefficients) {
  if (coefficients.size() != basis.dim())
    throw config_error("end_modification: coefficient count mismatch");
  const Dimension n = glued.config.n;
  const double c2 = 0.25 * n.n * (n.n - 2);
  const double crit = n.crit();
  EndModification out;
  for (const auto& gc : glued.charts) out.F.push_back(gc.F0);
  out.f_mod = Eigen::VectorXd::Zero(glued.total_unknowns);

  for (std::size_t e = 0; e < basis.ends.size(); ++e) {
    const DeficiencyEnd& de = basis.ends[e];
    const double a = coefficients[long(2 * e)];
    const double b = coefficients[long(2 * e + 1)];
    if (a == 0.0 && b == 0.0) continue;
    const auto& orbit = glued.orbits[de.summand];
    const GluedChart& gc = glued.charts[de.summand];
    const Chart& ch = gc.chart;
    const double eps = glued.config.summands[de.summand].eps;

    // the modified end profile: an exact Fowler solution
    EndProfile prof;
    if (de.degenerate) {
      const double ubar = cylinder_constant(n);
      const double H = hamiltonian(n, std::max(1e-6, ubar + a), b);
      if (!(H < 0.25 * fowler_potential(n, ubar)))
        throw numeric_error("end_modification: initial data outside the trust region");
      prof = integrate_profile(n, ubar + a, b, de.s_cut, ch.a0, ch.a1, 0.02);
    } else {
      if (std::abs(a) > trust_bound_a() || std::abs(b) > trust_bound_b(n, eps))
        throw numeric_error("end_modification: coefficients outside the trust region");
      const double tau = end_translation(de.period, a);
      const double deps = end_parameter_shift(n, eps, b);
      OrbitOptions oo;
      oo.tol = 1e-11;
      auto modified = solve_orbit(n, eps + deps, oo);
      const int count = int(std::ceil((ch.a1 - ch.a0) / 0.02));
      prof.s0 = ch.a0;
      prof.h = (ch.a1 - ch.a0) / count;
      prof.samples.resize(std::size_t(count) + 1);
      for (int i = 0; i <= count; ++i) {
        const double s = prof.s0 + i * prof.h;
        prof.samples[std::size_t(i)] = {s, modified.u(s - tau), modified.up(s - tau)};
      }
    }

    const EndCutoff chi{de.s_cut, 1.0, de.end};
    for (int i = 0; i < ch.na; ++i) {
      const double s = ch.a(i);
      const double cval = chi(s);
      if (cval == 0.0) continue;
      const double du = prof.u(s) - orbit.u(s);
      for (int j = 0; j < ch.ntheta; ++j) out.F[de.summand].at(i, j) += cval * du;

      // analytic residual of the blend chi u_mod + (1 - chi) u_eps over the
      // product background: supported where the cutoff varies
      const double c1 = chi.d1(s), c2d = chi.d2(s);
      if (c1 != 0.0 || c2d != 0.0 || (cval > 0.0 && cval < 1.0)) {
        const double um = prof.u(s), ue = orbit.u(s);
        const double dup = prof.up(s) - orbit.up(s);
        const double mix = cval * um + (1.0 - cval) * ue;
        const double fmod = 2.0 * c1 * dup + c2d * (um - ue) +
                            c2 * (std::pow(mix, crit) - cval * std::pow(um, crit) -
                                  (1.0 - cval) * std::pow(ue, crit));
        if (fmod != 0.0) {
          for (int j = 0; j < ch.ntheta; ++j) {
            const long id = gc.unknown[ch.index(i, j)];
            if (id < 0 || gc.cls[ch.index(i, j)] != NodeClass::interior) continue;
            out.f_mod[glued.offset[de.summand] + id] +=
                std::pow(gc.Omega(i, j), -crit) * fmod;
          }
        }
      }
    }
  }
  return out;
}

std::vector<DiscreteField> end_modification(const GluedManifold& glued,
                                            const DeficiencyBasis& basis,
                                            const Eigen::VectorXd& coefficients) {
  return apply_end_modification(glued, basis, coefficients).F;
}

// ---------------------------------------------------------------------------
// assembly

Eigen::VectorXd fields_to_vec(const GluedManifold& glued,
                              const std::vector<DiscreteField>& fields) {
  Eigen::VectorXd v(glued.total_unknowns);
  for (int c = 0; c < int(glued.charts.size()); ++c) {
    const GluedChart& gc = glued.charts[c];
    for (int i = 0; i < gc.chart.na; ++i)
      for (int j = 0; j < gc.chart.ntheta; ++j) {
        const long id = gc.unknown[gc.chart.index(i, j)];
        if (id >= 0) v[glued.offset[c] + id] = fields[c](i, j);
      }
  }
  return v;
}

std::vector<DiscreteField> vec_to_fields(const GluedManifold& glued, const Eigen::VectorXd& v) {
  std::vector<DiscreteField> out;
  for (int c = 0; c < int(glued.charts.size()); ++c) {
    const GluedChart& gc = glued.charts[c];
    DiscreteField f(gc.chart, 0.0);
    for (int i = 0; i < gc.chart.na; ++i)
      for (int j = 0; j < gc.chart.ntheta; ++j) {
        const long id = gc.unknown[gc.chart.index(i, j)];
        if (id >= 0) f.at(i, j) = v[glued.offset[c] + id];
      }
    out.push_back(std::move(f));
  }
  return out;
}

AssembledOperator assemble_linearization(const GluedManifold& glued,
                                         const std::vector<DiscreteField>& F) {
  const Dimension n = glued.config.n;
  const long N = glued.total_unknowns;
  AssembledOperator op;
  op.row_kind.assign(std::size_t(N), 0);
  op.volume.resize(N);
  op.omega.resize(N);
  op.pot0.resize(N);
  std::vector<Eigen::Triplet<double>> tL, tlap;
  tL.reserve(std::size_t(N) * 8);
  tlap.reserve(std::size_t(N) * 8);

  for (int c = 0; c < int(glued.charts.size()); ++c) {
    const GluedChart& gc = glued.charts[c];
    const Chart& ch = gc.chart;
    const double co = n.co();
    const double R0 = ch.background.scalar_curvature();
    StencilEntry row[12];
    for (int i = 0; i < ch.na; ++i)
      for (int j = 0; j < ch.ntheta; ++j) {
        const long node = ch.index(i, j);
        const long id = gc.unknown[node];
        if (id < 0) continue;
        const long r = glued.offset[c] + id;
        op.volume[r] = glued.node_volume(c, i, j);
        op.omega[r] = gc.Omega(i, j);
        op.pot0[r] = -co * R0;
        const NodeClass cls = gc.cls[node];
        if (cls == NodeClass::edge) {
          op.row_kind[std::size_t(r)] = 2;
          tL.emplace_back(r, r, 1.0);
          continue;
        }
        if (cls == NodeClass::coupling) {
          op.row_kind[std::size_t(r)] = 1;
          tL.emplace_back(r, r, 1.0);
          for (const auto& e : gc.coupling.at(node)) {
            const GluedChart& src = glued.charts[e.chart];
            const long sid = src.unknown[e.node];
            if (sid < 0) throw numeric_error("assemble: interpolation source masked");
            tL.emplace_back(r, glued.offset[e.chart] + sid, -e.w);
          }
          continue;
        }
        // PDE row: fourth-order length stencil on bodies where it fits
        int m = 0;
        if (!gc.is_neck) {
          m = laplace_stencil(ch, i, j, 4, row);
          if (m > 0) {
            for (int k = 0; k < m; ++k) {
              if (gc.unknown[ch.index(row[k].i, row[k].j)] < 0 ||
                  gc.cls[ch.index(row[k].i, row[k].j)] == NodeClass::masked) {
                m = 0;
                break;
              }
            }
          }
        }
        if (m == 0) m = laplace_stencil(ch, i, j, 2, row);
        if (m == 0) throw numeric_error("assemble: stencil does not fit");
        const double om_inv_crit = std::pow(gc.Omega(i, j), -n.crit());
        for (int k = 0; k < m; ++k) {
          const long q = gc.unknown[ch.index(row[k].i, row[k].j)];
          if (q < 0) throw numeric_error("assemble: PDE stencil touches a masked node");
          const long col = glued.offset[c] + q;
          tlap.emplace_back(r, col, row[k].c);
          tL.emplace_back(r, col,
                          om_inv_crit * row[k].c * glued.charts[c].Omega(row[k].i, row[k].j));
        }
        const double pot =
            -co * R0 + n.com() * double(n.n * (n.n - 1)) * std::pow(F[c](i, j), n.cl());
        tL.emplace_back(r, r, om_inv_crit * pot * gc.Omega(i, j));
        tlap.emplace_back(r, r, 0.0);  // keep the sparsity pattern aligned
      }
  }
  op.L.resize(N, N);
  op.L.setFromTriplets(tL.begin(), tL.end());
  op.lap.resize(N, N);
  op.lap.setFromTriplets(tlap.begin(), tlap.end());
  return op;
}

Eigen::VectorXd nonlinear_residual(const GluedManifold& glued, const AssembledOperator& op,
                                   const std::vector<DiscreteField>& f_T,
                                   const DeficiencyBasis& basis, const Eigen::VectorXd& v,
                                   const Eigen::VectorXd& coefficients) {
  const Dimension n = glued.config.n;
  const double c2 = n.co() * double(n.n * (n.n - 1));
  const long N = glued.total_unknowns;

  auto mod = apply_end_modification(glued, basis, coefficients);
  Eigen::VectorXd F = fields_to_vec(glued, mod.F);
  Eigen::VectorXd G = F + op.omega.cwiseProduct(v);
  if (G.minCoeff() <= 0.0) throw numeric_error("nonlinear_residual: factor lost positivity");

  // defect correction against the modified background: its own residual is
  // injected analytically (f_T on the necks, f_mod in the end collars), so
  // discretization error of the background never enters the iteration
  const Eigen::VectorXd d = G - F;
  const Eigen::VectorXd lapd = op.lap * d;
  Eigen::VectorXd fvec = fields_to_vec(glued, f_T);

  Eigen::VectorXd R(N);
  for (long r = 0; r < N; ++r) {
    if (op.row_kind[std::size_t(r)] != 0) {
      R[r] = 0.0;  // constraint residuals handled by the linear rows
      continue;
    }
    const double nl = c2 * (std::pow(G[r], n.crit()) - std::pow(F[r], n.crit()));
    R[r] = std::pow(op.omega[r], -n.crit()) * (lapd[r] + op.pot0[r] * d[r] + nl) + fvec[r] +
           mod.f_mod[r];
  }
  // constraint rows: interpolation and edge consistency of the increment
  Eigen::VectorXd Lv = op.L * v;
  for (long r = 0; r < N; ++r)
    if (op.row_kind[std::size_t(r)] != 0) R[r] = Lv[r];
  return R;
}

// ---------------------------------------------------------------------------
// bordered solver

struct BorderedSolver::Impl {
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  Eigen::SparseMatrix<double> K;  // bordered system [L B; W^T D 0]
  Eigen::MatrixXd W;              // basis fields as columns
  Eigen::MatrixXd gram;           // W^T D W (projection Gram)
  Eigen::LLT<Eigen::MatrixXd> gram_llt;
  Eigen::VectorXd wdiag;          // alpha^{2 delta} * volume (norms)
  Eigen::VectorXd pdiag;          // wdiag restricted to PDE rows (projection)
  long N = 0;
  int m = 0;
};

BorderedSolver::BorderedSolver(const GluedManifold& glued, const AssembledOperator& op,
                               const DeficiencyBasis& basis, const WeightFunction& w)
    : impl_(new Impl) {
  const long N = glued.total_unknowns;
  const int m = basis.dim();
  impl_->N = N;
  impl_->m = m;
  impl_->wdiag.resize(N);
  for (int c = 0; c < int(glued.charts.size()); ++c) {
    const GluedChart& gc = glued.charts[c];
    for (int i = 0; i < gc.chart.na; ++i)
      for (int j = 0; j < gc.chart.ntheta; ++j) {
        const long id = gc.unknown[gc.chart.index(i, j)];
        if (id < 0) continue;
        impl_->wdiag[glued.offset[c] + id] =
            std::pow(w.values[std::size_t(c)](i, j), 2.0 * w.delta) *
            glued.node_volume(c, i, j);
      }
  }
  // the split is driven by the PDE rows; constraint rows are exact anyway
  impl_->pdiag = impl_->wdiag;
  for (long r = 0; r < N; ++r)
    if (op.row_kind[std::size_t(r)] != 0) impl_->pdiag[r] = 0.0;

  if (m > 0) {
    impl_->W.resize(N, m);
    for (int k = 0; k < m; ++k) impl_->W.col(k) = basis.fields[std::size_t(k)];
    impl_->gram = impl_->W.transpose() * impl_->pdiag.asDiagonal() * impl_->W;
    impl_->gram_llt.compute(impl_->gram);
    if (impl_->gram_llt.info() != Eigen::Success)
      throw numeric_error("solve_bordered: deficiency Gram matrix is singular");
  }
  impl_->K = bordered_matrix(glued, op, basis, w);
  impl_->lu.compute(impl_->K);
  if (impl_->lu.info() != Eigen::Success)
    throw numeric_error("solve_bordered: factorization failed (near-singular system)");
}

Eigen::SparseMatrix<double> bordered_matrix(const GluedManifold& glued,
                                            const AssembledOperator& op,
                                            const DeficiencyBasis& basis,
                                            const WeightFunction& w) {
  const long N = glued.total_unknowns;
  const int m = basis.dim();
  Eigen::VectorXd pdiag(N);
  for (int c = 0; c < int(glued.charts.size()); ++c) {
    const GluedChart& gc = glued.charts[c];
    for (int i = 0; i < gc.chart.na; ++i)
      for (int j = 0; j < gc.chart.ntheta; ++j) {
        const long id = gc.unknown[gc.chart.index(i, j)];
        if (id < 0) continue;
        pdiag[glued.offset[c] + id] =
            std::pow(w.values[std::size_t(c)](i, j), 2.0 * w.delta) *
            glued.node_volume(c, i, j);
      }
  }
  for (long r = 0; r < N; ++r)
    if (op.row_kind[std::size_t(r)] != 0) pdiag[r] = 0.0;

  // rows 0..N-1 act on the total through the PDE rows but constrain only v
  // at the boundary rows (the family carries the boundary data through the
  // B columns); the last m rows enforce v perp_D W
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(std::size_t(op.L.nonZeros()) + std::size_t(4 * m) * std::size_t(N));
  for (int k = 0; k < op.L.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(op.L, k); it; ++it)
      trips.emplace_back(it.row(), it.col(), it.value());
  for (int k = 0; k < m; ++k) {
    // analytic collar-supported images: the discrete L applied to the basis
    // fields would carry amplified truncation noise along the far ends
    const Eigen::VectorXd& B = basis.l_fields[std::size_t(k)];
    const Eigen::VectorXd& W = basis.fields[std::size_t(k)];
    for (long r = 0; r < N; ++r) {
      if (B[r] != 0.0) trips.emplace_back(r, N + k, B[r]);
      const double val = pdiag[r] * W[r];
      if (val != 0.0) trips.emplace_back(N + k, r, val);
    }
  }
  Eigen::SparseMatrix<double> K(N + m, N + m);
  K.setFromTriplets(trips.begin(), trips.end());
  return K;
}

BorderedSolver::~BorderedSolver() = default;
BorderedSolver::BorderedSolver(BorderedSolver&&) noexcept = default;
BorderedSolver& BorderedSolver::operator=(BorderedSolver&&) noexcept = default;

BorderedSolver::Result BorderedSolver::solve(const Eigen::VectorXd& f) const {
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(impl_->N + impl_->m);
  rhs.head(impl_->N) = f;
  Eigen::VectorXd x = impl_->lu.solve(rhs);
  Result r;
  r.v = x.head(impl_->N);
  r.coeffs = x.tail(impl_->m);
  r.linear_residual = (impl_->K * x - rhs).norm() / std::max(1e-300, f.norm());
  return r;
}

BorderedSolver::Result BorderedSolver::split(const Eigen::VectorXd& total) const {
  Result r;
  if (impl_->m > 0) {
    // weighted least-squares split total = v + W c with v of minimal norm
    r.coeffs = impl_->gram_llt.solve(impl_->W.transpose() *
                                     (impl_->pdiag.asDiagonal() * total));
    r.v = total - impl_->W * r.coeffs;
  } else {
    r.coeffs.resize(0);
    r.v = total;
  }
  return r;
}

double BorderedSolver::norm_minus_delta(const Eigen::VectorXd& f) const {
  return std::sqrt(f.dot(impl_->wdiag.cwiseProduct(f)));
}

double BorderedSolver::solution_norm(const Result& r) const {
  return std::sqrt(r.v.dot(impl_->wdiag.cwiseProduct(r.v)) + r.coeffs.squaredNorm());
}

double BorderedSolver::condition_hint() const {
  // crude smallest-singular-value estimate by a few inverse power steps
  Eigen::VectorXd x = Eigen::VectorXd::Ones(impl_->N + impl_->m);
  x.normalize();
  double nrm = 1.0;
  for (int it = 0; it < 8; ++it) {
    x = impl_->lu.solve(x);
    nrm = x.norm();
    x /= nrm;
  }
  return 1.0 / nrm;  // approx sigma_min of the bordered system
}

// ---------------------------------------------------------------------------
// kernel diagnostics

namespace {
KernelDiagnostic smallest_singular_values(const Eigen::SparseMatrix<double>& K, double scale,
                                          double window, int howmany, unsigned seed,
                                          const Eigen::VectorXd* rscale);
}  // namespace

KernelDiagnostic kernel_diagnostic(const GluedManifold& glued, const AssembledOperator& op,
                                   const WeightFunction& w, double sign_delta, double window,
                                   int howmany, unsigned seed) {
  const long N = glued.total_unknowns;
  Eigen::VectorXd lscale(N), rscale(N);
  for (int c = 0; c < int(glued.charts.size()); ++c) {
    const GluedChart& gc = glued.charts[c];
    for (int i = 0; i < gc.chart.na; ++i)
      for (int j = 0; j < gc.chart.ntheta; ++j) {
        const long id = gc.unknown[gc.chart.index(i, j)];
        if (id < 0) continue;
        const long r = glued.offset[c] + id;
        // H_{s delta} functions are alpha^{s delta} times L^2: the conjugated
        // operator is alpha^{-s delta} L alpha^{s delta}
        const double a = std::pow(w.values[std::size_t(c)](i, j), -sign_delta * w.delta);
        const double sv = std::sqrt(glued.node_volume(c, i, j));
        lscale[r] = a * sv;
        rscale[r] = 1.0 / (a * sv);
      }
  }
  Eigen::SparseMatrix<double> K = lscale.asDiagonal() * op.L * rscale.asDiagonal();
  // reference scale: the O(1) mass term of the cylinder-mode operators,
  // n(n-2)/4.  (The discrete operator norm itself grows like 1/h^2 and
  // would misclassify the physical spectral gap.)
  const Dimension n = glued.config.n;
  return smallest_singular_values(K, 0.25 * double(n.n) * double(n.n - 2), window, howmany, seed,
                                  &rscale);
}

namespace {

KernelDiagnostic smallest_singular_values(const Eigen::SparseMatrix<double>& K, double scale,
                                          double window, int howmany, unsigned seed,
                                          const Eigen::VectorXd* rscale) {
  KernelDiagnostic out;
  out.scale = scale;
  const long N = K.rows();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(K);
  if (lu.info() != Eigen::Success) {
    out.count = howmany;
    return out;
  }
  const int k = int(std::min<long>(howmany, N));
  Eigen::MatrixXd X(N, k);
  for (long i = 0; i < N; ++i)
    for (int q = 0; q < k; ++q) X(i, q) = gauss(rng);
  for (int it = 0; it < 40; ++it) {
    for (int q = 0; q < k; ++q) X.col(q) = lu.solve(lu.adjoint().solve(X.col(q)));
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
    X = qr.householderQ() * Eigen::MatrixXd::Identity(N, k);
  }
  Eigen::MatrixXd B = K * X;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(B, Eigen::ComputeThinV);
  for (int q = k - 1; q >= 0; --q) {
    const double sigma = svd.singularValues()[q];
    out.sigmas.push_back(sigma);
    if (sigma < window * out.scale) {
      ++out.count;
      Eigen::VectorXd dir = X * svd.matrixV().col(q);
      out.vectors.push_back(rscale ? Eigen::VectorXd(rscale->asDiagonal() * dir) : dir);
    }
  }
  return out;
}

}  // namespace

KernelDiagnostic kernel_diagnostic_bordered(const GluedManifold& glued,
                                            const AssembledOperator& op,
                                            const DeficiencyBasis& basis,
                                            const WeightFunction& w, double window, int howmany,
                                            unsigned seed) {
  const Dimension n = glued.config.n;
  auto K = bordered_matrix(glued, op, basis, w);
  return smallest_singular_values(K, 0.25 * double(n.n) * double(n.n - 2), window, howmany, seed,
                                  nullptr);
}

PairingResult deficiency_pairing(const std::vector<Eigen::VectorXd>& near_kernel,
                                 const DeficiencyBasis& basis, const AssembledOperator& op) {
  PairingResult out;
  const int nk = int(near_kernel.size());
  const int nw = basis.dim();
  out.M.resize(nk, nw);
  if (nk == 0 || nw == 0) {
    out.smallest_singular_value = 0.0;
    return out;  // vacuously nondegenerate when the kernel basis is empty
  }
  for (int kx = 0; kx < nk; ++kx) {
    Eigen::VectorXd phi = near_kernel[std::size_t(kx)];
    const double phin = std::sqrt(phi.dot(op.volume.cwiseProduct(phi)));
    for (int wx = 0; wx < nw; ++wx) {
      Eigen::VectorXd Lw = op.L * basis.fields[std::size_t(wx)];
      for (long r = 0; r < Lw.size(); ++r)
        if (op.row_kind[std::size_t(r)] != 0) Lw[r] = 0.0;
      const double Lwn = std::sqrt(Lw.dot(op.volume.cwiseProduct(Lw)));
      out.M(kx, wx) = Lw.dot(op.volume.cwiseProduct(phi)) / (Lwn * phin);
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.M);
  out.smallest_singular_value = svd.singularValues().tail(1)[0];
  return out;
}

InverseNormScan right_inverse_norm_scan(const GluingConfig& config,
                                        const std::vector<double>& T_list,
                                        const CorrectorOptions& opt) {
  InverseNormScan scan;
  for (double T : T_list) {
    GluingConfig cfg = config;
    for (auto& t : cfg.T) t = T;
    auto glued = build_connected_sum(cfg);
    auto basis = deficiency_basis(glued, opt);
    auto wt = weight(glued, opt.delta, opt.weight_cap);
    std::vector<DiscreteField> F0;
    for (const auto& gc : glued.charts) F0.push_back(gc.F0);
    auto op = assemble_linearization(glued, F0);
    BorderedSolver solver(glued, op, basis, wt);

    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double worst = 0.0;
    for (int probe = 0; probe < 8; ++probe) {
      Eigen::VectorXd f = Eigen::VectorXd::Zero(glued.total_unknowns);
      // smooth bumps supported in the weight core of random bodies
      for (int b = 0; b < 4; ++b) {
        const int c = int(uni(rng) * glued.n_bodies());
        const GluedChart& gc = glued.charts[c];
        double lo, hi;
        body_core(glued, c, lo, hi);
        const double s0 = lo + uni(rng) * (hi - lo);
        const double th0 = uni(rng) * M_PI;
        const double amp = gauss(rng);
        for (int i = 0; i < gc.chart.na; ++i)
          for (int j = 0; j < gc.chart.ntheta; ++j) {
            const long id = gc.unknown[gc.chart.index(i, j)];
            if (id < 0 || gc.cls[gc.chart.index(i, j)] != NodeClass::interior) continue;
            const double ds = gc.chart.a(i) - s0;
            const double dt = gc.chart.theta(j) - th0;
            f[glued.offset[c] + id] += amp * std::exp(-2.0 * (ds * ds + dt * dt));
          }
      }
      auto r = solver.solve(f);
      const double fn = solver.norm_minus_delta(f);
      if (fn > 0) worst = std::max(worst, solver.solution_norm(r) / fn);
    }
    scan.T.push_back(T);
    scan.norm_estimate.push_back(worst);
  }
  const double mx = *std::max_element(scan.norm_estimate.begin(), scan.norm_estimate.end());
  const double mn = *std::min_element(scan.norm_estimate.begin(), scan.norm_estimate.end());
  scan.plateau = mx <= 1.5 * mn;
  return scan;
}

}  // namespace cpsc
