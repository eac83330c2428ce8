#include "cpsc/solve.hpp"

#include "cpsc/fowler.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cpsc/conformal.hpp"

namespace cpsc {

namespace {

// zonal average of a chart field at one length row
double zonal_average(const DiscreteField& f, int i) {
  const Chart& ch = f.chart();
  double acc = 0.0, wsum = 0.0;
  for (int j = 0; j < ch.ntheta; ++j) {
    const double w = ch.theta_measure(j);
    acc += w * f(i, j);
    wsum += w;
  }
  return acc / wsum;
}

// least-squares misfit of the orbit family against samples (s_i, A_i) at a
// given eps, optimizing the phase by a local golden-section search
double profile_misfit(Dimension n, double eps, const std::vector<double>& s,
                      const std::vector<double>& A, double phase_guess, double* phase_out) {
  OrbitOptions oo;
  oo.tol = 1e-11;
  auto orbit = solve_orbit(n, eps, oo);
  auto misfit = [&](double phase) {
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double d = A[i] - orbit.u(s[i] - phase);
      acc += d * d;
    }
    return acc;
  };
  double lo = phase_guess - 0.6 * orbit.period();
  double hi = phase_guess + 0.6 * orbit.period();
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = misfit(x1), f2 = misfit(x2);
  for (int it = 0; it < 60; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = misfit(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = misfit(x2);
    }
  }
  const double phase = 0.5 * (lo + hi);
  if (phase_out) *phase_out = phase;
  return misfit(phase);
}

}  // namespace

EndParameterEstimate end_parameter_estimate(const GluedManifold& glued,
                                            const std::vector<DiscreteField>& total_factor,
                                            int summand, int end) {
  const Dimension n = glued.config.n;
  const auto& orbit = glued.orbits[summand];
  const auto& spec = glued.config.summands[summand];
  const GluedChart& gc = glued.charts[summand];
  const Chart& ch = gc.chart;
  const double P = orbit.period();

  EndParameterEstimate est;
  est.summand = summand;
  est.end = end;
  est.eps_prescribed = spec.eps;
  est.deficiency = (spec.deficiency_end == end);
  est.degenerate = orbit.degenerate();

  // sample the zonal average over the last full period before the boundary
  const double margin = 1.0;
  const double s_hi = (end > 0 ? ch.a1 : -ch.a0) - margin;
  const double s_lo = s_hi - P;
  if (s_lo < 0.0) throw numeric_error("end_parameter_estimate: end shorter than one period");
  std::vector<double> s, A;
  for (int i = 0; i < ch.na; ++i) {
    const double se = end > 0 ? ch.a(i) : -ch.a(i);
    if (se < s_lo || se > s_hi) continue;
    s.push_back(ch.a(i));
    A.push_back(zonal_average(total_factor[std::size_t(summand)], i));
  }

  // initial guess from the averaged Hamiltonian along the window
  double H = 0.0;
  {
    int cnt = 0;
    for (std::size_t i = 2; i + 2 < s.size(); ++i) {
      const double h = s[1] - s[0];
      const double up =
          (-A[i + 2] + 8.0 * A[i + 1] - 8.0 * A[i - 1] + A[i - 2]) / (12.0 * h);
      H += up * up + fowler_potential(n, A[i]);
      ++cnt;
    }
    H /= std::max(1, cnt);
  }
  const double ubar = cylinder_constant(n);
  const double Hmin = fowler_potential(n, ubar);
  double eps0 = H <= Hmin ? ubar : (H >= 0.0 ? 1e-3 : eps_from_energy(n, H));

  if (est.degenerate || eps0 > ubar * (1.0 - 1e-7)) {
    // asymptotically cylindrical end
    est.eps_hat = ubar;
    est.cylindrical = true;
    double dev = 0.0;
    for (double a : A) dev = std::max(dev, std::abs(a - ubar));
    est.width = dev;
    return est;
  }

  // phase guess: the profile minimum inside the window
  double phase = s[0];
  {
    double best = 1e300;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (A[i] < best) {
        best = A[i];
        phase = s[i];
      }
  }

  // golden-section refinement of eps around the energy estimate
  double lo = std::max(1e-4, eps0 * 0.9), hi = std::min(ubar * (1 - 1e-9), eps0 * 1.1);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = profile_misfit(n, x1, s, A, phase, nullptr);
  double f2 = profile_misfit(n, x2, s, A, phase, nullptr);
  for (int it = 0; it < 40 && hi - lo > 1e-10; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = profile_misfit(n, x1, s, A, phase, nullptr);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = profile_misfit(n, x2, s, A, phase, nullptr);
    }
  }
  est.eps_hat = 0.5 * (lo + hi);
  const double resid = std::sqrt(profile_misfit(n, est.eps_hat, s, A, phase, nullptr) /
                                 double(s.size()));
  est.width = resid / std::max(1e-12, std::abs(fowler_potential_du(n, est.eps_hat))) +
              (hi - lo);
  est.cylindrical = est.eps_hat > ubar * (1.0 - 1e-4);
  return est;
}

namespace {

// sup of the fourth-order scalar-curvature defect over the body charts
// (interior rows away from coupling fringes and edges).  The pointwise
// curvature divides the residual by u^{(n+2)/(n-2)}; it is meaningful only
// where the factor is at body scale.  Deep in the neck the factor decays
// like e^{-(n-2)T/4}, any fixed truncation error is amplified by u^{-5},
// and the certification there is carried by the weighted residual.
double curvature_defect(const GluedManifold& glued, const std::vector<DiscreteField>& F) {
  const Dimension n = glued.config.n;
  const double target = double(n.n * (n.n - 1));
  double worst = 0.0;
  for (int c = 0; c < glued.n_bodies(); ++c) {
    const GluedChart& gc = glued.charts[c];
    const Chart& ch = gc.chart;
    DiscreteField Fc = F[std::size_t(c)];
    for (int i = 0; i < ch.na; ++i)
      for (int j = 0; j < ch.ntheta; ++j)
        if (gc.cls[ch.index(i, j)] == NodeClass::masked) Fc.at(i, j) = 1.0;
    auto R = scalar_curvature_of(Fc, 4);
    for (int i = 2; i < ch.na - 2; ++i)
      for (int j = 0; j < ch.ntheta; ++j) {
        const long node = ch.index(i, j);
        if (gc.cls[node] != NodeClass::interior) continue;
        // skip nodes whose wide stencil reaches the mask fringe
        bool clean = true;
        for (int di = -2; di <= 2 && clean; ++di)
          for (int dj = -1; dj <= 1 && clean; ++dj) {
            const int j2 = std::clamp(j + dj, 0, ch.ntheta - 1);
            if (gc.cls[ch.index(i + di, j2)] != NodeClass::interior) clean = false;
          }
        if (!clean) continue;
        worst = std::max(worst, std::abs(R(i, j) - target));
      }
  }
  return worst;
}

}  // namespace

SolveReport contraction_solve(const GluedManifold& glued, const CorrectorOptions& opt) {
  SolveReport rep;
  rep.delta = opt.delta;

  auto uT = approximate_factor(glued);
  auto fT = error_field(glued, uT);
  auto basis = deficiency_basis(glued, opt);
  auto wt = weight(glued, opt.delta, opt.weight_cap);
  std::vector<DiscreteField> F0;
  for (const auto& gc : glued.charts) F0.push_back(gc.F0);
  auto op = assemble_linearization(glued, F0);
  BorderedSolver solver(glued, op, basis, wt);

  Eigen::VectorXd v = Eigen::VectorXd::Zero(glued.total_unknowns);
  Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(basis.dim());

  double prev_increment = -1.0;
  int rising = 0;
  for (int k = 0; k < opt.max_iterations; ++k) {
    Eigen::VectorXd R;
    try {
      R = nonlinear_residual(glued, op, fT, basis, v, coeffs);
    } catch (const numeric_error&) {
      rep.message = "residual evaluation failed (positivity lost)";
      rep.exit_code = 2;
      return rep;
    }
    const double rnorm = solver.norm_minus_delta(R);

    IterationRecord rec;
    rec.k = k;
    rec.residual = rnorm;
    if (rnorm <= opt.residual_target) {
      rep.converged = true;
      rep.final_residual = rnorm;
      rep.iterations.push_back(rec);
      break;
    }

    if (opt.newton && k > 0) {
      auto Fc = end_modification(glued, basis, coeffs);
      Eigen::VectorXd Fv = fields_to_vec(glued, Fc) + op.omega.cwiseProduct(v);
      op = assemble_linearization(glued, vec_to_fields(glued, Fv));
      solver = BorderedSolver(glued, op, basis, wt);
    }

    // fixed-point update of the pair (v, c), with damping on positivity
    // loss or trust-region violations
    auto step = solver.solve(R);
    double lambda = 1.0;
    bool accepted = false;
    for (int attempt = 0; attempt < 6 && !accepted; ++attempt) {
      Eigen::VectorXd v_try = v - lambda * step.v;
      Eigen::VectorXd c_try = coeffs - lambda * step.coeffs;
      try {
        auto Fc = end_modification(glued, basis, c_try);
        Eigen::VectorXd G = fields_to_vec(glued, Fc) + op.omega.cwiseProduct(v_try);
        if (G.minCoeff() <= 0.0) throw numeric_error("positivity");
        v = std::move(v_try);
        coeffs = std::move(c_try);
        accepted = true;
      } catch (const numeric_error&) {
        lambda *= 0.5;
      }
    }
    if (!accepted) {
      rep.message = "step damping failed: factor positivity or trust region lost";
      rep.exit_code = 2;
      rep.iterations.push_back(rec);
      return rep;
    }

    const double inc = lambda * solver.solution_norm(step);
    rec.increment = inc;
    rec.ratio = prev_increment > 0 ? inc / prev_increment : 0.0;
    prev_increment = inc;
    rep.iterations.push_back(rec);

    if (rec.ratio >= 1.0 && k >= 2) {
      if (++rising >= opt.contraction_window) {
        rep.message = "divergence: contraction ratio >= 1 over the window";
        rep.exit_code = 2;
        return rep;
      }
    } else {
      rising = 0;
    }
  }

  if (!rep.converged) {
    if (rep.message.empty()) {
      rep.message = "iteration budget exhausted";
      rep.exit_code = 2;
    }
    return rep;
  }

  rep.exit_code = 0;
  rep.coefficients = coeffs;
  for (std::size_t i = 1; i < rep.iterations.size(); ++i) {
    if (i >= 3) rep.contraction_ratio = std::max(rep.contraction_ratio, rep.iterations[i].ratio);
  }

  // certification
  auto Ff = end_modification(glued, basis, coeffs);
  Eigen::VectorXd Fv = fields_to_vec(glued, Ff) + op.omega.cwiseProduct(v);
  rep.final_factor = vec_to_fields(glued, Fv);
  rep.correction = vec_to_fields(glued, v);
  rep.curvature_defect_sup = curvature_defect(glued, rep.final_factor);

  for (int i = 0; i < glued.n_bodies(); ++i)
    for (int end : {-1, +1})
      rep.end_parameters.push_back(end_parameter_estimate(glued, rep.final_factor, i, end));

  // nondegeneracy of the solved metric in the deficiency-augmented sense
  auto op_final = assemble_linearization(glued, rep.final_factor);
  auto kd = kernel_diagnostic_bordered(glued, op_final, basis, wt, 1e-6, 6, opt.seed);
  rep.kernel_count = kd.count;
  rep.kernel_scale = kd.scale;
  return rep;
}

double first_body_correction(const GluedManifold& glued, const SolveReport& report) {
  const GluedChart& gc = glued.charts[0];
  const Chart& ch = gc.chart;
  const auto& orbit = glued.orbits[0];
  const double lo = glued.config.summands[0].t_p - orbit.period() - 1.0;
  const double hi = glued.config.summands[0].t_p + orbit.period() + 1.0;
  double worst = 0.0;
  for (int i = 0; i < ch.na; ++i) {
    if (ch.a(i) < lo || ch.a(i) > hi) continue;
    for (int j = 0; j < ch.ntheta; ++j) {
      if (gc.cls[ch.index(i, j)] != NodeClass::interior) continue;
      worst = std::max(worst,
                       std::abs(report.final_factor[0](i, j) - orbit.u(ch.a(i))));
    }
  }
  return worst;
}

ScheduleResult chain_schedule_search(Dimension n, const std::vector<SummandSpec>& summands,
                                     const GridSpec& grids,
                                     const std::vector<double>& T_candidates,
                                     const CorrectorOptions& opt) {
  ScheduleResult result;
  std::vector<double> T_chosen;
  std::vector<double> prev_factor;  // first-body factor of the previous prefix

  for (int k = 2; k <= int(summands.size()); ++k) {
    const double bound = std::pow(2.0, -double(k) - 2.0);
    ScheduleStep step;
    step.junction = k - 2;
    step.bound = bound;
    bool found = false;
    for (double T : T_candidates) {
      std::vector<SummandSpec> prefix(summands.begin(), summands.begin() + k);
      std::vector<double> Ts = T_chosen;
      Ts.push_back(T);
      GluingConfig cfg = chain_config(n, prefix, Ts);
      cfg.grids = grids;
      auto glued = build_connected_sum(cfg);
      auto rep = contraction_solve(glued, opt);
      if (!rep.converged) continue;

      // correction on the first-body window relative to the previous prefix
      const GluedChart& gc = glued.charts[0];
      const Chart& ch = gc.chart;
      const auto& orbit = glued.orbits[0];
      const double lo = summands[0].t_p - orbit.period() - 1.0;
      const double hi = summands[0].t_p + orbit.period() + 1.0;
      std::vector<double> cur(std::size_t(ch.size()), 0.0);
      double corr = 0.0;
      for (int i = 0; i < ch.na; ++i) {
        if (ch.a(i) < lo || ch.a(i) > hi) continue;
        for (int j = 0; j < ch.ntheta; ++j) {
          const long node = ch.index(i, j);
          if (gc.cls[node] != NodeClass::interior) continue;
          cur[std::size_t(node)] = rep.final_factor[0](i, j);
          const double before =
              prev_factor.empty() ? orbit.u(ch.a(i)) : prev_factor[std::size_t(node)];
          corr = std::max(corr, std::abs(cur[std::size_t(node)] - before));
        }
      }
      if (corr <= bound) {
        step.T = T;
        step.correction = corr;
        T_chosen.push_back(T);
        prev_factor = std::move(cur);
        result.reports.push_back(std::move(rep));
        found = true;
        break;
      }
    }
    if (!found) {
      result.satisfied = false;
      result.steps.push_back(step);
      return result;
    }
    result.steps.push_back(step);
  }
  result.satisfied = true;
  return result;
}

}  // namespace cpsc
