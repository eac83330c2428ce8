// Command-line front end: Delaunay orbits, mode analysis, gluing, the
// nonlinear corrector, and parameter sweeps, with JSON/CSV artifacts.

#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>

#include "CLI11.hpp"

#include "cpsc/conformal.hpp"
#include "cpsc/reports.hpp"

namespace fs = std::filesystem;
using namespace cpsc;

namespace {

struct GlobalArgs {
  std::string out = ".";
  unsigned seed = 12345;
  int threads = 1;
  std::string config;
};

Json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw config_error("cannot open config file: " + path);
  Json doc;
  try {
    is >> doc;
  } catch (const std::exception& e) {
    throw config_error(std::string("config is not valid JSON: ") + e.what());
  }
  return doc;
}

void write_json(const fs::path& file, const Json& j) {
  std::ofstream os(file);
  os << j.dump(2) << '\n';
}

int run_delaunay(Dimension n, double eps, double tol, int samples, const GlobalArgs& g) {
  OrbitOptions oo;
  oo.tol = tol;
  oo.samples = samples;
  auto orbit = solve_orbit(n, eps, oo);
  fs::create_directories(g.out);
  {
    std::ofstream csv(fs::path(g.out) / "orbit.csv");
    orbit.write_csv(csv);
    std::ofstream hdr(fs::path(g.out) / "orbit.json");
    orbit.write_json_header(hdr);
  }
  std::cout << "period " << orbit.period() << "  energy " << orbit.energy() << "  u_max "
            << orbit.u_max() << (orbit.degenerate() ? "  (degenerate cylinder)" : "") << '\n';
  return 0;
}

int run_modes(Dimension n, double eps, int jmax, const GlobalArgs& g) {
  auto orbit = solve_orbit(n, eps);
  fs::create_directories(g.out);
  Json table;
  table["version"] = kVersion;
  table["n"] = n.n;
  table["eps"] = eps;
  table["period"] = orbit.period();
  table["delta_convention"] = "growth per period";
  table["modes"] = Json::array();
  for (int j = 0; j <= jmax; ++j) {
    if (orbit.degenerate()) {
      auto roots = indicial_roots_cylinder(n, j);
      table["modes"].push_back({{"j", j},
                                {"indicial_root_re", roots.first.real()},
                                {"indicial_root_im", roots.first.imag()},
                                {"degenerate", true}});
      continue;
    }
    auto r = floquet(orbit, j);
    Json row = floquet_to_json(r, n, eps);
    if (j == 0) row["jordan"] = std::abs(r.monodromy_trace - 2.0) < 1e-6;
    table["modes"].push_back(row);
  }
  write_json(fs::path(g.out) / "modes.json", table);
  if (!orbit.degenerate()) {
    auto dump = [&](const JacobiField& f, const std::string& name) {
      std::ofstream os(fs::path(g.out) / (name + ".csv"));
      f.write_csv(os);
    };
    dump(jacobi_translation(orbit), "jacobi_translation");
    dump(jacobi_parameter(orbit), "jacobi_parameter");
    dump(jacobi_explicit(orbit, +1), "jacobi_explicit_plus");
    dump(jacobi_explicit(orbit, -1), "jacobi_explicit_minus");
  }
  std::cout << "wrote modes table for j = 0.." << jmax << '\n';
  return 0;
}

int run_floquet(Dimension n, double eps, int j, const GlobalArgs& g) {
  auto orbit = solve_orbit(n, eps);
  auto r = floquet(orbit, j);
  fs::create_directories(g.out);
  write_json(fs::path(g.out) / "floquet.json", floquet_to_json(r, n, eps));
  std::cout << "j " << j << "  delta " << r.delta << "  period " << r.period << '\n';
  return 0;
}

int run_glue(const GlobalArgs& g) {
  GluingConfig cfg;
  CorrectorOptions opt;
  parse_run_config(load_json(g.config), cfg, opt);
  auto glued = build_connected_sum(cfg);
  auto uT = approximate_factor(glued);
  auto fT = error_field(glued, uT);
  fs::create_directories(g.out);
  write_chart_fields(g.out, "uT", glued, uT);
  write_chart_fields(g.out, "fT", glued, fT);
  Json j;
  j["version"] = kVersion;
  j["config"] = config_to_json(cfg, opt);
  j["error_sup"] = error_sup(glued, fT);
  j["error_sup_outside_transition"] = error_sup_outside_transition(glued, fT);
  j["overlap_isometry_defect"] = overlap_isometry_defect(glued);
  j["min_uT"] = [&] {
    double m = 1e300;
    for (const auto& f : uT) m = std::min(m, f.min());
    return m;
  }();
  write_json(fs::path(g.out) / "glue.json", j);
  std::cout << "||f_T||_inf = " << error_sup(glued, fT) << '\n';
  return 0;
}

int run_solve(const GlobalArgs& g, bool check_truncation) {
  GluingConfig cfg;
  CorrectorOptions opt;
  parse_run_config(load_json(g.config), cfg, opt);
  opt.seed = g.seed;
  auto glued = build_connected_sum(cfg);
  auto report = contraction_solve(glued, opt);
  report.thread_count = g.threads;

  if (report.converged && check_truncation) {
    GluingConfig wide = cfg;
    wide.grids.L_end_periods *= 2.0;
    auto glued2 = build_connected_sum(wide);
    auto report2 = contraction_solve(glued2, opt);
    if (report2.converged)
      report.L_end_sensitivity =
          std::abs(report2.curvature_defect_sup - report.curvature_defect_sup);
  }

  fs::create_directories(g.out);
  write_json(fs::path(g.out) / "report.json", report_to_json(report, cfg, opt));
  write_iteration_trace(fs::path(g.out) / "trace.csv", report);
  if (report.converged) {
    write_chart_fields(g.out, "final", glued, report.final_factor);
    write_chart_fields(g.out, "correction", glued, report.correction);
  }
  std::cout << (report.converged ? "converged" : ("failed: " + report.message)) << " after "
            << report.iterations.size() << " iterations; residual " << report.final_residual
            << ", curvature defect " << report.curvature_defect_sup << '\n';
  for (const auto& e : report.end_parameters)
    std::cout << "  end " << e.summand << (e.end > 0 ? '+' : '-') << ": eps_hat " << e.eps_hat
              << (e.deficiency ? " (deficiency)" : "") << (e.cylindrical ? " (cylindrical)" : "")
              << '\n';
  return report.exit_code;
}

int run_verify(const GlobalArgs& g) {
  GluingConfig cfg;
  CorrectorOptions opt;
  parse_run_config(load_json(g.config), cfg, opt);
  auto glued = build_connected_sum(cfg);
  const Json stored = load_json((fs::path(g.out) / "report.json").string());
  auto final_factor = read_chart_fields(g.out, "final", glued);

  // recompute the certification quantities from the stored fields
  SolveReport probe;
  probe.final_factor = final_factor;
  double defect_expected = stored.at("curvature_defect_sup").get<double>();
  std::vector<DiscreteField> F = final_factor;
  // curvature defect
  double defect = 0.0;
  {
    SolveReport tmp;
    tmp.final_factor = F;
    // reuse the library path through contraction internals is private;
    // recompute directly:
    defect = [&] {
      const Dimension n = cfg.n;
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
            if (gc.cls[ch.index(i, j)] != NodeClass::interior) continue;
            bool clean = true;
            for (int di = -2; di <= 2 && clean; ++di)
              for (int dj = -1; dj <= 1 && clean; ++dj) {
                const int j2 = std::clamp(j + dj, 0, ch.ntheta - 1);
                if (gc.cls[ch.index(i + di, j2)] != NodeClass::interior) clean = false;
              }
            if (clean) worst = std::max(worst, std::abs(R(i, j) - target));
          }
      }
      return worst;
    }();
  }
  bool ok = std::abs(defect - defect_expected) <= 1e-8 + 1e-6 * defect_expected;
  for (const auto& je : stored.at("end_parameters")) {
    auto est = end_parameter_estimate(glued, final_factor, je.at("summand").get<int>(),
                                      je.at("end").get<int>());
    if (std::abs(est.eps_hat - je.at("eps_hat").get<double>()) > 1e-7) ok = false;
  }
  std::cout << (ok ? "verify: artifacts consistent with the report\n"
                   : "verify: MISMATCH between artifacts and report\n");
  return ok ? 0 : 2;
}

int run_sweep(const GlobalArgs& g) {
  const Json doc = load_json(g.config);
  GluingConfig cfg;
  CorrectorOptions opt;
  parse_run_config(doc, cfg, opt);
  opt.seed = g.seed;
  std::vector<double> T_list;
  if (doc.contains("T_list"))
    for (const auto& t : doc.at("T_list")) T_list.push_back(t.get<double>());
  if (T_list.size() < 4) throw config_error("sweep: T_list must have at least 4 entries");

  auto scan = error_decay_scan(cfg, T_list);
  auto norms = right_inverse_norm_scan(cfg, T_list, opt);

  fs::create_directories(g.out);
  {
    std::ofstream csv(fs::path(g.out) / "sweep.csv");
    csv.precision(17);
    csv << "T,f_sup,inverse_norm\n";
    for (std::size_t i = 0; i < T_list.size(); ++i)
      csv << T_list[i] << ',' << scan.sup_norm[i] << ',' << norms.norm_estimate[i] << '\n';
  }
  Json j;
  j["version"] = kVersion;
  j["config"] = config_to_json(cfg, opt);
  j["T_list"] = T_list;
  j["decay_rate"] = scan.rate;
  j["decay_r_squared"] = scan.r_squared;
  j["decay_monotone"] = scan.monotone;
  j["inverse_norms"] = norms.norm_estimate;
  j["inverse_norm_plateau"] = norms.plateau;
  write_json(fs::path(g.out) / "sweep.json", j);
  std::cout << "decay rate " << scan.rate << " (R^2 " << scan.r_squared << "), norm plateau "
            << (norms.plateau ? "yes" : "no") << '\n';
  return 0;
}

int run_check(const GlobalArgs& g) {
  GluingConfig cfg;
  CorrectorOptions opt;
  parse_run_config(load_json(g.config), cfg, opt);
  std::cout << "config valid: " << cfg.summands.size() << " summands, " << cfg.T.size()
            << " junctions\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Connected-sum constructions of constant positive scalar curvature metrics"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalArgs g;
  app.add_option("--out", g.out, "output directory");
  app.add_option("--seed", g.seed, "seed for randomized probes");
  app.add_option("--threads", g.threads, "worker threads for sweeps");
  app.add_option("--config", g.config, "JSON configuration file");

  int n_arg = 3, jmax = 4, jmode = 1, samples = 2048;
  double eps = 0.3, tol = 1e-10;
  bool check_truncation = false;

  auto* cmd_delaunay = app.add_subcommand("delaunay", "integrate a Delaunay orbit");
  cmd_delaunay->add_option("--n", n_arg, "dimension");
  cmd_delaunay->add_option("--eps", eps, "neck parameter");
  cmd_delaunay->add_option("--tol", tol, "integration tolerance");
  cmd_delaunay->add_option("--samples", samples, "stored samples per period");

  auto* cmd_modes = app.add_subcommand("modes", "Floquet table and Jacobi fields");
  cmd_modes->add_option("--n", n_arg, "dimension");
  cmd_modes->add_option("--eps", eps, "neck parameter");
  cmd_modes->add_option("--jmax", jmax, "largest mode");

  auto* cmd_floquet = app.add_subcommand("floquet", "single-mode Floquet analysis");
  cmd_floquet->add_option("--n", n_arg, "dimension");
  cmd_floquet->add_option("--eps", eps, "neck parameter");
  cmd_floquet->add_option("--j", jmode, "mode");

  auto* cmd_glue = app.add_subcommand("glue", "build the approximate solution");
  auto* cmd_solve = app.add_subcommand("solve", "run the nonlinear corrector");
  cmd_solve->add_flag("--check-truncation", check_truncation,
                      "re-solve with doubled L_end and report the defect change");
  auto* cmd_verify = app.add_subcommand("verify", "re-derive certification from artifacts");
  auto* cmd_sweep = app.add_subcommand("sweep", "decay and inverse-norm scans over T");
  auto* cmd_check = app.add_subcommand("check", "validate a configuration");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_delaunay->parsed()) return run_delaunay(Dimension{n_arg}, eps, tol, samples, g);
    if (cmd_modes->parsed()) return run_modes(Dimension{n_arg}, eps, jmax, g);
    if (cmd_floquet->parsed()) return run_floquet(Dimension{n_arg}, eps, jmode, g);
    if (cmd_glue->parsed()) return run_glue(g);
    if (cmd_solve->parsed()) return run_solve(g, check_truncation);
    if (cmd_verify->parsed()) return run_verify(g);
    if (cmd_sweep->parsed()) return run_sweep(g);
    if (cmd_check->parsed()) return run_check(g);
  } catch (const config_error& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 3;
  } catch (const std::domain_error& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 3;
  } catch (const numeric_error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
