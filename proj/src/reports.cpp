#include "cpsc/reports.hpp"

#include <cmath>
#include <fstream>

namespace cpsc {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw config_error("config: " + msg);
}

template <typename T>
T field_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

}  // namespace

Json config_to_json(const GluingConfig& cfg, const CorrectorOptions& opt) {
  Json j;
  j["n"] = cfg.n.n;
  j["summands"] = Json::array();
  for (const auto& s : cfg.summands) {
    Json js;
    js["eps"] = s.eps;
    js["gluing_point"] = {{"t", s.t_p}, {"theta", s.pole > 0 ? 0.0 : M_PI}};
    js["alpha"] = s.alpha;
    js["deficiency_end"] = s.deficiency_end;
    j["summands"].push_back(js);
  }
  j["T"] = cfg.T;
  j["cutoff_width"] = cfg.cutoff_width;
  j["grids"] = {{"body_dt", cfg.grids.body_dt},
                {"neck_dt", cfg.grids.neck_dt},
                {"ntheta", cfg.grids.ntheta},
                {"L_end_periods", cfg.grids.L_end_periods},
                {"overlap", cfg.grids.overlap},
                {"mask_fraction", cfg.grids.mask_fraction}};
  j["solver"] = {{"delta", opt.delta},
                 {"max_iterations", opt.max_iterations},
                 {"residual_target", opt.residual_target},
                 {"contraction_window", opt.contraction_window},
                 {"newton", opt.newton},
                 {"end_cutoff_offset", opt.end_cutoff_offset},
                 {"end_cutoff_width", opt.end_cutoff_width},
                 {"seed", opt.seed}};
  return j;
}

void parse_run_config(const Json& doc, GluingConfig& cfg, CorrectorOptions& opt) {
  require(doc.is_object(), "document must be an object");
  require(doc.contains("n"), "missing field: n");
  require(doc.at("n").is_number_integer(), "n must be an integer");
  const int n = doc.at("n").get<int>();
  require(n >= 3, "n must be >= 3");
  cfg.n = Dimension{n};

  require(doc.contains("summands") && doc.at("summands").is_array() &&
              !doc.at("summands").empty(),
          "summands must be a non-empty array");
  cfg.summands.clear();
  for (const auto& js : doc.at("summands")) {
    SummandSpec s;
    require(js.contains("eps") && js.at("eps").is_number(), "summand needs a numeric eps");
    s.eps = js.at("eps").get<double>();
    if (js.contains("gluing_point")) {
      const auto& gp = js.at("gluing_point");
      s.t_p = field_or(gp, "t", 0.0);
      const double theta = field_or(gp, "theta", 0.0);
      require(std::abs(theta) < 1e-9 || std::abs(theta - M_PI) < 1e-9,
              "gluing_point.theta must be 0 or pi");
      s.pole = std::abs(theta) < 1e-9 ? +1 : -1;
    }
    s.alpha = field_or(js, "alpha", s.alpha);
    s.deficiency_end = field_or(js, "deficiency_end", s.deficiency_end);
    cfg.summands.push_back(s);
  }

  cfg.T.clear();
  if (doc.contains("T")) {
    require(doc.at("T").is_array(), "T must be an array");
    for (const auto& t : doc.at("T")) cfg.T.push_back(t.get<double>());
  }
  cfg.cutoff_width = field_or(doc, "cutoff_width", cfg.cutoff_width);
  if (doc.contains("grids")) {
    const auto& g = doc.at("grids");
    cfg.grids.body_dt = field_or(g, "body_dt", cfg.grids.body_dt);
    cfg.grids.neck_dt = field_or(g, "neck_dt", cfg.grids.neck_dt);
    cfg.grids.ntheta = field_or(g, "ntheta", cfg.grids.ntheta);
    cfg.grids.L_end_periods = field_or(g, "L_end_periods", cfg.grids.L_end_periods);
    cfg.grids.overlap = field_or(g, "overlap", cfg.grids.overlap);
    cfg.grids.mask_fraction = field_or(g, "mask_fraction", cfg.grids.mask_fraction);
  }
  if (doc.contains("solver")) {
    const auto& s = doc.at("solver");
    opt.delta = field_or(s, "delta", opt.delta);
    opt.max_iterations = field_or(s, "max_iterations", opt.max_iterations);
    opt.residual_target = field_or(s, "residual_target", opt.residual_target);
    opt.contraction_window = field_or(s, "contraction_window", opt.contraction_window);
    opt.newton = field_or(s, "newton", opt.newton);
    opt.end_cutoff_offset = field_or(s, "end_cutoff_offset", opt.end_cutoff_offset);
    opt.end_cutoff_width = field_or(s, "end_cutoff_width", opt.end_cutoff_width);
    opt.seed = field_or(s, "seed", opt.seed);
  }
  cfg.validate();
}

Json report_to_json(const SolveReport& report, const GluingConfig& cfg,
                    const CorrectorOptions& opt) {
  Json j;
  j["version"] = kVersion;
  j["config"] = config_to_json(cfg, opt);
  j["thread_count"] = report.thread_count;
  j["converged"] = report.converged;
  j["exit_code"] = report.exit_code;
  j["message"] = report.message;
  j["delta"] = report.delta;
  j["final_residual"] = report.final_residual;
  j["contraction_ratio"] = report.contraction_ratio;
  j["curvature_defect_sup"] = report.curvature_defect_sup;
  j["kernel_count"] = report.kernel_count;
  j["kernel_scale"] = report.kernel_scale;
  j["iterations"] = Json::array();
  for (const auto& it : report.iterations)
    j["iterations"].push_back({{"k", it.k},
                               {"residual", it.residual},
                               {"increment", it.increment},
                               {"ratio", it.ratio}});
  j["deficiency_coefficients"] = Json::array();
  for (long q = 0; q < report.coefficients.size(); ++q)
    j["deficiency_coefficients"].push_back(report.coefficients[q]);
  j["end_parameters"] = Json::array();
  for (const auto& e : report.end_parameters)
    j["end_parameters"].push_back({{"summand", e.summand},
                                   {"end", e.end},
                                   {"eps_prescribed", e.eps_prescribed},
                                   {"eps_hat", e.eps_hat},
                                   {"width", e.width},
                                   {"deficiency", e.deficiency},
                                   {"cylindrical", e.cylindrical},
                                   {"degenerate", e.degenerate}});
  if (report.L_end_sensitivity)
    j["L_end_sensitivity"] = *report.L_end_sensitivity;
  return j;
}

Json floquet_to_json(const FloquetResult& r, Dimension n, double eps) {
  Json j;
  j["n"] = n.n;
  j["eps"] = eps;
  j["j"] = r.j;
  j["delta"] = r.delta;  // growth per period convention
  j["delta_convention"] = "growth per period";
  j["multipliers"] = {{"re", {r.multipliers[0].real(), r.multipliers[1].real()}},
                      {"im", {r.multipliers[0].imag(), r.multipliers[1].imag()}}};
  j["oscillatory"] = r.oscillatory;
  j["period"] = r.period;
  j["monodromy_trace"] = r.monodromy_trace;
  j["monodromy_det"] = r.monodromy_det;
  return j;
}

namespace {
std::string chart_name(const GluedManifold& glued, int c) {
  const GluedChart& gc = glued.charts[std::size_t(c)];
  return (gc.is_neck ? "neck_" : "body_") + std::to_string(gc.owner);
}
}  // namespace

void write_chart_fields(const std::filesystem::path& dir, const std::string& prefix,
                        const GluedManifold& glued, const std::vector<DiscreteField>& fields) {
  for (int c = 0; c < int(glued.charts.size()); ++c) {
    const auto base = dir / (prefix + "_" + chart_name(glued, c));
    std::ofstream csv(base.string() + ".csv");
    fields[std::size_t(c)].write_csv(csv);
    std::ofstream meta(base.string() + ".meta.json");
    fields[std::size_t(c)].write_json_header(meta);
  }
}

std::vector<DiscreteField> read_chart_fields(const std::filesystem::path& dir,
                                             const std::string& prefix,
                                             const GluedManifold& glued) {
  std::vector<DiscreteField> out;
  for (int c = 0; c < int(glued.charts.size()); ++c) {
    const auto base = dir / (prefix + "_" + chart_name(glued, c));
    std::ifstream csv(base.string() + ".csv");
    if (!csv) throw config_error("missing field artifact: " + base.string() + ".csv");
    out.push_back(DiscreteField::read_csv(glued.charts[std::size_t(c)].chart, csv));
  }
  return out;
}

void write_iteration_trace(const std::filesystem::path& file, const SolveReport& report) {
  std::ofstream os(file);
  os.precision(17);
  os << "k,residual,increment,ratio\n";
  for (const auto& it : report.iterations)
    os << it.k << ',' << it.residual << ',' << it.increment << ',' << it.ratio << '\n';
}

}  // namespace cpsc
