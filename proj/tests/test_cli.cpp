// End-to-end checks of the command-line tool: exit codes, artifact layout,
// determinism of reports.

#include <cstdlib>
#include <vector>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code;
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string tmp = (fs::temp_directory_path() / "cpsc_cli_out.txt").string();
  const std::string cmd = std::string(CPSC_CLI_PATH) + " " + args + " > " + tmp + " 2>&1";
  const int rc = std::system(cmd.c_str());
  std::ifstream is(tmp);
  std::stringstream ss;
  ss << is.rdbuf();
  return {WEXITSTATUS(rc), ss.str()};
}

fs::path sandbox() {
  auto p = fs::temp_directory_path() / "cpsc_cli_sandbox";
  fs::create_directories(p);
  return p;
}

void write_config(const fs::path& file, double T, const std::string& extra = "") {
  std::ofstream os(file);
  os << R"({
  "n": 3,
  "summands": [
    {"eps": 0.4, "gluing_point": {"t": 0.0, "theta": 0.0}, "alpha": 0.3, "deficiency_end": -1},
    {"eps": 0.4, "gluing_point": {"t": 0.0, "theta": 3.141592653589793}, "alpha": 0.3, "deficiency_end": 1}
  ],
  "T": [)" << T
     << R"(],
  "grids": {"body_dt": 0.15, "neck_dt": 0.15, "ntheta": 16, "L_end_periods": 1.5},
  "solver": {"delta": 0.5, "residual_target": 1e-8})"
     << extra << "\n}\n";
}

}  // namespace

TEST_CASE("delaunay subcommand writes orbit artifacts") {
  auto dir = sandbox() / "delaunay";
  auto r = run("delaunay --n 3 --eps 0.3 --out " + dir.string());
  CHECK(r.code == 0);
  CHECK(r.out.find("u_max 0.97568") != std::string::npos);
  CHECK(fs::exists(dir / "orbit.csv"));
  CHECK(fs::exists(dir / "orbit.json"));

  // eps = ubar flagged degenerate
  auto rd = run("delaunay --n 3 --eps 0.7598356856515925 --out " + dir.string());
  CHECK(rd.code == 0);
  CHECK(rd.out.find("degenerate") != std::string::npos);

  // invalid eps is a configuration error
  CHECK(run("delaunay --n 3 --eps 0.9 --out " + dir.string()).code == 3);
}

TEST_CASE("modes subcommand") {
  auto dir = sandbox() / "modes";
  auto r = run("modes --n 3 --eps 0.3 --jmax 2 --out " + dir.string());
  CHECK(r.code == 0);
  std::ifstream is(dir / "modes.json");
  std::stringstream ss;
  ss << is.rdbuf();
  const std::string j = ss.str();
  CHECK(j.find("\"jordan\": true") != std::string::npos);
  CHECK(j.find("growth per period") != std::string::npos);
  CHECK(fs::exists(dir / "jacobi_translation.csv"));
  CHECK(fs::exists(dir / "jacobi_explicit_minus.csv"));

  // jmax = 0: a single row
  auto r0 = run("modes --n 3 --eps 0.3 --jmax 0 --out " + (sandbox() / "modes0").string());
  CHECK(r0.code == 0);
}

TEST_CASE("config validation paths") {
  auto dir = sandbox();
  // malformed JSON
  {
    std::ofstream os(dir / "broken.json");
    os << "{ not json";
  }
  auto r = run("check --config " + (dir / "broken.json").string());
  CHECK(r.code == 3);
  CHECK(r.out.find("configuration error") != std::string::npos);

  // T below the minimum carries the documented message
  write_config(dir / "lowT.json", 3.5);
  auto rt = run("check --config " + (dir / "lowT.json").string());
  CHECK(rt.code == 3);
  CHECK(rt.out.find("T must exceed 2*(cutoff_width+1)") != std::string::npos);

  write_config(dir / "ok.json", 10.0);
  CHECK(run("check --config " + (dir / "ok.json").string()).code == 0);
}

TEST_CASE("glue, solve, verify round trip with deterministic reports") {
  auto dir = sandbox();
  write_config(dir / "run.json", 12.0);

  auto rg = run("glue --config " + (dir / "run.json").string() + " --out " +
                (dir / "glue_out").string());
  CHECK(rg.code == 0);
  CHECK(fs::exists(dir / "glue_out" / "uT_neck_0.csv"));
  CHECK(fs::exists(dir / "glue_out" / "fT_body_1.csv"));

  auto rs = run("solve --config " + (dir / "run.json").string() + " --out " +
                (dir / "solve_a").string() + " --seed 7");
  CHECK(rs.code == 0);
  CHECK(rs.out.find("converged") != std::string::npos);
  CHECK(fs::exists(dir / "solve_a" / "report.json"));
  CHECK(fs::exists(dir / "solve_a" / "trace.csv"));
  CHECK(fs::exists(dir / "solve_a" / "final_body_0.csv"));

  // byte-identical reports for identical config + seed
  auto rs2 = run("solve --config " + (dir / "run.json").string() + " --out " +
                 (dir / "solve_b").string() + " --seed 7");
  CHECK(rs2.code == 0);
  std::ifstream a(dir / "solve_a" / "report.json"), b(dir / "solve_b" / "report.json");
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  CHECK(sa.str() == sb.str());
  CHECK(sa.str().find("\"residual_target\": 1e-08") != std::string::npos);

  auto rv = run("verify --config " + (dir / "run.json").string() + " --out " +
                (dir / "solve_a").string());
  CHECK(rv.code == 0);

  // tampered artifacts fail verification
  {
    // corrupt the first cell of an interior grid row
    std::ifstream in(dir / "solve_a" / "final_body_0.csv");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    in.close();
    auto& mid = lines[lines.size() / 4];
    mid = "9.99" + mid.substr(mid.find(','));
    std::ofstream out(dir / "solve_a" / "final_body_0.csv");
    for (const auto& l : lines) out << l << '\n';
  }
  CHECK(run("verify --config " + (dir / "run.json").string() + " --out " +
            (dir / "solve_a").string())
            .code == 2);
}

TEST_CASE("sweep subcommand") {
  auto dir = sandbox();
  {
    std::ofstream os(dir / "sweep.json");
    os << R"({
  "n": 4,
  "summands": [
    {"eps": 0.45, "gluing_point": {"t": 0.0, "theta": 0.0}, "alpha": 0.3, "deficiency_end": -1},
    {"eps": 0.45, "gluing_point": {"t": 0.0, "theta": 3.141592653589793}, "alpha": 0.3, "deficiency_end": 1}
  ],
  "T": [10.0],
  "grids": {"body_dt": 0.15, "neck_dt": 0.15, "ntheta": 16, "L_end_periods": 1.5},
  "T_list": [8.0, 10.0, 12.0, 14.0]
})";
  }
  auto r = run("sweep --config " + (dir / "sweep.json").string() + " --out " +
               (dir / "sweep_out").string());
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "sweep_out" / "sweep.csv"));
  CHECK(r.out.find("decay rate -0.5") != std::string::npos);
}
