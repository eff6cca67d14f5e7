#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "pbec/pipeline.hpp"

using namespace pbec;
namespace fs = std::filesystem;

namespace {

const char* kSmall =
    "# small cavity\n"
    "[basis]\nmodes = 4\ngrid_points = 201\n"
    "[rates]\ntemperature = 300\n"
    "[pump]\nratio = 0.2\n";

ConfigSource source(const std::string& text) {
  ConfigSource s;
  s.text = text;
  s.name = "test.ini";
  return s;
}

RunOptions in(const std::string& name) {
  RunOptions o;
  o.out_dir = (fs::temp_directory_path() / ("pbec_pipeline_" + name)).string();
  fs::remove_all(o.out_dir);
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

// Rows of a table keyed by column name, skipping the run-id line.
std::vector<std::map<std::string, std::string>> table(const fs::path& p) {
  std::ifstream f(p);
  std::string line;
  std::getline(f, line);
  REQUIRE(line.rfind("# run_id: ", 0) == 0);
  // RFC-4180 fields, quotes doubled inside quoted fields
  auto split = [](const std::string& s) {
    std::vector<std::string> out(1);
    bool quoted = false;
    for (std::size_t k = 0; k < s.size(); ++k) {
      const char c = s[k];
      if (quoted) {
        if (c == '"' && k + 1 < s.size() && s[k + 1] == '"') {
          out.back() += '"';
          ++k;
        } else if (c == '"') {
          quoted = false;
        } else {
          out.back() += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        out.emplace_back();
      } else {
        out.back() += c;
      }
    }
    return out;
  };
  std::getline(f, line);
  const auto header = split(line);
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(f, line)) {
    const auto fields = split(line);
    REQUIRE(fields.size() == header.size());
    std::map<std::string, std::string> row;
    for (std::size_t k = 0; k < header.size(); ++k) row[header[k]] = fields[k];
    rows.push_back(row);
  }
  return rows;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kContract;
}

}  // namespace

TEST_CASE("run id is a stable hash of the config text") {
  CHECK(run_id_for("abc") == run_id_for("abc"));
  CHECK(run_id_for("abc") != run_id_for("abd"));
  CHECK(run_id_for("").size() == 16);
}

TEST_CASE("exit codes") {
  CHECK(exit_code(ErrorKind::kValidation) == 2);
  CHECK(exit_code(ErrorKind::kFormat) == 2);
  CHECK(exit_code(ErrorKind::kContract) == 2);
  CHECK(exit_code(ErrorKind::kConvergence) == 3);
  CHECK(exit_code(ErrorKind::kTruncation) == 3);
  CHECK(exit_code(ErrorKind::kVerification) == 4);
  CHECK(exit_code(ErrorKind::kResource) == 5);
}

TEST_CASE("steady: unpumped cavity is empty, outputs are tagged") {
  std::string text = kSmall;
  text.replace(text.find("ratio = 0.2"), 11, "ratio = 0");
  const RunOptions o = in("steady_empty");
  const ResultBundle r = run_steady(source(text), o);
  CHECK(slurp(fs::path(o.out_dir) / "config.ini") == text);
  for (const auto& row : table(fs::path(o.out_dir) / "steady_modes.csv")) CHECK(std::stod(row.at("n_pp")) == 0.0);
  for (const auto& f : r.files) {
    if (fs::path(f).extension() == ".csv") {
      CHECK(slurp(fs::path(o.out_dir) / f).rfind("# run_id: " + r.run_id + "\n", 0) == 0);
    }
  }
  const auto summary = nlohmann::json::parse(slurp(fs::path(o.out_dir) / "summary.json"));
  CHECK(summary["run_id"] == r.run_id);
  CHECK(summary["steady"][0]["n_diagonal"].size() == 4);
}

TEST_CASE("steady: reference cavity has the ground mode on top") {
  const RunOptions o = in("steady_ref");
  run_steady(source("[basis]\n[rates]\n[pump]\n"), o);
  const auto rows = table(fs::path(o.out_dir) / "steady_modes.csv");
  REQUIRE(rows.size() == 10);
  const double n0 = std::stod(rows[0].at("n_pp"));
  for (const auto& row : rows) CHECK(std::stod(row.at("n_pp")) <= n0);
}

TEST_CASE("steady: missing block names it") {
  const RunOptions o = in("steady_missing");
  try {
    run_steady(source("[basis]\n[pump]\n"), o);
    FAIL("expected a validation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kValidation);
    CHECK(std::string(e.what()).rfind("rates", 0) == 0);
  }
  const auto summary = nlohmann::json::parse(slurp(fs::path(o.out_dir) / "summary.json"));
  CHECK(summary["error"]["kind"] == "validation");
}

TEST_CASE("steady: convergence failure keeps the residual history") {
  const RunOptions o = in("steady_diverge");
  std::string text = kSmall;
  text += "[solver]\nmax_iterations = 2\n";
  CHECK(kind_of([&] { run_steady(source(text), o); }) == ErrorKind::kConvergence);
  const auto summary = nlohmann::json::parse(slurp(fs::path(o.out_dir) / "summary.json"));
  CHECK_FALSE(summary["error"]["residual_history"].empty());
}

TEST_CASE("coherence: bare cavity decays at half the loss") {
  const RunOptions o = in("bare");
  run_coherence(source("[basis]\nmodes = 3\ngrid_points = 101\n[rates]\nprofile = flat\nvalue = 0\n"
                       "[pump]\nloss = 0.25\n"),
                o);
  for (const auto& row : table(fs::path(o.out_dir) / "coherence.csv")) {
    CHECK(std::stod(row.at("tau_ps")) == doctest::Approx(8.0).epsilon(0.01));
    CHECK(std::stod(row.at("fwhm_THz")) == doctest::Approx(0.25).epsilon(0.01));
  }
}

TEST_CASE("coherence: three pump rates, deterministic tables") {
  std::string text = kSmall;
  text.replace(text.find("ratio = 0.2"), 11, "ratio = 0.1, 0.2, 0.4");
  const RunOptions a = in("series_a");
  const RunOptions b = in("series_b");
  const ResultBundle ra = run_coherence(source(text), a);
  run_coherence(source(text), b);
  int trajectories = 0;
  for (const auto& f : ra.files) {
    if (f.rfind("trajectory_ratio_", 0) == 0) ++trajectories;
    if (fs::path(f).extension() == ".csv") {
      INFO(f);
      CHECK(slurp(fs::path(a.out_dir) / f) == slurp(fs::path(b.out_dir) / f));
    }
  }
  CHECK(trajectories == 3);
  std::vector<double> tau0;
  for (const auto& row : table(fs::path(a.out_dir) / "coherence.csv")) {
    if (row.at("mode") == "0") tau0.push_back(std::stod(row.at("tau_ps")));
  }
  REQUIRE(tau0.size() == 3);
  CHECK(tau0[0] < tau0[1]);
  CHECK(tau0[1] < tau0[2]);

  const auto traj = table(fs::path(a.out_dir) / "trajectory_ratio_0.2.csv");
  CHECK(traj.front().count("abs_c_0_0_normalized") == 1);
  CHECK(traj.front().count("re_c_0_1") == 0);
  CHECK(std::stod(traj.front().at("abs_c_0_0_normalized")) == 1.0);
  CHECK(table(fs::path(a.out_dir) / "spectrum_ratio_0.4.csv").front().count("S_3_ps") == 1);
}

TEST_CASE("coherence: full correlations on request") {
  std::string text = kSmall;
  text += "[output]\ncorrelations = full\nformats = csv\n";
  const RunOptions o = in("full");
  run_coherence(source(text), o);
  const auto traj = table(fs::path(o.out_dir) / "trajectory.csv");
  CHECK(traj.front().count("im_c_3_1") == 1);
  CHECK_FALSE(fs::exists(fs::path(o.out_dir) / "summary.json"));
}

TEST_CASE("sweep: one point equals the coherence run, table is ordered") {
  const RunOptions c = in("sweep_ref");
  run_coherence(source(kSmall), c);
  const std::string tau = table(fs::path(c.out_dir) / "coherence.csv").front().at("tau_ps");

  std::string text = kSmall;
  text += "[sweep]\nomega0 = 520\npump_ratio = 0.2\n";
  const RunOptions s = in("sweep_one");
  run_sweep(source(text), s);
  const auto rows = table(fs::path(s.out_dir) / "sweep.csv");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].at("tau0_ps") == tau);
  CHECK(rows[0].at("converged") == "true");

  text = kSmall;
  text += "[sweep]\nomega0 = 514:520:3\npump_ratio = 0.1, 0.2\nthreads = 2\n";
  const RunOptions m = in("sweep_many");
  run_sweep(source(text), m);
  const auto many = table(fs::path(m.out_dir) / "sweep.csv");
  REQUIRE(many.size() == 6);
  CHECK(std::stod(many[0].at("omega0_THz")) == 514.0);
  CHECK(std::stod(many[1].at("pump_ratio")) == 0.2);
  CHECK(std::stod(many[5].at("omega0_THz")) == 520.0);
  CHECK_FALSE(fs::exists(fs::path(m.out_dir) / "sweep.csv.tmp"));
}

TEST_CASE("sweep: requires the sweep block") {
  CHECK(kind_of([&] { run_sweep(source(kSmall), in("sweep_none")); }) == ErrorKind::kValidation);
}

TEST_CASE("verify: default block passes and writes both tables") {
  const RunOptions o = in("verify");
  run_verify(source("[verify]\nfamily_sizes = 1, 2, 4\nfamily_n_max = 10\n"), o);
  for (const auto& row : table(fs::path(o.out_dir) / "stripe_residuals.csv")) {
    if (row.at("diagnostic") == "false") CHECK(std::stod(row.at("residual")) <= 1e-12);
  }
  CHECK(table(fs::path(o.out_dir) / "semiclassical_limit.csv").size() == 3);
}

TEST_CASE("verify: breaches and guards") {
  CHECK(kind_of([&] { run_verify(source("[verify]\nconvention = swapped\nfamily_sizes = 1\n"), in("v_swap")); }) ==
        ErrorKind::kVerification);
  RunOptions strict = in("v_strict");
  strict.strict = true;
  CHECK(kind_of([&] { run_verify(source("[verify]\nfamily_sizes = 2\nfamily_n_max = 2\n"), strict); }) ==
        ErrorKind::kTruncation);
  CHECK(kind_of([&] { run_verify(source("[verify]\nmemory_bound_mb = 0.001\n"), in("v_mem")); }) ==
        ErrorKind::kResource);
}
