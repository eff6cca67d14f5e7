#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>

#include "pbec/config.hpp"

using namespace pbec;
namespace fs = std::filesystem;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config_string(text);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

RunConfig round_trip(const RunConfig& c) { return parse_config_string(serialize_config(c)); }

}  // namespace

TEST_CASE("reference configs round-trip") {
  for (const auto& entry : fs::directory_iterator(PBEC_SOURCE_DIR "/configs")) {
    if (entry.path().extension() != ".ini") continue;
    INFO(entry.path().string());
    const RunConfig c = load_config(entry.path().string());
    const RunConfig again = parse_config_string(serialize_config(c), entry.path().parent_path().string());
    CHECK(again == c);
    CHECK(serialize_config(again) == serialize_config(c));
  }
}

TEST_CASE("randomised configs round-trip") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    RunConfig c;
    c.blocks = {"basis", "rates", "pump", "solver", "sweep", "output", "verify"};
    c.model.modes = 1 + trial % 9;
    c.model.omega0 = 500.0 + 40.0 * u(rng);
    c.model.spacing = 0.1 + u(rng);
    c.model.omega_zpl = 600.0 + u(rng) / 3.0;
    c.model.grid_points = 101 + trial;
    c.model.molecule_density = 1e7 * (1.0 + u(rng));
    c.model.beta = u(rng) / 7.0;
    if (trial % 2) {
      c.model.profile = FlatProfile{u(rng) * 1e-5};
    } else {
      c.model.profile = GaussianProfile{u(rng) * 1e-5, 480.0 + u(rng), 1.0 + u(rng)};
    }
    c.model.pump_shape = trial % 3 ? PumpShape::kGaussian : PumpShape::kUniform;
    c.model.pump_width = 0.5 + u(rng);
    c.pump_ratios = {u(rng), u(rng)};
    c.model.pump_ratio = c.pump_ratios.front();
    c.model.decay = 1e-5 * u(rng);
    c.model.loss = u(rng);
    c.steady.tol = 1e-9 * (1.0 + u(rng));
    c.steady.max_iterations = 100 + trial;
    c.coherence.samples = 1000 + trial;
    c.coherence.propagate.direct = trial % 2 ? DirectMethod::kRungeKutta : DirectMethod::kMatrixExponential;
    c.coherence.spectrum.transform_check = trial % 2 == 0;
    c.sweep.omega0 = {510.0 + u(rng), 520.0 + u(rng)};
    c.sweep.pump_ratio = {u(rng)};
    c.sweep.threads = 1 + trial % 4;
    c.output.directory = "out/run " + std::to_string(trial);
    c.output.json = trial % 2 == 0;
    c.output.full_correlations = trial % 3 == 0;
    c.verify.seed = rng();
    c.verify.decay = u(rng);
    c.verify.mode_function = trial % 2 ? std::vector<double>{} : std::vector<double>(6, u(rng));
    c.verify.convention = trial % 2 ? RateIndexConvention::kSwapped : RateIndexConvention::kPrinted;
    c.verify.family.pump = u(rng);
    c.verify.family_sizes = {1, 3};
    CHECK(round_trip(c) == c);
  }
}

TEST_CASE("grammar: comments, ranges and defaults") {
  const RunConfig c = parse_config_string(
      "; leading comment\n"
      "[basis]\n"
      "modes = 3   # trailing comment\n"
      "[pump]\n"
      "ratio = 0.1, 0.2,0.4\n"
      "[sweep]\n"
      "omega0 = 500:510:2.5\n"
      "pump_ratio = 0.2\n");
  CHECK(c.model.modes == 3);
  CHECK(c.model.omega0 == 520.0);
  CHECK(c.pump_ratios == std::vector<double>{0.1, 0.2, 0.4});
  CHECK(c.model.pump_ratio == 0.1);
  CHECK(c.sweep.omega0 == std::vector<double>{500.0, 502.5, 505.0, 507.5, 510.0});
  CHECK(c.blocks == std::set<std::string>{"basis", "pump", "sweep"});
}

TEST_CASE("temperature sets beta") {
  const RunConfig c = parse_config_string("[rates]\ntemperature = 150\n");
  CHECK(c.model.beta == doctest::Approx(2.0 * 0.0254649).epsilon(1e-5));
  CHECK(error_of("[rates]\ntemperature = 150\nbeta = 0.1\n").rfind("rates.beta", 0) == 0);
}

TEST_CASE("rates block without profile keys keeps the default emission profile") {
  const RunConfig c = parse_config_string("[rates]\ntemperature = 300\n");
  CHECK(c.model.profile == ModelSpec{}.profile);
}

TEST_CASE("errors carry field paths") {
  CHECK(error_of("[pump]\ndecay = -1\n") == "pump.decay: must be >= 0");
  CHECK(error_of("[pump]\nratio = 0.1, -0.2\n") == "pump.ratio: must be >= 0");
  CHECK(error_of("[basis]\nmodes = two\n").rfind("basis.modes: expected a number", 0) == 0);
  CHECK(error_of("[basis]\nmodes = 2.5\n").rfind("basis.modes: expected an integer", 0) == 0);
  CHECK(error_of("[basis]\ncolour = red\n").rfind("basis.colour: unknown key", 0) == 0);
  CHECK(error_of("[basis]\nmodes = 2\nmodes = 3\n").rfind("basis.modes: given twice", 0) == 0);
  CHECK(error_of("[extras]\n").rfind("extras: unknown block", 0) == 0);
  CHECK(error_of("[basis]\n[basis]\n").rfind("basis: block appears twice", 0) == 0);
  CHECK(error_of("[rates]\nprofile = lorentzian\n").rfind("rates.profile:", 0) == 0);
  CHECK(error_of("[sweep]\nomega0 = 510:500:1\npump_ratio = 1\n").rfind("sweep.omega0:", 0) == 0);
  CHECK(error_of("[verify]\nmodes = 2\ndetuning = 1\n").rfind("verify.detuning:", 0) == 0);
  CHECK(error_of("[output]\ncorrelations = some\n").rfind("output.correlations:", 0) == 0);
}

TEST_CASE("format errors") {
  for (const char* text : {"modes = 3\n", "[basis\nmodes = 3\n", "[basis]\nmodes 3\n"}) {
    try {
      parse_config_string(text);
      FAIL("expected a format error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kFormat);
    }
  }
}

TEST_CASE("required blocks") {
  const RunConfig c = parse_config_string("[basis]\nmodes = 3\n[pump]\nratio = 0\n");
  c.require({"basis", "pump"});
  try {
    c.require({"basis", "rates", "pump"});
    FAIL("expected a validation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kValidation);
    CHECK(std::string(e.what()).rfind("rates", 0) == 0);
  }
}

TEST_CASE("tabulated profile path resolves against the config directory") {
  const fs::path dir = fs::temp_directory_path() / "pbec_config_table";
  fs::create_directories(dir);
  std::ofstream(dir / "emission.txt") << "# f rate\n500 1e-6\n540 3e-6\n";
  std::ofstream(dir / "run.ini") << "[rates]\nprofile = table\ntable = emission.txt\n";
  const RunConfig c = load_config((dir / "run.ini").string());
  const auto& t = std::get<TabulatedProfile>(c.model.profile);
  CHECK(t(520.0) == doctest::Approx(2e-6));
  CHECK(c.profile_table == "emission.txt");
  CHECK(parse_config_string(serialize_config(c), dir.string()) == c);
  fs::remove_all(dir);
}

TEST_CASE("verify block builds the stripe model") {
  RunConfig c = parse_config_string("[verify]\nseed = 7\n");
  const ExactModel a = c.verify.stripe_model();
  const ExactModel b = c.verify.stripe_model();
  CHECK(a.mode_function == b.mode_function);
  CHECK(a.modes == 2);
  CHECK(a.sites == 3);
  c = parse_config_string("[verify]\nmode_function = 1, 2, 3, 4, 5, 6\n");
  CHECK(c.verify.stripe_model().mode_function(1, 0) == 4.0);
  c = parse_config_string("[verify]\nmode_function = 1, 2\n");
  CHECK_THROWS_AS(c.verify.stripe_model(), Error);
}
