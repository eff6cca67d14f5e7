#include "pbec/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace pbec {

namespace {

struct Entry {
  std::string value;
  int line = 0;
  bool used = false;
};

using Block = std::map<std::string, Entry>;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Typed access to one block; every key must be consumed.
class Reader {
 public:
  Reader(std::string name, Block& block) : name_(std::move(name)), block_(block) {}

  bool has(const std::string& key) const { return block_.count(key) > 0; }

  void number(const std::string& key, double& out) {
    if (auto* e = take(key)) out = parse_double(key, e->value);
  }
  void integer(const std::string& key, int& out) {
    if (auto* e = take(key)) {
      const double v = parse_double(key, e->value);
      if (v != std::floor(v) || std::abs(v) > 1e9) fail(key, "expected an integer, got '" + e->value + "'");
      out = static_cast<int>(v);
    }
  }
  void unsigned64(const std::string& key, std::uint64_t& out) {
    if (auto* e = take(key)) {
      const auto r = std::from_chars(e->value.data(), e->value.data() + e->value.size(), out);
      if (r.ec != std::errc() || r.ptr != e->value.data() + e->value.size()) {
        fail(key, "expected a non-negative integer, got '" + e->value + "'");
      }
    }
  }
  void boolean(const std::string& key, bool& out) {
    if (auto* e = take(key)) {
      if (e->value == "true") {
        out = true;
      } else if (e->value == "false") {
        out = false;
      } else {
        fail(key, "expected true or false, got '" + e->value + "'");
      }
    }
  }
  void word(const std::string& key, std::string& out) {
    if (auto* e = take(key)) out = e->value;
  }
  void list(const std::string& key, std::vector<double>& out) {
    if (auto* e = take(key)) {
      out.clear();
      if (e->value.find(':') != std::string::npos) {
        const auto parts = split(e->value, ':');
        if (parts.size() != 3) fail(key, "range must be start:stop:step");
        const double a = parse_double(key, parts[0]);
        const double b = parse_double(key, parts[1]);
        const double step = parse_double(key, parts[2]);
        if (!(step > 0.0) || b < a) fail(key, "range needs step > 0 and stop >= start");
        const long count = std::lround(std::floor((b - a) / step + 1e-9)) + 1;
        for (long k = 0; k < count; ++k) out.push_back(a + step * double(k));
        return;
      }
      for (const auto& item : split(e->value, ',')) out.push_back(parse_double(key, item));
    }
  }
  void int_list(const std::string& key, std::vector<int>& out) {
    std::vector<double> values;
    if (!has(key)) return;
    list(key, values);
    out.clear();
    for (double v : values) {
      if (v != std::floor(v)) fail(key, "expected integers");
      out.push_back(static_cast<int>(v));
    }
  }

  void finish() const {
    for (const auto& [key, e] : block_) {
      if (!e.used) {
        throw validation_error(name_ + "." + key + ": unknown key (line " +
                               std::to_string(e.line) + ")");
      }
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw validation_error(name_ + "." + key + ": " + what);
  }

 private:
  Entry* take(const std::string& key) {
    auto it = block_.find(key);
    if (it == block_.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }

  double parse_double(const std::string& key, const std::string& text) const {
    double v = 0.0;
    const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || r.ec != std::errc() || r.ptr != text.data() + text.size() ||
        !std::isfinite(v)) {
      fail(key, "expected a number, got '" + text + "'");
    }
    return v;
  }

  std::string name_;
  Block& block_;
};

void check(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw validation_error(path + ": " + what);
}

void check_rates(const std::vector<double>& v, const std::string& path) {
  for (double x : v) check(x >= 0.0, path, "must be >= 0");
}

const std::vector<std::string> kBlocks{"basis", "rates", "pump", "solver", "sweep", "output", "verify"};

}  // namespace

void RunConfig::require(const std::vector<std::string>& names) const {
  for (const auto& n : names) {
    if (!blocks.count(n)) throw validation_error(n + ": required block is missing");
  }
}

ExactModel VerifyConfig::stripe_model() const {
  ExactModel md;
  md.modes = modes;
  md.sites = sites;
  md.n_max = n_max;
  auto vec = [](const std::vector<double>& v) {
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size())));
  };
  md.detuning = vec(detuning);
  md.absorption = vec(absorption);
  md.emission = vec(emission);
  md.pump = vec(pump);
  md.decay = decay;
  md.loss = loss;
  md.convention = convention;
  md.memory_bound = static_cast<std::size_t>(memory_bound_mb * 1024.0 * 1024.0);
  md.mode_function.resize(modes, sites);
  if (mode_function.empty()) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int p = 0; p < modes; ++p) {
      for (int i = 0; i < sites; ++i) md.mode_function(p, i) = uni(rng);
    }
  } else {
    if (mode_function.size() != std::size_t(modes) * sites) {
      throw validation_error("verify.mode_function: needs modes x sites = " +
                             std::to_string(modes * sites) + " entries");
    }
    for (int p = 0; p < modes; ++p) {
      for (int i = 0; i < sites; ++i) md.mode_function(p, i) = mode_function[p * sites + i];
    }
  }
  md.validate();
  return md;
}

RunConfig parse_config(std::istream& in, const std::string& source, const std::string& base_dir) {
  std::map<std::string, Block> blocks;
  std::string current;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw format_error(where + ": malformed block header '" + line + "'");
      current = trim(line.substr(1, line.size() - 2));
      if (std::find(kBlocks.begin(), kBlocks.end(), current) == kBlocks.end()) {
        throw validation_error(current + ": unknown block (" + where + ")");
      }
      if (blocks.count(current)) throw validation_error(current + ": block appears twice (" + where + ")");
      blocks[current];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw format_error(where + ": expected key = value");
    if (current.empty()) throw format_error(where + ": entry outside any block");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw format_error(where + ": empty key");
    if (blocks[current].count(key)) {
      throw validation_error(current + "." + key + ": given twice (" + where + ")");
    }
    blocks[current][key] = Entry{value, line_no, false};
  }

  RunConfig cfg;
  for (const auto& [name, b] : blocks) cfg.blocks.insert(name);
  ModelSpec& m = cfg.model;

  if (blocks.count("basis")) {
    Reader r("basis", blocks["basis"]);
    r.integer("modes", m.modes);
    r.number("omega0", m.omega0);
    r.number("spacing", m.spacing);
    r.number("omega_zpl", m.omega_zpl);
    r.integer("grid_points", m.grid_points);
    r.number("grid_extent", m.grid_extent);
    r.finish();
    check(m.modes >= 1, "basis.modes", "must be >= 1");
    check(m.spacing > 0.0, "basis.spacing", "must be > 0");
    check(m.grid_points >= 2, "basis.grid_points", "must be >= 2");
    check(m.grid_extent > 0.0, "basis.grid_extent", "must be > 0");
  }

  if (blocks.count("rates")) {
    Reader r("rates", blocks["rates"]);
    std::string profile = "gaussian";
    r.word("profile", profile);
    if (profile == "gaussian") {
      const auto* current = std::get_if<GaussianProfile>(&m.profile);
      GaussianProfile g = current ? *current : GaussianProfile{};
      r.number("peak", g.peak);
      r.number("center", g.center);
      r.number("width", g.width);
      check(g.peak >= 0.0, "rates.peak", "must be >= 0");
      check(g.width > 0.0, "rates.width", "must be > 0");
      m.profile = g;
    } else if (profile == "flat") {
      FlatProfile f;
      r.number("value", f.value);
      check(f.value >= 0.0, "rates.value", "must be >= 0");
      m.profile = f;
    } else if (profile == "table") {
      r.word("table", cfg.profile_table);
      check(!cfg.profile_table.empty(), "rates.table", "required when profile = table");
      std::filesystem::path path(cfg.profile_table);
      if (path.is_relative()) path = std::filesystem::path(base_dir) / path;
      m.profile = TabulatedProfile::load(path.string());
    } else {
      r.fail("profile", "expected gaussian, flat or table, got '" + profile + "'");
    }
    if (r.has("beta") && r.has("temperature")) r.fail("beta", "give either beta or temperature");
    if (r.has("temperature")) {
      double kelvin = 0.0;
      r.number("temperature", kelvin);
      check(kelvin > 0.0, "rates.temperature", "must be > 0");
      m.beta = units::beta_from_temperature(kelvin);
    }
    r.number("beta", m.beta);
    r.number("molecule_density", m.molecule_density);
    r.finish();
    check(m.beta >= 0.0, "rates.beta", "must be >= 0");
    check(m.molecule_density > 0.0, "rates.molecule_density", "must be > 0");
  }

  if (blocks.count("pump")) {
    Reader r("pump", blocks["pump"]);
    std::string shape = "gaussian";
    r.word("shape", shape);
    if (shape == "gaussian") {
      m.pump_shape = PumpShape::kGaussian;
    } else if (shape == "uniform") {
      m.pump_shape = PumpShape::kUniform;
    } else {
      r.fail("shape", "expected gaussian or uniform, got '" + shape + "'");
    }
    r.number("width", m.pump_width);
    r.list("ratio", cfg.pump_ratios);
    r.number("decay", m.decay);
    r.number("loss", m.loss);
    r.finish();
    check(!cfg.pump_ratios.empty(), "pump.ratio", "needs at least one value");
    check_rates(cfg.pump_ratios, "pump.ratio");
    check(m.pump_width > 0.0, "pump.width", "must be > 0");
    check(m.decay >= 0.0, "pump.decay", "must be >= 0");
    check(m.loss >= 0.0, "pump.loss", "must be >= 0");
    m.pump_ratio = cfg.pump_ratios.front();
  }

  if (blocks.count("solver")) {
    Reader r("solver", blocks["solver"]);
    SteadyStateOptions& s = cfg.steady;
    CoherenceOptions& c = cfg.coherence;
    r.number("steady_tol", s.tol);
    r.number("initial_step", s.initial_step);
    r.number("max_change", s.max_change);
    r.number("max_pseudo_time", s.max_time);
    r.integer("max_iterations", s.max_iterations);
    r.integer("samples", c.samples);
    r.number("decay_multiple", c.decay_multiple);
    r.number("agreement_tol", c.propagate.agreement_tol);
    r.number("condition_limit", c.propagate.condition_limit);
    std::string direct = "exponential";
    r.word("direct", direct);
    if (direct == "exponential") {
      c.propagate.direct = DirectMethod::kMatrixExponential;
    } else if (direct == "runge_kutta") {
      c.propagate.direct = DirectMethod::kRungeKutta;
    } else {
      r.fail("direct", "expected exponential or runge_kutta, got '" + direct + "'");
    }
    r.integer("points_per_pole", c.spectrum.points_per_pole);
    r.number("span", c.spectrum.span);
    r.boolean("transform_check", c.spectrum.transform_check);
    r.number("transform_tol", c.spectrum.transform_tol);
    r.finish();
    check(s.tol > 0.0, "solver.steady_tol", "must be > 0");
    check(s.initial_step > 0.0, "solver.initial_step", "must be > 0");
    check(s.max_change > 0.0, "solver.max_change", "must be > 0");
    check(s.max_time > 0.0, "solver.max_pseudo_time", "must be > 0");
    check(s.max_iterations >= 1, "solver.max_iterations", "must be >= 1");
    check(c.samples >= 16, "solver.samples", "must be >= 16");
    check(c.decay_multiple > 1.0, "solver.decay_multiple", "must be > 1");
    check(c.propagate.agreement_tol > 0.0, "solver.agreement_tol", "must be > 0");
    check(c.spectrum.points_per_pole >= 3, "solver.points_per_pole", "must be >= 3");
    check(c.spectrum.span > 1.0, "solver.span", "must be > 1");
  }

  if (blocks.count("sweep")) {
    Reader r("sweep", blocks["sweep"]);
    r.list("omega0", cfg.sweep.omega0);
    r.list("pump_ratio", cfg.sweep.pump_ratio);
    r.integer("threads", cfg.sweep.threads);
    r.finish();
    check(!cfg.sweep.omega0.empty(), "sweep.omega0", "needs at least one value");
    check(!cfg.sweep.pump_ratio.empty(), "sweep.pump_ratio", "needs at least one value");
    check_rates(cfg.sweep.pump_ratio, "sweep.pump_ratio");
    check(cfg.sweep.threads >= 1, "sweep.threads", "must be >= 1");
  }

  if (blocks.count("output")) {
    Reader r("output", blocks["output"]);
    r.word("directory", cfg.output.directory);
    if (r.has("formats")) {
      std::string formats;
      r.word("formats", formats);
      cfg.output.csv = cfg.output.json = false;
      for (const auto& f : split(formats, ',')) {
        if (f == "csv") {
          cfg.output.csv = true;
        } else if (f == "json") {
          cfg.output.json = true;
        } else {
          r.fail("formats", "expected csv and/or json, got '" + f + "'");
        }
      }
    }
    std::string corr = "diagonal";
    r.word("correlations", corr);
    if (corr != "diagonal" && corr != "full") {
      r.fail("correlations", "expected diagonal or full, got '" + corr + "'");
    }
    cfg.output.full_correlations = corr == "full";
    r.finish();
  }

  if (blocks.count("verify")) {
    Reader r("verify", blocks["verify"]);
    VerifyConfig& v = cfg.verify;
    r.integer("modes", v.modes);
    r.integer("sites", v.sites);
    r.integer("n_max", v.n_max);
    r.unsigned64("seed", v.seed);
    r.list("detuning", v.detuning);
    r.list("absorption", v.absorption);
    r.list("emission", v.emission);
    r.list("pump", v.pump);
    r.number("decay", v.decay);
    r.number("loss", v.loss);
    r.list("mode_function", v.mode_function);
    std::string convention = "printed";
    r.word("convention", convention);
    if (convention == "printed") {
      v.convention = RateIndexConvention::kPrinted;
    } else if (convention == "swapped") {
      v.convention = RateIndexConvention::kSwapped;
    } else {
      r.fail("convention", "expected printed or swapped, got '" + convention + "'");
    }
    r.number("memory_bound_mb", v.memory_bound_mb);
    r.int_list("family_sizes", v.family_sizes);
    r.number("family_detuning", v.family.detuning);
    r.number("family_absorption", v.family.absorption);
    r.number("family_emission", v.family.emission);
    r.number("family_coupling", v.family.collective_coupling);
    r.number("family_pump", v.family.pump);
    r.number("family_decay", v.family.decay);
    r.number("family_loss", v.family.loss);
    r.integer("family_n_max", v.family.n_max);
    r.finish();
    check(v.modes >= 1 && v.modes <= 2, "verify.modes", "must be 1 or 2");
    check(v.sites >= 1 && v.sites <= 10, "verify.sites", "must be between 1 and 10");
    check(v.n_max >= 1, "verify.n_max", "must be >= 1");
    check(v.detuning.size() == std::size_t(v.modes), "verify.detuning", "needs one value per mode");
    check(v.absorption.size() == std::size_t(v.modes), "verify.absorption", "needs one value per mode");
    check(v.emission.size() == std::size_t(v.modes), "verify.emission", "needs one value per mode");
    check(v.pump.size() == std::size_t(v.sites), "verify.pump", "needs one value per molecule");
    check_rates(v.absorption, "verify.absorption");
    check_rates(v.emission, "verify.emission");
    check_rates(v.pump, "verify.pump");
    check(v.decay >= 0.0, "verify.decay", "must be >= 0");
    check(v.loss >= 0.0, "verify.loss", "must be >= 0");
    check(v.memory_bound_mb > 0.0, "verify.memory_bound_mb", "must be > 0");
    for (int n : v.family_sizes) check(n >= 1 && n <= 10, "verify.family_sizes", "entries must lie in 1..10");
    check(v.family.absorption >= 0.0 && v.family.emission >= 0.0 && v.family.pump >= 0.0 &&
              v.family.decay >= 0.0 && v.family.loss >= 0.0,
          "verify.family", "rates must be >= 0");
    check(v.family.collective_coupling > 0.0, "verify.family_coupling", "must be > 0");
    check(v.family.n_max >= 1, "verify.family_n_max", "must be >= 1");
  }
  return cfg;
}

RunConfig parse_config_string(const std::string& text, const std::string& base_dir) {
  std::istringstream in(text);
  return parse_config(in, "<string>", base_dir);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("config: cannot open '" + path + "'");
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_config(in, path, dir.empty() ? "." : dir.string());
}

namespace {

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? ", " : "") + format_double(v[k]);
  return out;
}

}  // namespace

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream out;
  const ModelSpec& m = cfg.model;
  auto kv = [&](const std::string& key, const std::string& value) {
    out << key << " = " << value << "\n";
  };
  auto num = [&](const std::string& key, double v) { kv(key, format_double(v)); };
  auto has = [&](const char* b) { return cfg.blocks.count(b) > 0; };

  if (has("basis")) {
    out << "[basis]\n";
    num("modes", m.modes);
    num("omega0", m.omega0);
    num("spacing", m.spacing);
    num("omega_zpl", m.omega_zpl);
    num("grid_points", m.grid_points);
    num("grid_extent", m.grid_extent);
    out << "\n";
  }
  if (has("rates")) {
    out << "[rates]\n";
    if (const auto* g = std::get_if<GaussianProfile>(&m.profile)) {
      kv("profile", "gaussian");
      num("peak", g->peak);
      num("center", g->center);
      num("width", g->width);
    } else if (const auto* f = std::get_if<FlatProfile>(&m.profile)) {
      kv("profile", "flat");
      num("value", f->value);
    } else {
      kv("profile", "table");
      kv("table", cfg.profile_table);
    }
    num("beta", m.beta);
    num("molecule_density", m.molecule_density);
    out << "\n";
  }
  if (has("pump")) {
    out << "[pump]\n";
    kv("shape", m.pump_shape == PumpShape::kGaussian ? "gaussian" : "uniform");
    num("width", m.pump_width);
    kv("ratio", join(cfg.pump_ratios));
    num("decay", m.decay);
    num("loss", m.loss);
    out << "\n";
  }
  if (has("solver")) {
    const SteadyStateOptions& s = cfg.steady;
    const CoherenceOptions& c = cfg.coherence;
    out << "[solver]\n";
    num("steady_tol", s.tol);
    num("initial_step", s.initial_step);
    num("max_change", s.max_change);
    num("max_pseudo_time", s.max_time);
    num("max_iterations", s.max_iterations);
    num("samples", c.samples);
    num("decay_multiple", c.decay_multiple);
    num("agreement_tol", c.propagate.agreement_tol);
    num("condition_limit", c.propagate.condition_limit);
    kv("direct", c.propagate.direct == DirectMethod::kMatrixExponential ? "exponential" : "runge_kutta");
    num("points_per_pole", c.spectrum.points_per_pole);
    num("span", c.spectrum.span);
    kv("transform_check", c.spectrum.transform_check ? "true" : "false");
    num("transform_tol", c.spectrum.transform_tol);
    out << "\n";
  }
  if (has("sweep")) {
    out << "[sweep]\n";
    kv("omega0", join(cfg.sweep.omega0));
    kv("pump_ratio", join(cfg.sweep.pump_ratio));
    num("threads", cfg.sweep.threads);
    out << "\n";
  }
  if (has("output")) {
    out << "[output]\n";
    kv("directory", cfg.output.directory);
    std::string formats;
    if (cfg.output.csv) formats = "csv";
    if (cfg.output.json) formats += formats.empty() ? "json" : ", json";
    kv("formats", formats);
    kv("correlations", cfg.output.full_correlations ? "full" : "diagonal");
    out << "\n";
  }
  if (has("verify")) {
    const VerifyConfig& v = cfg.verify;
    out << "[verify]\n";
    num("modes", v.modes);
    num("sites", v.sites);
    num("n_max", v.n_max);
    kv("seed", std::to_string(v.seed));
    kv("detuning", join(v.detuning));
    kv("absorption", join(v.absorption));
    kv("emission", join(v.emission));
    kv("pump", join(v.pump));
    num("decay", v.decay);
    num("loss", v.loss);
    if (!v.mode_function.empty()) kv("mode_function", join(v.mode_function));
    kv("convention", v.convention == RateIndexConvention::kPrinted ? "printed" : "swapped");
    num("memory_bound_mb", v.memory_bound_mb);
    kv("family_sizes", join(std::vector<double>(v.family_sizes.begin(), v.family_sizes.end())));
    num("family_detuning", v.family.detuning);
    num("family_absorption", v.family.absorption);
    num("family_emission", v.family.emission);
    num("family_coupling", v.family.collective_coupling);
    num("family_pump", v.family.pump);
    num("family_decay", v.family.decay);
    num("family_loss", v.family.loss);
    num("family_n_max", v.family.n_max);
    out << "\n";
  }
  return out.str();
}

}  // namespace pbec
