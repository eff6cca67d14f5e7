#include "pbec/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pbec/correlation.hpp"
#include "pbec/oracle.hpp"
#include "pbec/semiclassical.hpp"
#include "pbec/system.hpp"

namespace pbec {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kContract: return "contract";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kConvergence: return "convergence";
    case ErrorKind::kTruncation: return "truncation";
    case ErrorKind::kVerification: return "verification";
    case ErrorKind::kResource: return "resource";
  }
  return "unknown";
}

std::string quote(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::string& run_id) : out_(path, std::ios::binary) {
    if (!out_) throw validation_error("output: cannot write '" + path.string() + "'");
    out_ << "# run_id: " << run_id << "\n";
  }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t k = 0; k < fields.size(); ++k) out_ << (k ? "," : "") << quote(fields[k]);
    out_ << "\n";
  }
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

// Shared state of one command: output directory, run id, file list, warnings
// and the summary document.
class Run {
 public:
  Run(std::string command, const ConfigSource& source, const RunOptions& options)
      : source_(source), options_(options), start_(std::chrono::steady_clock::now()) {
    bundle_.command = std::move(command);
    bundle_.run_id = run_id_for(source.text);
    config_ = source.parse();
    bundle_.out_dir = options.out_dir.empty() ? config_.output.directory : options.out_dir;
    fs::create_directories(bundle_.out_dir);
    std::ofstream echo(fs::path(bundle_.out_dir) / "config.ini", std::ios::binary);
    echo << source.text;
    bundle_.files.push_back("config.ini");
    summary_["run_id"] = bundle_.run_id;
    summary_["command"] = bundle_.command;
    summary_["config"] = source.name;
    summary_["strict"] = options.strict;
  }

  const RunConfig& config() const { return config_; }
  RunConfig& config() { return config_; }
  const RunOptions& options() const { return options_; }
  json& summary() { return summary_; }
  bool csv() const { return config_.output.csv; }
  const std::string& run_id() const { return bundle_.run_id; }
  fs::path path(const std::string& name) const { return fs::path(bundle_.out_dir) / name; }

  std::unique_ptr<CsvWriter> table(const std::string& name) {
    bundle_.files.push_back(name);
    return std::make_unique<CsvWriter>(fs::path(bundle_.out_dir) / name, bundle_.run_id);
  }

  // Truncation-class warnings abort strict runs.
  void warn(const std::string& message, bool truncation) {
    bundle_.warnings.push_back(message);
    if (truncation && options_.strict) throw Error(ErrorKind::kTruncation, "strict: " + message);
  }

  template <class Body>
  ResultBundle execute(Body&& body) {
    try {
      body();
    } catch (const Error& e) {
      summary_["error"] = {{"kind", kind_name(e.kind())}, {"message", e.what()}};
      if (const auto* ce = dynamic_cast<const ConvergenceError*>(&e)) {
        summary_["error"]["residual_history"] = ce->residual_history();
      }
      finish();
      throw;
    }
    finish();
    return bundle_;
  }

 private:
  void finish() {
    bundle_.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    if (!config_.output.json) return;
    bundle_.files.push_back("summary.json");
    summary_["files"] = bundle_.files;
    summary_["warnings"] = bundle_.warnings;
    summary_["seconds"] = bundle_.seconds;
    std::ofstream out(fs::path(bundle_.out_dir) / "summary.json", std::ios::binary);
    out << summary_.dump(2) << "\n";
  }

  const ConfigSource& source_;
  RunOptions options_;
  RunConfig config_;
  ResultBundle bundle_;
  json summary_;
  std::chrono::steady_clock::time_point start_;
};

std::string suffixed(const std::string& stem, const RunConfig& cfg, double ratio) {
  if (cfg.pump_ratios.size() == 1) return stem + ".csv";
  return stem + "_ratio_" + short_num(ratio) + ".csv";
}

BuiltModel build_for_ratio(Run& run, double ratio) {
  ModelSpec spec = run.config().model;
  spec.pump_ratio = ratio;
  BuiltModel built = build_model(spec);
  for (const auto& w : built.warnings) run.warn(w, true);
  return built;
}

json steady_json(const SteadyState& ss) {
  std::vector<double> n(ss.state.modes());
  for (int p = 0; p < ss.state.modes(); ++p) n[p] = ss.state.photons(p, p).real();
  return {{"n_diagonal", n},
          {"f", std::vector<double>(ss.state.excitation.data(),
                                    ss.state.excitation.data() + ss.state.excitation.size())},
          {"iterations", ss.iterations},
          {"photon_residual_THz", ss.photon_residual},
          {"molecule_residual_THz", ss.molecule_residual}};
}

void write_steady(Run& run, const BuiltModel& built, const SteadyState& ss, double ratio) {
  if (!run.csv()) return;
  auto modes = run.table(suffixed("steady_modes", run.config(), ratio));
  modes->row({"mode", "omega_THz", "detuning_THz", "emission_THz", "absorption_THz", "n_pp"});
  for (int p = 0; p < built.basis.modes(); ++p) {
    modes->row({std::to_string(p), num(built.basis.frequency(p)), num(built.basis.detuning(p)),
                num(built.rates.emission(p)), num(built.rates.absorption(p)),
                num(ss.state.photons(p, p).real())});
  }
  auto sites = run.table(suffixed("steady_molecules", run.config(), ratio));
  sites->row({"site", "position_l0", "weight_l0", "pump_THz", "f"});
  for (int i = 0; i < built.basis.sites(); ++i) {
    sites->row({std::to_string(i), num(built.basis.grid.positions[i]),
                num(built.basis.grid.weights[i]), num(built.system.pump.pump(i)),
                num(ss.state.excitation(i))});
  }
}

SteadyState solve(Run& run, const BuiltModel& built) {
  return steady_state(built.system, run.config().steady);
}

void write_trajectory(Run& run, const CorrelationTrajectory& traj, double ratio) {
  auto out = run.table(suffixed("trajectory", run.config(), ratio));
  const int m = traj.c.front().rows();
  const bool full = run.config().output.full_correlations;
  std::vector<std::pair<int, int>> pairs;
  for (int p = 0; p < m; ++p) {
    for (int q = 0; q < m; ++q) {
      if (full || p == q) pairs.emplace_back(p, q);
    }
  }
  std::vector<std::string> header{"t_ps"};
  for (auto [p, q] : pairs) {
    const std::string tag = std::to_string(p) + "_" + std::to_string(q);
    header.push_back("re_c_" + tag);
    header.push_back("im_c_" + tag);
  }
  for (int p = 0; p < m; ++p) {
    header.push_back("abs_c_" + std::to_string(p) + "_" + std::to_string(p) + "_normalized");
  }
  out->row(header);
  const Eigen::MatrixXcd& c0 = traj.c.front();
  std::vector<std::string> fields;
  for (std::size_t k = 0; k < traj.time.size(); ++k) {
    fields.assign(1, num(traj.time[k]));
    const Eigen::MatrixXcd& c = traj.c[k];
    for (auto [p, q] : pairs) {
      fields.push_back(num(c(p, q).real()));
      fields.push_back(num(c(p, q).imag()));
    }
    for (int p = 0; p < m; ++p) {
      const double n = std::abs(c0(p, p));
      fields.push_back(n > 0.0 ? num(std::abs(c(p, p)) / n) : "0");
    }
    out->row(fields);
  }
}

void write_spectrum(Run& run, const SpectralResult& sp, double ratio) {
  auto out = run.table(suffixed("spectrum", run.config(), ratio));
  std::vector<std::string> header{"omega_THz"};
  for (Eigen::Index p = 0; p < sp.spectrum.cols(); ++p) header.push_back("S_" + std::to_string(p) + "_ps");
  out->row(header);
  std::vector<std::string> fields;
  for (Eigen::Index k = 0; k < sp.omega.size(); ++k) {
    fields.assign(1, num(sp.omega(k)));
    for (Eigen::Index p = 0; p < sp.spectrum.cols(); ++p) fields.push_back(num(sp.spectrum(k, p)));
    out->row(fields);
  }
}

std::vector<std::string> sweep_header() {
  return {"omega0_THz", "pump_ratio", "tau0_ps", "fwhm_THz", "n00", "converged"};
}

std::vector<std::string> sweep_fields(const SweepRow& r) {
  if (!r.converged) return {num(r.omega0), num(r.pump_ratio), "", "", "", "false"};
  return {num(r.omega0), num(r.pump_ratio), num(r.tau0), num(r.fwhm0), num(r.n00), "true"};
}

}  // namespace

ConfigSource ConfigSource::read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw validation_error("config: cannot open '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  ConfigSource src;
  src.text = text.str();
  src.name = path;
  const auto dir = fs::path(path).parent_path();
  src.base_dir = dir.empty() ? "." : dir.string();
  return src;
}

RunConfig ConfigSource::parse() const {
  std::istringstream in(text);
  return parse_config(in, name, base_dir);
}

std::string run_id_for(const std::string& config_text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config_text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kValidation:
    case ErrorKind::kFormat:
    case ErrorKind::kContract:
      return 2;
    case ErrorKind::kConvergence:
    case ErrorKind::kTruncation:
      return 3;
    case ErrorKind::kVerification:
      return 4;
    case ErrorKind::kResource:
      return 5;
  }
  return 1;
}

ResultBundle run_steady(const ConfigSource& source, const RunOptions& options) {
  Run run("steady", source, options);
  return run.execute([&] {
    run.config().require({"basis", "rates", "pump"});
    json results = json::array();
    for (double ratio : run.config().pump_ratios) {
      const BuiltModel built = build_for_ratio(run, ratio);
      const SteadyState ss = solve(run, built);
      write_steady(run, built, ss, ratio);
      json r = steady_json(ss);
      r["pump_ratio"] = ratio;
      results.push_back(r);
    }
    run.summary()["steady"] = results;
  });
}

ResultBundle run_coherence(const ConfigSource& source, const RunOptions& options) {
  Run run("coherence", source, options);
  return run.execute([&] {
    run.config().require({"basis", "rates", "pump"});
    std::unique_ptr<CsvWriter> table;
    if (run.csv()) {
      table = run.table("coherence.csv");
      table->row({"pump_ratio", "mode", "n_pp", "tau_ps", "tau_fit_ps", "fwhm_THz",
                  "peak_omega_THz", "normalization", "non_exponential", "truncated"});
    }
    json results = json::array();
    for (double ratio : run.config().pump_ratios) {
      const BuiltModel built = build_for_ratio(run, ratio);
      const SteadyState ss = solve(run, built);
      const CoherenceAnalysis an = analyze_coherence(ss, built.system, run.config().coherence);
      for (const auto& w : an.spectral.warnings) run.warn(w, true);
      for (int p : an.seeded) {
        run.warn("pump_ratio " + short_num(ratio) + " mode " + std::to_string(p) +
                     ": empty mode, correlation shown for a unit seed",
                 false);
      }
      std::vector<double> tau;
      std::vector<double> fwhm;
      for (int p = 0; p < built.basis.modes(); ++p) {
        const CoherenceTime& t = an.tau[p];
        if (t.truncated) {
          run.warn("pump_ratio " + short_num(ratio) + " mode " + std::to_string(p) +
                       ": correlation not decayed by the end of the grid",
                   true);
        }
        if (t.non_exponential) {
          run.warn("pump_ratio " + short_num(ratio) + " mode " + std::to_string(p) +
                       ": decay is not a single exponential",
                   false);
        }
        tau.push_back(t.crossing);
        fwhm.push_back(an.spectral.fwhm(p));
        if (table) {
          table->row({num(ratio), std::to_string(p), num(ss.state.photons(p, p).real()),
                      num(t.crossing), num(t.fitted), num(an.spectral.fwhm(p)),
                      num(an.spectral.peak_omega(p)), num(an.spectral.normalization(p)),
                      t.non_exponential ? "true" : "false", t.truncated ? "true" : "false"});
        }
      }
      if (run.csv()) {
        write_steady(run, built, ss, ratio);
        write_trajectory(run, an.trajectory, ratio);
        write_spectrum(run, an.spectral, ratio);
      }
      json r = steady_json(ss);
      r["pump_ratio"] = ratio;
      r["tau_ps"] = tau;
      r["fwhm_THz"] = fwhm;
      r["propagation"] = an.trajectory.path == PropagationPath::kEigen ? "eigen" : "direct";
      r["path_discrepancy"] = an.trajectory.path_discrepancy;
      r["eigenvector_condition"] = an.trajectory.condition;
      results.push_back(r);
    }
    run.summary()["coherence"] = results;
  });
}

ResultBundle run_sweep(const ConfigSource& source, const RunOptions& options) {
  Run run("sweep", source, options);
  return run.execute([&] {
    const RunConfig& cfg = run.config();
    cfg.require({"basis", "rates", "pump", "sweep"});
    SweepOptions opts;
    opts.threads = options.threads > 0 ? options.threads : cfg.sweep.threads;
    opts.steady = cfg.steady;
    opts.coherence = cfg.coherence;

    // Rows are streamed in completion order so an interrupted sweep leaves
    // valid lines on disk; the finished table is rewritten in sweep order.
    std::unique_ptr<CsvWriter> stream;
    if (run.csv()) {
      stream = run.table("sweep.csv");
      stream->row(sweep_header());
      stream->flush();
    }
    const auto rows = sweep_cutoff(cfg.model, cfg.sweep.omega0, cfg.sweep.pump_ratio, opts,
                                   [&](const SweepRow& r) {
                                     if (!stream) return;
                                     stream->row(sweep_fields(r));
                                     stream->flush();
                                   });
    stream.reset();
    json failed = json::array();
    int converged = 0;
    for (const auto& r : rows) {
      if (r.converged) {
        ++converged;
      } else {
        failed.push_back({{"omega0_THz", r.omega0}, {"pump_ratio", r.pump_ratio}, {"error", r.error}});
        run.warn("omega0 " + short_num(r.omega0) + ", pump_ratio " + short_num(r.pump_ratio) +
                     ": " + r.error,
                 false);
      }
    }
    if (run.csv()) {
      const fs::path tmp = run.path("sweep.csv.tmp");
      {
        CsvWriter sorted(tmp, run.run_id());
        sorted.row(sweep_header());
        for (const auto& r : rows) sorted.row(sweep_fields(r));
      }
      fs::rename(tmp, run.path("sweep.csv"));
    }
    run.summary()["sweep"] = {{"points", rows.size()}, {"converged", converged}, {"failed", failed}};
  });
}

ResultBundle run_verify(const ConfigSource& source, const RunOptions& options) {
  Run run("verify", source, options);
  return run.execute([&] {
    const RunConfig& cfg = run.config();
    cfg.require({"verify"});
    const VerifyConfig& v = cfg.verify;
    const ExactModel model = v.stripe_model();
    const std::size_t bound = model.memory_bound;
    for (int n : v.family_sizes) {
      ExactModel member = v.family.member(n);
      member.memory_bound = bound;
      member.validate();
    }

    const StripeReport report = verify_stripe_contributions(model, v.seed);
    if (run.csv()) {
      auto out = run.table("stripe_residuals.csv");
      out->row({"term", "residual", "worst", "diagnostic", "passed"});
      for (const auto& t : report.terms) {
        out->row({t.term, num(t.residual), t.worst, t.diagnostic ? "true" : "false",
                  (t.diagnostic || t.residual <= report.tol) ? "true" : "false"});
      }
    }
    json terms = json::array();
    for (const auto& t : report.terms) {
      terms.push_back({{"term", t.term}, {"residual", t.residual}, {"diagnostic", t.diagnostic}});
    }
    run.summary()["stripe"] = {{"seed", report.seed}, {"tol", report.tol},
                               {"passed", report.passed()}, {"terms", terms}};

    const auto rows = verify_semiclassical_limit(v.family, v.family_sizes, options.strict);
    if (run.csv()) {
      auto out = run.table("semiclassical_limit.csv");
      out->row({"molecules", "n_exact", "n_semiclassical", "population_discrepancy",
                "rate_exact_THz", "rate_semiclassical_THz", "rate_discrepancy",
                "cutoff_population"});
      for (const auto& r : rows) {
        out->row({std::to_string(r.molecules), num(r.n_exact), num(r.n_semiclassical),
                  num(r.population_discrepancy), num(r.rate_exact), num(r.rate_semiclassical),
                  num(r.rate_discrepancy), num(r.cutoff_population)});
      }
    }
    bool monotone = true;
    for (std::size_t k = 1; k < rows.size(); ++k) {
      monotone = monotone && rows[k].population_discrepancy <= rows[k - 1].population_discrepancy;
    }
    const double last_rate = rows.empty() ? 0.0 : rows.back().rate_discrepancy;
    for (const auto& r : rows) {
      if (r.cutoff_population > 1e-6) {
        run.warn("family N = " + std::to_string(r.molecules) + ": cutoff population " +
                     num(r.cutoff_population),
                 true);
      }
    }
    run.summary()["semiclassical_limit"] = {{"population_non_increasing", monotone},
                                            {"rate_discrepancy_at_largest", last_rate},
                                            {"rate_bound", 0.25}};

    if (!report.passed()) throw Error(ErrorKind::kVerification, "stripe check: " + report.failure());
    if (!monotone) {
      throw Error(ErrorKind::kVerification,
                  "semiclassical limit: population discrepancy increases with N");
    }
    if (last_rate > 0.25) {
      throw Error(ErrorKind::kVerification, "semiclassical limit: decay-rate discrepancy " +
                                                num(last_rate) + " at the largest N exceeds 0.25");
    }
  });
}

}  // namespace pbec
