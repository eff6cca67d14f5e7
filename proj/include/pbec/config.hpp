#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "pbec/correlation.hpp"
#include "pbec/oracle.hpp"
#include "pbec/semiclassical.hpp"
#include "pbec/system.hpp"

namespace pbec {

struct SweepConfig {
  std::vector<double> omega0;      // THz
  std::vector<double> pump_ratio;  // Gamma_up / Gamma_down
  int threads = 1;

  bool operator==(const SweepConfig&) const = default;
};

// Oracle-sized parameters for the verify command: one model for the stripe
// algebra and one single-mode family for the semiclassical limit.
struct VerifyConfig {
  int modes = 2;
  int sites = 3;
  int n_max = 3;
  std::uint64_t seed = 12345;
  std::vector<double> detuning{0.3, -0.7};
  std::vector<double> absorption{0.8, 1.3};
  std::vector<double> emission{1.1, 0.6};
  std::vector<double> pump{0.2, 0.5, 0.1};
  double decay = 0.4;
  double loss = 0.9;
  std::vector<double> mode_function;  // row-major M x N; empty draws it from the seed
  RateIndexConvention convention = RateIndexConvention::kPrinted;
  double memory_bound_mb = 2048.0;

  std::vector<int> family_sizes{2, 4, 8};
  SemiclassicalFamily family;

  bool operator==(const VerifyConfig&) const = default;
  ExactModel stripe_model() const;
};

struct OutputConfig {
  std::string directory = "out";
  bool csv = true;
  bool json = true;
  bool full_correlations = false;  // every c_pq instead of the diagonal only

  bool operator==(const OutputConfig&) const = default;
};

// A parsed run configuration. Blocks: basis, rates, pump, solver, sweep,
// output, verify. Which blocks are required depends on the command.
struct RunConfig {
  ModelSpec model;
  std::vector<double> pump_ratios{0.2};
  std::string profile_table;  // path as written, when rates.profile = table
  SteadyStateOptions steady;
  CoherenceOptions coherence;
  SweepConfig sweep;
  VerifyConfig verify;
  OutputConfig output;
  std::set<std::string> blocks;  // blocks present in the source

  bool operator==(const RunConfig&) const = default;

  // Validation error naming the first missing block.
  void require(const std::vector<std::string>& names) const;
};

// Grammar, one entry per line:
//   [block]
//   key = value
// '#' or ';' start a comment. Values are numbers, true/false, words or
// comma-separated lists; sweep.omega0 also accepts start:stop:step.
// Errors carry the field path, e.g. "pump.decay: must be >= 0". Relative
// table paths are resolved against `base_dir`.
RunConfig parse_config(std::istream& in, const std::string& source = "<config>",
                       const std::string& base_dir = ".");
RunConfig parse_config_string(const std::string& text, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);

// Writes every field of the present blocks; parse(serialize(c)) == c.
std::string serialize_config(const RunConfig& config);

}  // namespace pbec
