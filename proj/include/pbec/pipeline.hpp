#pragma once

#include <string>
#include <vector>

#include "pbec/config.hpp"
#include "pbec/errors.hpp"

namespace pbec {

// Raw config text plus the directory relative paths resolve against. The
// text is echoed verbatim into every output directory.
struct ConfigSource {
  std::string text;
  std::string base_dir = ".";
  std::string name = "<config>";

  static ConfigSource read(const std::string& path);
  RunConfig parse() const;
};

struct RunOptions {
  std::string out_dir;  // overrides output.directory when set
  int threads = 0;      // overrides sweep.threads when > 0
  bool strict = false;  // warnings that signal truncation become errors
};

struct ResultBundle {
  std::string command;
  std::string run_id;  // 16 hex digits hashed from the config text
  std::string out_dir;
  std::vector<std::string> files;  // relative to out_dir
  std::vector<std::string> warnings;
  double seconds = 0.0;
};

// FNV-1a of the text, as 16 hex digits.
std::string run_id_for(const std::string& config_text);

// Each run writes config.ini (the input bytes), its tables and summary.json
// into the output directory. Errors propagate as pbec::Error after whatever
// partial output exists has been flushed.
ResultBundle run_steady(const ConfigSource& source, const RunOptions& options = {});
ResultBundle run_coherence(const ConfigSource& source, const RunOptions& options = {});
ResultBundle run_sweep(const ConfigSource& source, const RunOptions& options = {});
ResultBundle run_verify(const ConfigSource& source, const RunOptions& options = {});

// 0 success, 2 validation/format/contract, 3 convergence/truncation,
// 4 verification breach, 5 resource.
int exit_code(ErrorKind kind);

}  // namespace pbec
