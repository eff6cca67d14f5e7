#include <exception>
#include <iostream>

#include "CLI11.hpp"
#include "pbec/pipeline.hpp"

namespace {

struct Args {
  std::string config;
  pbec::RunOptions options;
};

void add_common(CLI::App* cmd, Args& args) {
  cmd->add_option("--config", args.config, "run configuration (INI-like)")->required();
  cmd->add_option("--out", args.options.out_dir, "output directory, overrides output.directory");
  cmd->add_option("--threads", args.options.threads, "worker threads for sweeps")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--strict", args.options.strict, "treat truncation warnings as errors");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multimode photon condensate coherence simulator"};
  app.require_subcommand(1);
  Args args;
  using Runner = pbec::ResultBundle (*)(const pbec::ConfigSource&, const pbec::RunOptions&);
  Runner runner = nullptr;

  auto* steady = app.add_subcommand("steady", "steady state of the rate equations");
  auto* coherence = app.add_subcommand("coherence", "correlations, spectra and coherence times");
  auto* sweep = app.add_subcommand("sweep", "coherence time over cutoff and pump grids");
  auto* verify = app.add_subcommand("verify", "exact small-instance checks");
  for (auto* cmd : {steady, coherence, sweep, verify}) add_common(cmd, args);
  steady->callback([&] { runner = pbec::run_steady; });
  coherence->callback([&] { runner = pbec::run_coherence; });
  sweep->callback([&] { runner = pbec::run_sweep; });
  verify->callback([&] { runner = pbec::run_verify; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto bundle = runner(pbec::ConfigSource::read(args.config), args.options);
    for (const auto& w : bundle.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << bundle.command << " " << bundle.run_id << " -> " << bundle.out_dir << " ("
              << bundle.files.size() << " files, " << bundle.seconds << " s)\n";
    return 0;
  } catch (const pbec::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pbec::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
