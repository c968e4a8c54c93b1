// onebit: one-bit DOA experiments with BSBL and BIHT.
//
//   onebit run --spec configs/smv.yaml [--seed N] [--out DIR] [--threads N]
//   onebit single --spec configs/fig_single.yaml --emit-spectrum
//   onebit selftest

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "onebit/commands.hpp"
#include "onebit/runspec.hpp"

namespace {

struct Overrides
{
  std::string spec_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
};

std::optional<onebit::RunSpec> load_spec(const Overrides& o)
{
  std::ifstream in(o.spec_path);
  if (!in) {
    std::cerr << o.spec_path << ": cannot open\n";
    return std::nullopt;
  }
  std::stringstream text;
  text << in.rdbuf();
  try {
    onebit::RunSpec spec = onebit::parse_run_spec(text.str());
    if (o.seed) spec.seed = *o.seed;
    if (o.out) spec.output = *o.out;
    if (o.threads) spec.threads = std::max(1u, *o.threads);
    return spec;
  } catch (const onebit::ConfigError& e) {
    if (e.line() > 0)
      std::cerr << o.spec_path << ':' << e.line() << ": "
                << std::string(e.what()).substr(std::string(e.what()).find(": ") + 2) << '\n';
    else
      std::cerr << o.spec_path << ": " << e.what() << '\n';
    return std::nullopt;
  }
}

void add_common(CLI::App* cmd, Overrides& o)
{
  cmd->add_option("--spec", o.spec_path, "YAML run spec")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "override the spec seed");
  cmd->add_option("--out", o.out, "override the output directory");
  cmd->add_option("--threads", o.threads, "worker threads for Monte-Carlo trials");
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"One-bit compressed sensing DOA experiments (BSBL, BIHT)"};
  app.require_subcommand(1);

  Overrides run_opts, single_opts;
  bool emit_spectrum = false;

  auto* run = app.add_subcommand("run", "Monte-Carlo sweep; writes trials.csv, summary.csv, bins.csv");
  add_common(run, run_opts);

  auto* single = app.add_subcommand("single", "one seeded realization");
  add_common(single, single_opts);
  single->add_flag("--emit-spectrum", emit_spectrum, "write spectrum.csv for plotting");

  auto* selftest = app.add_subcommand("selftest", "closed-form checks of the solver core");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : onebit::exit_config;
  }

  if (selftest->parsed())
    return onebit::cmd_selftest(std::cout);

  const Overrides& o = run->parsed() ? run_opts : single_opts;
  const auto spec = load_spec(o);
  if (!spec)
    return onebit::exit_config;
  if (run->parsed())
    return onebit::cmd_run(*spec, std::cout, std::cerr);
  return onebit::cmd_single(*spec, emit_spectrum, std::cout, std::cerr);
}
