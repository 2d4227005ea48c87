// korolat: lattice construction, fiber statistics, approximation runs and
// reference tables from the command line.

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace korolat::cli;
  CLI::App app{"Rank-1 lattice approximation in weighted Korobov spaces"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the verb

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> scale;
  std::optional<int> table;
  std::string out_path;
  bool slow = false;

  app.add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Root seed");
  app.add_option("--threads", threads, "Maximum worker threads")->check(CLI::PositiveNumber);
  app.add_option("--scale", scale, "Ladder scale for table")->check(CLI::IsMember({"desk", "full"}));
  app.add_option("--out", out_path, "Output file (default: stdout)");

  const std::map<std::string, std::string> help = {
      {"cbc", "Build generating vectors component by component"},
      {"sample-g", "Draw random generating vectors that pass the reconstruction test"},
      {"fibers", "Fiber length histogram over random lattices"},
      {"approx", "Approximate a test function and report the error"},
      {"table", "Run one reference table ladder as CSV"},
      {"eval", "Evaluate a stored model"},
  };
  for (const auto& verb : verbs()) {
    auto* sub = app.add_subcommand(verb, help.at(verb));
    if (verb == "cbc") sub->add_flag("--slow", slow, "Direct O(d N^2) search instead of the FFT");
    if (verb == "table") sub->add_option("--table", table, "Table id 1..6")->check(CLI::Range(1, 6));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalidConfig;
  }

  ExperimentConfig cfg;
  if (!config_path.empty()) {
    const int code = guarded([&] { cfg = load_config_file(config_path); }, std::cerr);
    if (code != kOk) return code;
  }
  if (seed) cfg.seed = *seed;
  if (threads) cfg.threads = *threads;
  if (scale) cfg.scale = *scale;
  if (table) cfg.table = *table;
  if (slow) cfg.fast = false;

  const std::string verb = app.get_subcommands().front()->get_name();
  return run_verb(verb, cfg, out_path, std::cout, std::cerr);
}
