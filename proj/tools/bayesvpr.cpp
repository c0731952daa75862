#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bayesvpr/app.hpp"
#include "bayesvpr/error.hpp"

int main(int argc, char** argv) {
  using namespace bayesvpr;
  CLI::App app{"Sequential place recognition and coarse localization"};
  app.require_subcommand(1);

  std::string config_path;
  CliOverrides o;
  std::string method, out, tolerance;
  std::uint64_t seed = 0;
  std::size_t trials = 0, jobs = 0, trial_index = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Config file (defaults when omitted)");
    cmd->add_option("--method", method, "topological, mcl, single or seqmatch");
    cmd->add_option("--seed", seed, "Run seed");
    cmd->add_option("--trials", trials, "Number of trials");
    cmd->add_option("--jobs", jobs, "Worker threads (1 = serial)");
    cmd->add_option("--out", out, "Output directory (default $BAYESVPR_OUT or .)");
    cmd->add_option("--tolerance", tolerance, "3m15deg or 5m30deg")
        ->check(CLI::IsMember({"3m15deg", "5m30deg"}));
  };

  CLI::App* generate = app.add_subcommand("generate", "Write a synthetic dataset");
  CLI::App* evaluate = app.add_subcommand("evaluate", "Run trials and write pr_curve.csv, summary.csv");
  CLI::App* localize = app.add_subcommand("localize", "Per-step trace of one trial");
  CLI::App* bench = app.add_subcommand("bench", "Per-iteration timing");
  CLI::App* dump = app.add_subcommand("dump-config", "Print the effective configuration");
  for (CLI::App* cmd : {generate, evaluate, localize, bench, dump}) add_common(cmd);
  localize->add_option("--trial", trial_index, "Trial index")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  CLI::App* chosen = app.get_subcommands().front();
  auto given = [&](const char* flag) { return chosen->count(flag) > 0; };
  if (given("--method")) o.method = method;
  if (given("--seed")) o.seed = seed;
  if (given("--trials")) o.trials = trials;
  if (given("--jobs")) o.jobs = jobs;
  if (given("--out")) o.out = out;
  if (given("--tolerance")) o.tolerance = tolerance;

  RunConfig cfg;
  try {
    cfg = resolve_config(config_path, o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  }

  if (chosen == generate) return cmd_generate(cfg, std::cout, std::cerr);
  if (chosen == evaluate) return cmd_evaluate(cfg, std::cout, std::cerr);
  if (chosen == localize) return cmd_localize(cfg, trial_index, std::cout, std::cerr);
  if (chosen == bench) return cmd_bench(cfg, std::cout, std::cerr);
  dump_config(std::cout, cfg);
  return kExitOk;
}
