#include <iostream>

#include "CLI11.hpp"
#include "wcps/cli.hpp"

int main(int argc, char** argv) {
  using namespace wcps;
  CLI::App app{"Remote control over lossy wireless links: design, analysis and simulation"};
  app.require_subcommand(1);

  std::string config_path;
  cli::Overrides ov;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::size_t trials = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "scenario file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "run a single seed instead of the configured seeds");
    sub->add_option("-o,--out", out_dir, "output directory");
  };
  auto* design = app.add_subcommand("design", "compute the controller gain");
  auto* analyze = app.add_subcommand("analyze", "mean-square stability of the remote loop");
  auto* simulate = app.add_subcommand("simulate", "closed-loop simulation per seed");
  auto* sweep = app.add_subcommand("sweep", "Monte Carlo sweep over loss, interval or burst length");
  auto* jitter = app.add_subcommand("jitter", "worst-case actuation jitter bound");
  for (auto* s : {design, analyze, simulate, sweep, jitter}) add_common(s);
  sweep->add_option("--trials", trials, "trials per sweep value");
  sweep->add_option("--threads", ov.threads, "worker threads (0 = hardware)");

  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = config::load_config(config_path);
    for (auto* s : {design, analyze, simulate, sweep, jitter}) {
      if (!app.got_subcommand(s)) continue;
      if (s->count("--seed")) ov.seed = seed;
      if (s->count("--out")) ov.out_dir = out_dir;
      if (s == sweep && s->count("--trials")) ov.trials = trials;
    }
    cli::apply(cfg, ov);
    if (app.got_subcommand(design)) return cli::cmd_design(cfg, std::cout);
    if (app.got_subcommand(analyze)) return cli::cmd_analyze(cfg, std::cout);
    if (app.got_subcommand(simulate)) return cli::cmd_simulate(cfg, std::cout);
    if (app.got_subcommand(sweep)) return cli::cmd_sweep(cfg, std::cout, ov.threads);
    return cli::cmd_jitter(cfg, std::cout);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitUsage;
  }
}
