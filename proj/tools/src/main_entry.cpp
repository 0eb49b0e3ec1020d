#include <iostream>

#include <CLI11.hpp>

#include "optopulse_cli/app.hpp"

namespace optopulse::cli {

int main_entry(int argc, char** argv) {
  CLI::App app{"optopulse: pulsed optomechanical measurement and tomography runs"};
  app.require_subcommand(1);

  RunOptions options;
  std::uint64_t seed = 0;
  for (const char* name : {"pulse", "tomography", "purify"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", options.config, "JSON run configuration")->required()->envname("OPTOPULSE_CONFIG");
    sub->add_option("--out", options.out, "output directory")->required()->envname("OPTOPULSE_OUT");
    sub->add_option("--seed", seed, "master seed, overrides the config")->envname("OPTOPULSE_SEED");
    sub->add_option("--threads", options.threads, "worker threads")
        ->envname("OPTOPULSE_THREADS")
        ->check(CLI::Range(1u, 1024u));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  const CLI::App* chosen = app.get_subcommands().front();
  if (chosen->count("--seed") > 0 || std::getenv("OPTOPULSE_SEED") != nullptr) options.seed = seed;
  return run_command(chosen->get_name(), options, std::cout, std::cerr);
}

}  // namespace optopulse::cli
