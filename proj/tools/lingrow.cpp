#include <string>

#include "CLI11.hpp"

#include "lingrow/app.hpp"

int main(int argc, char** argv) {
  CLI::App cli{"Linear-growth Dirichlet problems: criterion, radial gap, barriers and eps-sweeps"};
  cli.require_subcommand(1);
  std::string config, out = ".";
  for (const char* name : {"check-integrand", "radial", "barrier-verify", "sweep", "dichotomy"}) {
    CLI::App* sub = cli.add_subcommand(name);
    sub->add_option("--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory");
  }
  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : 2;
  }
  return lingrow::app::run(cli.get_subcommands().front()->get_name(), config, out);
}
