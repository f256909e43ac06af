// mtedebias: simulate, estimate and de-bias marginal treatment effects under
// instrument non-response.
//
//   mtedebias <command> [--config FILE] [--n N] [--seed S] [--reps R] [--out DIR]
//             [--trim T] [--bw-mult B] [--delta-bar D] [--latent] ...
//
// Settings are taken from the built-in defaults, then the config file, then
// the flags given here.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mtedebias/errors.hpp"
#include "mtedebias/harness/commands.hpp"
#include "mtedebias/harness/config.hpp"
#include "mtedebias/pscore.hpp"

int main(int argc, char** argv) {
  using namespace mte::harness;

  CLI::App app{"Marginal treatment effects under instrument non-response"};
  app.set_version_flag("--version", MTEDEBIAS_VERSION_STRING);

  std::string command;
  std::string config_path;
  std::optional<std::size_t> n, reps;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> out, input, method;
  std::optional<double> trim, bw_mult, liv_bw_mult, delta_bar;
  bool latent = false, limited = false;

  app.add_option("command", command, "simulate | estimate | debias | bounds | weakiv | replicate")
      ->required()
      ->check(CLI::IsMember(command_names()));
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--n", n, "sample size")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "root seed");
  app.add_option("--reps", reps, "replications for replicate / weakiv")->check(CLI::PositiveNumber);
  app.add_option("--threads", threads, "worker threads (0 = available parallelism)");
  app.add_option("--out", out, "output directory");
  app.add_option("--input", input, "sample CSV to analyse instead of simulating");
  app.add_option("--method", method, "propensity method: kernel | probit-mle | oracle");
  app.add_option("--trim", trim, "support trim fraction")->check(CLI::Range(0.0, 0.4999));
  app.add_option("--bw-mult", bw_mult, "propensity kernel bandwidth multiplier")->check(CLI::PositiveNumber);
  app.add_option("--liv-bw-mult", liv_bw_mult, "outcome curve bandwidth multiplier")->check(CLI::PositiveNumber);
  app.add_option("--delta-bar", delta_bar, "upper bound on the non-responder share (bounds)")
      ->check(CLI::Range(0.0, 0.999999));
  app.add_flag("--latent", latent, "include latent columns in the sample CSV");
  app.add_flag("--limited-support", limited, "report bounds instead of point estimates");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  RunConfig config;
  try {
    if (!config_path.empty()) config = load_config(config_path);
    if (n) config.run.n = *n;
    if (seed) config.run.seed = *seed;
    if (reps) {
      config.run.reps = *reps;
      config.weakiv.reps = *reps;
    }
    if (threads) config.run.threads = *threads;
    if (out) config.run.out = *out;
    if (input) config.run.input = *input;
    if (method) config.estimation.pscore_method = mte::pscore::method_from_string(*method);
    if (trim) config.estimation.trim = *trim;
    if (bw_mult) config.estimation.bw_mult = *bw_mult;
    if (liv_bw_mult) config.estimation.liv_bw_mult = *liv_bw_mult;
    if (delta_bar) config.delta_bar = *delta_bar;
    if (latent) config.run.latent = true;
    if (limited) config.limited_support = true;
  } catch (const mte::ConfigError& e) {
    std::cerr << "mtedebias: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const mte::IoError& e) {
    std::cerr << "mtedebias: io error: " << e.what() << "\n";
    return kExitIo;
  }
  return run_command(command, config, std::cout, std::cerr);
}
