// gmtlab <experiment> --config <path> --seed <u64> --out <dir> [--samples N] [--threads K]

#include "gmtlab/cli.hpp"

#include <CLI11.hpp>

int main(int argc, char** argv) {
  CLI::App app{"Numerical experiments on Lipschitz plane fields"};
  std::string experiment, config, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  unsigned threads = 1;
  app.add_option("experiment", experiment, "Experiment name")
      ->required()
      ->check(CLI::IsMember(gmtlab::cli::experiment_names()));
  app.add_option("--config", config, "JSON config file")->required();
  app.add_option("--seed", seed, "64-bit seed");
  app.add_option("--out", out, "Output directory")->required();
  app.add_option("--samples", samples, "Samples per estimate");
  app.add_option("--threads", threads, "Worker threads");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  gmtlab::cli::RunOptions opt;
  opt.experiment = experiment;
  try {
    opt.config = gmtlab::cli::read_config(config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  opt.seed = seed;
  opt.samples = samples;
  opt.threads = threads;
  opt.out = out;
  return gmtlab::cli::run(opt);
}
