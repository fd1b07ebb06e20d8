#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "fracgi/cli.hpp"
#include "fracgi/parallel.hpp"

namespace {

void add_object_options(CLI::App& cmd, fracgi::cli::CliConfig& cfg) {
  cmd.add_option("--object", cfg.object_path, "PGM (P5) or CSV transmittance mask; default is the built-in letter A");
  cmd.add_option("--binarize", cfg.binarize, "threshold in (0,1): t >= threshold becomes 1, else 0");
}

void add_run_options(CLI::App& cmd, fracgi::cli::CliConfig& cfg) {
  cmd.add_option("--i0", cfg.i0, "mean reference intensity")->capture_default_str();
  cmd.add_option("--n-samples,-N", cfg.samples, "number of speckle frames")->capture_default_str();
  cmd.add_option("--orders", cfg.orders, "comma-separated mu:nu pairs")->capture_default_str();
  cmd.add_option("--seed", cfg.seed, "RNG seed")->capture_default_str();
  cmd.add_option("--workers", cfg.workers, "worker threads (default: FRACGI_WORKERS or all cores)");
  cmd.add_flag("--allow-nonpositive-nu", cfg.allow_nonpositive_nu, "accept -0.5 < nu <= 0");
  cmd.add_flag("--null-pairing", cfg.null_pairing, "pair each bucket with an unrelated reference frame");
}

int run(int argc, char** argv) {
  CLI::App app{"Fractional-order moment ghost imaging with thermal light"};
  app.require_subcommand(1);

  fracgi::cli::CliConfig cfg;
  cfg.workers = fracgi::default_worker_count();

  auto* simulate = app.add_subcommand("simulate", "simulate and reconstruct ghost images");
  add_object_options(*simulate, cfg);
  add_run_options(*simulate, cfg);
  simulate->add_option("--out", cfg.out_dir, "output directory")->required();
  simulate->add_option("--dump-raw", cfg.dump_raw, "also write the raw bucket/reference frames here");

  std::size_t pm = 20;
  double pmu = 0.0, pnu = 0.0, pn = 1.0, pi0 = 1.0;
  auto* predict = app.add_subcommand("predict", "closed-form predictions for a binary object");
  predict->add_option("--m", pm, "transmitting units")->required();
  predict->add_option("--mu", pmu, "bucket order")->required();
  predict->add_option("--nu", pnu, "reference order")->required();
  predict->add_option("--n", pn, "number of samples N")->capture_default_str();
  predict->add_option("--i0", pi0, "mean reference intensity")->capture_default_str();

  std::string sm = "20", smu = "-3:3:0.1", snu = "0.1:3:0.1", sout;
  auto* sweep = app.add_subcommand("sweep", "tabulate V and R_p/sqrt(N) over a grid");
  sweep->add_option("--m", sm, "comma-separated m values")->capture_default_str();
  sweep->add_option("--mu", smu, "start:stop:step")->capture_default_str();
  sweep->add_option("--nu", snu, "start:stop:step")->capture_default_str();
  sweep->add_option("--out", sout, "CSV output path")->required();

  auto* validate = app.add_subcommand("validate", "Monte Carlo check against the closed forms");
  validate->add_option("--m", cfg.builtin_m, "transmitting units of the built-in mask")->capture_default_str();
  add_run_options(*validate, cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(fracgi::ExitCode::usage);
  }

  if (*simulate) return fracgi::cli::cmd_simulate(cfg);
  if (*predict) return fracgi::cli::cmd_predict(pm, pmu, pnu, pn, pi0);
  if (*sweep) return fracgi::cli::cmd_sweep(sm, smu, snu, sout);
  return fracgi::cli::cmd_validate(cfg);
}

} // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const fracgi::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(fracgi::ExitCode::runtime);
  }
}
