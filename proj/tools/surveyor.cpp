// surveyor: administer questionnaires to completion backends and analyze the
// answers. See README.md for the pipeline and file formats.

#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "surveyor/analysis.hpp"
#include "surveyor/cli.hpp"

namespace sc = surveyor::cli;

int main(int argc, char** argv) {
  CLI::App app{"surveyor: questionnaire sampling harness for text-completion models"};
  app.require_subcommand(1);

  sc::Options opt;
  std::string config, out_dir = "out";
  std::uint64_t seed = 0;
  app.add_option("--config", config, "Run/analysis configuration file")->check(CLI::ExistingFile);
  app.add_option("--out-dir", out_dir, "Run directory for outputs")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", seed, "Override the configured seed");
  app.add_flag("--dry-run", opt.dry_run, "Plan the run and estimate prompt sizes without sending");
  app.add_flag("-v,--verbose", opt.verbose, "Log progress to stderr");

  std::string instrument_path, dataset_dir, profiles_path;
  auto* validate = app.add_subcommand("validate", "Check an instrument definition");
  validate->add_option("instrument", instrument_path, "Instrument definition file")->required();
  auto* run = app.add_subcommand("run", "Sample responses per the config");
  auto* ingest = app.add_subcommand("ingest", "Convert a published dataset directory into run directories");
  ingest->add_option("dataset", dataset_dir, "Directory of <instrument>_<mode>.csv files")->required();
  auto* parse = app.add_subcommand("parse", "Clean raw responses in the run directory");
  auto* score = app.add_subcommand("score", "Score cleaned answers into profiles");
  auto* analyze = app.add_subcommand("analyze", "Run the statistics battery and write results.json");
  analyze->add_option("profiles", profiles_path, "Profiles or demographics CSV (default: from --out-dir)");
  auto* report = app.add_subcommand("report", "Render tables and report.md");
  report->add_option("profiles", profiles_path, "Profiles or demographics CSV (default: from --out-dir)");

  CLI11_PARSE(app, argc, argv);

  if (!config.empty()) opt.config = config;
  opt.out_dir = out_dir;
  if (seed_opt->count()) opt.seed = seed;
  auto profiles = [&] { return profiles_path.empty() ? sc::default_profiles(opt) : std::filesystem::path(profiles_path); };

  sc::CommandOutcome outcome;
  if (validate->parsed())
    outcome = sc::cmd_validate(instrument_path);
  else if (run->parsed())
    outcome = sc::cmd_run(opt);
  else if (ingest->parsed())
    outcome = sc::cmd_ingest(dataset_dir, opt);
  else if (parse->parsed())
    outcome = sc::cmd_parse(opt);
  else if (score->parsed())
    outcome = sc::cmd_score(opt);
  else if (analyze->parsed())
    outcome = sc::cmd_analyze(profiles(), opt);
  else if (report->parsed())
    outcome = sc::cmd_report(profiles(), opt);

  for (const auto& line : outcome.summary) (line.rfind("error:", 0) == 0 ? std::cerr : std::cout) << line << '\n';
  if (opt.verbose)
    for (const auto& p : outcome.artifact_paths) std::cerr << "[surveyor] wrote " << p.string() << '\n';
  return outcome.exit_code;
}
