// srctrace: checkpoint attribution and unseen-generator detection over
// precomputed speech embeddings. See docs/cli.md.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "srctrace/error.hpp"

namespace {

constexpr int kExitData = 2;
constexpr int kExitUsage = 64;

}  // namespace

int main(int argc, char** argv) {
  using srctrace::cli::RunConfig;
  CLI::App app{"Checkpoint attribution and OOD detection over SSL embeddings", "srctrace"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI/TOML key=value file; command-line flags override it");

  RunConfig cfg;
  std::string out = ".", protocol;
  std::vector<std::string> embeddings;

  auto add_inputs = [&](CLI::App* sub) {
    sub->add_option("--manifest", cfg.manifest, "JSON-Lines manifest")->required();
    sub->add_option("--embeddings", embeddings, "EMB1 embedding file(s)")->delimiter(',');
    sub->add_option("--embeddings-template", cfg.embeddings_template, "path with a {layer} placeholder");
    sub->add_option("--layer", cfg.layers, "layer(s) to use")->delimiter(',');
    sub->add_option("--threads", cfg.threads, "worker threads (0 = all cores)");
    sub->add_option("--out", out, "output directory");
  };
  auto add_target = [&](CLI::App* sub) {
    sub->add_option("--target", cfg.target, "checkpoint|acoustic_model|vocoder|dataset|speaker|language|relabel:<path>")
        ->capture_default_str();
  };
  auto add_k = [&](CLI::App* sub) {
    sub->add_option("--k", cfg.ks, "number of neighbours")->delimiter(',')->capture_default_str()->check(CLI::PositiveNumber);
  };
  auto add_seeds = [&](CLI::App* sub) {
    sub->add_option("--seed", cfg.seeds, "random seed(s)")->delimiter(',')->capture_default_str();
  };

  auto* ingest = app.add_subcommand("ingest", "validate a manifest against embedding files and summarise it");
  add_inputs(ingest);

  auto* attribute = app.add_subcommand("attribute", "fit on support, classify test, report macro F1 per seed");
  add_inputs(attribute);
  add_target(attribute);
  add_k(attribute);
  add_seeds(attribute);
  attribute->add_option("--split", cfg.split, "ratio:a[:b[:c]] | per-class:n | leave-n-out:n|half")->capture_default_str();
  attribute->add_option("--group-by", cfg.group_by, "grouping field for leave-n-out")->capture_default_str();
  attribute->add_option("--protocol", protocol, "published split file (overrides --split/--seed)");
  attribute->add_flag("--condense", cfg.condense, "condense the support set (Hart) before classifying");

  auto* sweep = app.add_subcommand("sweep", "layer x support-size grid of macro F1");
  add_inputs(sweep);
  add_target(sweep);
  add_k(sweep);
  add_seeds(sweep);
  sweep->add_option("--grid", cfg.grid, "support settings: integers = per class, (0,1) = ratio")
      ->delimiter(',')
      ->capture_default_str();

  auto* ood = app.add_subcommand("ood", "unseen-checkpoint detection with an EER threshold");
  add_inputs(ood);
  add_target(ood);
  add_k(ood);
  add_seeds(ood);
  ood->add_option("--per-dataset", cfg.per_dataset, "checkpoints held out per dataset")->capture_default_str();
  ood->add_option("--protocol", protocol, "published split file (overrides --per-dataset/--seed)");

  auto* neighbors = app.add_subcommand("analyze-neighbors", "neighbour purity matrices");
  add_inputs(neighbors);
  add_target(neighbors);
  add_k(neighbors);

  auto* condense = app.add_subcommand("condense", "Hart condensed nearest-neighbour support selection");
  add_inputs(condense);
  add_target(condense);
  add_seeds(condense);
  condense->add_option("--protocol", protocol, "condense only the support rows of this split file");

  auto* report = app.add_subcommand("report", "re-render text reports from CSV/JSON artifacts");
  report->add_option("--out", out, "directory holding earlier outputs")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitUsage;
  }

  for (const auto& e : embeddings) cfg.embeddings.emplace_back(e);
  cfg.out = out;
  cfg.protocol = protocol;

  try {
    if (*ingest) return srctrace::cli::cmd_ingest(cfg, std::cout);
    if (*attribute) return srctrace::cli::cmd_attribute(cfg, std::cout);
    if (*sweep) return srctrace::cli::cmd_sweep(cfg, std::cout);
    if (*ood) return srctrace::cli::cmd_ood(cfg, std::cout);
    if (*neighbors) return srctrace::cli::cmd_analyze_neighbors(cfg, std::cout);
    if (*condense) return srctrace::cli::cmd_condense(cfg, std::cout);
    if (*report) return srctrace::cli::cmd_report(cfg, std::cout);
  } catch (const srctrace::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
