#include "megclass/cli.hpp"

#include "megclass/config.hpp"
#include "megclass/error.hpp"
#include "megclass/evalharness.hpp"
#include "megclass/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;

namespace megclass {

namespace {

RunConfig build_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig cfg = path.empty() ? RunConfig{} : load_config(path);
  for (const auto& o : overrides) cfg.apply_override(o);
  // Paths given via --set are relative to the working directory.
  cfg.resolve_paths(fs::current_path());
  cfg.validate();
  return cfg;
}

int write_synthetic(const fs::path& out, const SyntheticConfig& sc) {
  const SyntheticCorpus corpus = make_synthetic_corpus(sc);
  write_synthetic_corpus(out, corpus);
  std::ofstream conf(out / "megclass.conf");
  conf << "corpus = corpus.jsonl\n"
       << "classes = classes.txt\n"
       << "labels = labels.jsonl\n"
       << "provider = precomputed\n"
       << "embeddings_dir = embeddings\n"
       << "run_dir = run\n";
  spdlog::info("synthetic corpus with {} documents written to {}", corpus.docs.size(), out.string());
  return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"megclass: weakly supervised text classification from class names"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  bool verbose = false;
  bool quiet = false;
  bool force = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "Config file (key = value per line)")->required();
    sub->add_option("--set", overrides, "Override a config key (key=value)");
  };
  auto* prepare = app.add_subcommand("prepare", "Segment the corpus and validate classes and labels");
  add_common(prepare);
  prepare->add_flag("--force", force, "Redo even if up to date");
  auto* embed = app.add_subcommand("embed", "Compute token and static word vector caches");
  add_common(embed);
  embed->add_flag("--force", force, "Redo even if up to date");
  auto* run = app.add_subcommand("run", "Keyword expansion, iterative attention training and scoring");
  add_common(run);
  auto* ablate = app.add_subcommand("ablate", "Initial-ensemble and weight-mode ablations (needs labels)");
  add_common(ablate);
  auto* exp = app.add_subcommand("export", "Write the pseudo-labeled training set and classifier predictions");
  add_common(exp);
  auto* report = app.add_subcommand("report", "Aggregate metrics into JSON, CSV and SVG plots");
  add_common(report);

  SyntheticConfig sc;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus with planted classes");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--classes", sc.classes, "Number of classes");
  synth->add_option("--docs-per-class", sc.docs_per_class, "Documents per class");
  synth->add_option("--sentences", sc.sents_per_doc, "Sentences per document");
  synth->add_option("--purity", sc.purity, "Chance a sentence matches its document's class");
  synth->add_option("--noise", sc.noise_std, "Noise standard deviation");
  synth->add_option("--dim", sc.dim, "Embedding dimension");
  synth->add_option("--seed", sc.seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    if (synth->parsed()) return write_synthetic(synth_out, sc);
    const RunConfig cfg = build_config(config_path, overrides);
    if (cfg.run_dir.empty()) throw ConfigError("config key 'run_dir' is required");
    RunDirLock lock(cfg.run_dir);
    if (prepare->parsed()) stage_prepare(cfg, force);
    else if (embed->parsed()) stage_embed(cfg, force);
    else if (run->parsed()) stage_run(cfg);
    else if (ablate->parsed()) stage_ablate(cfg);
    else if (exp->parsed()) stage_export(cfg);
    else if (report->parsed()) stage_report(cfg);
    return 0;
  } catch (const ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return 2;
  } catch (const PrerequisiteError& e) {
    spdlog::error("{}", e.what());
    return 3;
  } catch (const CacheError& e) {
    spdlog::error("{}", e.what());
    return 3;
  } catch (const NumericalError& e) {
    spdlog::error("numerical failure: {}", e.what());
    return 4;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}

}  // namespace megclass
