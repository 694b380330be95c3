// Command-line driver: ride <stage> --config <path> [--seed N] [--out DIR]

#include "ride/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kMissingDependency = 2, kBadConfig = 3, kRuntimeFailure = 4 };

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"RIDE: payload embeddings, tree distillation, and hardware-aware tree tuning"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  bool verbose = false;

  std::vector<std::string> names;
  for (auto s : ride::pipeline::all_stages()) names.emplace_back(ride::pipeline::to_string(s));
  names.emplace_back("all");
  for (const auto& name : names) {
    auto* sub = app.add_subcommand(name, name == "all" ? "run every stage in order" : "run the " + name + " stage");
    sub->add_option("-c,--config", config_path, "pipeline config JSON")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out_dir, "override the output directory");
    sub->add_flag("-v,--verbose", verbose, "log progress to stderr");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : (dynamic_cast<const CLI::ValidationError*>(&e) ? kBadConfig : kUsage);
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  const auto* sub = app.get_subcommands().front();
  try {
    ride::pipeline::PipelineConfig cfg =
        config_path.empty() ? ride::pipeline::PipelineConfig{} : ride::pipeline::PipelineConfig::load(config_path);
    if (sub->count("--seed")) cfg.seed = seed;
    if (sub->count("--out")) cfg.out_dir = out_dir;
    if (verbose) cfg.verbose = true;
    cfg.validate();

    if (stage == "all")
      ride::pipeline::run_all(cfg);
    else
      ride::pipeline::run_stage(ride::pipeline::stage_from_string(stage), cfg);
    std::cout << stage << ": ok (" << cfg.out_dir.string() << ")\n";
    return kOk;
  } catch (const ride::pipeline::MissingDependency& e) {
    std::cerr << "ride " << stage << ": " << e.what() << '\n';
    return kMissingDependency;
  } catch (const ride::pipeline::ConfigError& e) {
    std::cerr << "ride " << stage << ": " << e.what() << '\n';
    return kBadConfig;
  } catch (const std::exception& e) {
    std::cerr << "ride " << stage << ": " << e.what() << '\n';
    return kRuntimeFailure;
  }
}
