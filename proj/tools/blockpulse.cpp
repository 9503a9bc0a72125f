// SPDX-License-Identifier: Apache-2.0
// blockpulse <stage> --config <path> [--seed <u64>]

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "blockpulse/pipeline.hpp"

int main(int argc, char** argv) {
  namespace bp = blockpulse;
  CLI::App app{"Reconstruct /24 block usage from probe observations and detect usage changes"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::uint64_t seed = 0;
  const char* stages[] = {"simulate", "reconstruct", "classify", "detrend", "detect", "aggregate", "all"};
  const char* help[] = {"generate observations from block profiles",
                        "build per-block active-address series",
                        "flag change-sensitive blocks",
                        "decompose change-sensitive series",
                        "find and label trend changes",
                        "grid-cell daily summaries, heatmaps and cell series",
                        "run every stage in order"};
  for (int i = 0; i < 7; ++i) {
    auto* sub = app.add_subcommand(stages[i], help[i]);
    sub->add_option("--config", config_path, "key = value configuration file")->required();
    sub->add_option("--seed", seed, "overrides the seed in the config");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  const auto stage = bp::parse_stage(app.get_subcommands().front()->get_name());

  bp::PipelineConfig cfg;
  try {
    const std::filesystem::path path(config_path);
    cfg = bp::parse_config(bp::detail::read_file(path), path.parent_path());
  } catch (const bp::MissingInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const bp::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  if (app.get_subcommands().front()->count("--seed")) cfg.seed = seed;
  return bp::run_stage(*stage, cfg, std::cerr);
}
