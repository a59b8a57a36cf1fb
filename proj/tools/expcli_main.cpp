#include <CLI11.hpp>
#include <cstdio>

#include "expcli/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"mambacomm experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "run an experiment from a config file");
  run->add_option("config", config_path, "config file (INI)")->required();

  std::string report_dir, fig_kind;
  auto* plot = app.add_subcommand("plot", "render a figure from a report directory");
  plot->add_option("dir", report_dir, "report directory")->required();
  plot->add_option("kind", fig_kind, "latency | bleu | scanbench | training")->required();

  auto* self = app.add_subcommand("selftest", "run the quick invariant suite");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      expcli::Config cfg = expcli::Config::parse_file(config_path);
      auto result = expcli::run_experiment(cfg);
      std::printf("report written to %s\n", result.out_dir.c_str());
    } else if (*plot) {
      std::string out = expcli::make_plot(report_dir, fig_kind);
      std::printf("figure written to %s\n", out.c_str());
    } else if (*self) {
      return expcli::selftest();
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
