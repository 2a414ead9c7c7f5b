// Command-line front end: tsflow_cli <subcommand> --config PATH [options].

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "tsflow/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Certified correlation experiments on rank-one flows"};
  std::string sub, config, out, format;
  int stage_max = 0, threads = 1;
  bool timestamp = false;
  app.add_option("subcommand", sub, "build | rigidity | middle | special | theorem | exp | metric | all")
      ->required()
      ->check(CLI::IsMember(tsflow::subcommands()));
  app.add_option("--config", config, "experiment configuration (JSON)")->required();
  app.add_option("--out", out, "write the report here instead of output.path or stdout");
  app.add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--stage-max", stage_max, "construct at most this many stages")->check(CLI::PositiveNumber);
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--timestamp", timestamp, "record the wall-clock time in the metadata");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  tsflow::ExperimentConfig cfg;
  try {
    cfg = tsflow::load_config(config);
  } catch (const tsflow::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  tsflow::RunOptions opts;
  opts.threads = threads;
  if (stage_max > 0) opts.stage_max = stage_max;
  opts.timestamp = timestamp;
  const auto result = tsflow::run(sub, cfg, opts);
  const std::string fmt = format.empty() ? cfg.format : format;
  const std::string path = out.empty() ? cfg.path : out;
  try {
    const std::string bytes = tsflow::emit(result.report, fmt);
    if (path.empty() || path == "-")
      std::cout << bytes;
    else
      tsflow::write_file(path, bytes);
  } catch (const tsflow::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  for (const auto& r : result.report.records)
    if (r.pass && !*r.pass) std::cerr << "FAIL " << r.check_id << (r.stage ? " stage " + std::to_string(*r.stage) : "") << "\n";
  return result.exit_code;
}
