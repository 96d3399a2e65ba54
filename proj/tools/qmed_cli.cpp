#include "qmed/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

int main(int argc, char** argv) {
  CLI::App app{"Markov entropy decomposition: free-energy lower bounds for quantum spin systems"};
  std::string config_path, command, out_dir;
  int threads = 0;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "Run configuration")->required()->check(CLI::ExistingFile);
  auto* command_opt = app.add_option("--command", command, "Override the configured command")
                          ->check(CLI::IsMember({"sweep", "bound", "bp", "reconstruct", "verify"}));
  auto* out_opt = app.add_option("--out", out_dir, "Output directory");
  auto* threads_opt = app.add_option("--threads", threads, "Worker threads (used when warm start is off)")
                          ->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "Solver seed");
  CLI11_PARSE(app, argc, argv);

  try {
    std::ifstream in(config_path, std::ios::binary);
    std::stringstream text;
    text << in.rdbuf();
    auto config = qmed::cli::parse_config(text.str());
    if (*command_opt) config.command = qmed::cli::parse_command(command);
    if (*out_opt) config.output = out_dir;
    if (*threads_opt) config.threads = threads;
    if (*seed_opt) config.solver.seed = seed;
    const auto results = qmed::cli::run_command(config);
    qmed::cli::emit_results(results, config.output);
    std::cout << results.summary;
    std::cout << results.rows.size() << " rows written to " << config.output << "\n";
    return results.exit_code;
  } catch (const std::exception& e) {
    std::cerr << config_path << ": " << e.what() << "\n";
    return qmed::cli::exit_error;
  }
}
