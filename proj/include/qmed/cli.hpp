// cli.hpp - batch front-end: sectioned key-value configs, command dispatch,
// and deterministic CSV plus JSON manifest output.
//
// Config format (`#` starts a comment):
//
//     [run]
//     command = sweep            # sweep | bound | bp | reconstruct | verify
//     output = out
//     seed = 0
//     threads = 1
//
//     [model]
//     name = heisenberg          # heisenberg | ising | tfim
//     coupling = 1
//     field = 0
//
//     [lattice]
//     kind = ti_chain            # chain | square | ti_chain | ti_square
//     lx = 8
//     ly = 1
//     boundary = periodic        # open | periodic
//
//     [shield]
//     shield = [(-1,0),(-2,0)]   # or window(n), square7, square10
//     shield_2 = ...             # further patches, shield_2 .. shield_9
//     radius = 1                 # finite lattices without a template
//     translations = unit        # unit | all
//     assignment = highest       # highest | fractional
//
//     [temperature]
//     grid = 0.5, 1, 2           # or: range = lo, hi, count
//
//     [solver]                   # SolverConfig fields, plus warm_start
//     [bp]                       # BPConfig fields, plus window

#pragma once

#include "qmed/bpdual.hpp"
#include "qmed/lattice.hpp"
#include "qmed/med.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace qmed::cli {

inline constexpr const char* version = "0.1.0";

enum class Command { Sweep, Bound, Bp, Reconstruct, Verify };

std::string to_string(Command command);
Command parse_command(const std::string& name);

struct RunConfig {
  Command command = Command::Sweep;
  lattice::ModelSpec model;
  lattice::LatticeSpec lattice{lattice::Kind::TiChain, 1, 1, lattice::Boundary::Periodic, 1};
  std::vector<std::vector<lattice::Offset>> shields;  // explicit templates, one per patch
  int neighborhood_radius = 1;                         // finite lattices with no template
  med::TranslationSet translations = med::TranslationSet::Unit;
  lattice::TermAssignment assignment = lattice::TermAssignment::HighestSite;
  std::vector<double> temperatures;
  med::SolverConfig solver;
  bool warm_start = true;
  bp::BPConfig bp;
  int bp_window = 1;
  std::string output = "out";
  int threads = 1;

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

RunConfig parse_config(const std::string& text);
std::string render(const RunConfig& config);

/// Offset list "[(-1,0),(-2,0)]" or a named template.
std::vector<lattice::Offset> parse_shield(const std::string& text);

struct RunResults {
  std::vector<med::SweepRow> rows;
  std::vector<std::pair<std::string, std::string>> extra_files;  // file name, contents
  std::string manifest;  // JSON
  std::string summary;   // one human-readable line per notable result
  int exit_code = 0;
};

RunResults run_command(const RunConfig& config);

/// The results CSV with the fixed header.
std::string results_csv(const std::vector<med::SweepRow>& rows);

/// Writes results.csv, manifest.json and any extra files into `dir`.
void emit_results(const RunResults& results, const std::filesystem::path& dir);

/// Exit code for an error escaping run_command.
inline constexpr int exit_error = 1;
inline constexpr int exit_flagged = 2;

}  // namespace qmed::cli
