#include "qmed/cli.hpp"

#include "qmed/markovnet.hpp"
#include "qmed/oracle.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>

namespace qmed::cli {

using nlohmann::ordered_json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <typename T>
T parse_number(const std::string& text, const std::string& what) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) throw std::invalid_argument("bad " + what + " '" + text + "'");
  return value;
}

bool parse_bool(const std::string& text, const std::string& what) {
  if (text == "true" || text == "yes" || text == "1") return true;
  if (text == "false" || text == "no" || text == "0") return false;
  throw std::invalid_argument("bad " + what + " '" + text + "' (expected true or false)");
}

const std::map<std::string, std::vector<std::string>>& known_keys() {
  static const std::map<std::string, std::vector<std::string>> keys = {
      {"run", {"command", "output", "seed", "threads"}},
      {"model", {"name", "coupling", "field"}},
      {"lattice", {"kind", "lx", "ly", "boundary", "locality_radius"}},
      {"shield", {"shield", "shield_2", "shield_3", "shield_4", "shield_5", "shield_6", "shield_7", "shield_8",
                  "shield_9", "radius", "translations", "assignment"}},
      {"temperature", {"grid", "range"}},
      {"solver", {"tol_gradient", "tol_constraint", "max_outer", "max_inner", "penalty_init", "penalty_growth",
                  "initial_jitter", "warm_start"}},
      {"bp", {"window", "damping", "tol_residual", "max_iters", "retain_inverse"}},
  };
  return keys;
}

lattice::ModelName parse_model(const std::string& s) {
  if (s == "heisenberg") return lattice::ModelName::Heisenberg;
  if (s == "ising" || s == "classical_ising") return lattice::ModelName::ClassicalIsing;
  if (s == "tfim") return lattice::ModelName::Tfim;
  throw std::invalid_argument("unknown model '" + s + "'");
}

lattice::Kind parse_kind(const std::string& s) {
  for (auto k : {lattice::Kind::Chain, lattice::Kind::Square, lattice::Kind::TiChain, lattice::Kind::TiSquare})
    if (lattice::to_string(k) == s) return k;
  throw std::invalid_argument("unknown lattice kind '" + s + "'");
}

lattice::Boundary parse_boundary(const std::string& s) {
  if (s == "open") return lattice::Boundary::Open;
  if (s == "periodic") return lattice::Boundary::Periodic;
  throw std::invalid_argument("unknown boundary '" + s + "'");
}

med::TranslationSet parse_translations(const std::string& s) {
  if (s == "unit") return med::TranslationSet::Unit;
  if (s == "all") return med::TranslationSet::All;
  throw std::invalid_argument("unknown translation set '" + s + "'");
}

lattice::TermAssignment parse_assignment(const std::string& s) {
  if (s == "highest") return lattice::TermAssignment::HighestSite;
  if (s == "fractional") return lattice::TermAssignment::Fractional;
  throw std::invalid_argument("unknown term assignment '" + s + "'");
}

std::string to_string(lattice::TermAssignment a) {
  return a == lattice::TermAssignment::HighestSite ? "highest" : "fractional";
}

std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> out;
  if (s.empty()) return out;
  for (const auto& item : split(s, ',')) out.push_back(parse_number<double>(item, "temperature"));
  return out;
}

std::vector<double> parse_range(const std::string& s) {
  const auto parts = split(s, ',');
  if (parts.size() != 3) throw std::invalid_argument("range needs lo, hi, count");
  const double lo = parse_number<double>(parts[0], "range start");
  const double hi = parse_number<double>(parts[1], "range end");
  const int n = parse_number<int>(parts[2], "range count");
  if (n < 1) throw std::invalid_argument("range count must be positive");
  if (n == 1) return {lo};
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = lo + (hi - lo) * i / (n - 1);
  return out;
}

void check_grid(const std::vector<double>& grid) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0) || !std::isfinite(grid[i]))
      throw std::invalid_argument("temperature " + format_double(grid[i]) + " is not positive");
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw std::invalid_argument("temperature grid is not ascending at " + format_double(grid[i]));
  }
}

}  // namespace

std::string to_string(Command command) {
  switch (command) {
    case Command::Sweep: return "sweep";
    case Command::Bound: return "bound";
    case Command::Bp: return "bp";
    case Command::Reconstruct: return "reconstruct";
    case Command::Verify: return "verify";
  }
  return "?";
}

Command parse_command(const std::string& name) {
  for (auto c : {Command::Sweep, Command::Bound, Command::Bp, Command::Reconstruct, Command::Verify})
    if (to_string(c) == name) return c;
  throw std::invalid_argument("unknown command '" + name + "'");
}

ConfigError::ConfigError(int line, const std::string& message)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}

std::vector<lattice::Offset> parse_shield(const std::string& text) {
  const std::string s = trim(text);
  static const std::regex window(R"(window\((\d+)\))");
  std::smatch m;
  if (std::regex_match(s, m, window)) return lattice::chain_window(std::stoi(m[1]));
  if (s == "square7") return lattice::square_shield_7();
  if (s == "square10") return lattice::square_shield_10();
  if (s.size() < 2 || s.front() != '[' || s.back() != ']')
    throw std::invalid_argument("bad shield offsets '" + s + "': expected [(dx,dy),...], window(n), square7 or square10");
  static const std::regex pair(R"(\s*\(\s*(-?\d+)\s*,\s*(-?\d+)\s*\)\s*(,|$))");
  std::vector<lattice::Offset> out;
  std::string rest = s.substr(1, s.size() - 2);
  while (!trim(rest).empty()) {
    if (!std::regex_search(rest, m, pair) || m.position(0) != 0)
      throw std::invalid_argument("bad shield offsets '" + s + "'");
    out.push_back({std::stoi(m[1]), std::stoi(m[2])});
    const bool comma = m[3] == ",";
    rest = m.suffix().str();
    if (comma && trim(rest).empty()) throw std::invalid_argument("bad shield offsets '" + s + "': trailing comma");
  }
  if (out.empty()) throw std::invalid_argument("empty shield");
  auto sorted = out;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("shield '" + s + "' repeats an offset");
  if (std::find(out.begin(), out.end(), lattice::Offset{0, 0}) != out.end())
    throw std::invalid_argument("shield '" + s + "' contains the origin");
  return out;
}

void RunConfig::validate() const {
  check_grid(temperatures);
  solver.validate();
  bp.validate();
  if (bp_window < 1) throw std::invalid_argument("bp window must be at least 1");
  if (threads < 1) throw std::invalid_argument("threads must be at least 1");
  if (neighborhood_radius < 1) throw std::invalid_argument("shield radius must be at least 1");
  if (output.empty()) throw std::invalid_argument("output path is empty");
  const bool ti = lattice::is_translation_invariant(lattice.kind);
  if (ti && shields.empty()) throw std::invalid_argument("translation-invariant lattices need an explicit shield");
  for (const auto& s : shields) {
    if (lattice.kind == lattice::Kind::TiChain || lattice.kind == lattice::Kind::Chain)
      for (const auto& o : s)
        if (o.dy != 0) throw std::invalid_argument("chain shield " + lattice::to_string(s) + " has dy != 0");
    if (ti) lattice::ti_cluster(s);
  }
  if (!ti) {
    if (lattice.lx < 2) throw std::invalid_argument("lattice lx must be at least 2");
    if (lattice.kind == lattice::Kind::Chain && lattice.ly != 1) throw std::invalid_argument("chains need ly = 1");
    if (lattice.kind == lattice::Kind::Square && lattice.ly < 2) throw std::invalid_argument("square lattices need ly >= 2");
  }
  switch (command) {
    case Command::Bp:
      if (lattice.kind == lattice::Kind::Square || lattice.kind == lattice::Kind::TiSquare)
        throw std::invalid_argument("bp runs on chains only");
      if (lattice.kind == lattice::Kind::Chain && lattice.boundary != lattice::Boundary::Open)
        throw std::invalid_argument("bp on a finite chain needs open boundaries");
      break;
    case Command::Reconstruct:
      if (ti) throw std::invalid_argument("reconstruct needs a finite lattice");
      if (shields.size() > 1) throw std::invalid_argument("reconstruct takes a single shield");
      break;
    case Command::Verify:
      if (ti && !(lattice.kind == lattice::Kind::TiChain && model.name == lattice::ModelName::ClassicalIsing))
        throw std::invalid_argument("verify needs a finite lattice or the translation-invariant classical Ising chain");
      break;
    case Command::Bound:
      if (shields.size() > 1) throw std::invalid_argument("bound takes a single shield");
      break;
    case Command::Sweep: break;
  }
}

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::map<std::string, int> seen;  // section.key -> line
  std::map<std::string, std::vector<lattice::Offset>> shields;
  std::string section;
  int grid_line = 0;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(line, "malformed section header '" + s + "'");
      section = trim(s.substr(1, s.size() - 2));
      if (!known_keys().count(section)) throw ConfigError(line, "unknown section '" + section + "'");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(line, "expected key = value, got '" + s + "'");
    const std::string key = trim(s.substr(0, eq)), value = trim(s.substr(eq + 1));
    if (section.empty()) throw ConfigError(line, "key '" + key + "' outside any section");
    const auto& keys = known_keys().at(section);
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw ConfigError(line, "unknown key '" + key + "' in section [" + section + "]");
    const std::string full = section + "." + key;
    if (const auto it = seen.find(full); it != seen.end())
      throw ConfigError(line, "duplicate key '" + key + "' in [" + section + "] (first set on line " +
                                  std::to_string(it->second) + ")");
    seen[full] = line;
    try {
      if (section == "run") {
        if (key == "command") c.command = parse_command(value);
        else if (key == "output") c.output = value;
        else if (key == "seed") c.solver.seed = parse_number<std::uint64_t>(value, "seed");
        else if (key == "threads") c.threads = parse_number<int>(value, "thread count");
      } else if (section == "model") {
        if (key == "name") c.model.name = parse_model(value);
        else if (key == "coupling") c.model.coupling = parse_number<double>(value, "coupling");
        else if (key == "field") c.model.field = parse_number<double>(value, "field");
      } else if (section == "lattice") {
        if (key == "kind") c.lattice.kind = parse_kind(value);
        else if (key == "lx") c.lattice.lx = parse_number<int>(value, "lx");
        else if (key == "ly") c.lattice.ly = parse_number<int>(value, "ly");
        else if (key == "boundary") c.lattice.boundary = parse_boundary(value);
        else if (key == "locality_radius") c.lattice.locality_radius = parse_number<int>(value, "locality radius");
      } else if (section == "shield") {
        if (key.rfind("shield", 0) == 0) shields[key] = parse_shield(value);
        else if (key == "radius") c.neighborhood_radius = parse_number<int>(value, "radius");
        else if (key == "translations") c.translations = parse_translations(value);
        else if (key == "assignment") c.assignment = parse_assignment(value);
      } else if (section == "temperature") {
        if (grid_line) throw std::invalid_argument("give either grid or range, not both");
        c.temperatures = key == "grid" ? parse_grid(value) : parse_range(value);
        check_grid(c.temperatures);
        grid_line = line;
      } else if (section == "solver") {
        auto& v = c.solver;
        if (key == "tol_gradient") v.tol_gradient = parse_number<double>(value, key);
        else if (key == "tol_constraint") v.tol_constraint = parse_number<double>(value, key);
        else if (key == "max_outer") v.max_outer = parse_number<int>(value, key);
        else if (key == "max_inner") v.max_inner = parse_number<int>(value, key);
        else if (key == "penalty_init") v.penalty_init = parse_number<double>(value, key);
        else if (key == "penalty_growth") v.penalty_growth = parse_number<double>(value, key);
        else if (key == "initial_jitter") v.initial_jitter = parse_number<double>(value, key);
        else if (key == "warm_start") c.warm_start = parse_bool(value, key);
      } else if (section == "bp") {
        if (key == "window") c.bp_window = parse_number<int>(value, key);
        else if (key == "damping") c.bp.damping = parse_number<double>(value, key);
        else if (key == "tol_residual") c.bp.tol_residual = parse_number<double>(value, key);
        else if (key == "max_iters") c.bp.max_iters = parse_number<int>(value, key);
        else if (key == "retain_inverse") c.bp.retain_inverse = parse_bool(value, key);
      }
    } catch (const std::invalid_argument& e) {
      throw ConfigError(line, e.what());
    }
  }
  for (int i = 1; i <= 9; ++i) {
    const std::string key = i == 1 ? "shield" : "shield_" + std::to_string(i);
    if (const auto it = shields.find(key); it != shields.end()) {
      if (static_cast<int>(c.shields.size()) != i - 1)
        throw ConfigError(seen.at("shield." + key), "'" + key + "' given without the patches before it");
      c.shields.push_back(it->second);
    }
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(0, e.what());
  }
  return c;
}

std::string render(const RunConfig& c) {
  std::ostringstream os;
  os << "[run]\ncommand = " << to_string(c.command) << "\noutput = " << c.output << "\nseed = " << c.solver.seed
     << "\nthreads = " << c.threads << "\n\n";
  os << "[model]\nname = " << lattice::to_string(c.model.name) << "\ncoupling = " << format_double(c.model.coupling)
     << "\nfield = " << format_double(c.model.field) << "\n\n";
  os << "[lattice]\nkind = " << lattice::to_string(c.lattice.kind) << "\nlx = " << c.lattice.lx
     << "\nly = " << c.lattice.ly << "\nboundary = " << lattice::to_string(c.lattice.boundary)
     << "\nlocality_radius = " << c.lattice.locality_radius << "\n\n";
  os << "[shield]\n";
  for (std::size_t i = 0; i < c.shields.size(); ++i)
    os << (i == 0 ? std::string("shield") : "shield_" + std::to_string(i + 1)) << " = "
       << lattice::to_string(c.shields[i]) << "\n";
  os << "radius = " << c.neighborhood_radius << "\ntranslations = " << med::to_string(c.translations)
     << "\nassignment = " << to_string(c.assignment) << "\n\n";
  os << "[temperature]\ngrid = ";
  for (std::size_t i = 0; i < c.temperatures.size(); ++i) os << (i ? ", " : "") << format_double(c.temperatures[i]);
  os << "\n\n";
  const auto& v = c.solver;
  os << "[solver]\ntol_gradient = " << format_double(v.tol_gradient)
     << "\ntol_constraint = " << format_double(v.tol_constraint) << "\nmax_outer = " << v.max_outer
     << "\nmax_inner = " << v.max_inner << "\npenalty_init = " << format_double(v.penalty_init)
     << "\npenalty_growth = " << format_double(v.penalty_growth)
     << "\ninitial_jitter = " << format_double(v.initial_jitter)
     << "\nwarm_start = " << (c.warm_start ? "true" : "false") << "\n\n";
  os << "[bp]\nwindow = " << c.bp_window << "\ndamping = " << format_double(c.bp.damping)
     << "\ntol_residual = " << format_double(c.bp.tol_residual) << "\nmax_iters = " << c.bp.max_iters
     << "\nretain_inverse = " << (c.bp.retain_inverse ? "true" : "false") << "\n";
  return os.str();
}

std::string results_csv(const std::vector<med::SweepRow>& rows) {
  std::string out = "T,F_per_site,E_per_site,S_M_per_site,residual,iterations,converged\n";
  for (const auto& r : rows)
    out += format_double(r.temperature) + "," + format_double(r.free_energy) + "," + format_double(r.energy) + "," +
           format_double(r.markov_entropy) + "," + format_double(r.residual) + "," + std::to_string(r.iterations) +
           "," + (r.converged ? "1" : "0") + "\n";
  return out;
}

void emit_results(const RunResults& results, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& contents) {
    const auto path = dir / name;
    std::ofstream f(path, std::ios::binary);
    f << contents;
    f.close();
    if (!f) throw std::runtime_error("cannot write " + path.string());
  };
  write("results.csv", results_csv(results.rows));
  for (const auto& [name, contents] : results.extra_files) write(name, contents);
  write("manifest.json", results.manifest);
}

// ---------------------------------------------------------------------------

namespace {

struct Built {
  med::Problem<double> problem;
  std::optional<lattice::BuiltLattice> lattice;
  std::vector<std::vector<lattice::Shield>> shield_sets;
  ordered_json shape;
};

lattice::Neighborhood neighborhood(const RunConfig& c, std::size_t patch) {
  return c.shields.empty() ? lattice::Neighborhood::within(c.neighborhood_radius)
                           : lattice::Neighborhood::from_template(c.shields[patch]);
}

Built build(const RunConfig& c) {
  Built out;
  out.shape["translations"] = med::to_string(c.translations);
  if (lattice::is_translation_invariant(c.lattice.kind)) {
    out.problem = med::make_ti_problem(c.model, c.lattice.kind, c.shields, c.translations);
    for (const auto& s : c.shields) out.shape["templates"].push_back(lattice::to_string(s));
  } else {
    out.lattice = lattice::build_lattice(c.lattice, c.model);
    const std::size_t patches = std::max<std::size_t>(1, c.shields.size());
    for (std::size_t p = 0; p < patches; ++p) {
      out.shield_sets.push_back(lattice::all_shields(*out.lattice, neighborhood(c, p)));
      ordered_json patch;
      if (c.shields.empty()) patch["radius"] = c.neighborhood_radius;
      else patch["template"] = lattice::to_string(c.shields[p]);
      for (const auto& sh : out.shield_sets.back()) patch["shields"][std::to_string(sh.site)] = sh.shield;
      out.shape["patches"].push_back(patch);
    }
    out.shape["assignment"] = to_string(c.assignment);
    out.problem = med::make_finite_problem(*out.lattice, out.shield_sets, c.assignment);
  }
  out.shape["description"] = out.problem.description;
  return out;
}

med::SweepRow row_from(const med::MedResult<double>& r, const med::SolverConfig& config) {
  med::SweepRow row;
  row.temperature = r.temperature;
  row.free_energy = r.free_energy;
  row.energy = r.energy;
  row.markov_entropy = r.markov_entropy;
  row.residual = r.residual;
  row.iterations = r.iterations;
  row.converged = r.converged;
  row.verified = r.verified(config);
  return row;
}

std::vector<med::SweepRow> solve(const RunConfig& c, const med::Problem<double>& problem) {
  if (c.temperatures.empty()) return {};
  if (problem.patches.size() == 1)
    return med::temperature_sweep(problem, c.temperatures, c.solver, {c.warm_start, c.threads}).rows;
  med::SweepResult sweep;
  for (double t : c.temperatures) sweep.rows.push_back(row_from(med::multi_patch_minimize(problem, t, c.solver), c.solver));
  med::fill_specific_heat(sweep);
  return sweep.rows;
}

std::string extra_csv(const std::string& header, const std::vector<std::vector<double>>& rows) {
  std::string out = header + "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + format_double(r[i]);
    out += "\n";
  }
  return out;
}

bool all_verified(const std::vector<med::SweepRow>& rows) {
  return std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.verified; });
}

void run_sweep(const RunConfig& c, RunResults& out, ordered_json& m) {
  auto b = build(c);
  m["shield_shape"] = b.shape;
  out.rows = solve(c, b.problem);
  if (!all_verified(out.rows)) out.exit_code = exit_flagged;
}

void run_bound(const RunConfig& c, RunResults& out, ordered_json& m) {
  auto b = build(c);
  m["shield_shape"] = b.shape;
  if (c.temperatures.empty()) throw std::invalid_argument("bound needs a temperature grid");
  const auto gb = med::ground_energy_lower_bound(b.problem, c.temperatures, c.solver);
  out.rows = gb.sweep.rows;
  m["bound"] = {{"E0_lower_bound_per_site", gb.bound},
                {"temperature", gb.temperature},
                {"bracketed", gb.bracketed},
                {"verified", gb.verified},
                {"note", gb.note}};
  if (gb.bracketed)
    out.summary += "E0 per site >= " + format_double(gb.bound) + " (T = " + format_double(gb.temperature) + ")\n";
  else
    out.summary += gb.note + "\n";
  if (!gb.bracketed || !gb.verified || !all_verified(out.rows)) out.exit_code = exit_flagged;
}

void run_bp(const RunConfig& c, RunResults& out, ordered_json& m) {
  const bool ti = c.lattice.kind == lattice::Kind::TiChain;
  const auto problem = ti ? bp::ti_chain_problem(c.model, c.bp_window)
                          : bp::finite_chain_problem(c.model, c.lattice.lx, c.bp_window);
  m["shield_shape"] = {{"window", c.bp_window},
                       {"template", lattice::to_string(lattice::chain_window(c.bp_window))},
                       {"description", problem.primal.description}};
  m["bp"] = {{"schedule", ti ? "single cluster" : "forward then backward"},
             {"retain_inverse", c.bp.retain_inverse},
             {"damping", c.bp.damping}};
  const double sites = ti ? 1.0 : problem.primal.num_sites;
  for (double t : c.temperatures) {
    const auto state = bp::bp_fixed_point(problem, t, c.bp);
    const auto fe = bp::bp_free_energy(problem, state, t);
    const med::ClusterVariables<double> vars{state.beliefs, problem.primal.constraints};
    const auto parts = med::markov_free_energy(problem.primal, vars, t);
    med::SweepRow row;
    row.temperature = t;
    row.free_energy = fe.free_energy;
    row.energy = parts.energy / sites;
    row.markov_entropy = parts.markov_entropy / sites;
    row.residual = fe.consistency;
    row.iterations = state.iterations;
    row.converged = state.converged;
    row.verified = state.converged;
    out.rows.push_back(row);
  }
  if (!all_verified(out.rows)) out.exit_code = exit_flagged;
}

void run_verify(const RunConfig& c, RunResults& out, ordered_json& m) {
  auto b = build(c);
  m["shield_shape"] = b.shape;
  out.rows = solve(c, b.problem);
  std::optional<HermitianOperator<double>> h;
  if (b.lattice) h = oracle::full_hamiltonian(*b.lattice);
  std::vector<std::vector<double>> table;
  bool holds = true;
  for (const auto& r : out.rows) {
    const double exact = h ? oracle::exact_free_energy(*h, r.temperature, b.lattice->lattice.num_sites()).free_energy_per_site()
                           : oracle::ising_transfer_free_energy(c.model.coupling, c.model.field, r.temperature);
    const bool ok = r.free_energy <= exact + std::max(1e-8, c.solver.tol_constraint);
    holds &= ok;
    table.push_back({r.temperature, r.free_energy, exact, exact - r.free_energy, ok ? 1.0 : 0.0});
  }
  out.extra_files.push_back({"verify.csv", extra_csv("T,F_MED_per_site,F_exact_per_site,gap,bound_holds", table)});
  m["oracle"] = h ? "exact diagonalization" : "transfer matrix";
  m["bound_holds"] = holds;
  if (!holds) out.summary += "F_MED exceeds the exact free energy on at least one row\n";
  if (!holds || !all_verified(out.rows)) out.exit_code = exit_flagged;
}

void run_reconstruct(const RunConfig& c, RunResults& out, ordered_json& m) {
  const auto built = lattice::build_lattice(c.lattice, c.model);
  const auto shields = lattice::all_shields(built, neighborhood(c, 0));
  ordered_json shape;
  if (c.shields.empty()) shape["radius"] = c.neighborhood_radius;
  else shape["template"] = lattice::to_string(c.shields[0]);
  for (const auto& sh : shields) shape["shields"][std::to_string(sh.site)] = sh.shield;
  m["shield_shape"] = shape;
  const auto h = oracle::full_hamiltonian(built);
  std::vector<std::vector<double>> table;
  for (double t : c.temperatures) {
    const auto rho = oracle::gibbs_state(h, t);
    std::vector<DensityMatrix<double>> marginals;
    for (const auto& sh : shields) marginals.push_back(partial_trace(rho, std::span<const int>(sh.cluster)));
    const auto rep = markov::chain_reconstruct(marginals, built.ordering, shields, &rho);
    const double cmi = rep.step_cmi.empty() ? 0.0 : *std::max_element(rep.step_cmi.begin(), rep.step_cmi.end());
    table.push_back({t, rep.trace_distance.value_or(0.0), cmi});
  }
  out.extra_files.push_back({"reconstruct.csv", extra_csv("T,trace_distance,max_step_cmi", table)});
  m["reconstruction"] = "Petz chain along the site ordering, reference = exact Gibbs state";
}

}  // namespace

RunResults run_command(const RunConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  RunResults out;
  ordered_json m;
  m["version"] = version;
  m["command"] = to_string(config.command);
  m["config"] = render(config);
  switch (config.command) {
    case Command::Sweep: run_sweep(config, out, m); break;
    case Command::Bound: run_bound(config, out, m); break;
    case Command::Bp: run_bp(config, out, m); break;
    case Command::Verify: run_verify(config, out, m); break;
    case Command::Reconstruct: run_reconstruct(config, out, m); break;
  }
  m["rows"] = ordered_json::array();
  for (const auto& r : out.rows)
    m["rows"].push_back({{"T", r.temperature}, {"converged", r.converged}, {"verified", r.verified}});
  m["exit_code"] = out.exit_code;
  m["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.manifest = m.dump(2) + "\n";
  return out;
}

}  // namespace qmed::cli
