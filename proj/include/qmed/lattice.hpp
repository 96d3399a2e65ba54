// lattice.hpp - lattice geometry, site orderings, Markov shields and the
// cluster Hamiltonians that split H between clusters without double counting.

#pragma once

#include "qmed/opalg.hpp"

#include <compare>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace qmed::lattice {

enum class Kind { Chain, Square, TiChain, TiSquare };
enum class Boundary { Open, Periodic };

struct LatticeSpec {
  Kind kind = Kind::Chain;
  int lx = 2;  // sites along x (finite kinds only)
  int ly = 1;  // sites along y (Square only)
  Boundary boundary = Boundary::Open;
  int locality_radius = 1;

  bool operator==(const LatticeSpec&) const = default;
};

bool is_translation_invariant(Kind kind);
std::string to_string(Kind kind);
std::string to_string(Boundary boundary);

enum class ModelName { Heisenberg, ClassicalIsing, Tfim };
std::string to_string(ModelName name);

/// Couplings in units of J. `field` is h for the Ising models' longitudinal
/// field, g for the transverse-field model and a Zeeman field on S^z for
/// Heisenberg.
struct ModelSpec {
  ModelName name = ModelName::Heisenberg;
  double coupling = 1.0;
  double field = 0.0;

  bool operator==(const ModelSpec&) const = default;
};

/// Lattice displacement. In two dimensions the row with larger dy is scanned
/// first, so predecessors of the origin are the sites with dy > 0, or dy == 0
/// and dx < 0.
struct Offset {
  int dx = 0;
  int dy = 0;
  auto operator<=>(const Offset&) const = default;
  Offset operator+(const Offset& o) const { return {dx + o.dx, dy + o.dy}; }
  Offset operator-(const Offset& o) const { return {dx - o.dx, dy - o.dy}; }
};

/// Raster rank used by every ordering in this library: smaller rank comes first.
bool raster_before(const Offset& a, const Offset& b);
std::string to_string(const std::vector<Offset>& offsets);

struct LocalTerm {
  std::vector<int> support;   // site ids, sorted ascending
  Matrix<double> op;          // acts on SiteSpace::qubits(support)
  double weight = 1.0;
};

class SiteOrdering {
 public:
  SiteOrdering() = default;
  explicit SiteOrdering(std::vector<int> order);

  const std::vector<int>& order() const { return order_; }
  int position(int site) const { return position_.at(site); }
  bool precedes(int a, int b) const { return position(a) < position(b); }
  int size() const { return static_cast<int>(order_.size()); }

 private:
  std::vector<int> order_;     // position -> site
  std::vector<int> position_;  // site -> position
};

struct Lattice {
  LatticeSpec spec;
  std::vector<Offset> coords;  // per site id
  std::vector<std::pair<int, int>> bonds;

  int num_sites() const { return static_cast<int>(coords.size()); }
  /// Manhattan distance with periodic wrapping where applicable.
  int distance(int a, int b) const;
  /// Site at coords[site] + offset, if it exists.
  std::optional<int> translate(int site, const Offset& offset) const;
};

struct BuiltLattice {
  Lattice lattice;
  std::vector<LocalTerm> terms;
  SiteOrdering ordering;
};

/// Nearest-neighbour lattice plus model terms. Translation-invariant kinds
/// produce the unit cell: the origin's predecessor neighbours, the origin
/// (last site), and the terms whose highest-ordered site is the origin.
BuiltLattice build_lattice(const LatticeSpec& spec, const ModelSpec& model);

/// Two-site bond operator on SiteSpace::qubits({i, j}).
HermitianOperator<double> model_term(const ModelSpec& model, std::pair<int, int> bond);
/// Single-site field operator, or nullopt when the field vanishes.
std::optional<HermitianOperator<double>> model_field_term(const ModelSpec& model, int site);

/// Either every site within `radius`, or an explicit offset template.
struct Neighborhood {
  int radius = 1;
  std::vector<Offset> offsets;  // used instead of radius when non-empty

  static Neighborhood within(int r) { return {r, {}}; }
  static Neighborhood from_template(std::vector<Offset> offsets) { return {0, std::move(offsets)}; }
};

struct Shield {
  int site = 0;
  std::vector<int> neighborhood;  // N_k
  std::vector<int> shield;        // M_k = {<k} ∩ N_k, in ordering order
  std::vector<int> cluster;       // M_k followed by k
};

Shield markov_shield(int site, const SiteOrdering& ordering, const Lattice& lattice, const Neighborhood& hood);
std::vector<Shield> all_shields(const BuiltLattice& built, const Neighborhood& hood);

enum class TermAssignment {
  HighestSite,  // whole term to the cluster of its highest-ordered site
  Fractional    // split equally between all clusters containing the term
};

/// Per site k, the (term index, weight) pairs assigned to C_k. Throws naming
/// the term when a term fits in no cluster.
std::vector<std::vector<std::pair<int, double>>> assign_terms(const std::vector<Shield>& shields,
                                                              const std::vector<LocalTerm>& terms,
                                                              const SiteOrdering& ordering,
                                                              TermAssignment mode = TermAssignment::HighestSite);

/// Ĥ_k on C_k.
HermitianOperator<double> cluster_hamiltonian(int site, const std::vector<Shield>& shields,
                                              const std::vector<LocalTerm>& terms, const SiteOrdering& ordering,
                                              TermAssignment mode = TermAssignment::HighestSite);

// ---------------------------------------------------------------------------
// Translation-invariant clusters. Cluster sites are labelled 0..n-1 by their
// position in `sites`, with the origin last.

struct TiCluster {
  std::vector<Offset> sites;
  int index_of(const Offset& o) const;  // -1 if absent
  std::vector<int> labels() const;
};

/// Validates that every offset precedes the origin and returns the shield plus origin, raster sorted.
TiCluster ti_cluster(std::vector<Offset> shield_offsets);

std::vector<Offset> chain_window(int shield_size);
std::vector<Offset> square_shield_7();
std::vector<Offset> square_shield_10();

/// Per-site Hamiltonian on a TI cluster: the bonds from the origin to its
/// predecessor neighbours plus the origin's field term.
HermitianOperator<double> ti_cluster_hamiltonian(const ModelSpec& model, Kind kind, const TiCluster& cluster);

}  // namespace qmed::lattice
