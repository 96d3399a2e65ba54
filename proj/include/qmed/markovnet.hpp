// markovnet.hpp - quantum Markov chains and trees: conditional mutual
// information profiles, Petz recovery, global-state reconstruction from
// marginals, and commuting Hamiltonians for classical Markov trees.

#pragma once

#include "qmed/lattice.hpp"
#include "qmed/opalg.hpp"

#include <optional>
#include <string>
#include <vector>

namespace qmed::markov {

inline constexpr Index max_dimension = Index{1} << 14;

/// Rooted tree on nodes 0..N-1 with root 0. Every parent precedes its child,
/// so the node order is a valid reconstruction order.
struct TreeGraph {
  std::vector<int> parent;  // parent[0] == -1
  std::vector<int> dims;    // local dimension per node

  static TreeGraph path(int n, int dim = 2);
  static TreeGraph star(int leaves, int dim = 2);

  int num_nodes() const { return static_cast<int>(parent.size()); }
  std::vector<int> children(int node) const;
  SiteSpace space() const;
  void validate() const;
};

struct CMIProfile {
  std::vector<int> sites;    // in ordering order
  std::vector<double> cmi;   // I({<k} \ M_k ; k | M_k), nats
  std::vector<double> gap;   // S(k|M_k) - S(k|{<k})
  std::vector<bool> saturated;

  static constexpr double saturation_tolerance = 1e-8;
  bool all_saturated() const;
};

template <typename Scalar>
CMIProfile cmi_profile(const DensityMatrix<Scalar>& rho, const lattice::SiteOrdering& ordering,
                       const std::vector<lattice::Shield>& shields);

/// rho_BC^{1/2} rho_B^{-1/2} rho_AB rho_B^{-1/2} rho_BC^{1/2} on A B C, trace
/// renormalized. rho_B^{-1/2} is taken on the support of rho_B. B may be empty.
template <typename Scalar>
DensityMatrix<Scalar> petz_step(const DensityMatrix<Scalar>& ab, const DensityMatrix<Scalar>& b,
                                const DensityMatrix<Scalar>& bc);

/// exp(log rho_AB + log rho_BC - log rho_B), trace renormalized. Cross-check only.
template <typename Scalar>
DensityMatrix<Scalar> log_step(const DensityMatrix<Scalar>& ab, const DensityMatrix<Scalar>& b,
                               const DensityMatrix<Scalar>& bc);

template <typename Scalar>
struct ReconstructionReport {
  DensityMatrix<Scalar> state;
  std::optional<DensityMatrix<Scalar>> log_state;  // additive-log reconstruction, when requested
  double log_agreement = 0.0;                      // trace distance between the two reconstructions
  std::optional<double> trace_distance;            // to the reference, when one is given
  std::vector<double> step_cmi;                    // CMI of the reference at each step, when given
};

/// Rebuilds the state on all sites from the cluster marginals rho_{C_k}
/// (one per shield, any site order within a cluster), site by site in the
/// ordering.
template <typename Scalar>
ReconstructionReport<Scalar> chain_reconstruct(const std::vector<DensityMatrix<Scalar>>& marginals,
                                               const lattice::SiteOrdering& ordering,
                                               const std::vector<lattice::Shield>& shields,
                                               const DensityMatrix<Scalar>* reference = nullptr,
                                               bool with_log_form = false);

/// Rebuilds a tree state from edge marginals: edge_marginals[i - 1] lives on
/// {parent(i), i}. Nodes are attached root to leaves.
template <typename Scalar>
ReconstructionReport<Scalar> tree_reconstruct(const std::vector<DensityMatrix<Scalar>>& edge_marginals,
                                              const TreeGraph& tree,
                                              const DensityMatrix<Scalar>* reference = nullptr);

// ---------------------------------------------------------------------------
// Classical (diagonal) Markov trees.

/// H_k as a diagonal operator on {parent(k), k} (root: on {0}).
struct TreeTerm {
  int node = 0;
  std::vector<int> support;
  Matrix<double> op;
};

struct TreeHamiltonian {
  std::vector<TreeTerm> terms;
  std::vector<double> support_mask;  // 0 on configurations excluded by zero-probability blocks
  double partition_function = 1.0;   // sum of mask * exp(-sum H); 1 for an exact Markov tree
  double reproduction_error = 0.0;   // || rho - mask * exp(-sum H) / Z ||_1
  double max_commutator = 0.0;       // largest Frobenius norm of [H_j, H_k]
  int pruned_blocks = 0;
  bool verified = false;

  static constexpr double tolerance = 1e-8;
};

/// Builds H_1 = -sum_j P_1(j) ln q_1(j) and H_k = -sum_ij P_k(j) P_p(i) ln q_k(j|i)
/// and checks that they commute and reproduce rho. Rejects non-diagonal input.
TreeHamiltonian classical_tree_hamiltonian(const DensityMatrix<double>& rho, const TreeGraph& tree);

struct FactorizationReport {
  double residual = 0.0;  // max |P(x) - P(x_0) prod P(x_k | x_parent)|
  int zero_entries = 0;
  bool factorizes = false;
  std::string note;

  static constexpr double tolerance = 1e-10;
};

/// Checks that a distribution over the tree's configurations (Kronecker order,
/// node 0 most significant) is a product of its edge conditionals.
FactorizationReport hammersley_clifford_verify(const RealVector& distribution, const TreeGraph& tree);

}  // namespace qmed::markov
