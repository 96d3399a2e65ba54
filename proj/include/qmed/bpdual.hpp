// bpdual.hpp - quantum belief propagation on chains, the dual of the Markov
// free-energy minimization.
//
// A chain with window n has clusters of n+1 consecutive sites. Cluster c holds
//
//     rho_c ∝ exp(-H_c / T + I ⊗ A_c + B_c ⊗ I)
//
// where A_c (on the last n sites) is the log-message arriving from cluster c+1
// and B_c (on the first n sites) the one from cluster c-1. The fixed-point
// equations are
//
//     A_{c-1} = log Tr_last  rho_c - B_c
//     B_{c+1} = log Tr_first rho_c - A_c
//
// up to normalization. Dropping the trailing -B_c / -A_c together with the
// matching factor inside the exponential gives the cancelled update used by
// earlier quantum BP schemes; it is exact only for commuting Hamiltonians.

#pragma once

#include "qmed/lattice.hpp"
#include "qmed/med.hpp"
#include "qmed/opalg.hpp"

#include <vector>

namespace qmed::bp {

struct ChainProblem {
  int window = 1;  // n: messages live on n sites, clusters on n + 1
  bool translation_invariant = false;
  std::vector<Matrix<double>> hamiltonians;  // H_c on cluster c, sites ordered left to right
  med::Problem<double> primal;               // the same objective for the primal solver

  int num_clusters() const { return static_cast<int>(hamiltonians.size()); }
  Index message_dim() const { return Index{1} << window; }
};

ChainProblem ti_chain_problem(const lattice::ModelSpec& model, int window);
/// Open chain of `num_sites` sites.
ChainProblem finite_chain_problem(const lattice::ModelSpec& model, int num_sites, int window);

enum class Direction { Left, Right };

/// m = exp(log_op), normalized to unit trace.
struct Message {
  Direction direction = Direction::Left;
  int cluster = 0;  // receiving cluster
  Matrix<double> log_op;

  Matrix<double> op() const { return exp_hermitian(log_op); }
};

/// log m for a positive definite message; rejects singular or indefinite ones.
Matrix<double> message_log(const HermitianOperator<double>& m);

struct BPConfig {
  double damping = 0.5;  // weight of the new message in the log-space mixture
  double tol_residual = 1e-8;
  int max_iters = 10000;
  bool retain_inverse = true;

  void validate() const;
  bool operator==(const BPConfig&) const = default;
};

struct BPState {
  std::vector<Matrix<double>> from_right;  // A_c, acting on the last n sites of cluster c
  std::vector<Matrix<double>> from_left;   // B_c, acting on the first n sites of cluster c
  std::vector<DensityMatrix<double>> beliefs;
  double residual = 0.0;  // largest trace-distance change of a message in the last sweep
  int iterations = 0;
  bool converged = false;
  bool retain_inverse = true;

  std::vector<Message> messages() const;
};

/// Identity (maximally mixed) messages.
BPState initial_state(const ChainProblem& problem);

/// rho_c from the current messages.
DensityMatrix<double> belief(const ChainProblem& problem, const BPState& state, int cluster, double temperature);

/// Undamped outgoing log-messages of cluster c: {A_{c-1}, B_{c+1}}, normalized.
/// In translation-invariant mode both refer to the single cluster.
std::pair<Matrix<double>, Matrix<double>> bp_update(const ChainProblem& problem, const BPState& state, int cluster,
                                                     double temperature, bool retain_inverse = true);

/// Forward-then-backward sweeps until the message residual drops below tol.
BPState bp_fixed_point(const ChainProblem& problem, double temperature, const BPConfig& config = {});

struct Beliefs {
  std::vector<DensityMatrix<double>> clusters;  // rho_c
  std::vector<DensityMatrix<double>> overlaps;  // sigma_c ∝ exp(A_{c-1} + B_c), c = 1..M-1 (TI: one)
};

Beliefs beliefs_from_messages(const ChainProblem& problem, const BPState& state, double temperature);

/// Largest absolute entry of Tr_last rho_c - Tr_first rho_{c+1} (TI: of the single belief).
double belief_consistency(const ChainProblem& problem, const BPState& state);

struct BPFreeEnergy {
  double free_energy = 0.0;  // per site
  double consistency = 0.0;
  bool converged = false;    // false: the value is not a certified fixed-point result
};

/// The primal Markov free energy evaluated at the beliefs.
BPFreeEnergy bp_free_energy(const ChainProblem& problem, const BPState& state, double temperature);

}  // namespace qmed::bp
