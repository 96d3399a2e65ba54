// med.hpp - Markov entropy decomposition: the Markov free energy of a family
// of locally consistent cluster states, and its minimization.
//
// A Problem is a set of variable clusters (each holding one density matrix),
// linear consistency constraints between marginals of those clusters, and one
// or more patches. A patch is an objective
//
//     F = sum_a Tr(rho_a H_a) - T sum_terms c * S(Tr_{a \ R} rho_a)
//
// whose entropy terms are the conditional entropies S(k|M_k) = S(C_k) - S(M_k)
// written against whichever variable cluster hosts C_k.
//
// The solver parametrizes rho_a = exp(G_a) / Tr exp(G_a) and runs an augmented
// Lagrangian outer loop over the constraints with a nonlinear conjugate
// gradient inner loop. The CG is preconditioned by the Kubo-Mori metric of the
// exponential map, which turns the search direction into the Euclidean
// gradient dF/drho.

#pragma once

#include "qmed/lattice.hpp"
#include "qmed/opalg.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qmed::med {

/// coeff * S(region) of one variable cluster; `region` holds cluster labels.
struct EntropyTerm {
  int cluster = 0;
  std::vector<int> region;
  double coeff = 1.0;
};

/// Tr_{a \ region_a} rho_a == Tr_{b \ region_b} rho_b, with region_a[i]
/// identified with region_b[i].
struct Constraint {
  int cluster_a = 0;
  std::vector<int> region_a;
  int cluster_b = 0;
  std::vector<int> region_b;
};

template <typename Scalar>
struct Patch {
  std::string name;
  std::vector<Matrix<Scalar>> energy;  // one operator per variable cluster
  std::vector<EntropyTerm> entropy;
};

template <typename Scalar>
struct Problem {
  std::vector<SiteSpace> clusters;
  std::vector<Constraint> constraints;
  std::vector<Patch<Scalar>> patches;
  int num_sites = 1;  // 1 in translation-invariant mode
  bool translation_invariant = false;
  std::string description;  // shield shapes and constraint set, for manifests

  void validate() const;
};

template <typename Scalar>
struct ClusterVariables {
  std::vector<DensityMatrix<Scalar>> states;
  std::vector<Constraint> constraints;

  /// Largest absolute entry over all constraint residuals.
  double max_residual() const;
};

struct SolverConfig {
  double tol_gradient = 1e-6;
  double tol_constraint = 1e-6;
  int max_outer = 50;
  int max_inner = 500;
  double penalty_init = 1.0;
  double penalty_growth = 2.0;
  std::uint64_t seed = 0;
  double initial_jitter = 0.0;  // random symmetric perturbation of a cold start

  void validate() const;
  bool operator==(const SolverConfig&) const = default;
};

/// Everything needed to warm-start a later solve.
template <typename Scalar>
struct SolverState {
  std::vector<Matrix<Scalar>> log_weights;  // G_a
  std::vector<Matrix<Scalar>> multipliers;  // one per constraint
  double penalty = 1.0;
};

template <typename Scalar>
struct MedResult {
  double temperature = 0.0;
  double free_energy = 0.0;     // per site
  double energy = 0.0;          // per site
  double markov_entropy = 0.0;  // per site, nats
  std::vector<double> patch_free_energies;  // per site
  std::vector<double> patch_weights;
  ClusterVariables<Scalar> variables;
  double residual = 0.0;
  int iterations = 0;
  int outer_iterations = 0;
  bool converged = false;
  SolverState<Scalar> state;

  /// A bound is only reported as verified when its constraints hold.
  bool verified(const SolverConfig& config) const { return converged && residual <= config.tol_constraint; }
};

// ---------------------------------------------------------------------------
// Problem construction.

enum class TranslationSet {
  Unit,  // overlaps with the one-step translates along each axis
  All    // every translate with a non-empty overlap
};

std::string to_string(TranslationSet set);

/// One cluster state on the union of all shield templates plus the origin.
/// Each template contributes one patch.
Problem<double> make_ti_problem(const lattice::ModelSpec& model, lattice::Kind kind,
                                const std::vector<std::vector<lattice::Offset>>& shield_templates,
                                TranslationSet translations = TranslationSet::Unit);

/// Variable clusters are the maximal C_k; smaller clusters are read off as
/// marginals. Each shield list contributes one patch.
Problem<double> make_finite_problem(const lattice::BuiltLattice& built,
                                    const std::vector<std::vector<lattice::Shield>>& shield_sets,
                                    lattice::TermAssignment assignment = lattice::TermAssignment::HighestSite);

template <typename Scalar>
Problem<Scalar> cast_problem(const Problem<double>& problem);

// ---------------------------------------------------------------------------
// Evaluation.

struct Breakdown {
  double free_energy = 0.0;     // as returned: per site in TI mode, total otherwise
  double energy = 0.0;
  double markov_entropy = 0.0;
  std::vector<double> patch_free_energies;
};

/// Markov free energy of `patch` at the given cluster states. T = 0 gives the
/// plain cluster energy.
template <typename Scalar>
Breakdown markov_free_energy(const Problem<Scalar>& problem, const ClusterVariables<Scalar>& vars,
                             double temperature, int patch = 0);

/// Euclidean gradient dF/drho_a per cluster: H_a + T sum_terms c embed(ln rho_R).
template <typename Scalar>
std::vector<Matrix<Scalar>> free_energy_gradient(const Problem<Scalar>& problem,
                                                 const ClusterVariables<Scalar>& vars, double temperature,
                                                 int patch = 0);

/// Value and gradient of the augmented Lagrangian in exponential coordinates.
template <typename Scalar>
struct ExpGradient {
  double value = 0.0;
  std::vector<Matrix<Scalar>> gradient;
};

template <typename Scalar>
ExpGradient<Scalar> augmented_lagrangian_gradient(const Problem<Scalar>& problem,
                                                  const std::vector<Matrix<Scalar>>& log_weights,
                                                  const std::vector<Matrix<Scalar>>& multipliers, double penalty,
                                                  double temperature, const std::vector<double>& patch_weights);

/// rho = exp(G) / Tr exp(G).
template <typename Scalar>
DensityMatrix<Scalar> state_from_log_weights(const SiteSpace& space, const Matrix<Scalar>& g);

template <typename Scalar>
ClusterVariables<Scalar> maximally_mixed(const Problem<Scalar>& problem);

// ---------------------------------------------------------------------------
// Minimization.

/// Records of the inner loop, for monotonicity checks.
struct InnerTrace {
  std::vector<double> accepted_values;  // augmented objective after each accepted step, per outer iteration
  std::vector<int> outer_boundaries;
};

template <typename Scalar>
MedResult<Scalar> minimize(const Problem<Scalar>& problem, double temperature, const SolverConfig& config,
                           const SolverState<Scalar>* warm = nullptr,
                           const std::vector<double>& patch_weights = {}, InnerTrace* trace = nullptr);

MedResult<double> minimize_ti(const lattice::ModelSpec& model, lattice::Kind kind,
                              const std::vector<lattice::Offset>& shield_template, double temperature,
                              const SolverConfig& config);

MedResult<double> minimize_finite(const lattice::BuiltLattice& built, const std::vector<lattice::Shield>& shields,
                                  double temperature, const SolverConfig& config);

struct SweepRow {
  double temperature = 0.0;
  double free_energy = 0.0;
  double energy = 0.0;
  double markov_entropy = 0.0;
  double residual = 0.0;
  double specific_heat = 0.0;  // -T d2F/dT2 by second differences, NaN at the grid ends
  int iterations = 0;
  bool converged = false;
  bool verified = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // ascending T
};

struct SweepOptions {
  bool warm_start = true;
  int threads = 1;  // used only when warm_start is false
};

/// Solves every grid point; with warm starts the grid is walked from the
/// highest temperature down, starting from the maximally mixed state.
SweepResult temperature_sweep(const Problem<double>& problem, const std::vector<double>& grid,
                              const SolverConfig& config, const SweepOptions& options = {});

void fill_specific_heat(SweepResult& sweep);

struct GroundBound {
  double bound = 0.0;  // per site
  double temperature = 0.0;
  bool bracketed = false;
  bool verified = false;
  std::string note;
  SweepResult sweep;
};

/// max_T F_MED(T) over the grid only.
GroundBound ground_energy_lower_bound(const SweepResult& sweep);

/// Sweep, then golden-section refinement of max_T F_MED(T) around the grid maximum.
GroundBound ground_energy_lower_bound(const Problem<double>& problem, const std::vector<double>& grid,
                                      const SolverConfig& config, double temperature_tolerance = 1e-3);

/// min over shared cluster states of max over patches. Solved through the
/// dual weights w: g(w) = min sum_p w_p F_p is concave and max_w g(w) equals
/// the minimax value. The returned free_energy is the best g(w) found, which
/// is a lower bound for any w.
MedResult<double> multi_patch_minimize(const Problem<double>& problem, double temperature,
                                       const SolverConfig& config, double weight_tolerance = 1e-7);

}  // namespace qmed::med
