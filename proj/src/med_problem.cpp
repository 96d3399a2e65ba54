#include "med_evaluator.hpp"

#include <set>
#include <sstream>

namespace qmed::med {

using lattice::Offset;

namespace {

std::string label_list(const std::vector<int>& labels) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < labels.size(); ++i) os << (i ? "," : "") << labels[i];
  os << '}';
  return os.str();
}

void check_region(const SiteSpace& space, const std::vector<int>& region, const std::string& what) {
  std::set<int> seen;
  for (int label : region) {
    if (!space.contains(label))
      throw std::invalid_argument(what + ": site " + std::to_string(label) + " is not in cluster " + to_string(space));
    if (!seen.insert(label).second) throw std::invalid_argument(what + ": repeated site " + std::to_string(label));
  }
}

}  // namespace

template <typename Scalar>
void Problem<Scalar>::validate() const {
  const int nc = static_cast<int>(clusters.size());
  if (nc == 0) throw std::invalid_argument("Problem: no clusters");
  if (patches.empty()) throw std::invalid_argument("Problem: no patches");
  if (num_sites < 1) throw std::invalid_argument("Problem: num_sites must be positive");
  for (const auto& patch : patches) {
    if (static_cast<int>(patch.energy.size()) != nc)
      throw std::invalid_argument("Problem: patch '" + patch.name + "' has " + std::to_string(patch.energy.size()) +
                                  " energy operators for " + std::to_string(nc) + " clusters");
    for (int a = 0; a < nc; ++a)
      if (patch.energy[a].rows() != clusters[a].dim() || patch.energy[a].cols() != clusters[a].dim())
        throw std::invalid_argument("Problem: energy operator " + std::to_string(a) + " has the wrong shape");
    for (const EntropyTerm& t : patch.entropy) {
      if (t.cluster < 0 || t.cluster >= nc) throw std::invalid_argument("Problem: entropy term names no cluster");
      check_region(clusters[t.cluster], t.region, "Problem: entropy term");
    }
  }
  for (const Constraint& c : constraints) {
    if (c.cluster_a < 0 || c.cluster_a >= nc || c.cluster_b < 0 || c.cluster_b >= nc)
      throw std::invalid_argument("Problem: constraint names no cluster");
    if (c.region_a.empty() || c.region_a.size() != c.region_b.size())
      throw std::invalid_argument("Problem: constraint regions must be non-empty and equally long");
    check_region(clusters[c.cluster_a], c.region_a, "Problem: constraint");
    check_region(clusters[c.cluster_b], c.region_b, "Problem: constraint");
    for (std::size_t i = 0; i < c.region_a.size(); ++i)
      if (clusters[c.cluster_a].dim_of(c.region_a[i]) != clusters[c.cluster_b].dim_of(c.region_b[i]))
        throw std::invalid_argument("Problem: constraint identifies sites of different dimension");
  }
}

template <typename Scalar>
double ClusterVariables<Scalar>::max_residual() const {
  double out = 0.0;
  for (const Constraint& c : constraints) {
    const auto& a = states.at(c.cluster_a);
    const auto& b = states.at(c.cluster_b);
    const Matrix<Scalar> r = SubsystemMap(a.space(), c.region_a).trace_out(a.matrix()) -
                             SubsystemMap(b.space(), c.region_b).trace_out(b.matrix());
    out = std::max(out, r.cwiseAbs().maxCoeff());
  }
  return out;
}

void SolverConfig::validate() const {
  if (!(tol_gradient > 0.0) || !(tol_constraint > 0.0))
    throw std::invalid_argument("SolverConfig: tolerances must be positive");
  if (max_outer < 1 || max_inner < 1) throw std::invalid_argument("SolverConfig: iteration limits must be positive");
  if (!(penalty_init > 0.0)) throw std::invalid_argument("SolverConfig: penalty_init must be positive");
  if (!(penalty_growth > 1.0)) throw std::invalid_argument("SolverConfig: penalty_growth must exceed 1");
  if (!(initial_jitter >= 0.0)) throw std::invalid_argument("SolverConfig: initial_jitter must be non-negative");
}

std::string to_string(TranslationSet set) { return set == TranslationSet::Unit ? "unit" : "all"; }

Problem<double> make_ti_problem(const lattice::ModelSpec& model, lattice::Kind kind,
                                const std::vector<std::vector<Offset>>& shield_templates,
                                TranslationSet translations) {
  if (!lattice::is_translation_invariant(kind)) throw std::invalid_argument("make_ti_problem: not a TI lattice kind");
  if (shield_templates.empty()) throw std::invalid_argument("make_ti_problem: no shield template");

  std::vector<lattice::TiCluster> patches;
  std::vector<Offset> all;
  for (const auto& t : shield_templates) {
    patches.push_back(lattice::ti_cluster(t));
    // Rejects templates whose cluster cannot hold the per-site bonds.
    lattice::ti_cluster_hamiltonian(model, kind, patches.back());
    all.insert(all.end(), t.begin(), t.end());
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  const lattice::TiCluster un = lattice::ti_cluster(all);
  if (un.sites.size() > 12)
    throw std::invalid_argument("make_ti_problem: cluster of " + std::to_string(un.sites.size()) +
                                " sites exceeds the 12-site limit");

  Problem<double> out;
  out.translation_invariant = true;
  out.num_sites = 1;
  out.clusters.push_back(SiteSpace::qubits(un.labels()));
  const Matrix<double> h = lattice::ti_cluster_hamiltonian(model, kind, un).matrix();

  std::ostringstream desc;
  desc << "ti " << lattice::to_string(kind) << "; cluster " << lattice::to_string(un.sites);
  for (std::size_t p = 0; p < patches.size(); ++p) {
    Patch<double> patch;
    patch.name = lattice::to_string(shield_templates[p]);
    patch.energy = {h};
    std::vector<int> c_labels, m_labels;
    for (const Offset& o : patches[p].sites) {
      c_labels.push_back(un.index_of(o));
      if (o != Offset{0, 0}) m_labels.push_back(un.index_of(o));
    }
    patch.entropy.push_back({0, c_labels, 1.0});
    if (!m_labels.empty()) patch.entropy.push_back({0, m_labels, -1.0});
    desc << "; shield " << patch.name;
    out.patches.push_back(std::move(patch));
  }

  std::vector<Offset> shifts;
  if (translations == TranslationSet::Unit) {
    shifts.push_back({1, 0});
    if (kind == lattice::Kind::TiSquare) shifts.push_back({0, -1});
  } else {
    // One representative of each +-t pair with a non-empty overlap.
    std::set<Offset> seen;
    for (const Offset& a : un.sites)
      for (const Offset& b : un.sites) {
        const Offset t = b - a;
        if (t.dy < 0 || (t.dy == 0 && t.dx > 0)) seen.insert(t);
      }
    shifts.assign(seen.begin(), seen.end());
  }
  for (const Offset& t : shifts) {
    Constraint c;
    for (const Offset& s : un.sites) {
      const int j = un.index_of(s + t);
      if (j < 0) continue;
      c.region_a.push_back(un.index_of(s));
      c.region_b.push_back(j);
    }
    if (c.region_a.empty()) continue;
    out.constraints.push_back(std::move(c));
  }
  desc << "; translations " << to_string(translations) << " (" << out.constraints.size() << " constraints)";
  out.description = desc.str();
  out.validate();
  return out;
}

Problem<double> make_finite_problem(const lattice::BuiltLattice& built,
                                    const std::vector<std::vector<lattice::Shield>>& shield_sets,
                                    lattice::TermAssignment assignment) {
  if (lattice::is_translation_invariant(built.lattice.spec.kind))
    throw std::invalid_argument("make_finite_problem: lattice is translation invariant; use make_ti_problem");
  if (shield_sets.empty()) throw std::invalid_argument("make_finite_problem: no shield set");
  const auto& ordering = built.ordering;
  const int n = built.lattice.num_sites();

  auto sorted_set = [](const std::vector<int>& v) {
    std::vector<int> s = v;
    std::sort(s.begin(), s.end());
    return s;
  };
  auto subset = [](const std::vector<int>& a, const std::vector<int>& b) {  // both sorted
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
  };

  std::vector<std::vector<int>> candidates;
  for (const auto& shields : shield_sets) {
    if (static_cast<int>(shields.size()) != n)
      throw std::invalid_argument("make_finite_problem: expected one shield per site (" + std::to_string(n) + "), got " +
                                  std::to_string(shields.size()));
    for (const auto& s : shields) candidates.push_back(sorted_set(s.cluster));
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  std::vector<std::vector<int>> maximal;
  for (const auto& c : candidates) {
    bool dominated = false;
    for (const auto& d : candidates)
      if (d != c && subset(c, d)) dominated = true;
    if (!dominated) maximal.push_back(c);
  }

  Problem<double> out;
  out.num_sites = n;
  for (auto c : maximal) {
    std::sort(c.begin(), c.end(), [&](int a, int b) { return ordering.position(a) < ordering.position(b); });
    out.clusters.push_back(SiteSpace::qubits(c));
  }
  auto host_of = [&](const std::vector<int>& cluster) {
    const auto s = sorted_set(cluster);
    for (std::size_t i = 0; i < maximal.size(); ++i)
      if (subset(s, maximal[i])) return static_cast<int>(i);
    throw std::logic_error("make_finite_problem: cluster without host");
  };

  std::ostringstream desc;
  desc << lattice::to_string(built.lattice.spec.kind) << " N=" << n << "; " << maximal.size() << " variable clusters";
  for (std::size_t p = 0; p < shield_sets.size(); ++p) {
    const auto& shields = shield_sets[p];
    Patch<double> patch;
    patch.name = "patch" + std::to_string(p);
    for (const auto& c : out.clusters) patch.energy.push_back(Matrix<double>::Zero(c.dim(), c.dim()));
    const auto assigned = lattice::assign_terms(shields, built.terms, ordering, assignment);
    desc << "; " << patch.name << " shields";
    for (std::size_t i = 0; i < shields.size(); ++i) {
      const auto& s = shields[i];
      const int h = host_of(s.cluster);
      patch.entropy.push_back({h, s.cluster, 1.0});
      if (!s.shield.empty()) patch.entropy.push_back({h, s.shield, -1.0});
      for (auto [t, w] : assigned[i]) {
        const auto& term = built.terms[t];
        SubsystemMap(out.clusters[h], term.support).add_embedded(term.op, patch.energy[h], w);
      }
      desc << ' ' << s.site << ':' << label_list(s.shield);
    }
    out.patches.push_back(std::move(patch));
  }

  for (std::size_t a = 0; a < out.clusters.size(); ++a)
    for (std::size_t b = a + 1; b < out.clusters.size(); ++b) {
      std::vector<int> overlap;
      for (int label : out.clusters[a].labels())
        if (out.clusters[b].contains(label)) overlap.push_back(label);
      if (overlap.empty()) continue;
      out.constraints.push_back({static_cast<int>(a), overlap, static_cast<int>(b), overlap});
    }
  desc << "; " << out.constraints.size() << " overlap constraints";
  out.description = desc.str();
  out.validate();
  return out;
}

template <typename Scalar>
Problem<Scalar> cast_problem(const Problem<double>& problem) {
  Problem<Scalar> out;
  out.clusters = problem.clusters;
  out.constraints = problem.constraints;
  out.num_sites = problem.num_sites;
  out.translation_invariant = problem.translation_invariant;
  out.description = problem.description;
  for (const auto& p : problem.patches) {
    Patch<Scalar> q;
    q.name = p.name;
    q.entropy = p.entropy;
    for (const auto& e : p.energy) q.energy.push_back(e.template cast<Scalar>());
    out.patches.push_back(std::move(q));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation API.

namespace {

template <typename Scalar>
std::vector<double> resolve_weights(const Problem<Scalar>& problem, const std::vector<double>& weights) {
  if (weights.empty()) {
    if (problem.patches.size() != 1)
      throw std::invalid_argument("patch weights are required when a problem has several patches");
    return {1.0};
  }
  if (weights.size() != problem.patches.size())
    throw std::invalid_argument("expected " + std::to_string(problem.patches.size()) + " patch weights, got " +
                                std::to_string(weights.size()));
  for (double w : weights)
    if (!(w >= 0.0)) throw std::invalid_argument("patch weights must be non-negative");
  return weights;
}

template <typename Scalar>
void check_patch(const Problem<Scalar>& problem, int patch) {
  if (patch < 0 || patch >= static_cast<int>(problem.patches.size()))
    throw std::invalid_argument("no patch " + std::to_string(patch));
}

}  // namespace

template <typename Scalar>
Breakdown markov_free_energy(const Problem<Scalar>& problem, const ClusterVariables<Scalar>& vars,
                             double temperature, int patch) {
  check_patch(problem, patch);
  if (!(temperature >= 0.0)) throw std::invalid_argument("markov_free_energy: temperature must be non-negative");
  const detail::Evaluator<Scalar> ev(problem);
  const auto res =
      ev.evaluate_states(vars, temperature, detail::unit_weights(problem.patches.size(), patch), false);
  const double scale = problem.translation_invariant ? 1.0 / problem.num_sites : 1.0;
  Breakdown out;
  out.free_energy = res.patch_free_energy[patch] * scale;
  out.energy = res.patch_energy[patch] * scale;
  out.markov_entropy = res.patch_entropy[patch] * scale;
  for (double f : res.patch_free_energy) out.patch_free_energies.push_back(f * scale);
  return out;
}

template <typename Scalar>
std::vector<Matrix<Scalar>> free_energy_gradient(const Problem<Scalar>& problem, const ClusterVariables<Scalar>& vars,
                                                 double temperature, int patch) {
  check_patch(problem, patch);
  const detail::Evaluator<Scalar> ev(problem);
  return ev.evaluate_states(vars, temperature, detail::unit_weights(problem.patches.size(), patch), true).euclidean;
}

template <typename Scalar>
ExpGradient<Scalar> augmented_lagrangian_gradient(const Problem<Scalar>& problem,
                                                  const std::vector<Matrix<Scalar>>& log_weights,
                                                  const std::vector<Matrix<Scalar>>& multipliers, double penalty,
                                                  double temperature, const std::vector<double>& patch_weights) {
  const detail::Evaluator<Scalar> ev(problem);
  if (log_weights.size() != problem.clusters.size())
    throw std::invalid_argument("augmented_lagrangian_gradient: one log-weight matrix per cluster is required");
  if (!multipliers.empty() && multipliers.size() != problem.constraints.size())
    throw std::invalid_argument("augmented_lagrangian_gradient: one multiplier per constraint is required");
  auto res = ev.evaluate_log_weights(log_weights, temperature, resolve_weights(problem, patch_weights), multipliers,
                                     penalty, true);
  return {res.lagrangian, std::move(res.gradient)};
}

template <typename Scalar>
DensityMatrix<Scalar> state_from_log_weights(const SiteSpace& space, const Matrix<Scalar>& g) {
  if (g.rows() != space.dim() || g.cols() != space.dim())
    throw std::invalid_argument("state_from_log_weights: shape does not match the space");
  return DensityMatrix<Scalar>::normalized(space, detail::ClusterSpectrum<Scalar>::from_log_weights(g).rho);
}

template <typename Scalar>
ClusterVariables<Scalar> maximally_mixed(const Problem<Scalar>& problem) {
  ClusterVariables<Scalar> out;
  for (const auto& c : problem.clusters) out.states.push_back(DensityMatrix<Scalar>::maximally_mixed(c));
  out.constraints = problem.constraints;
  return out;
}

#define QMED_INSTANTIATE(S)                                                                                        \
  template struct Problem<S>;                                                                                      \
  template struct ClusterVariables<S>;                                                                             \
  template Problem<S> cast_problem<S>(const Problem<double>&);                                                     \
  template Breakdown markov_free_energy<S>(const Problem<S>&, const ClusterVariables<S>&, double, int);             \
  template std::vector<Matrix<S>> free_energy_gradient<S>(const Problem<S>&, const ClusterVariables<S>&, double,    \
                                                          int);                                                    \
  template ExpGradient<S> augmented_lagrangian_gradient<S>(const Problem<S>&, const std::vector<Matrix<S>>&,        \
                                                           const std::vector<Matrix<S>>&, double, double,           \
                                                           const std::vector<double>&);                             \
  template DensityMatrix<S> state_from_log_weights<S>(const SiteSpace&, const Matrix<S>&);                          \
  template ClusterVariables<S> maximally_mixed<S>(const Problem<S>&);

QMED_INSTANTIATE(double)
QMED_INSTANTIATE(Complex)
#undef QMED_INSTANTIATE

}  // namespace qmed::med
