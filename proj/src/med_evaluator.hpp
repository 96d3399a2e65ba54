// Internal: evaluation of the Markov free energy, constraint residuals and
// gradients for a Problem. Shared by the public gradient API and the solver.

#pragma once

#include "qmed/med.hpp"

#include <cmath>

namespace qmed::med::detail {

template <typename Scalar>
double inner(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  if constexpr (std::is_same_v<Scalar, double>) {
    return a.cwiseProduct(b).sum();
  } else {
    return std::real(a.conjugate().cwiseProduct(b).sum());
  }
}

template <typename Scalar>
double inner(const std::vector<Matrix<Scalar>>& a, const std::vector<Matrix<Scalar>>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += inner(a[i], b[i]);
  return s;
}

/// Eigen-decomposition of a cluster state with exact log-eigenvalues.
template <typename Scalar>
struct ClusterSpectrum {
  Matrix<Scalar> vectors;
  RealVector p;        // eigenvalues of rho
  RealVector log_p;    // ln p (exact in exponential coordinates, floored otherwise)
  RealVector g;        // eigenvalues of G (exponential coordinates only)
  bool exponential = false;  // built from log weights
  Matrix<Scalar> rho;

  static ClusterSpectrum from_state(const Matrix<Scalar>& rho) {
    ClusterSpectrum s;
    const auto spec = eigh(rho);
    s.vectors = spec.eigenvectors;
    s.p = spec.eigenvalues.cwiseMax(0.0);
    s.log_p = spec.eigenvalues.unaryExpr([](double x) { return std::log(std::max(x, tolerance::log_floor)); });
    s.rho = rho;
    return s;
  }

  static ClusterSpectrum from_log_weights(const Matrix<Scalar>& g) {
    ClusterSpectrum s;
    const auto spec = eigh(g);
    s.vectors = spec.eigenvectors;
    s.g = spec.eigenvalues;
    const double gmax = s.g.maxCoeff();
    RealVector w = (s.g.array() - gmax).exp().matrix();
    const double z = w.sum();
    s.p = w / z;
    const double logz = gmax + std::log(z);
    s.log_p = (s.g.array() - logz).matrix();
    s.exponential = true;
    s.rho = s.vectors * s.p.asDiagonal() * s.vectors.adjoint();
    return s;
  }

  double entropy() const {
    double out = 0.0;
    for (Index i = 0; i < p.size(); ++i)
      if (p(i) > tolerance::entropy_zero) out -= p(i) * log_p(i);
    return out;
  }

  Matrix<Scalar> log_rho() const { return vectors * log_p.asDiagonal() * vectors.adjoint(); }

  /// Gradient with respect to G of a function with Euclidean gradient d
  /// (Daleckii-Krein kernel of the normalized exponential).
  Matrix<Scalar> pullback(const Matrix<Scalar>& d) const {
    const Index n = p.size();
    Matrix<Scalar> x = vectors.adjoint() * d * vectors;
    double mean = 0.0;
    for (Index i = 0; i < n; ++i) mean += p(i) * std::real(x(i, i));
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i) {
        const double delta = g(i) - g(j);
        double k;
        if (std::abs(delta) > 1e-3) k = (p(i) - p(j)) / delta;
        else k = p(j) * (delta == 0.0 ? 1.0 : std::expm1(delta) / delta);
        x(i, j) *= k;
      }
    for (Index i = 0; i < n; ++i) x(i, i) -= mean * p(i);
    return vectors * x * vectors.adjoint();
  }
};

template <typename Scalar>
class Evaluator {
 public:
  struct Region {
    int cluster = 0;
    std::vector<int> labels;
    bool whole = false;
    bool empty = false;
    SubsystemMap map;
  };

  struct Result {
    double lagrangian = 0.0;
    double objective = 0.0;  // weighted over patches, unnormalized
    std::vector<double> patch_energy, patch_entropy, patch_free_energy;
    std::vector<Matrix<Scalar>> residuals;
    std::vector<Matrix<Scalar>> euclidean;  // dL/drho_a
    std::vector<Matrix<Scalar>> gradient;   // dL/dG_a
    std::vector<ClusterSpectrum<Scalar>> spectra;
    double max_residual = 0.0;
  };

  explicit Evaluator(const Problem<Scalar>& problem) : problem_(problem) {
    problem.validate();
    term_region_.resize(problem.patches.size());
    for (std::size_t p = 0; p < problem.patches.size(); ++p)
      for (const EntropyTerm& t : problem.patches[p].entropy) term_region_[p].push_back(region_index(t));
    for (const Constraint& c : problem.constraints) {
      map_a_.emplace_back(problem.clusters[c.cluster_a], c.region_a);
      map_b_.emplace_back(problem.clusters[c.cluster_b], c.region_b);
    }
  }

  const Problem<Scalar>& problem() const { return problem_; }

  /// `weights` selects the patch combination; multipliers may be empty for
  /// a plain objective evaluation.
  Result evaluate(std::vector<ClusterSpectrum<Scalar>> spectra, double temperature, const std::vector<double>& weights,
                  const std::vector<Matrix<Scalar>>& multipliers, double penalty, bool want_gradient) const {
    const auto& pr = problem_;
    const std::size_t nc = pr.clusters.size();
    Result out;

    std::vector<double> region_entropy(regions_.size(), 0.0);
    std::vector<Matrix<Scalar>> region_log(regions_.size());
    for (std::size_t r = 0; r < regions_.size(); ++r) {
      const Region& reg = regions_[r];
      if (reg.empty) continue;
      const auto& cs = spectra[reg.cluster];
      if (reg.whole) {
        region_entropy[r] = cs.entropy();
        if (want_gradient) region_log[r] = cs.log_rho();
      } else {
        const auto marginal = ClusterSpectrum<Scalar>::from_state(reg.map.trace_out(cs.rho));
        region_entropy[r] = marginal.entropy();
        if (want_gradient) region_log[r] = marginal.log_rho();
      }
    }

    const std::size_t np = pr.patches.size();
    out.patch_energy.assign(np, 0.0);
    out.patch_entropy.assign(np, 0.0);
    out.patch_free_energy.assign(np, 0.0);
    for (std::size_t p = 0; p < np; ++p) {
      for (std::size_t a = 0; a < nc; ++a) out.patch_energy[p] += inner(pr.patches[p].energy[a], spectra[a].rho);
      for (std::size_t t = 0; t < pr.patches[p].entropy.size(); ++t)
        out.patch_entropy[p] += pr.patches[p].entropy[t].coeff * region_entropy[term_region_[p][t]];
      out.patch_free_energy[p] = out.patch_energy[p] - temperature * out.patch_entropy[p];
      out.objective += weights[p] * out.patch_free_energy[p];
    }

    out.lagrangian = out.objective;
    for (std::size_t k = 0; k < pr.constraints.size(); ++k) {
      const Constraint& c = pr.constraints[k];
      Matrix<Scalar> r = map_a_[k].trace_out(spectra[c.cluster_a].rho) - map_b_[k].trace_out(spectra[c.cluster_b].rho);
      out.max_residual = std::max(out.max_residual, r.cwiseAbs().maxCoeff());
      if (!multipliers.empty()) out.lagrangian += inner(multipliers[k], r);
      out.lagrangian += 0.5 * penalty * r.squaredNorm();
      out.residuals.push_back(std::move(r));
    }

    if (want_gradient) {
      out.euclidean.resize(nc);
      for (std::size_t a = 0; a < nc; ++a) {
        const Index d = pr.clusters[a].dim();
        out.euclidean[a] = Matrix<Scalar>::Zero(d, d);
        for (std::size_t p = 0; p < np; ++p)
          if (weights[p] != 0.0) out.euclidean[a] += weights[p] * pr.patches[p].energy[a];
      }
      for (std::size_t p = 0; p < np; ++p) {
        if (weights[p] == 0.0) continue;
        for (std::size_t t = 0; t < pr.patches[p].entropy.size(); ++t) {
          const Region& reg = regions_[term_region_[p][t]];
          if (reg.empty) continue;
          const double scale = temperature * weights[p] * pr.patches[p].entropy[t].coeff;
          if (scale == 0.0) continue;
          if (reg.whole) out.euclidean[reg.cluster] += scale * region_log[term_region_[p][t]];
          else reg.map.add_embedded(region_log[term_region_[p][t]], out.euclidean[reg.cluster], scale);
        }
      }
      for (std::size_t k = 0; k < pr.constraints.size(); ++k) {
        const Constraint& c = pr.constraints[k];
        Matrix<Scalar> m = penalty * out.residuals[k];
        if (!multipliers.empty()) m += multipliers[k];
        map_a_[k].add_embedded(m, out.euclidean[c.cluster_a], 1.0);
        map_b_[k].add_embedded(m, out.euclidean[c.cluster_b], -1.0);
      }
      for (auto& e : out.euclidean) e = symmetrized(e);
      if (!spectra.empty() && spectra.front().exponential) {
        out.gradient.resize(nc);
        for (std::size_t a = 0; a < nc; ++a) out.gradient[a] = symmetrized(spectra[a].pullback(out.euclidean[a]));
      }
    }
    out.spectra = std::move(spectra);
    return out;
  }

  Result evaluate_log_weights(const std::vector<Matrix<Scalar>>& g, double temperature,
                              const std::vector<double>& weights, const std::vector<Matrix<Scalar>>& multipliers,
                              double penalty, bool want_gradient) const {
    std::vector<ClusterSpectrum<Scalar>> spectra;
    spectra.reserve(g.size());
    for (const auto& x : g) spectra.push_back(ClusterSpectrum<Scalar>::from_log_weights(x));
    return evaluate(std::move(spectra), temperature, weights, multipliers, penalty, want_gradient);
  }

  Result evaluate_states(const ClusterVariables<Scalar>& vars, double temperature, const std::vector<double>& weights,
                         bool want_gradient) const {
    if (vars.states.size() != problem_.clusters.size())
      throw std::invalid_argument("markov_free_energy: expected " + std::to_string(problem_.clusters.size()) +
                                  " cluster states, got " + std::to_string(vars.states.size()));
    std::vector<ClusterSpectrum<Scalar>> spectra;
    for (std::size_t a = 0; a < vars.states.size(); ++a) {
      if (!(vars.states[a].space() == problem_.clusters[a]))
        throw std::invalid_argument("markov_free_energy: state " + std::to_string(a) + " lives on " +
                                    to_string(vars.states[a].space()) + " but the cluster is " +
                                    to_string(problem_.clusters[a]));
      spectra.push_back(ClusterSpectrum<Scalar>::from_state(vars.states[a].matrix()));
    }
    return evaluate(std::move(spectra), temperature, weights, {}, 0.0, want_gradient);
  }

 private:
  int region_index(const EntropyTerm& t) {
    for (std::size_t i = 0; i < regions_.size(); ++i)
      if (regions_[i].cluster == t.cluster && regions_[i].labels == t.region) return static_cast<int>(i);
    Region reg;
    reg.cluster = t.cluster;
    reg.labels = t.region;
    const SiteSpace& space = problem_.clusters[t.cluster];
    reg.empty = t.region.empty();
    reg.whole = t.region == space.labels();
    if (!reg.empty && !reg.whole) reg.map = SubsystemMap(space, t.region);
    regions_.push_back(std::move(reg));
    return static_cast<int>(regions_.size()) - 1;
  }

  const Problem<Scalar>& problem_;
  std::vector<Region> regions_;
  std::vector<std::vector<int>> term_region_;
  std::vector<SubsystemMap> map_a_, map_b_;
};

inline std::vector<double> unit_weights(std::size_t n, std::size_t which) {
  std::vector<double> w(n, 0.0);
  w.at(which) = 1.0;
  return w;
}

}  // namespace qmed::med::detail
