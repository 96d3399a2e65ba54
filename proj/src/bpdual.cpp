#include "qmed/bpdual.hpp"

namespace qmed::bp {

namespace {

Matrix<double> normalized_log(const Matrix<double>& l) {
  const auto spec = eigh(l);
  const double top = spec.eigenvalues.maxCoeff();
  const double lse = top + std::log((spec.eigenvalues.array() - top).exp().sum());
  return symmetrized<double>(l - lse * Matrix<double>::Identity(l.rows(), l.cols()));
}

/// log Tr_x exp(x) for a cluster exponent, dropping the last or the first site.
Matrix<double> log_marginal(const Matrix<double>& x, int window, bool drop_last) {
  const auto spec = eigh(x);
  const double top = spec.eigenvalues.maxCoeff();
  const Matrix<double> e = spec.apply([top](double v) { return std::exp(v - top); });
  std::vector<int> labels(window + 1), keep(window);
  for (int i = 0; i <= window; ++i) labels[i] = i;
  for (int i = 0; i < window; ++i) keep[i] = drop_last ? i : i + 1;
  const SubsystemMap map(SiteSpace::qubits(labels), keep);
  return log_positive(map.trace_out(e)) + top * Matrix<double>::Identity(Index{1} << window, Index{1} << window);
}

Matrix<double> on_last(const Matrix<double>& a) { return kron<double>(Matrix<double>::Identity(2, 2), a); }
Matrix<double> on_first(const Matrix<double>& b) { return kron<double>(b, Matrix<double>::Identity(2, 2)); }

void check_cluster(const ChainProblem& problem, int cluster) {
  if (cluster < 0 || cluster >= problem.num_clusters())
    throw std::invalid_argument("bp: no cluster " + std::to_string(cluster));
}

Matrix<double> exponent(const ChainProblem& problem, const BPState& state, int c, double temperature, bool with_a,
                        bool with_b) {
  Matrix<double> x = -problem.hamiltonians[c] / temperature;
  if (with_a) x += on_last(state.from_right[c]);
  if (with_b) x += on_first(state.from_left[c]);
  return x;
}

double message_change(const Matrix<double>& old_log, const Matrix<double>& new_log) {
  return trace_distance<double>(exp_hermitian(old_log), exp_hermitian(new_log));
}

}  // namespace

ChainProblem ti_chain_problem(const lattice::ModelSpec& model, int window) {
  if (window < 1) throw std::invalid_argument("ti_chain_problem: window must be at least 1");
  ChainProblem out;
  out.window = window;
  out.translation_invariant = true;
  out.primal = med::make_ti_problem(model, lattice::Kind::TiChain, {lattice::chain_window(window)});
  out.hamiltonians = out.primal.patches[0].energy;
  return out;
}

ChainProblem finite_chain_problem(const lattice::ModelSpec& model, int num_sites, int window) {
  if (window < 1) throw std::invalid_argument("finite_chain_problem: window must be at least 1");
  if (num_sites < window + 1)
    throw std::invalid_argument("finite_chain_problem: a window of " + std::to_string(window) + " needs at least " +
                                std::to_string(window + 1) + " sites");
  const auto built = lattice::build_lattice({lattice::Kind::Chain, num_sites, 1, lattice::Boundary::Open, 1}, model);
  const auto hood = lattice::Neighborhood::from_template(lattice::chain_window(window));
  ChainProblem out;
  out.window = window;
  out.primal = med::make_finite_problem(built, {lattice::all_shields(built, hood)});
  for (int c = 0; c < static_cast<int>(out.primal.clusters.size()); ++c) {
    const auto& labels = out.primal.clusters[c].labels();
    for (int i = 0; i <= window; ++i)
      if (static_cast<int>(labels.size()) != window + 1 || labels[i] != c + i)
        throw std::logic_error("finite_chain_problem: unexpected cluster layout");
  }
  out.hamiltonians = out.primal.patches[0].energy;
  return out;
}

Matrix<double> message_log(const HermitianOperator<double>& m) {
  const auto spec = eigh(m);
  if (spec.eigenvalues.size() == 0 || !(spec.eigenvalues(0) > 0.0))
    throw std::invalid_argument("bp: message is singular (smallest eigenvalue " +
                                std::to_string(spec.eigenvalues.size() ? spec.eigenvalues(0) : 0.0) + ")");
  return normalized_log(spec.apply([](double x) { return std::log(x); }));
}

void BPConfig::validate() const {
  if (!(damping > 0.0 && damping <= 1.0)) throw std::invalid_argument("BPConfig: damping must lie in (0, 1]");
  if (!(tol_residual > 0.0)) throw std::invalid_argument("BPConfig: tol_residual must be positive");
  if (max_iters < 1) throw std::invalid_argument("BPConfig: max_iters must be positive");
}

std::vector<Message> BPState::messages() const {
  std::vector<Message> out;
  const int m = static_cast<int>(from_right.size());
  for (int c = 0; c < m; ++c) {
    if (m == 1 || c + 1 < m) out.push_back({Direction::Left, c, from_right[c]});
    if (m == 1 || c > 0) out.push_back({Direction::Right, c, from_left[c]});
  }
  return out;
}

BPState initial_state(const ChainProblem& problem) {
  const Index d = problem.message_dim();
  const int m = problem.num_clusters();
  const Matrix<double> uniform = -std::log(static_cast<double>(d)) * Matrix<double>::Identity(d, d);
  BPState s;
  for (int c = 0; c < m; ++c) {
    // Open ends carry identity messages: A = 0 on the last cluster, B = 0 on the first.
    const bool ti = problem.translation_invariant;
    s.from_right.push_back(!ti && c + 1 == m ? Matrix<double>::Zero(d, d) : uniform);
    s.from_left.push_back(!ti && c == 0 ? Matrix<double>::Zero(d, d) : uniform);
  }
  return s;
}

DensityMatrix<double> belief(const ChainProblem& problem, const BPState& state, int cluster, double temperature) {
  check_cluster(problem, cluster);
  const Matrix<double> x = exponent(problem, state, cluster, temperature, true, true);
  const auto spec = eigh(x);
  const double top = spec.eigenvalues.maxCoeff();
  return DensityMatrix<double>::normalized(problem.primal.clusters[cluster],
                                           spec.apply([top](double v) { return std::exp(v - top); }));
}

std::pair<Matrix<double>, Matrix<double>> bp_update(const ChainProblem& problem, const BPState& state, int cluster,
                                                     double temperature, bool retain_inverse) {
  check_cluster(problem, cluster);
  if (!(temperature > 0.0)) throw std::invalid_argument("bp_update: temperature must be positive");
  const int n = problem.window;
  const Matrix<double>& a = state.from_right[cluster];
  const Matrix<double>& b = state.from_left[cluster];
  if (retain_inverse) {
    const Matrix<double> x = exponent(problem, state, cluster, temperature, true, true);
    return {normalized_log(log_marginal(x, n, true) - b), normalized_log(log_marginal(x, n, false) - a)};
  }
  const Matrix<double> left = exponent(problem, state, cluster, temperature, true, false);
  const Matrix<double> right = exponent(problem, state, cluster, temperature, false, true);
  return {normalized_log(log_marginal(left, n, true)), normalized_log(log_marginal(right, n, false))};
}

BPState bp_fixed_point(const ChainProblem& problem, double temperature, const BPConfig& config) {
  config.validate();
  if (!(temperature > 0.0)) throw std::invalid_argument("bp_fixed_point: temperature must be positive");
  BPState s = initial_state(problem);
  s.retain_inverse = config.retain_inverse;
  const double alpha = config.damping;
  auto damp = [&](Matrix<double>& target, const Matrix<double>& fresh) {
    const Matrix<double> next = normalized_log((1.0 - alpha) * target + alpha * fresh);
    s.residual = std::max(s.residual, message_change(target, next));
    target = next;
  };
  const int m = problem.num_clusters();
  while (s.iterations < config.max_iters) {
    s.residual = 0.0;
    if (problem.translation_invariant) {
      const auto [a, b] = bp_update(problem, s, 0, temperature, config.retain_inverse);
      damp(s.from_right[0], a);
      damp(s.from_left[0], b);
    } else {
      for (int c = 0; c + 1 < m; ++c) damp(s.from_left[c + 1], bp_update(problem, s, c, temperature, config.retain_inverse).second);
      for (int c = m - 1; c > 0; --c) damp(s.from_right[c - 1], bp_update(problem, s, c, temperature, config.retain_inverse).first);
    }
    ++s.iterations;
    if (s.residual <= config.tol_residual) {
      s.converged = true;
      break;
    }
  }
  for (int c = 0; c < m; ++c) s.beliefs.push_back(belief(problem, s, c, temperature));
  return s;
}

Beliefs beliefs_from_messages(const ChainProblem& problem, const BPState& state, double temperature) {
  Beliefs out;
  const int m = problem.num_clusters();
  for (int c = 0; c < m; ++c) out.clusters.push_back(belief(problem, state, c, temperature));
  auto sigma = [&](const Matrix<double>& a, const Matrix<double>& b, int first_label) {
    std::vector<int> labels(problem.window);
    for (int i = 0; i < problem.window; ++i) labels[i] = first_label + i;
    return DensityMatrix<double>::normalized(SiteSpace::qubits(labels), exp_hermitian(normalized_log(a + b)));
  };
  if (problem.translation_invariant) {
    out.overlaps.push_back(sigma(state.from_right[0], state.from_left[0], 0));
  } else {
    for (int c = 1; c < m; ++c) out.overlaps.push_back(sigma(state.from_right[c - 1], state.from_left[c], c));
  }
  return out;
}

namespace {

double consistency_of(const ChainProblem& problem, const std::vector<DensityMatrix<double>>& rho) {
  const int n = problem.window;
  std::vector<int> labels(n + 1), first(n), last(n);
  for (int i = 0; i <= n; ++i) labels[i] = i;
  for (int i = 0; i < n; ++i) first[i] = i, last[i] = i + 1;
  const SiteSpace space = SiteSpace::qubits(labels);
  const SubsystemMap keep_first(space, first), keep_last(space, last);
  double out = 0.0;
  if (problem.translation_invariant) {
    const auto& r = rho[0].matrix();
    return (keep_last.trace_out(r) - keep_first.trace_out(r)).cwiseAbs().maxCoeff();
  }
  for (std::size_t c = 0; c + 1 < rho.size(); ++c)
    out = std::max(out,
                   (keep_last.trace_out(rho[c].matrix()) - keep_first.trace_out(rho[c + 1].matrix())).cwiseAbs().maxCoeff());
  return out;
}

}  // namespace

double belief_consistency(const ChainProblem& problem, const BPState& state) {
  if (static_cast<int>(state.beliefs.size()) != problem.num_clusters())
    throw std::invalid_argument("belief_consistency: state carries no beliefs");
  return consistency_of(problem, state.beliefs);
}

BPFreeEnergy bp_free_energy(const ChainProblem& problem, const BPState& state, double temperature) {
  if (static_cast<int>(state.beliefs.size()) != problem.num_clusters())
    throw std::invalid_argument("bp_free_energy: state carries no beliefs");
  med::ClusterVariables<double> vars{state.beliefs, problem.primal.constraints};
  const auto f = med::markov_free_energy(problem.primal, vars, temperature);
  BPFreeEnergy out;
  out.free_energy = problem.translation_invariant ? f.free_energy : f.free_energy / problem.primal.num_sites;
  out.consistency = consistency_of(problem, state.beliefs);
  out.converged = state.converged;
  return out;
}

}  // namespace qmed::bp
