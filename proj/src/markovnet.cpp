#include "qmed/markovnet.hpp"

#include <numeric>

namespace qmed::markov {

namespace {

void guard(Index dim, const char* what) {
  if (dim > max_dimension)
    throw std::invalid_argument(std::string(what) + ": dimension " + std::to_string(dim) + " exceeds the limit of " +
                                std::to_string(max_dimension));
}

template <typename Scalar>
DensityMatrix<Scalar> trivial_state() {
  return DensityMatrix<Scalar>(SiteSpace(), Matrix<Scalar>::Identity(1, 1));
}

template <typename Scalar>
DensityMatrix<Scalar> marginal(const DensityMatrix<Scalar>& rho, const std::vector<int>& keep) {
  if (keep.empty()) return trivial_state<Scalar>();
  return partial_trace(rho, std::span<const int>(keep));
}

bool same_set(std::vector<int> a, std::vector<int> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

std::vector<int> minus(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  for (int x : a)
    if (std::find(b.begin(), b.end(), x) == b.end()) out.push_back(x);
  return out;
}

const lattice::Shield& shield_of(const std::vector<lattice::Shield>& shields, int site) {
  for (const auto& s : shields)
    if (s.site == site) return s;
  throw std::invalid_argument("no shield for site " + std::to_string(site));
}

/// Mixed-radix digits of a basis index, first node most significant.
std::vector<int> digits(Index x, const std::vector<int>& dims) {
  std::vector<int> out(dims.size());
  for (int i = static_cast<int>(dims.size()) - 1; i >= 0; --i) {
    out[i] = static_cast<int>(x % dims[i]);
    x /= dims[i];
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

TreeGraph TreeGraph::path(int n, int dim) {
  TreeGraph t;
  for (int i = 0; i < n; ++i) t.parent.push_back(i - 1);
  t.dims.assign(n, dim);
  return t;
}

TreeGraph TreeGraph::star(int leaves, int dim) {
  TreeGraph t;
  t.parent.push_back(-1);
  for (int i = 0; i < leaves; ++i) t.parent.push_back(0);
  t.dims.assign(leaves + 1, dim);
  return t;
}

std::vector<int> TreeGraph::children(int node) const {
  std::vector<int> out;
  for (int i = 0; i < num_nodes(); ++i)
    if (parent[i] == node) out.push_back(i);
  return out;
}

SiteSpace TreeGraph::space() const {
  std::vector<int> labels(num_nodes());
  std::iota(labels.begin(), labels.end(), 0);
  return {labels, dims};
}

void TreeGraph::validate() const {
  if (parent.empty()) throw std::invalid_argument("TreeGraph: no nodes");
  if (dims.size() != parent.size()) throw std::invalid_argument("TreeGraph: one dimension per node is required");
  if (parent[0] != -1) throw std::invalid_argument("TreeGraph: node 0 must be the root");
  for (int i = 1; i < num_nodes(); ++i)
    if (parent[i] < 0 || parent[i] >= i)
      throw std::invalid_argument("TreeGraph: parent of node " + std::to_string(i) + " must be an earlier node");
  for (int d : dims)
    if (d < 1) throw std::invalid_argument("TreeGraph: dimensions must be positive");
}

bool CMIProfile::all_saturated() const {
  return std::all_of(saturated.begin(), saturated.end(), [](bool b) { return b; });
}

template <typename Scalar>
CMIProfile cmi_profile(const DensityMatrix<Scalar>& rho, const lattice::SiteOrdering& ordering,
                       const std::vector<lattice::Shield>& shields) {
  guard(rho.dim(), "cmi_profile");
  CMIProfile out;
  std::vector<int> preds;
  for (int k : ordering.order()) {
    if (!rho.space().contains(k)) throw std::invalid_argument("cmi_profile: site " + std::to_string(k) + " not in state");
    const auto& m = shield_of(shields, k).shield;
    const std::vector<int> a = minus(preds, m);
    double c = 0.0, g = 0.0;
    if (!a.empty()) {
      std::vector<int> keep = a;
      keep.insert(keep.end(), m.begin(), m.end());
      keep.push_back(k);
      const auto sub = marginal(rho, keep);
      const std::vector<int> kk = {k};
      c = cmi(sub, std::span<const int>(a), std::span<const int>(m), std::span<const int>(kk));
      auto cond = [&](const std::vector<int>& given) {
        std::vector<int> all = given;
        all.push_back(k);
        const auto r = marginal(rho, all);
        if (given.empty()) return vn_entropy(r);
        return conditional_entropy(r, std::span<const int>(kk));
      };
      g = cond(m) - cond(preds);
    }
    out.sites.push_back(k);
    out.cmi.push_back(c);
    out.gap.push_back(g);
    out.saturated.push_back(std::abs(g) <= CMIProfile::saturation_tolerance &&
                            std::abs(c) <= CMIProfile::saturation_tolerance);
    preds.push_back(k);
  }
  return out;
}

namespace {

struct Split {
  std::vector<int> a, c;
  SiteSpace joint;
};

template <typename Scalar>
Split split(const DensityMatrix<Scalar>& ab, const DensityMatrix<Scalar>& b, const DensityMatrix<Scalar>& bc) {
  const auto& bl = b.space().labels();
  for (int x : bl)
    if (!ab.space().contains(x) || !bc.space().contains(x))
      throw std::invalid_argument("petz_step: site " + std::to_string(x) + " of B is missing from AB or BC");
  Split s{minus(ab.space().labels(), bl), minus(bc.space().labels(), bl), ab.space().joined(bc.space())};
  for (int x : s.a)
    if (std::find(s.c.begin(), s.c.end(), x) != s.c.end())
      throw std::invalid_argument("petz_step: A and C overlap on site " + std::to_string(x));
  guard(s.joint.dim(), "petz_step");

  auto check = [&](const DensityMatrix<Scalar>& big, const char* which) {
    const Matrix<Scalar> m = bl.empty() ? Matrix<Scalar>::Constant(1, 1, Scalar(std::real(big.matrix().trace())))
                                        : SubsystemMap(big.space(), bl).trace_out(big.matrix());
    const double diff = (m - b.matrix()).cwiseAbs().maxCoeff();
    if (diff > 1e-8)
      throw std::invalid_argument(std::string("petz_step: ") + which + " is inconsistent with rho_B (max deviation " +
                                  std::to_string(diff) + ")");
  };
  check(ab, "rho_AB");
  check(bc, "rho_BC");
  return s;
}

template <typename Scalar>
Matrix<Scalar> embed_into(const SiteSpace& joint, const DensityMatrix<Scalar>& part, const Matrix<Scalar>& m) {
  if (part.space().empty()) return Matrix<Scalar>::Identity(joint.dim(), joint.dim()) * m(0, 0);
  return SubsystemMap(joint, part.space().labels()).embed(m);
}

}  // namespace

template <typename Scalar>
DensityMatrix<Scalar> petz_step(const DensityMatrix<Scalar>& ab, const DensityMatrix<Scalar>& b,
                                const DensityMatrix<Scalar>& bc) {
  const Split s = split(ab, b, bc);
  const auto sb = eigh(b.matrix());
  const double top = sb.eigenvalues.size() ? sb.eigenvalues.maxCoeff() : 1.0;
  const Matrix<Scalar> inv_sqrt_b =
      sb.apply([top](double x) { return x > tolerance::entropy_zero * top ? 1.0 / std::sqrt(x) : 0.0; });
  const Matrix<Scalar> sqrt_bc = eigh(bc.matrix()).apply([](double x) { return std::sqrt(std::max(x, 0.0)); });
  const Matrix<Scalar> left = embed_into(s.joint, bc, sqrt_bc) * embed_into(s.joint, b, inv_sqrt_b);
  const Matrix<Scalar> x = left * embed_into(s.joint, ab, ab.matrix()) * left.adjoint();
  return DensityMatrix<Scalar>::normalized(s.joint, symmetrized(x));
}

template <typename Scalar>
DensityMatrix<Scalar> log_step(const DensityMatrix<Scalar>& ab, const DensityMatrix<Scalar>& b,
                               const DensityMatrix<Scalar>& bc) {
  const Split s = split(ab, b, bc);
  const Matrix<Scalar> l = embed_into(s.joint, ab, log_positive(ab.matrix())) +
                           embed_into(s.joint, bc, log_positive(bc.matrix())) -
                           embed_into(s.joint, b, log_positive(b.matrix()));
  return DensityMatrix<Scalar>::normalized(s.joint, exp_hermitian(l));
}

template <typename Scalar>
ReconstructionReport<Scalar> chain_reconstruct(const std::vector<DensityMatrix<Scalar>>& marginals,
                                               const lattice::SiteOrdering& ordering,
                                               const std::vector<lattice::Shield>& shields,
                                               const DensityMatrix<Scalar>* reference, bool with_log_form) {
  if (marginals.size() != shields.size())
    throw std::invalid_argument("chain_reconstruct: one marginal per shield is required");
  auto marginal_of = [&](int site) -> std::pair<const lattice::Shield&, const DensityMatrix<Scalar>&> {
    for (std::size_t i = 0; i < shields.size(); ++i)
      if (shields[i].site == site) {
        if (!same_set(marginals[i].space().labels(), shields[i].cluster))
          throw std::invalid_argument("chain_reconstruct: marginal " + std::to_string(i) + " lives on " +
                                      to_string(marginals[i].space()) + ", not on the cluster of site " +
                                      std::to_string(site));
        return {shields[i], marginals[i]};
      }
    throw std::invalid_argument("chain_reconstruct: no marginal for site " + std::to_string(site));
  };

  std::optional<DensityMatrix<Scalar>> state, log_state;
  for (int k : ordering.order()) {
    const auto [sh, m] = marginal_of(k);
    std::vector<int> bc = sh.shield;
    bc.push_back(k);
    const auto rho_bc = marginal(m, bc);
    if (!state) {
      if (!sh.shield.empty()) throw std::invalid_argument("chain_reconstruct: the first site cannot have a shield");
      state = rho_bc;
      if (with_log_form) log_state = rho_bc;
      continue;
    }
    const auto rho_b = marginal(m, sh.shield);
    state = petz_step(*state, rho_b, rho_bc);
    if (with_log_form) log_state = log_step(*log_state, rho_b, rho_bc);
  }

  ReconstructionReport<Scalar> out{*state, log_state, 0.0, std::nullopt, {}};
  if (log_state) out.log_agreement = trace_distance(out.state.matrix(), log_state->matrix());
  if (reference) {
    out.trace_distance = trace_distance(out.state, marginal(*reference, out.state.space().labels()));
    out.step_cmi = cmi_profile(*reference, ordering, shields).cmi;
  }
  return out;
}

template <typename Scalar>
ReconstructionReport<Scalar> tree_reconstruct(const std::vector<DensityMatrix<Scalar>>& edge_marginals,
                                              const TreeGraph& tree, const DensityMatrix<Scalar>* reference) {
  tree.validate();
  const int n = tree.num_nodes();
  if (n < 2) throw std::invalid_argument("tree_reconstruct: a tree needs at least one edge");
  if (static_cast<int>(edge_marginals.size()) != n - 1)
    throw std::invalid_argument("tree_reconstruct: expected " + std::to_string(n - 1) + " edge marginals");
  guard(tree.space().dim(), "tree_reconstruct");
  for (int i = 1; i < n; ++i)
    if (!same_set(edge_marginals[i - 1].space().labels(), {tree.parent[i], i}))
      throw std::invalid_argument("tree_reconstruct: marginal " + std::to_string(i - 1) + " must live on nodes {" +
                                  std::to_string(tree.parent[i]) + "," + std::to_string(i) + "}");

  DensityMatrix<Scalar> state = marginal(edge_marginals[0], {0});
  for (int i = 1; i < n; ++i) {
    const int p = tree.parent[i];
    state = petz_step(state, marginal(edge_marginals[i - 1], {p}), marginal(edge_marginals[i - 1], {p, i}));
  }
  ReconstructionReport<Scalar> out{state, std::nullopt, 0.0, std::nullopt, {}};
  if (reference) {
    out.trace_distance = trace_distance(out.state, marginal(*reference, out.state.space().labels()));
    out.step_cmi.push_back(0.0);
    for (int i = 1; i < n; ++i) {
      std::vector<int> others;
      for (int j = 0; j < i; ++j)
        if (j != tree.parent[i]) others.push_back(j);
      if (others.empty()) {
        out.step_cmi.push_back(0.0);
        continue;
      }
      std::vector<int> keep = others;
      keep.push_back(tree.parent[i]);
      keep.push_back(i);
      const std::vector<int> b = {tree.parent[i]}, c = {i};
      out.step_cmi.push_back(cmi(marginal(*reference, keep), std::span<const int>(others), std::span<const int>(b),
                                 std::span<const int>(c)));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Classical trees.

namespace {

struct TreeMarginals {
  std::vector<std::vector<double>> node;  // q_k(j)
  std::vector<Matrix<double>> edge;       // q(parent = i, k = j), node k > 0
};

TreeMarginals tree_marginals(const RealVector& p, const TreeGraph& tree) {
  const int n = tree.num_nodes();
  TreeMarginals m;
  for (int k = 0; k < n; ++k) m.node.emplace_back(tree.dims[k], 0.0);
  m.edge.emplace_back();
  for (int k = 1; k < n; ++k) m.edge.push_back(Matrix<double>::Zero(tree.dims[tree.parent[k]], tree.dims[k]));
  for (Index x = 0; x < p.size(); ++x) {
    const auto d = digits(x, tree.dims);
    for (int k = 0; k < n; ++k) m.node[k][d[k]] += p(x);
    for (int k = 1; k < n; ++k) m.edge[k](d[tree.parent[k]], d[k]) += p(x);
  }
  return m;
}

}  // namespace

TreeHamiltonian classical_tree_hamiltonian(const DensityMatrix<double>& rho, const TreeGraph& tree) {
  tree.validate();
  if (!(rho.space() == tree.space()))
    throw std::invalid_argument("classical_tree_hamiltonian: state must live on the tree nodes 0..N-1 in order");
  guard(rho.dim(), "classical_tree_hamiltonian");
  Matrix<double> off = rho.matrix();
  off.diagonal().setZero();
  if (off.cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument(
        "classical_tree_hamiltonian: general quantum splitting out of scope (state is not diagonal in the "
        "computational basis)");

  const RealVector p = rho.matrix().diagonal();
  const auto marg = tree_marginals(p, tree);
  const int n = tree.num_nodes();
  TreeHamiltonian out;

  // Blocks of zero probability get energy 0 and are excluded through the mask.
  std::vector<Matrix<double>> h(n);
  std::vector<std::vector<std::vector<bool>>> excluded(n);
  h[0] = Matrix<double>::Zero(tree.dims[0], tree.dims[0]);
  excluded[0].assign(1, std::vector<bool>(tree.dims[0], false));
  for (int j = 0; j < tree.dims[0]; ++j) {
    if (marg.node[0][j] > 0.0) h[0](j, j) = -std::log(marg.node[0][j]);
    else excluded[0][0][j] = true, ++out.pruned_blocks;
  }
  out.terms.push_back({0, {0}, h[0]});
  for (int k = 1; k < n; ++k) {
    const int pk = tree.parent[k];
    const int dp = tree.dims[pk], dk = tree.dims[k];
    h[k] = Matrix<double>::Zero(dp * dk, dp * dk);
    excluded[k].assign(dp, std::vector<bool>(dk, false));
    for (int i = 0; i < dp; ++i)
      for (int j = 0; j < dk; ++j) {
        const double joint = marg.edge[k](i, j);
        if (joint > 0.0) h[k](i * dk + j, i * dk + j) = -std::log(joint / marg.node[pk][i]);
        else excluded[k][i][j] = true, ++out.pruned_blocks;
      }
    out.terms.push_back({k, {pk, k}, h[k]});
  }

  RealVector rec(p.size());
  out.support_mask.assign(p.size(), 1.0);
  for (Index x = 0; x < p.size(); ++x) {
    const auto d = digits(x, tree.dims);
    double energy = h[0](d[0], d[0]);
    bool allowed = !excluded[0][0][d[0]];
    for (int k = 1; k < n; ++k) {
      const int i = d[tree.parent[k]], j = d[k];
      energy += h[k](i * tree.dims[k] + j, i * tree.dims[k] + j);
      allowed = allowed && !excluded[k][i][j];
    }
    out.support_mask[x] = allowed ? 1.0 : 0.0;
    rec(x) = allowed ? std::exp(-energy) : 0.0;
  }
  out.partition_function = rec.sum();
  out.reproduction_error = (p - rec / out.partition_function).cwiseAbs().sum();

  for (std::size_t a = 0; a < out.terms.size(); ++a)
    for (std::size_t b = a + 1; b < out.terms.size(); ++b) {
      std::vector<int> joint = out.terms[a].support;
      for (int s : out.terms[b].support)
        if (std::find(joint.begin(), joint.end(), s) == joint.end()) joint.push_back(s);
      std::vector<int> jd;
      for (int s : joint) jd.push_back(tree.dims[s]);
      const SiteSpace space(joint, jd);
      const Matrix<double> ha = SubsystemMap(space, out.terms[a].support).embed(out.terms[a].op);
      const Matrix<double> hb = SubsystemMap(space, out.terms[b].support).embed(out.terms[b].op);
      out.max_commutator = std::max(out.max_commutator, (ha * hb - hb * ha).norm());
    }
  out.verified = out.reproduction_error <= TreeHamiltonian::tolerance && out.max_commutator == 0.0;
  return out;
}

FactorizationReport hammersley_clifford_verify(const RealVector& distribution, const TreeGraph& tree) {
  tree.validate();
  const Index dim = tree.space().dim();
  if (distribution.size() != dim)
    throw std::invalid_argument("hammersley_clifford_verify: expected " + std::to_string(dim) + " probabilities");
  if (distribution.minCoeff() < 0.0) throw std::invalid_argument("hammersley_clifford_verify: negative probability");
  if (std::abs(distribution.sum() - 1.0) > 1e-10)
    throw std::invalid_argument("hammersley_clifford_verify: probabilities do not sum to 1");

  const auto marg = tree_marginals(distribution, tree);
  FactorizationReport out;
  out.zero_entries = static_cast<int>((distribution.array() == 0.0).count());
  bool arbitrary = false;
  for (Index x = 0; x < dim; ++x) {
    const auto d = digits(x, tree.dims);
    double model = marg.node[0][d[0]];
    for (int k = 1; k < tree.num_nodes(); ++k) {
      const double denom = marg.node[tree.parent[k]][d[tree.parent[k]]];
      if (denom > 0.0) model *= marg.edge[k](d[tree.parent[k]], d[k]) / denom;
      else model = 0.0, arbitrary = true;  // conditional on an impossible event: any value works
    }
    out.residual = std::max(out.residual, std::abs(distribution(x) - model));
  }
  out.factorizes = out.residual <= FactorizationReport::tolerance;
  if (out.zero_entries > 0)
    out.note = std::to_string(out.zero_entries) + " zero-probability configurations" +
               (arbitrary ? "; conditionals on impossible parent values set to 0" : "");
  return out;
}

#define QMED_INSTANTIATE(S)                                                                                       \
  template CMIProfile cmi_profile<S>(const DensityMatrix<S>&, const lattice::SiteOrdering&,                       \
                                     const std::vector<lattice::Shield>&);                                        \
  template DensityMatrix<S> petz_step<S>(const DensityMatrix<S>&, const DensityMatrix<S>&, const DensityMatrix<S>&); \
  template DensityMatrix<S> log_step<S>(const DensityMatrix<S>&, const DensityMatrix<S>&, const DensityMatrix<S>&);  \
  template ReconstructionReport<S> chain_reconstruct<S>(const std::vector<DensityMatrix<S>>&,                     \
                                                        const lattice::SiteOrdering&,                             \
                                                        const std::vector<lattice::Shield>&,                      \
                                                        const DensityMatrix<S>*, bool);                           \
  template ReconstructionReport<S> tree_reconstruct<S>(const std::vector<DensityMatrix<S>>&, const TreeGraph&,   \
                                                       const DensityMatrix<S>*);

QMED_INSTANTIATE(double)
QMED_INSTANTIATE(Complex)
#undef QMED_INSTANTIATE

}  // namespace qmed::markov
