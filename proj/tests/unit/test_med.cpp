#include "support.hpp"

#include "qmed/med.hpp"
#include "qmed/oracle.hpp"

#include <doctest.h>

using namespace qmed;
using namespace qmed::med;
using lattice::Boundary;
using lattice::Kind;
using lattice::ModelName;
using lattice::ModelSpec;
using qmed::testing::random_state;

namespace {

const ModelSpec heisenberg{};
const ModelSpec ising{ModelName::ClassicalIsing, 1.0, 0.0};

double ising_exact(double t) { return -t * std::log(2.0 * std::cosh(1.0 / t)); }

lattice::BuiltLattice chain(int n, Boundary b, ModelSpec model = heisenberg) {
  return lattice::build_lattice({Kind::Chain, n, 1, b, 1}, model);
}

std::vector<lattice::Shield> radius_shields(const lattice::BuiltLattice& built, int r) {
  return lattice::all_shields(built, lattice::Neighborhood::within(r));
}

/// Marginals of a global state on the problem's variable clusters.
ClusterVariables<double> marginals_of(const Problem<double>& p, const DensityMatrix<double>& global) {
  ClusterVariables<double> v{{}, p.constraints};
  for (const auto& c : p.clusters) v.states.push_back(partial_trace(global, std::span<const int>(c.labels())));
  return v;
}

/// S_M computed straight from the shields, without the problem machinery.
double direct_markov_entropy(const DensityMatrix<double>& global, const std::vector<lattice::Shield>& shields) {
  double s = 0.0;
  for (const auto& sh : shields) {
    s += vn_entropy(partial_trace(global, std::span<const int>(sh.cluster)));
    if (!sh.shield.empty()) s -= vn_entropy(partial_trace(global, std::span<const int>(sh.shield)));
  }
  return s;
}

SolverConfig tight() {
  SolverConfig c;
  c.tol_gradient = 1e-9;
  c.tol_constraint = 1e-9;
  c.max_outer = 80;
  c.max_inner = 2000;
  return c;
}

}  // namespace

TEST_CASE("problem construction") {
  const auto ti = make_ti_problem(heisenberg, Kind::TiChain, {lattice::chain_window(2)});
  CHECK(ti.translation_invariant);
  CHECK(ti.clusters.size() == 1);
  CHECK(ti.clusters[0].size() == 3);
  CHECK(ti.constraints.size() == 1);
  CHECK(ti.patches.size() == 1);

  const auto sq = make_ti_problem(heisenberg, Kind::TiSquare, {{{-1, 0}, {0, 1}, {-1, 1}}});
  CHECK(sq.constraints.size() == 2);
  const auto sq_all = make_ti_problem(heisenberg, Kind::TiSquare, {{{-1, 0}, {0, 1}, {-1, 1}}}, TranslationSet::All);
  CHECK(sq_all.constraints.size() > sq.constraints.size());

  CHECK_THROWS_AS(make_ti_problem(heisenberg, Kind::TiChain, {lattice::chain_window(12)}), std::invalid_argument);
  CHECK_THROWS_AS(make_ti_problem(heisenberg, Kind::TiSquare, {{{-1, 0}}}), std::invalid_argument);

  const auto built = chain(8, Boundary::Periodic);
  const auto fin = make_finite_problem(built, {radius_shields(built, 2)});
  CHECK_FALSE(fin.translation_invariant);
  CHECK(fin.num_sites == 8);
  for (const auto& c : fin.clusters) CHECK(c.size() <= 5);
  CHECK_NOTHROW(fin.validate());
  CHECK_FALSE(fin.description.empty());

  Problem<double> bad = fin;
  bad.patches[0].energy.pop_back();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  SolverConfig cfg;
  cfg.penalty_growth = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("Markov free energy of simple states") {
  const auto p = make_ti_problem(heisenberg, Kind::TiChain, {lattice::chain_window(2)});
  const auto mixed = maximally_mixed(p);
  for (double t : {0.1, 1.0, 7.0}) {
    const auto b = markov_free_energy(p, mixed, t);
    CHECK(b.energy == doctest::Approx(0.0));
    CHECK(b.markov_entropy == doctest::Approx(std::log(2.0)));
    CHECK(b.free_energy == doctest::Approx(-t * std::log(2.0)));
  }

  const ClusterVariables<double> v{{random_state<double>(p.clusters[0])}, p.constraints};
  const double e = (v.states[0].matrix() * p.patches[0].energy[0]).trace();
  CHECK(markov_free_energy(p, v, 0.0).free_energy == doctest::Approx(e).epsilon(1e-13));
}

TEST_CASE("Markov free energy against a global state") {
  const auto built = chain(6, Boundary::Open, {ModelName::Tfim, 1.0, 0.6});
  const auto h = oracle::full_hamiltonian(built);
  for (int r = 1; r <= 3; ++r) {
    const auto shields = radius_shields(built, r);
    const auto p = make_finite_problem(built, {shields});
    for (int trial = 0; trial < 3; ++trial) {
      const auto global = random_state<double>(h.space(), 8);
      const auto v = marginals_of(p, global);
      CHECK(v.max_residual() <= 1e-14);
      const double t = 0.8;
      const double e = (h.matrix() * global.matrix()).trace();
      const double direct = e - t * direct_markov_entropy(global, shields);
      const auto b = markov_free_energy(p, v, t);
      CHECK(std::abs(b.free_energy - direct) <= 1e-10);
      CHECK(std::abs(b.energy - e) <= 1e-10);
    }
  }
}

TEST_CASE("Markov entropy bounds the global entropy") {
  const auto built = chain(6, Boundary::Open);
  const auto h = oracle::full_hamiltonian(built);
  for (int r = 1; r <= 3; ++r) {
    const auto shields = radius_shields(built, r);
    for (double t : {0.5, 1.0, 2.0}) {
      const auto g = oracle::gibbs_state(h, t);
      CHECK(direct_markov_entropy(g, shields) - vn_entropy(g) >= -1e-8);
    }
    for (int trial = 0; trial < 5; ++trial) {
      const auto g = random_state<double>(h.space(), 3);
      CHECK(direct_markov_entropy(g, shields) - vn_entropy(g) >= -1e-8);
    }
  }
}

TEST_CASE("Markov free energy is convex on consistent families") {
  const auto built = chain(5, Boundary::Open, {ModelName::Tfim, 1.0, 0.9});
  const auto p = make_finite_problem(built, {radius_shields(built, 1)});
  const auto space = oracle::full_hamiltonian(built).space();
  for (int trial = 0; trial < 10; ++trial) {
    const auto a = random_state<double>(space, 4), b = random_state<double>(space, 4);
    const double lambda = 0.1 + 0.08 * trial;
    const DensityMatrix<double> mix(space, lambda * a.matrix() + (1 - lambda) * b.matrix());
    const double fa = markov_free_energy(p, marginals_of(p, a), 0.7).free_energy;
    const double fb = markov_free_energy(p, marginals_of(p, b), 0.7).free_energy;
    const double fm = markov_free_energy(p, marginals_of(p, mix), 0.7).free_energy;
    CHECK(fm <= lambda * fa + (1 - lambda) * fb + 1e-10);
  }
}

TEST_CASE("Euclidean gradient") {
  // Single cluster holding a 2-qubit system: F = Tr(rho H) - T S(rho).
  const auto built = chain(2, Boundary::Open, {ModelName::Tfim, 0.8, 0.5});
  const auto p = make_finite_problem(built, {radius_shields(built, 1)});
  REQUIRE(p.clusters.size() == 1);
  const double t = 0.9;
  for (int trial = 0; trial < 10; ++trial) {
    const auto raw = random_state<double>(p.clusters[0]);
    const DensityMatrix<double> rho(p.clusters[0], 0.5 * raw.matrix() + 0.125 * Matrix<double>::Identity(4, 4));
    const ClusterVariables<double> v{{rho}, {}};
    const Matrix<double> g = free_energy_gradient(p, v, t)[0];
    Matrix<double> x = qmed::testing::random_hermitian<double>(4);
    x -= x.trace() / 4.0 * Matrix<double>::Identity(4, 4);
    const double eps = 1e-5;
    auto f = [&](double s) {
      const ClusterVariables<double> w{{DensityMatrix<double>(p.clusters[0], rho.matrix() + s * x)}, {}};
      return markov_free_energy(p, w, t).free_energy;
    };
    const double fd = (f(eps) - f(-eps)) / (2 * eps);
    const double analytic = (g * x).trace();
    CHECK(std::abs(fd - analytic) <= 1e-5 * std::max(1.0, std::abs(analytic)));
  }

  // Stationary at the Gibbs state: the gradient is a multiple of the identity.
  const auto h = oracle::full_hamiltonian(built);
  const ClusterVariables<double> gibbs{{oracle::gibbs_state(h, t)}, {}};
  Matrix<double> g = free_energy_gradient(p, gibbs, t)[0];
  g -= g.trace() / 4.0 * Matrix<double>::Identity(4, 4);
  CHECK(g.norm() <= 1e-10);

  const ClusterVariables<double> any{{random_state<double>(p.clusters[0])}, {}};
  CHECK((free_energy_gradient(p, any, 0.0)[0] - p.patches[0].energy[0]).norm() <= 1e-14);
}

TEST_CASE("augmented Lagrangian gradient in exponential coordinates") {
  auto check = [](const auto& problem) {
    using Scalar = typename std::decay_t<decltype(problem.patches[0].energy[0])>::Scalar;
    std::vector<Matrix<Scalar>> g, lam;
    for (const auto& c : problem.clusters) g.push_back(qmed::testing::random_hermitian<Scalar>(c.dim()));
    for (const auto& c : problem.constraints) {
      const Index d = SubsystemMap(problem.clusters[c.cluster_a], c.region_a).kept_dim();
      lam.push_back(0.3 * qmed::testing::random_hermitian<Scalar>(d));
    }
    const std::vector<double> w(problem.patches.size(), 1.0 / problem.patches.size());
    const double t = 0.6, mu = 2.5;
    const auto grad = augmented_lagrangian_gradient(problem, g, lam, mu, t, w);
    std::vector<Matrix<Scalar>> dir;
    double analytic = 0.0;
    for (std::size_t a = 0; a < g.size(); ++a) {
      dir.push_back(qmed::testing::random_hermitian<Scalar>(g[a].rows()));
      analytic += std::real((grad.gradient[a].adjoint() * dir[a]).trace());
    }
    auto at = [&](double s) {
      auto moved = g;
      for (std::size_t a = 0; a < g.size(); ++a) moved[a] += s * dir[a];
      return augmented_lagrangian_gradient(problem, moved, lam, mu, t, w).value;
    };
    const double eps = 1e-5;
    const double fd = (at(eps) - at(-eps)) / (2 * eps);
    CHECK(std::abs(fd - analytic) <= 1e-5 * std::max(1.0, std::abs(analytic)));
  };
  const auto built = chain(5, Boundary::Periodic, {ModelName::Tfim, 1.0, 0.7});
  const auto fin = make_finite_problem(built, {radius_shields(built, 1)});
  const auto ti = make_ti_problem(heisenberg, Kind::TiChain, {lattice::chain_window(2)});
  for (int trial = 0; trial < 4; ++trial) {
    check(fin);
    check(ti);
    check(cast_problem<Complex>(ti));
  }
}

TEST_CASE("translation-invariant classical Ising chain is exact") {
  for (double t : {0.5, 1.0, 2.0}) {
    const auto r = minimize_ti(ising, Kind::TiChain, lattice::chain_window(1), t, {});
    CHECK(r.converged);
    CHECK(std::abs(r.free_energy - ising_exact(t)) <= 1e-6);
  }
  CHECK(std::abs(minimize_ti(ising, Kind::TiChain, lattice::chain_window(1), 1.0, {}).free_energy + 1.12696) <= 5e-5);
  const ModelSpec field{ModelName::ClassicalIsing, 1.0, 0.4};
  const auto r = minimize_ti(field, Kind::TiChain, lattice::chain_window(1), 1.3, {});
  CHECK(std::abs(r.free_energy - oracle::ising_transfer_free_energy(1.0, 0.4, 1.3)) <= 1e-6);
}

TEST_CASE("high temperature limit") {
  const double t = 200.0;
  const auto r = minimize_ti(heisenberg, Kind::TiChain, lattice::chain_window(2), t, {});
  CHECK(r.converged);
  // F = -T ln 2 - <h^2>/(2T) + O(T^-2) with <h^2> = 3/16 for one Heisenberg bond.
  CHECK(std::abs(r.free_energy + t * std::log(2.0)) <= 1e-3);
  CHECK(r.markov_entropy == doctest::Approx(std::log(2.0)).epsilon(1e-5));
}

TEST_CASE("finite problems with an exact answer") {
  for (double t : {0.3, 1.0, 2.5}) {
    const auto built = chain(2, Boundary::Open);
    const auto r = minimize_finite(built, radius_shields(built, 1), t, {});
    const double exact = -t * std::log(std::exp(0.75 / t) + 3 * std::exp(-0.25 / t));
    CHECK(r.converged);
    CHECK(std::abs(2 * r.free_energy - exact) <= 1e-7);
  }
  // No bonds: independent spins in a field.
  const auto built = chain(4, Boundary::Open, {ModelName::Tfim, 0.0, 0.7});
  const double t = 0.5;
  const auto r = minimize_finite(built, radius_shields(built, 1), t, tight());
  CHECK(r.converged);
  CHECK(std::abs(r.free_energy + t * std::log(2 * std::cosh(0.7 / t))) <= 1e-7);
}

TEST_CASE("lower bound on small periodic chains") {
  for (auto model : {heisenberg, ModelSpec{ModelName::Tfim, 1.0, 1.0}}) {
    const auto built = chain(6, Boundary::Periodic, model);
    const auto h = oracle::full_hamiltonian(built);
    const auto p = make_finite_problem(built, {radius_shields(built, 1)});
    for (double t : {0.5, 2.0}) {
      const auto r = minimize(p, t, {});
      CHECK(r.verified({}));
      CHECK(r.free_energy <= oracle::exact_free_energy(h, t, 6).free_energy_per_site() + 1e-6);
    }
  }
}

TEST_CASE("inner loop is monotone") {
  const auto built = chain(6, Boundary::Periodic);
  const auto p = make_finite_problem(built, {radius_shields(built, 1)});
  InnerTrace trace;
  const auto r = minimize<double>(p, 0.7, SolverConfig{}, nullptr, std::vector<double>{}, &trace);
  CHECK(r.converged);
  REQUIRE_FALSE(trace.outer_boundaries.empty());
  int start = 0;
  for (int end : trace.outer_boundaries) {
    for (int i = start + 1; i < end; ++i) {
      const double prev = trace.accepted_values[i - 1];
      CHECK(trace.accepted_values[i] <= prev + 1e-14 * std::max(1.0, std::abs(prev)));
    }
    start = end;
  }
}

TEST_CASE("larger shields give tighter bounds") {
  double prev = -std::numeric_limits<double>::infinity();
  for (int n = 1; n <= 3; ++n) {
    const auto r = minimize_ti(heisenberg, Kind::TiChain, lattice::chain_window(n), 1.0, {});
    CHECK(r.converged);
    CHECK(r.free_energy >= prev - 1e-6);
    prev = r.free_energy;
  }
  CHECK(prev == doctest::Approx(-0.7953935).epsilon(1e-6));
}

TEST_CASE("temperature sweep") {
  const auto p = make_ti_problem(ising, Kind::TiChain, {lattice::chain_window(1)});
  const std::vector<double> grid = {0.4, 0.7, 1.0, 1.5, 3.0, 50.0};
  const auto sweep = temperature_sweep(p, grid, {});
  REQUIRE(sweep.rows.size() == grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(sweep.rows[i].temperature == grid[i]);
    CHECK(sweep.rows[i].verified);
    CHECK(std::abs(sweep.rows[i].free_energy - ising_exact(grid[i])) <= 1e-6);
  }
  CHECK(sweep.rows.back().markov_entropy == doctest::Approx(std::log(2.0)).epsilon(1e-3));
  CHECK(std::isnan(sweep.rows.front().specific_heat));

  const auto cold = temperature_sweep(p, grid, {}, {false, 3});
  for (std::size_t i = 0; i < grid.size(); ++i)
    CHECK(std::abs(cold.rows[i].free_energy - sweep.rows[i].free_energy) <= 1e-7);

  CHECK_THROWS_AS(temperature_sweep(p, {1.0, 0.5}, {}), std::invalid_argument);
  CHECK_THROWS_AS(temperature_sweep(p, {-1.0}, {}), std::invalid_argument);
}

TEST_CASE("free energy bound is concave in T") {
  const auto q = make_ti_problem(heisenberg, Kind::TiChain, {lattice::chain_window(2)});
  std::vector<double> grid;
  for (double t = 0.2; t < 2.05; t += 0.2) grid.push_back(t);
  const auto rows = temperature_sweep(q, grid, {}).rows;
  for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
    const double left = (rows[i].free_energy - rows[i - 1].free_energy) / (grid[i] - grid[i - 1]);
    const double right = (rows[i + 1].free_energy - rows[i].free_energy) / (grid[i + 1] - grid[i]);
    CHECK(right <= left + 1e-6);
  }
}

TEST_CASE("ground energy bound") {
  // The whole system is one cluster: F_MED is the exact free energy and tends to E0.
  const auto built = chain(2, Boundary::Open);
  const auto p = make_finite_problem(built, {radius_shields(built, 1)});
  const auto gb = ground_energy_lower_bound(p, {0.02, 0.05, 0.1, 0.5}, {});
  CHECK(gb.bound == doctest::Approx(-0.375).epsilon(1e-8));
  CHECK_FALSE(gb.bracketed);
  CHECK(gb.note.find("crossing not bracketed") != std::string::npos);

  SweepResult s;
  s.rows = {{1.0, -1.0, 0, -0.1, 0, 0, 1, true, true}, {2.0, -0.9, 0, 0.1, 0, 0, 1, true, true}};
  const auto from_sweep = ground_energy_lower_bound(s);
  CHECK(from_sweep.bracketed);
  CHECK(from_sweep.bound == -0.9);
  CHECK_THROWS_AS(ground_energy_lower_bound(SweepResult{}), std::invalid_argument);
}

TEST_CASE("multi-patch minimax") {
  const auto one = make_ti_problem(heisenberg, Kind::TiChain, {lattice::chain_window(2)});
  const auto two = make_ti_problem(heisenberg, Kind::TiChain, {lattice::chain_window(2), lattice::chain_window(2)});
  const double t = 0.8;
  const auto single = minimize(one, t, tight());
  const auto doubled = multi_patch_minimize(two, t, tight());
  CHECK(std::abs(single.free_energy - doubled.free_energy) <= 1e-8);

  // Short-range shield plus a shield with a disconnected far site.
  const std::vector<lattice::Offset> near = {{-1, 0}}, far = {{-3, 0}, {-1, 0}};
  const auto mixed = make_ti_problem(heisenberg, Kind::TiChain, {near, far});
  const auto r = multi_patch_minimize(mixed, t, {});
  const auto a = minimize_ti(heisenberg, Kind::TiChain, near, t, {});
  const auto b = minimize_ti(heisenberg, Kind::TiChain, far, t, {});
  CHECK(r.free_energy >= a.free_energy - 1e-6);
  CHECK(r.free_energy >= b.free_energy - 1e-6);
  CHECK(r.patch_weights.size() == 2);

  const auto classical = make_ti_problem(ising, Kind::TiChain, {near, far});
  CHECK(std::abs(multi_patch_minimize(classical, 1.0, {}).free_energy - ising_exact(1.0)) <= 1e-6);
}

TEST_CASE("warm start and determinism") {
  const auto p = make_ti_problem(heisenberg, Kind::TiChain, {lattice::chain_window(2)});
  const auto hot = minimize(p, 1.2, {});
  const auto warm = minimize(p, 1.0, {}, &hot.state);
  const auto cold = minimize(p, 1.0, {});
  CHECK(std::abs(warm.free_energy - cold.free_energy) <= 1e-7);
  CHECK(minimize(p, 1.0, {}).free_energy == cold.free_energy);

  SolverConfig jitter;
  jitter.initial_jitter = 0.3;
  jitter.seed = 7;
  const auto j1 = minimize(p, 1.0, jitter), j2 = minimize(p, 1.0, jitter);
  CHECK(j1.free_energy == j2.free_energy);
  CHECK(std::abs(j1.free_energy - cold.free_energy) <= 1e-7);
}
