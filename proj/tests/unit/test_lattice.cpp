#include "support.hpp"

#include "qmed/lattice.hpp"
#include "qmed/oracle.hpp"

#include <doctest.h>

#include <map>

using namespace qmed;
using namespace qmed::lattice;

namespace {

BuiltLattice chain(int n, Boundary b = Boundary::Open, ModelSpec model = {}) {
  return build_lattice({Kind::Chain, n, 1, b, 1}, model);
}

int bond_count(const BuiltLattice& built) {
  int n = 0;
  for (const auto& t : built.terms) n += t.support.size() == 2;
  return n;
}

}  // namespace

TEST_CASE("bond counts") {
  CHECK(bond_count(chain(4)) == 3);
  CHECK(bond_count(chain(4, Boundary::Periodic)) == 4);
  CHECK(bond_count(build_lattice({Kind::Square, 3, 3, Boundary::Open, 1}, {})) == 12);
  CHECK(bond_count(build_lattice({Kind::Square, 3, 3, Boundary::Periodic, 1}, {})) == 18);
  CHECK(bond_count(build_lattice({Kind::TiSquare, 1, 1, Boundary::Periodic, 1}, {})) == 2);
  CHECK_THROWS_AS(chain(1), std::invalid_argument);
}

TEST_CASE("model terms") {
  const auto h = eigh(model_term({}, {0, 1}));
  CHECK(h.eigenvalues(0) == doctest::Approx(-0.75));
  for (Index i = 1; i < 4; ++i) CHECK(h.eigenvalues(i) == doctest::Approx(0.25));

  const auto ising = model_term({ModelName::ClassicalIsing, 1.0, 0.0}, {0, 1}).matrix();
  CHECK(ising.isDiagonal());
  CHECK((ising.diagonal() - RealVector{{-1.0, 1.0, 1.0, -1.0}}).norm() == 0.0);

  const auto tfim = model_term({ModelName::Tfim, 1.0, 0.0}, {0, 1}).matrix();
  CHECK((tfim - ising).norm() == 0.0);
  CHECK_FALSE(model_field_term({ModelName::Tfim, 1.0, 0.0}, 0).has_value());
}

TEST_CASE("Markov shields on a chain") {
  const auto built = chain(8);
  const auto hood = Neighborhood::within(2);
  const auto s5 = markov_shield(5, built.ordering, built.lattice, hood);
  CHECK(s5.shield == std::vector<int>{3, 4});
  CHECK(s5.cluster == std::vector<int>{3, 4, 5});
  CHECK(markov_shield(0, built.ordering, built.lattice, hood).shield.empty());

  const auto periodic = chain(8, Boundary::Periodic);
  const auto wrapped = markov_shield(1, periodic.ordering, periodic.lattice, hood);
  CHECK(wrapped.neighborhood == std::vector<int>{0, 2, 3, 7});
  CHECK(wrapped.shield == std::vector<int>{0});
}

TEST_CASE("shield monotonicity") {
  for (auto spec : {LatticeSpec{Kind::Chain, 7, 1, Boundary::Periodic, 1}, LatticeSpec{Kind::Square, 4, 3, Boundary::Open, 1}}) {
    const auto built = build_lattice(spec, {});
    for (int r = 1; r < 3; ++r) {
      const auto small = all_shields(built, Neighborhood::within(r));
      const auto large = all_shields(built, Neighborhood::within(r + 1));
      for (std::size_t k = 0; k < small.size(); ++k)
        for (int j : small[k].shield)
          CHECK(std::find(large[k].shield.begin(), large[k].shield.end(), j) != large[k].shield.end());
    }
  }
}

TEST_CASE("raster order and the 7-site template") {
  const auto built = build_lattice({Kind::Square, 8, 6, Boundary::Open, 1}, {});
  const auto tmpl = square_shield_7();
  const auto shields = all_shields(built, Neighborhood::from_template(tmpl));
  int full = 0;
  for (const auto& s : shields) {
    CHECK(s.shield.size() <= tmpl.size());
    for (int j : s.shield) CHECK(built.ordering.precedes(j, s.site));
    const Offset c = built.lattice.coords[s.site];
    const bool bulk = c.dx >= 4 && c.dx <= 6 && c.dy <= 4;
    if (bulk) {
      CHECK(s.shield.size() == tmpl.size());
      CHECK(SiteSpace::qubits(s.cluster).dim() == 256);
    }
    full += s.shield.size() == tmpl.size();
  }
  CHECK(full > 0);

  const auto ti = ti_cluster(tmpl);
  CHECK(ti.sites.size() == 8);
  CHECK(ti.sites.back() == Offset{0, 0});
  CHECK(ti_cluster(square_shield_10()).sites.size() == 11);
  CHECK_THROWS_AS(ti_cluster({{1, 0}}), std::invalid_argument);
}

TEST_CASE("term assignment partitions the Hamiltonian") {
  for (auto spec : {LatticeSpec{Kind::Chain, 6, 1, Boundary::Open, 1}, LatticeSpec{Kind::Chain, 6, 1, Boundary::Periodic, 1},
                    LatticeSpec{Kind::Square, 3, 3, Boundary::Open, 1}, LatticeSpec{Kind::Square, 3, 4, Boundary::Periodic, 1}}) {
    const auto built = build_lattice(spec, {ModelName::Tfim, 1.0, 0.4});
    for (int r = 1; r <= 2; ++r) {
      const auto shields = all_shields(built, Neighborhood::within(r));
      for (auto mode : {TermAssignment::HighestSite, TermAssignment::Fractional}) {
        std::map<int, double> total;
        for (const auto& per_site : assign_terms(shields, built.terms, built.ordering, mode))
          for (auto [term, w] : per_site) total[term] += w;
        CHECK(total.size() == built.terms.size());
        for (auto [term, w] : total) CHECK(w == doctest::Approx(1.0).epsilon(1e-14));
      }
    }
    for (const auto& t : built.terms)
      if (t.support.size() == 2) CHECK(built.lattice.distance(t.support[0], t.support[1]) <= spec.locality_radius);
  }
}

TEST_CASE("cluster energies add up to the full energy") {
  const auto built = chain(4, Boundary::Open, {ModelName::Heisenberg, 1.0, 0.3});
  const auto shields = all_shields(built, Neighborhood::within(1));
  const auto h = oracle::full_hamiltonian(built);
  for (int trial = 0; trial < 5; ++trial) {
    const auto rho = qmed::testing::random_state<double>(qmed::testing::qubits(4));
    double e = 0.0;
    for (const auto& s : shields) {
      const auto hk = cluster_hamiltonian(s.site, shields, built.terms, built.ordering);
      e += (hk.matrix() * partial_trace(rho, std::span<const int>(s.cluster)).matrix()).trace();
    }
    CHECK(std::abs(e - (h.matrix() * rho.matrix()).trace()) <= 1e-12);
  }
}

TEST_CASE("translation-invariant cluster Hamiltonians") {
  const ModelSpec heis{};
  for (int n = 1; n <= 3; ++n) {
    const auto cluster = ti_cluster(chain_window(n));
    const auto h = ti_cluster_hamiltonian(heis, Kind::TiChain, cluster);
    const int origin = cluster.index_of({0, 0}), left = cluster.index_of({-1, 0});
    const auto bond = embed_local(model_term(heis, {left, origin}), h.space());
    CHECK((h.matrix() - bond.matrix()).norm() <= 1e-14);
  }

  const auto cluster = ti_cluster({{-1, 0}, {0, 1}});
  const auto h = ti_cluster_hamiltonian(heis, Kind::TiSquare, cluster);
  const int o = cluster.index_of({0, 0});
  const Matrix<double> expected = embed_local(model_term(heis, {cluster.index_of({-1, 0}), o}), h.space()).matrix() +
                        embed_local(model_term(heis, {cluster.index_of({0, 1}), o}), h.space()).matrix();
  CHECK((h.matrix() - expected).norm() <= 1e-14);
  CHECK_THROWS_AS(ti_cluster_hamiltonian(heis, Kind::TiSquare, ti_cluster({{-1, 0}})), std::invalid_argument);
}
