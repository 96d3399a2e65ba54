#include "support.hpp"

#include "qmed/lattice.hpp"
#include "qmed/oracle.hpp"

#include <doctest.h>

using namespace qmed;
using qmed::testing::qubits;
using qmed::testing::random_hermitian;
using qmed::testing::random_state;

namespace {

HermitianOperator<double> heisenberg_pair() { return lattice::model_term({}, {0, 1}); }

DensityMatrix<Complex> ghz(int n) {
  const Index d = Index{1} << n;
  Matrix<Complex> psi = Matrix<Complex>::Zero(d, 1);
  psi(0, 0) = psi(d - 1, 0) = 1.0 / std::sqrt(2.0);
  return DensityMatrix<Complex>(qubits(n), psi * psi.adjoint());
}

DensityMatrix<double> bell() {
  Matrix<double> psi = Matrix<double>::Zero(4, 1);
  psi(0, 0) = psi(3, 0) = 1.0 / std::sqrt(2.0);
  return DensityMatrix<double>(qubits(2), psi * psi.transpose());
}

}  // namespace

TEST_CASE("site spaces") {
  const SiteSpace s({4, 1, 7}, {2, 3, 2});
  CHECK(s.dim() == 12);
  CHECK(s.position(7) == 2);
  CHECK(s.position(5) == -1);
  CHECK_THROWS_AS(SiteSpace({1, 1}, {2, 2}), std::invalid_argument);
  CHECK_THROWS_AS(SiteSpace({1}, {0}), std::invalid_argument);
  const std::vector<int> keep = {7, 4};
  CHECK(s.subspace(keep).labels() == std::vector<int>{7, 4});
}

TEST_CASE("eigh") {
  const auto z = eigh<double>(pauli::z());
  CHECK(z.eigenvalues(0) == doctest::Approx(-1.0));
  CHECK(z.eigenvalues(1) == doctest::Approx(1.0));
  const auto id = eigh<double>(Matrix<double>::Identity(4, 4));
  for (Index i = 0; i < 4; ++i) CHECK(id.eigenvalues(i) == doctest::Approx(1.0));
  const auto h = eigh(heisenberg_pair());
  CHECK(h.eigenvalues(0) == doctest::Approx(-0.75).epsilon(1e-12));
  for (Index i = 1; i < 4; ++i) CHECK(h.eigenvalues(i) == doctest::Approx(0.25).epsilon(1e-12));

  Matrix<double> skew = Matrix<double>::Zero(2, 2);
  skew(0, 1) = 1.0;
  CHECK_THROWS_AS(eigh(skew), std::invalid_argument);

  for (int trial = 0; trial < 20; ++trial) {
    const Matrix<Complex> m = random_hermitian<Complex>(8);
    const auto spec = eigh(m);
    CHECK((spec.reconstruct() - m).norm() / m.norm() <= 1e-10);
  }
}

TEST_CASE("matrix log and exp") {
  const SiteSpace one = qubits(1);
  const HermitianOperator<double> id(one, Matrix<double>::Identity(2, 2));
  CHECK(matrix_log(id).matrix().norm() <= 1e-14);
  const HermitianOperator<double> d(one, RealVector{{std::exp(1.0), std::exp(2.0)}}.asDiagonal().toDenseMatrix());
  CHECK((matrix_log(d).matrix() - RealVector{{1.0, 2.0}}.asDiagonal().toDenseMatrix()).norm() <= 1e-12);
  CHECK((matrix_exp(HermitianOperator<double>(one, Matrix<double>::Zero(2, 2))).matrix() - id.matrix()).norm() <=
        1e-14);
  const HermitianOperator<double> l(one, RealVector{{std::log(2.0), std::log(3.0)}}.asDiagonal().toDenseMatrix());
  CHECK((matrix_exp(l).matrix() - RealVector{{2.0, 3.0}}.asDiagonal().toDenseMatrix()).norm() <= 1e-12);

  for (int trial = 0; trial < 20; ++trial) {
    const auto rho = random_state<Complex>(qubits(3), 16);
    const auto back = matrix_exp(matrix_log(rho.op()));
    CHECK((back.matrix() - rho.matrix()).norm() / rho.matrix().norm() <= 1e-10);
  }
}

TEST_CASE("exp(-H/T) normalized equals the oracle Gibbs state") {
  const SiteSpace two = qubits(2);
  for (int trial = 0; trial < 5; ++trial) {
    const HermitianOperator<Complex> h(two, random_hermitian<Complex>(4));
    const double t = 0.7;
    const Matrix<Complex> e = exp_hermitian<Complex>(-h.matrix() / t);
    const auto rho = DensityMatrix<Complex>::normalized(two, e);
    CHECK(trace_distance(rho, oracle::gibbs_state(h, t)) <= 1e-10);
  }
}

TEST_CASE("partial trace") {
  const auto a = random_state<double>(SiteSpace::qubits({0}));
  const auto b = random_state<double>(SiteSpace::qubits({1}));
  const DensityMatrix<double> ab(qubits(2), kron<double>(a.matrix(), b.matrix()));
  CHECK(trace_distance(partial_trace(ab, {0}), a) <= 1e-12);
  CHECK(trace_distance(partial_trace(ab, {1}), b) <= 1e-12);

  const auto mixed = DensityMatrix<double>::maximally_mixed(qubits(3));
  for (int k = 0; k < 3; ++k)
    CHECK((partial_trace(mixed, {k}).matrix() - Matrix<double>::Identity(2, 2) / 2.0).norm() <= 1e-14);
  CHECK((partial_trace(bell(), {1}).matrix() - Matrix<double>::Identity(2, 2) / 2.0).norm() <= 1e-14);

  for (int trial = 0; trial < 50; ++trial) {
    const auto rho = random_state<Complex>(qubits(4), 3);
    const auto r = partial_trace(rho, {3, 1});
    CHECK(r.space().labels() == std::vector<int>{3, 1});
    CHECK(std::abs(r.matrix().trace() - 1.0) <= 1e-12);
    CHECK(eigh(r.matrix()).eigenvalues(0) >= -1e-10);
  }
}

TEST_CASE("embed_local") {
  const SiteSpace target = qubits(3);
  const HermitianOperator<double> scalar(SiteSpace{}, Matrix<double>::Ones(1, 1));
  CHECK((embed_local(scalar, target).matrix() - Matrix<double>::Identity(8, 8)).norm() == 0.0);

  for (int trial = 0; trial < 10; ++trial) {
    const SiteSpace support = SiteSpace::qubits({2, 0});
    const HermitianOperator<Complex> h(support, random_hermitian<Complex>(4));
    const auto rho = random_state<Complex>(target);
    const Complex lhs = (embed_local(h, target).matrix() * rho.matrix()).trace();
    const Complex rhs = (h.matrix() * partial_trace(rho, {2, 0}).matrix()).trace();
    CHECK(std::abs(lhs - rhs) <= 1e-12);

    const SubsystemMap map(target, support.labels());
    CHECK((map.trace_out(embed_local(h, target).matrix()) - 2.0 * h.matrix()).norm() <= 1e-12);
  }
  CHECK_THROWS_AS(embed_local(HermitianOperator<double>(SiteSpace::qubits({5}), pauli::z()), target),
                  std::invalid_argument);
}

TEST_CASE("von Neumann entropy") {
  Matrix<double> pure = Matrix<double>::Zero(2, 2);
  pure(0, 0) = 1.0;
  CHECK(vn_entropy(DensityMatrix<double>(qubits(1), pure)) == doctest::Approx(0.0));
  CHECK(vn_entropy(DensityMatrix<double>::maximally_mixed(qubits(1))) == doctest::Approx(std::log(2.0)));
  CHECK(vn_entropy(DensityMatrix<double>::maximally_mixed(qubits(3))) == doctest::Approx(3 * std::log(2.0)));

  // Singlet weight e^{3/4} and triplet weight e^{-1/4} at T = 1.
  const auto rho = oracle::gibbs_state(heisenberg_pair(), 1.0);
  const double z = std::exp(0.75) + 3.0 * std::exp(-0.25);
  const double p0 = std::exp(0.75) / z, p1 = std::exp(-0.25) / z;
  const double expected = -(p0 * std::log(p0) + 3.0 * p1 * std::log(p1));
  CHECK(vn_entropy(rho) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(vn_entropy(rho) == doctest::Approx(1.2683014942100075).epsilon(1e-12));

  for (int trial = 0; trial < 50; ++trial) {
    const auto r = random_state<Complex>(qubits(3), 1 + trial % 9);
    const double s = vn_entropy(r);
    CHECK(s >= -1e-10);
    CHECK(s <= 3 * std::log(2.0) + 1e-10);
  }
}

TEST_CASE("conditional entropy") {
  const auto a = random_state<double>(SiteSpace::qubits({0}));
  const auto b = random_state<double>(SiteSpace::qubits({1}));
  const DensityMatrix<double> ab(qubits(2), kron<double>(a.matrix(), b.matrix()));
  const std::vector<int> x = {0};
  CHECK(conditional_entropy(ab, x) == doctest::Approx(vn_entropy(a)).epsilon(1e-12));
  CHECK(conditional_entropy(bell(), x) == doctest::Approx(-std::log(2.0)).epsilon(1e-12));

  const auto built = lattice::build_lattice({lattice::Kind::Chain, 4, 1, lattice::Boundary::Open, 1}, {});
  const auto g = oracle::gibbs_state(oracle::full_hamiltonian(built), 0.8);
  const auto xy = partial_trace(g, {1, 2, 3});
  const std::vector<int> x3 = {3};
  CHECK(std::abs(conditional_entropy(xy, x3) - (vn_entropy(xy) - vn_entropy(partial_trace(g, {1, 2})))) <= 1e-12);
  CHECK_THROWS_AS(conditional_entropy(xy, std::vector<int>{}), std::invalid_argument);
}

TEST_CASE("conditional mutual information") {
  const std::vector<int> a = {0}, b = {1}, c = {2};
  const auto ra = random_state<double>(SiteSpace::qubits({0}));
  const auto rb = random_state<double>(SiteSpace::qubits({1}));
  const auto rc = random_state<double>(SiteSpace::qubits({2}));
  const DensityMatrix<double> product(qubits(3), kron<double>(kron<double>(ra.matrix(), rb.matrix()), rc.matrix()));
  CHECK(std::abs(cmi(product, a, b, c)) <= 1e-12);
  CHECK(cmi(ghz(3), a, b, c) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  const auto built = lattice::build_lattice({lattice::Kind::Chain, 3, 1, lattice::Boundary::Open, 1},
                                            {lattice::ModelName::ClassicalIsing, 1.0, 0.3});
  CHECK(std::abs(cmi(oracle::gibbs_state(oracle::full_hamiltonian(built), 1.0), a, b, c)) <= 1e-10);
  CHECK_THROWS_AS(cmi(product, a, a, c), std::invalid_argument);
}

TEST_CASE("strong subadditivity on random states") {
  const std::vector<int> a = {0}, b = {1}, c = {2};
  for (int trial = 0; trial < 500; ++trial) {
    const auto rho = random_state<Complex>(qubits(3), 1 + trial % 8);
    CHECK(cmi(rho, a, b, c) >= -1e-10);
  }
}

TEST_CASE("odot") {
  const SiteSpace one = qubits(1);
  const HermitianOperator<double> a(one, RealVector{{2.0, 0.5}}.asDiagonal().toDenseMatrix());
  const HermitianOperator<double> b(one, RealVector{{3.0, 7.0}}.asDiagonal().toDenseMatrix());
  CHECK((odot(a, b).matrix() - a.matrix() * b.matrix()).norm() <= 1e-12);
  CHECK((odot_inverse(a, a).matrix() - Matrix<double>::Identity(2, 2)).norm() <= 1e-12);

  // exp(log A + log B) for a non-commuting pair by a Taylor series of the exponent.
  const HermitianOperator<Complex> p(one, random_state<Complex>(one).matrix());
  const HermitianOperator<Complex> q(one, random_state<Complex>(one).matrix());
  const Matrix<Complex> x = log_positive(p.matrix()) + log_positive(q.matrix());
  const double shift = x.norm();
  const Matrix<Complex> y = (x - shift * Matrix<Complex>::Identity(2, 2)) / 64.0;
  Matrix<Complex> term = Matrix<Complex>::Identity(2, 2), series = term;
  for (int k = 1; k < 30; ++k) series += (term = term * y / static_cast<double>(k));
  for (int k = 0; k < 6; ++k) series = series * series;
  series *= std::exp(shift);
  CHECK((odot(p, q).matrix() - series).norm() / series.norm() <= 1e-10);
  CHECK((odot(p, q).matrix() - odot(q, p).matrix()).norm() <= 1e-12);

  const HermitianOperator<double> left(SiteSpace::qubits({0}), a.matrix());
  const HermitianOperator<double> right(SiteSpace::qubits({1}), b.matrix());
  CHECK((odot(left, right).matrix() - kron<double>(a.matrix(), b.matrix())).norm() <= 1e-12);
}

TEST_CASE("density matrix validation") {
  CHECK_THROWS_AS(DensityMatrix<double>(qubits(1), Matrix<double>::Identity(2, 2)), std::invalid_argument);
  CHECK_THROWS_AS(DensityMatrix<double>(qubits(1), RealVector{{1.5, -0.5}}.asDiagonal().toDenseMatrix()),
                  std::invalid_argument);
  CHECK_THROWS_AS(DensityMatrix<double>::normalized(qubits(1), Matrix<double>::Zero(2, 2)), std::invalid_argument);
}
