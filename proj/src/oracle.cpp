#include "qmed/oracle.hpp"

namespace qmed::oracle {

namespace detail {

void guard_dimension(Index dim, const char* what) {
  if (dim > max_dimension)
    throw std::invalid_argument(std::string(what) + ": dimension " + std::to_string(dim) + " exceeds the limit of " +
                                std::to_string(max_dimension));
}

RealVector boltzmann(const RealVector& energies, double temperature) {
  if (energies.size() == 0) return energies;
  const double e0 = energies.minCoeff();
  RealVector w = (-(energies.array() - e0) / temperature).exp().matrix();
  return w / w.sum();
}

}  // namespace detail

HermitianOperator<double> full_hamiltonian(const lattice::BuiltLattice& built) {
  const int n = built.lattice.num_sites();
  std::vector<int> labels(n);
  for (int s = 0; s < n; ++s) labels[s] = s;
  const SiteSpace space = SiteSpace::qubits(labels);
  detail::guard_dimension(space.dim(), "full_hamiltonian");
  Matrix<double> h = Matrix<double>::Zero(space.dim(), space.dim());
  for (const auto& term : built.terms) SubsystemMap(space, term.support).add_embedded(term.op, h, term.weight);
  return {space, h};
}

namespace {

Matrix<double> transfer_matrix(double coupling, double field, double temperature) {
  // T(s, s') = exp(beta (J s s' + h (s + s') / 2)), s = +1 for index 0.
  const double spins[2] = {1.0, -1.0};
  Matrix<double> t(2, 2);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      t(a, b) = std::exp((coupling * spins[a] * spins[b] + 0.5 * field * (spins[a] + spins[b])) / temperature);
  return t;
}

}  // namespace

double ising_transfer_free_energy(double coupling, double field, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("ising_transfer_free_energy: temperature must be positive");
  if (field == 0.0) {
    // -T ln(2 cosh(J/T)), written to stay finite for large J/T.
    const double x = std::abs(coupling) / temperature;
    return -temperature * (x + std::log1p(std::exp(-2.0 * x)));
  }
  const double b = 1.0 / temperature;
  const double j = coupling, h = field;
  // Largest eigenvalue of the symmetric 2x2 transfer matrix.
  const double lambda =
      std::exp(b * j) * std::cosh(b * h) + std::sqrt(std::exp(2 * b * j) * std::sinh(b * h) * std::sinh(b * h) +
                                                     std::exp(-2 * b * j));
  return -temperature * std::log(lambda);
}

Matrix<double> ising_transfer_pair_marginal(double coupling, double field, double temperature) {
  const Matrix<double> t = transfer_matrix(coupling, field, temperature);
  Eigen::SelfAdjointEigenSolver<Matrix<double>> es(t);
  const Eigen::Vector2d phi = es.eigenvectors().col(1);
  const double lambda = es.eigenvalues()(1);
  Matrix<double> p(2, 2);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) p(a, b) = phi(a) * t(a, b) * phi(b) / lambda;
  return p / p.sum();
}

}  // namespace qmed::oracle
