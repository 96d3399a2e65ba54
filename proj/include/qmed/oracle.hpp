// oracle.hpp - exact small-system references: Gibbs states and free energies
// from full spectra, and closed-form transfer-matrix results for 1D Ising chains.

#pragma once

#include "qmed/lattice.hpp"
#include "qmed/opalg.hpp"

#include <optional>

namespace qmed::oracle {

inline constexpr Index max_dimension = Index{1} << 14;

struct ExactResult {
  double temperature = 0.0;
  int num_sites = 1;
  double free_energy = 0.0;  // total
  double energy = 0.0;
  double entropy = 0.0;  // nats
  double ground_energy = 0.0;
  std::optional<DensityMatrix<double>> gibbs;

  double free_energy_per_site() const { return free_energy / num_sites; }
  double energy_per_site() const { return energy / num_sites; }
  double ground_energy_per_site() const { return ground_energy / num_sites; }
};

namespace detail {

void guard_dimension(Index dim, const char* what);

/// Ascending spectrum; diagonal matrices skip the eigensolver.
template <typename Scalar>
Spectrum<Scalar> spectrum(const Matrix<Scalar>& h) {
  const Index d = h.rows();
  Matrix<Scalar> off = h;
  off.diagonal().setZero();
  if (off.norm() == 0.0) {
    std::vector<Index> idx(d);
    for (Index i = 0; i < d; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return std::real(h(a, a)) < std::real(h(b, b)); });
    Spectrum<Scalar> out{RealVector(d), Matrix<Scalar>::Zero(d, d)};
    for (Index k = 0; k < d; ++k) {
      out.eigenvalues(k) = std::real(h(idx[k], idx[k]));
      out.eigenvectors(idx[k], k) = Scalar(1);
    }
    return out;
  }
  return eigh(h);
}

/// Boltzmann weights exp(-(e - e0)/T) normalized to a probability vector.
RealVector boltzmann(const RealVector& energies, double temperature);

}  // namespace detail

template <typename Scalar>
DensityMatrix<Scalar> gibbs_state(const HermitianOperator<Scalar>& h, double temperature) {
  detail::guard_dimension(h.dim(), "gibbs_state");
  if (!(temperature > 0.0)) throw std::invalid_argument("gibbs_state: temperature must be positive");
  const auto spec = detail::spectrum(h.matrix());
  const RealVector p = detail::boltzmann(spec.eigenvalues, temperature);
  Matrix<Scalar> rho = spec.eigenvectors * p.asDiagonal() * spec.eigenvectors.adjoint();
  return DensityMatrix<Scalar>::normalized(h.space(), rho);
}

template <typename Scalar>
ExactResult exact_free_energy(const HermitianOperator<Scalar>& h, double temperature, int num_sites = 1) {
  detail::guard_dimension(h.dim(), "exact_free_energy");
  if (!(temperature > 0.0)) throw std::invalid_argument("exact_free_energy: temperature must be positive");
  const auto spec = detail::spectrum(h.matrix());
  const RealVector& e = spec.eigenvalues;
  const double e0 = e(0);
  double z = 0.0;
  for (double x : e) z += std::exp(-(x - e0) / temperature);
  const RealVector p = detail::boltzmann(e, temperature);
  ExactResult out;
  out.temperature = temperature;
  out.num_sites = num_sites;
  out.ground_energy = e0;
  out.free_energy = e0 - temperature * std::log(z);
  out.energy = p.dot(e);
  out.entropy = entropy_of_spectrum(p);
  return out;
}

template <typename Scalar>
double ground_energy(const HermitianOperator<Scalar>& h) {
  detail::guard_dimension(h.dim(), "ground_energy");
  return detail::spectrum(h.matrix()).eigenvalues(0);
}

/// Sum of all lattice terms on the full space, ordered by site id.
HermitianOperator<double> full_hamiltonian(const lattice::BuiltLattice& built);

/// Per-site free energy of the infinite 1D Ising chain H = -J sum s s' - h sum s.
double ising_transfer_free_energy(double coupling, double field, double temperature);

/// Nearest-neighbour pair distribution P(s, s') of the infinite Ising chain,
/// indexed as 2x2 with index 0 for spin up.
Matrix<double> ising_transfer_pair_marginal(double coupling, double field, double temperature);

}  // namespace qmed::oracle
