// Shared helpers for the test binaries: seeded random states and operators.
#pragma once

#include "qmed/opalg.hpp"

#include <random>

namespace qmed::testing {

inline std::mt19937_64& rng() {
  static std::mt19937_64 gen(20260611);
  return gen;
}

template <typename Scalar>
Matrix<Scalar> gaussian(Index rows, Index cols, std::mt19937_64& gen = rng()) {
  std::normal_distribution<double> n;
  Matrix<Scalar> m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) {
      if constexpr (std::is_same_v<Scalar, double>) m(i, j) = n(gen);
      else m(i, j) = Scalar(n(gen), n(gen));
    }
  return m;
}

/// Haar-random mixed state: trace out a random pure state on the space plus
/// an environment of dimension `env` (env >= dim gives full rank almost surely).
template <typename Scalar>
DensityMatrix<Scalar> random_state(const SiteSpace& space, Index env = 0, std::mt19937_64& gen = rng()) {
  const Index d = space.dim();
  const Matrix<Scalar> g = gaussian<Scalar>(d, env > 0 ? env : d, gen);
  return DensityMatrix<Scalar>::normalized(space, g * g.adjoint());
}

template <typename Scalar>
Matrix<Scalar> random_hermitian(Index d, std::mt19937_64& gen = rng()) {
  const Matrix<Scalar> g = gaussian<Scalar>(d, d, gen);
  return (g + g.adjoint()) * 0.5;
}

inline SiteSpace qubits(int n) {
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = i;
  return SiteSpace::qubits(labels);
}

}  // namespace qmed::testing
