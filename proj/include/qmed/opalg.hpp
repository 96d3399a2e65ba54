// opalg.hpp - dense Hermitian operator algebra on labeled tensor-product spaces.
//
// Everything here is templated on the scalar type (double for real-symmetric
// problems, std::complex<double> for general Hermitian ones). Basis ordering
// follows the Kronecker convention: the first site label is the most
// significant digit of the basis index.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace qmed {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using RealVector = Eigen::VectorXd;
using Complex = std::complex<double>;

namespace tolerance {
inline constexpr double hermitian = 1e-10;     // relative asymmetry accepted before symmetrizing
inline constexpr double positivity = 1e-10;    // most negative eigenvalue of a density matrix
inline constexpr double unit_trace = 1e-10;
inline constexpr double log_floor = 1e-12;     // eigenvalue floor before taking logarithms
inline constexpr double entropy_zero = 1e-14;  // eigenvalues treated as exact zeros in 0 ln 0
}  // namespace tolerance

/// Ordered list of site labels with a local dimension per site.
class SiteSpace {
 public:
  SiteSpace() = default;
  SiteSpace(std::vector<int> labels, std::vector<int> dims);

  static SiteSpace qubits(std::vector<int> labels);

  const std::vector<int>& labels() const { return labels_; }
  const std::vector<int>& dims() const { return dims_; }
  int size() const { return static_cast<int>(labels_.size()); }
  Index dim() const { return dim_; }
  bool empty() const { return labels_.empty(); }

  /// Position of `label` in this space, or -1.
  int position(int label) const;
  bool contains(int label) const { return position(label) >= 0; }
  int dim_of(int label) const;

  /// The sub-space spanned by `keep`, in the order given.
  SiteSpace subspace(std::span<const int> keep) const;
  /// This space followed by the labels of `other` that are not already present.
  SiteSpace joined(const SiteSpace& other) const;

  bool operator==(const SiteSpace&) const = default;

 private:
  std::vector<int> labels_;
  std::vector<int> dims_;
  Index dim_ = 1;
};

std::string to_string(const SiteSpace& space);

/// Precomputed index bookkeeping between a space and an ordered subset of its
/// sites. Full basis index i corresponds to the pair (traced t, kept k); the
/// map is a bijection so both partial trace and its adjoint (embedding with
/// identities) are gathers over `full_index(t, k)`.
class SubsystemMap {
 public:
  SubsystemMap() = default;
  SubsystemMap(const SiteSpace& full, std::span<const int> keep);

  const SiteSpace& full() const { return full_; }
  const SiteSpace& kept() const { return kept_; }
  Index kept_dim() const { return kept_.dim(); }
  Index traced_dim() const { return traced_dim_; }
  Index full_index(Index traced, Index kept) const { return table_[traced * kept_.dim() + kept]; }

  template <typename Scalar>
  Matrix<Scalar> trace_out(const Matrix<Scalar>& m) const {
    const Index dk = kept_dim();
    Matrix<Scalar> out = Matrix<Scalar>::Zero(dk, dk);
    for (Index t = 0; t < traced_dim_; ++t) {
      const Index* row = &table_[t * dk];
      for (Index b = 0; b < dk; ++b) {
        const Index jb = row[b];
        for (Index a = 0; a < dk; ++a) out(a, b) += m(row[a], jb);
      }
    }
    return out;
  }

  template <typename Scalar>
  Matrix<Scalar> embed(const Matrix<Scalar>& x) const {
    const Index dk = kept_dim();
    Matrix<Scalar> out = Matrix<Scalar>::Zero(full_.dim(), full_.dim());
    for (Index t = 0; t < traced_dim_; ++t) {
      const Index* row = &table_[t * dk];
      for (Index b = 0; b < dk; ++b) {
        const Index jb = row[b];
        for (Index a = 0; a < dk; ++a) out(row[a], jb) = x(a, b);
      }
    }
    return out;
  }

  /// out += embed(x), without materializing the embedding.
  template <typename Scalar>
  void add_embedded(const Matrix<Scalar>& x, Matrix<Scalar>& out, double scale = 1.0) const {
    const Index dk = kept_dim();
    for (Index t = 0; t < traced_dim_; ++t) {
      const Index* row = &table_[t * dk];
      for (Index b = 0; b < dk; ++b) {
        const Index jb = row[b];
        for (Index a = 0; a < dk; ++a) out(row[a], jb) += scale * x(a, b);
      }
    }
  }

 private:
  SiteSpace full_;
  SiteSpace kept_;
  Index traced_dim_ = 1;
  std::vector<Index> table_;
};

// ---------------------------------------------------------------------------
// Raw-matrix kernels. The solvers work on these directly; the typed wrappers
// below validate and then forward here.

template <typename Scalar>
Matrix<Scalar> symmetrized(const Matrix<Scalar>& h) {
  return (h + h.adjoint()) * 0.5;
}

template <typename Scalar>
double hermitian_defect(const Matrix<Scalar>& h) {
  if (h.size() == 0) return 0.0;
  return (h - h.adjoint()).norm() / std::max(1.0, h.norm());
}

/// Ascending eigenvalues with unitary eigenvectors.
template <typename Scalar>
struct Spectrum {
  RealVector eigenvalues;
  Matrix<Scalar> eigenvectors;

  /// V f(diag) V^dagger for a scalar function f.
  template <typename F>
  Matrix<Scalar> apply(F&& f) const {
    RealVector fv = eigenvalues.unaryExpr(std::forward<F>(f));
    return eigenvectors * fv.asDiagonal() * eigenvectors.adjoint();
  }
  Matrix<Scalar> reconstruct() const {
    return apply([](double x) { return x; });
  }
};

template <typename Scalar>
Spectrum<Scalar> eigh(const Matrix<Scalar>& h) {
  if (h.rows() != h.cols()) throw std::invalid_argument("eigh: matrix is not square");
  if (hermitian_defect(h) > tolerance::hermitian)
    throw std::invalid_argument("eigh: matrix is not Hermitian");
  if (h.rows() == 0) return {};
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(symmetrized(h));
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigh: eigensolver failed");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

/// -sum p ln p over an eigenvalue list, with 0 ln 0 = 0.
inline double entropy_of_spectrum(const RealVector& p) {
  double s = 0.0;
  for (double x : p)
    if (x > tolerance::entropy_zero) s -= x * std::log(x);
  return s;
}

template <typename Scalar>
Matrix<Scalar> kron(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  Matrix<Scalar> out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

template <typename Scalar>
Matrix<Scalar> log_positive(const Matrix<Scalar>& p, double floor = tolerance::log_floor) {
  const auto spec = eigh(p);
  if (spec.eigenvalues.size() > 0 && spec.eigenvalues(0) < -tolerance::positivity)
    throw std::invalid_argument("matrix_log: operator has a negative eigenvalue");
  return spec.apply([floor](double x) { return std::log(std::max(x, floor)); });
}

template <typename Scalar>
Matrix<Scalar> exp_hermitian(const Matrix<Scalar>& h) {
  return eigh(h).apply([](double x) { return std::exp(x); });
}

/// Trace norm distance 0.5 * ||a - b||_1.
template <typename Scalar>
double trace_distance(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  const auto spec = eigh<Scalar>(a - b);
  return 0.5 * spec.eigenvalues.cwiseAbs().sum();
}

// ---------------------------------------------------------------------------
// Typed operators.

/// A Hermitian operator on a labeled space. Construction rejects matrices that
/// are not Hermitian within tolerance::hermitian and symmetrizes the rest.
template <typename Scalar>
class HermitianOperator {
 public:
  HermitianOperator() = default;
  HermitianOperator(SiteSpace space, Matrix<Scalar> m) : space_(std::move(space)) {
    if (m.rows() != space_.dim() || m.cols() != space_.dim())
      throw std::invalid_argument("HermitianOperator: matrix shape " + std::to_string(m.rows()) + "x" +
                                  std::to_string(m.cols()) + " does not match space dimension " +
                                  std::to_string(space_.dim()));
    if (hermitian_defect(m) > tolerance::hermitian)
      throw std::invalid_argument("HermitianOperator: matrix is not Hermitian");
    mat_ = symmetrized(m);
  }

  static HermitianOperator identity(SiteSpace space) {
    const Index d = space.dim();
    return HermitianOperator(std::move(space), Matrix<Scalar>::Identity(d, d));
  }

  const SiteSpace& space() const { return space_; }
  const Matrix<Scalar>& matrix() const { return mat_; }
  Index dim() const { return space_.dim(); }

 private:
  SiteSpace space_;
  Matrix<Scalar> mat_;
};

/// Positive semidefinite, unit-trace Hermitian operator.
template <typename Scalar>
class DensityMatrix {
 public:
  DensityMatrix() = default;
  DensityMatrix(SiteSpace space, Matrix<Scalar> m) : op_(std::move(space), std::move(m)) {
    const double tr = std::real(op_.matrix().trace());
    if (std::abs(tr - 1.0) > tolerance::unit_trace)
      throw std::invalid_argument("DensityMatrix: trace is " + std::to_string(tr) + ", expected 1");
    const auto spec = eigh(op_.matrix());
    if (spec.eigenvalues.size() > 0 && spec.eigenvalues(0) < -tolerance::positivity)
      throw std::invalid_argument("DensityMatrix: operator is not positive semidefinite");
  }

  /// Normalizes a positive semidefinite matrix to unit trace first.
  static DensityMatrix normalized(SiteSpace space, const Matrix<Scalar>& m) {
    const double tr = std::real(m.trace());
    if (!(tr > 0.0)) throw std::invalid_argument("DensityMatrix: cannot normalize a zero-trace operator");
    return DensityMatrix(std::move(space), symmetrized<Scalar>(m / tr));
  }

  static DensityMatrix maximally_mixed(SiteSpace space) {
    const Index d = space.dim();
    return DensityMatrix(std::move(space), Matrix<Scalar>::Identity(d, d) / static_cast<double>(d));
  }

  const SiteSpace& space() const { return op_.space(); }
  const Matrix<Scalar>& matrix() const { return op_.matrix(); }
  const HermitianOperator<Scalar>& op() const { return op_; }
  Index dim() const { return op_.dim(); }

 private:
  HermitianOperator<Scalar> op_;
};

template <typename Scalar>
Spectrum<Scalar> eigh(const HermitianOperator<Scalar>& h) {
  return eigh(h.matrix());
}

/// log P with eigenvalues below `floor` clamped to `floor`.
template <typename Scalar>
HermitianOperator<Scalar> matrix_log(const HermitianOperator<Scalar>& p, double floor = tolerance::log_floor) {
  return {p.space(), log_positive(p.matrix(), floor)};
}

template <typename Scalar>
HermitianOperator<Scalar> matrix_exp(const HermitianOperator<Scalar>& h) {
  return {h.space(), exp_hermitian(h.matrix())};
}

template <typename Scalar>
DensityMatrix<Scalar> partial_trace(const DensityMatrix<Scalar>& rho, std::span<const int> keep) {
  const SubsystemMap map(rho.space(), keep);
  return DensityMatrix<Scalar>::normalized(map.kept(), map.trace_out(rho.matrix()));
}

template <typename Scalar>
DensityMatrix<Scalar> partial_trace(const DensityMatrix<Scalar>& rho, std::initializer_list<int> keep) {
  return partial_trace(rho, std::span<const int>(keep.begin(), keep.size()));
}

/// h tensored with the identity on the sites of `target` outside h's support.
template <typename Scalar>
HermitianOperator<Scalar> embed_local(const HermitianOperator<Scalar>& h, const SiteSpace& target) {
  for (int label : h.space().labels()) {
    if (!target.contains(label))
      throw std::invalid_argument("embed_local: site " + std::to_string(label) + " is not in the target space");
    if (target.dim_of(label) != h.space().dim_of(label))
      throw std::invalid_argument("embed_local: dimension mismatch on site " + std::to_string(label));
  }
  const SubsystemMap map(target, h.space().labels());
  return {target, map.embed(h.matrix())};
}

template <typename Scalar>
double vn_entropy(const DensityMatrix<Scalar>& rho) {
  return entropy_of_spectrum(eigh(rho.matrix()).eigenvalues);
}

/// S(XY) - S(Y), where Y is the rest of rho's space.
template <typename Scalar>
double conditional_entropy(const DensityMatrix<Scalar>& rho, std::span<const int> x) {
  std::vector<int> rest;
  for (int label : rho.space().labels())
    if (std::find(x.begin(), x.end(), label) == x.end()) rest.push_back(label);
  for (int label : x)
    if (!rho.space().contains(label))
      throw std::invalid_argument("conditional_entropy: unknown site " + std::to_string(label));
  if (x.empty() || rest.empty())
    throw std::invalid_argument("conditional_entropy: X must be a non-empty strict subset");
  return vn_entropy(rho) - vn_entropy(partial_trace(rho, rest));
}

/// I(A;C|B) = S(AB) + S(BC) - S(B) - S(ABC).
template <typename Scalar>
double cmi(const DensityMatrix<Scalar>& rho, std::span<const int> a, std::span<const int> b,
           std::span<const int> c) {
  std::vector<int> all;
  all.insert(all.end(), a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  all.insert(all.end(), c.begin(), c.end());
  std::vector<int> sorted = all;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("cmi: parts overlap");
  if (static_cast<int>(all.size()) != rho.space().size())
    throw std::invalid_argument("cmi: parts do not cover the space");
  for (int label : all)
    if (!rho.space().contains(label)) throw std::invalid_argument("cmi: unknown site " + std::to_string(label));

  auto entropy_of = [&](std::vector<int> keep) {
    if (keep.empty()) return 0.0;
    return vn_entropy(partial_trace(rho, keep));
  };
  std::vector<int> ab(a.begin(), a.end()), bc(b.begin(), b.end());
  ab.insert(ab.end(), b.begin(), b.end());
  bc.insert(bc.end(), c.begin(), c.end());
  return entropy_of(ab) + entropy_of(bc) - entropy_of(std::vector<int>(b.begin(), b.end())) - vn_entropy(rho);
}

namespace detail {
template <typename Scalar>
void require_nonzero(const HermitianOperator<Scalar>& a, const char* what) {
  if (a.matrix().norm() == 0.0) throw std::invalid_argument(std::string(what) + ": zero operator");
}

template <typename Scalar>
Matrix<Scalar> log_on(const HermitianOperator<Scalar>& a, const SiteSpace& joint) {
  const SubsystemMap map(joint, a.space().labels());
  return map.embed(log_positive(a.matrix()));
}
}  // namespace detail

/// A (.) B = exp(log A + log B). Operands on different supports are embedded
/// into the joint space first (log I = 0).
template <typename Scalar>
HermitianOperator<Scalar> odot(const HermitianOperator<Scalar>& a, const HermitianOperator<Scalar>& b) {
  detail::require_nonzero(a, "odot");
  detail::require_nonzero(b, "odot");
  const SiteSpace joint = a.space().joined(b.space());
  return {joint, exp_hermitian<Scalar>(detail::log_on(a, joint) + detail::log_on(b, joint))};
}

/// A (.) B^{-1} = exp(log A - log B).
template <typename Scalar>
HermitianOperator<Scalar> odot_inverse(const HermitianOperator<Scalar>& a, const HermitianOperator<Scalar>& b) {
  detail::require_nonzero(a, "odot");
  detail::require_nonzero(b, "odot");
  const SiteSpace joint = a.space().joined(b.space());
  return {joint, exp_hermitian<Scalar>(detail::log_on(a, joint) - detail::log_on(b, joint))};
}

template <typename Scalar>
double trace_distance(const DensityMatrix<Scalar>& a, const DensityMatrix<Scalar>& b) {
  if (!(a.space() == b.space())) throw std::invalid_argument("trace_distance: spaces differ");
  return trace_distance(a.matrix(), b.matrix());
}

/// Pauli matrices and spin-1/2 operators as real matrices where possible.
namespace pauli {
Matrix<double> x();
Matrix<double> z();
Matrix<Complex> y();
Matrix<double> identity();
}  // namespace pauli

}  // namespace qmed
