#include "qmed/opalg.hpp"

#include <numeric>
#include <sstream>

namespace qmed {

SiteSpace::SiteSpace(std::vector<int> labels, std::vector<int> dims)
    : labels_(std::move(labels)), dims_(std::move(dims)) {
  if (labels_.size() != dims_.size()) throw std::invalid_argument("SiteSpace: labels and dims differ in length");
  std::vector<int> sorted = labels_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("SiteSpace: duplicate site label");
  for (int d : dims_) {
    if (d < 1) throw std::invalid_argument("SiteSpace: local dimension must be positive");
    dim_ *= d;
  }
}

SiteSpace SiteSpace::qubits(std::vector<int> labels) {
  std::vector<int> dims(labels.size(), 2);
  return {std::move(labels), std::move(dims)};
}

int SiteSpace::position(int label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  return it == labels_.end() ? -1 : static_cast<int>(it - labels_.begin());
}

int SiteSpace::dim_of(int label) const {
  const int p = position(label);
  if (p < 0) throw std::invalid_argument("SiteSpace: unknown site " + std::to_string(label));
  return dims_[p];
}

SiteSpace SiteSpace::subspace(std::span<const int> keep) const {
  std::vector<int> labels, dims;
  for (int label : keep) {
    labels.push_back(label);
    dims.push_back(dim_of(label));
  }
  return {std::move(labels), std::move(dims)};
}

SiteSpace SiteSpace::joined(const SiteSpace& other) const {
  std::vector<int> labels = labels_, dims = dims_;
  for (int i = 0; i < other.size(); ++i) {
    const int label = other.labels()[i];
    const int p = position(label);
    if (p >= 0) {
      if (dims_[p] != other.dims()[i]) throw std::invalid_argument("SiteSpace: dimension mismatch on join");
      continue;
    }
    labels.push_back(label);
    dims.push_back(other.dims()[i]);
  }
  return {std::move(labels), std::move(dims)};
}

std::string to_string(const SiteSpace& space) {
  std::ostringstream os;
  os << '{';
  for (int i = 0; i < space.size(); ++i) os << (i ? "," : "") << space.labels()[i];
  os << '}';
  return os.str();
}

SubsystemMap::SubsystemMap(const SiteSpace& full, std::span<const int> keep)
    : full_(full), kept_(full.subspace(keep)) {
  const int n = full.size();
  std::vector<int> kept_pos;
  std::vector<bool> is_kept(n, false);
  for (int label : keep) {
    const int p = full.position(label);
    if (is_kept[p]) throw std::invalid_argument("SubsystemMap: repeated site " + std::to_string(label));
    is_kept[p] = true;
    kept_pos.push_back(p);
  }
  std::vector<int> traced_pos;
  for (int p = 0; p < n; ++p)
    if (!is_kept[p]) traced_pos.push_back(p);
  for (int p : traced_pos) traced_dim_ *= full.dims()[p];

  // Strides of each full-space position in the kept and traced indices.
  std::vector<Index> kept_stride(n, 0), traced_stride(n, 0);
  Index s = 1;
  for (int i = static_cast<int>(kept_pos.size()) - 1; i >= 0; --i) {
    kept_stride[kept_pos[i]] = s;
    s *= full.dims()[kept_pos[i]];
  }
  s = 1;
  for (int i = static_cast<int>(traced_pos.size()) - 1; i >= 0; --i) {
    traced_stride[traced_pos[i]] = s;
    s *= full.dims()[traced_pos[i]];
  }

  const Index d = full.dim();
  table_.assign(static_cast<std::size_t>(d), 0);
  std::vector<int> digit(n, 0);
  for (Index i = 0; i < d; ++i) {
    Index k = 0, t = 0;
    for (int p = 0; p < n; ++p) {
      k += digit[p] * kept_stride[p];
      t += digit[p] * traced_stride[p];
    }
    table_[t * kept_.dim() + k] = i;
    for (int p = n - 1; p >= 0; --p) {
      if (++digit[p] < full.dims()[p]) break;
      digit[p] = 0;
    }
  }
}

namespace pauli {
Matrix<double> x() {
  Matrix<double> m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
Matrix<double> z() {
  Matrix<double> m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}
Matrix<Complex> y() {
  Matrix<Complex> m(2, 2);
  m << 0, Complex(0, -1), Complex(0, 1), 0;
  return m;
}
Matrix<double> identity() { return Matrix<double>::Identity(2, 2); }
}  // namespace pauli

}  // namespace qmed
