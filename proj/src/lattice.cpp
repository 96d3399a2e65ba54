#include "qmed/lattice.hpp"

#include <set>
#include <sstream>

namespace qmed::lattice {

bool is_translation_invariant(Kind kind) { return kind == Kind::TiChain || kind == Kind::TiSquare; }

std::string to_string(Kind kind) {
  switch (kind) {
    case Kind::Chain: return "chain";
    case Kind::Square: return "square";
    case Kind::TiChain: return "ti_chain";
    case Kind::TiSquare: return "ti_square";
  }
  return "?";
}

std::string to_string(Boundary boundary) { return boundary == Boundary::Open ? "open" : "periodic"; }

std::string to_string(ModelName name) {
  switch (name) {
    case ModelName::Heisenberg: return "heisenberg";
    case ModelName::ClassicalIsing: return "classical_ising";
    case ModelName::Tfim: return "tfim";
  }
  return "?";
}

bool raster_before(const Offset& a, const Offset& b) { return a.dy > b.dy || (a.dy == b.dy && a.dx < b.dx); }

std::string to_string(const std::vector<Offset>& offsets) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < offsets.size(); ++i) os << (i ? "," : "") << '(' << offsets[i].dx << ',' << offsets[i].dy << ')';
  os << ']';
  return os.str();
}

SiteOrdering::SiteOrdering(std::vector<int> order) : order_(std::move(order)), position_(order_.size(), -1) {
  for (std::size_t p = 0; p < order_.size(); ++p) {
    const int s = order_[p];
    if (s < 0 || s >= size() || position_[s] != -1) throw std::invalid_argument("SiteOrdering: not a permutation");
    position_[s] = static_cast<int>(p);
  }
}

namespace {

int wrapped(int d, int extent, bool periodic) {
  d = std::abs(d);
  return periodic ? std::min(d, extent - d) : d;
}

bool periodic(const LatticeSpec& spec) { return spec.boundary == Boundary::Periodic; }

}  // namespace

int Lattice::distance(int a, int b) const {
  const Offset d = coords.at(a) - coords.at(b);
  if (is_translation_invariant(spec.kind)) return std::abs(d.dx) + std::abs(d.dy);
  return wrapped(d.dx, spec.lx, periodic(spec)) + wrapped(d.dy, spec.ly, periodic(spec));
}

std::optional<int> Lattice::translate(int site, const Offset& offset) const {
  Offset c = coords.at(site) + offset;
  if (!is_translation_invariant(spec.kind) && periodic(spec)) {
    c.dx = ((c.dx % spec.lx) + spec.lx) % spec.lx;
    c.dy = ((c.dy % spec.ly) + spec.ly) % spec.ly;
  }
  for (int s = 0; s < num_sites(); ++s)
    if (coords[s] == c) return s;
  return std::nullopt;
}

HermitianOperator<double> model_term(const ModelSpec& model, std::pair<int, int> bond) {
  const SiteSpace space = SiteSpace::qubits({bond.first, bond.second});
  const double j = model.coupling;
  Matrix<double> zz = kron(pauli::z(), pauli::z());
  switch (model.name) {
    case ModelName::Heisenberg: {
      const Matrix<double> yy = kron(pauli::y(), pauli::y()).real();
      return {space, 0.25 * j * (kron(pauli::x(), pauli::x()) + yy + zz)};
    }
    case ModelName::ClassicalIsing:
    case ModelName::Tfim:
      return {space, -j * zz};
  }
  throw std::invalid_argument("model_term: unknown model");
}

std::optional<HermitianOperator<double>> model_field_term(const ModelSpec& model, int site) {
  if (model.field == 0.0) return std::nullopt;
  const SiteSpace space = SiteSpace::qubits({site});
  switch (model.name) {
    case ModelName::Heisenberg: return HermitianOperator<double>(space, -0.5 * model.field * pauli::z());
    case ModelName::ClassicalIsing: return HermitianOperator<double>(space, -model.field * pauli::z());
    case ModelName::Tfim: return HermitianOperator<double>(space, -model.field * pauli::x());
  }
  return std::nullopt;
}

namespace {

void add_model_terms(const ModelSpec& model, const Lattice& lat, std::vector<int> field_sites,
                     std::vector<LocalTerm>& terms) {
  for (auto [a, b] : lat.bonds) {
    const int lo = std::min(a, b), hi = std::max(a, b);
    terms.push_back({{lo, hi}, model_term(model, {lo, hi}).matrix(), 1.0});
  }
  for (int s : field_sites)
    if (auto f = model_field_term(model, s)) terms.push_back({{s}, f->matrix(), 1.0});
}

}  // namespace

BuiltLattice build_lattice(const LatticeSpec& spec, const ModelSpec& model) {
  if (spec.locality_radius < 1) throw std::invalid_argument("build_lattice: locality radius must be >= 1");
  if (!std::isfinite(model.coupling) || !std::isfinite(model.field))
    throw std::invalid_argument("build_lattice: couplings must be finite");
  BuiltLattice out;
  Lattice& lat = out.lattice;
  lat.spec = spec;

  switch (spec.kind) {
    case Kind::Chain: {
      if (spec.lx < 2) throw std::invalid_argument("build_lattice: a finite chain needs at least 2 sites");
      lat.spec.ly = 1;
      for (int x = 0; x < spec.lx; ++x) lat.coords.push_back({x, 0});
      for (int x = 0; x + 1 < spec.lx; ++x) lat.bonds.emplace_back(x, x + 1);
      if (periodic(spec) && spec.lx > 2) lat.bonds.emplace_back(spec.lx - 1, 0);
      break;
    }
    case Kind::Square: {
      if (spec.lx < 1 || spec.ly < 1 || spec.lx * spec.ly < 2)
        throw std::invalid_argument("build_lattice: a finite square lattice needs at least 2 sites");
      // Site id = row * lx + x with row 0 on top (largest y): ids follow the raster order.
      for (int row = 0; row < spec.ly; ++row)
        for (int x = 0; x < spec.lx; ++x) lat.coords.push_back({x, spec.ly - 1 - row});
      auto id = [&](int x, int row) { return row * spec.lx + x; };
      std::set<std::pair<int, int>> seen;
      auto add = [&](int a, int b) {
        if (a == b) return;
        auto key = std::minmax(a, b);
        if (seen.insert(key).second) lat.bonds.emplace_back(key.first, key.second);
      };
      for (int row = 0; row < spec.ly; ++row)
        for (int x = 0; x < spec.lx; ++x) {
          if (x + 1 < spec.lx) add(id(x, row), id(x + 1, row));
          else if (periodic(spec) && spec.lx > 2) add(id(x, row), id(0, row));
          if (row + 1 < spec.ly) add(id(x, row), id(x, row + 1));
          else if (periodic(spec) && spec.ly > 2) add(id(x, row), id(x, 0));
        }
      break;
    }
    case Kind::TiChain:
    case Kind::TiSquare: {
      // Unit cell: predecessor neighbours first, origin last.
      if (spec.kind == Kind::TiChain) lat.coords = {{-1, 0}, {0, 0}};
      else lat.coords = {{0, 1}, {-1, 0}, {0, 0}};
      const int origin = lat.num_sites() - 1;
      for (int s = 0; s < origin; ++s) lat.bonds.emplace_back(s, origin);
      std::vector<int> order(lat.num_sites());
      for (int s = 0; s < lat.num_sites(); ++s) order[s] = s;
      out.ordering = SiteOrdering(order);
      add_model_terms(model, lat, {origin}, out.terms);
      return out;
    }
  }

  std::vector<int> order(lat.num_sites()), sites(lat.num_sites());
  for (int s = 0; s < lat.num_sites(); ++s) order[s] = sites[s] = s;
  out.ordering = SiteOrdering(order);
  add_model_terms(model, lat, sites, out.terms);
  for (const auto& t : out.terms)
    if (t.support.size() == 2 && lat.distance(t.support[0], t.support[1]) > spec.locality_radius)
      throw std::logic_error("build_lattice: generated a term beyond the locality radius");
  return out;
}

Shield markov_shield(int site, const SiteOrdering& ordering, const Lattice& lattice, const Neighborhood& hood) {
  if (site < 0 || site >= lattice.num_sites()) throw std::invalid_argument("markov_shield: unknown site");
  Shield out;
  out.site = site;
  std::set<int> hood_sites;
  if (hood.offsets.empty()) {
    for (int j = 0; j < lattice.num_sites(); ++j)
      if (j != site && lattice.distance(site, j) <= hood.radius) hood_sites.insert(j);
  } else {
    for (const Offset& o : hood.offsets)
      if (auto j = lattice.translate(site, o); j && *j != site) hood_sites.insert(*j);
  }
  out.neighborhood.assign(hood_sites.begin(), hood_sites.end());
  if (out.neighborhood.empty() && ordering.position(site) != 0)
    throw std::invalid_argument("markov_shield: site " + std::to_string(site) +
                                " has an empty neighbourhood; only the first site may");
  for (int j : out.neighborhood)
    if (ordering.precedes(j, site)) out.shield.push_back(j);
  std::sort(out.shield.begin(), out.shield.end(),
            [&](int a, int b) { return ordering.position(a) < ordering.position(b); });
  out.cluster = out.shield;
  out.cluster.push_back(site);
  return out;
}

std::vector<Shield> all_shields(const BuiltLattice& built, const Neighborhood& hood) {
  std::vector<Shield> out;
  for (int s = 0; s < built.lattice.num_sites(); ++s)
    out.push_back(markov_shield(s, built.ordering, built.lattice, hood));
  return out;
}

namespace {

bool contains_all(const std::vector<int>& set, const std::vector<int>& items) {
  for (int x : items)
    if (std::find(set.begin(), set.end(), x) == set.end()) return false;
  return true;
}

std::string describe(const LocalTerm& term) {
  std::ostringstream os;
  os << "term on sites {";
  for (std::size_t i = 0; i < term.support.size(); ++i) os << (i ? "," : "") << term.support[i];
  os << '}';
  return os.str();
}

}  // namespace

std::vector<std::vector<std::pair<int, double>>> assign_terms(const std::vector<Shield>& shields,
                                                              const std::vector<LocalTerm>& terms,
                                                              const SiteOrdering& ordering, TermAssignment mode) {
  std::vector<std::vector<std::pair<int, double>>> out(shields.size());
  auto shield_of = [&](int site) -> const Shield& {
    for (const auto& s : shields)
      if (s.site == site) return s;
    throw std::invalid_argument("assign_terms: no shield for site " + std::to_string(site));
  };
  auto slot_of = [&](int site) {
    for (std::size_t i = 0; i < shields.size(); ++i)
      if (shields[i].site == site) return static_cast<int>(i);
    return -1;
  };
  for (std::size_t t = 0; t < terms.size(); ++t) {
    const LocalTerm& term = terms[t];
    std::vector<int> hosts;
    for (std::size_t i = 0; i < shields.size(); ++i)
      if (contains_all(shields[i].cluster, term.support)) hosts.push_back(static_cast<int>(i));
    if (hosts.empty()) throw std::invalid_argument("shield too small: " + describe(term) + " fits in no cluster");
    if (mode == TermAssignment::Fractional) {
      for (int h : hosts) out[h].emplace_back(static_cast<int>(t), term.weight / hosts.size());
      continue;
    }
    int highest = term.support.front();
    for (int s : term.support)
      if (ordering.precedes(highest, s)) highest = s;
    int host = hosts.front();
    if (contains_all(shield_of(highest).cluster, term.support)) host = slot_of(highest);
    out[host].emplace_back(static_cast<int>(t), term.weight);
  }
  return out;
}

HermitianOperator<double> cluster_hamiltonian(int site, const std::vector<Shield>& shields,
                                              const std::vector<LocalTerm>& terms, const SiteOrdering& ordering,
                                              TermAssignment mode) {
  const auto assignment = assign_terms(shields, terms, ordering, mode);
  for (std::size_t i = 0; i < shields.size(); ++i) {
    if (shields[i].site != site) continue;
    const SiteSpace space = SiteSpace::qubits(shields[i].cluster);
    Matrix<double> h = Matrix<double>::Zero(space.dim(), space.dim());
    for (auto [t, w] : assignment[i]) {
      const SubsystemMap map(space, terms[t].support);
      map.add_embedded(terms[t].op, h, w);
    }
    return {space, h};
  }
  throw std::invalid_argument("cluster_hamiltonian: no shield for site " + std::to_string(site));
}

int TiCluster::index_of(const Offset& o) const {
  auto it = std::find(sites.begin(), sites.end(), o);
  return it == sites.end() ? -1 : static_cast<int>(it - sites.begin());
}

std::vector<int> TiCluster::labels() const {
  std::vector<int> out(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) out[i] = static_cast<int>(i);
  return out;
}

TiCluster ti_cluster(std::vector<Offset> shield_offsets) {
  const Offset origin{0, 0};
  std::sort(shield_offsets.begin(), shield_offsets.end(), raster_before);
  for (std::size_t i = 0; i < shield_offsets.size(); ++i) {
    if (!raster_before(shield_offsets[i], origin))
      throw std::invalid_argument("ti_cluster: offset (" + std::to_string(shield_offsets[i].dx) + "," +
                                  std::to_string(shield_offsets[i].dy) + ") does not precede the origin");
    if (i > 0 && shield_offsets[i] == shield_offsets[i - 1])
      throw std::invalid_argument("ti_cluster: repeated offset");
  }
  shield_offsets.push_back(origin);
  return {std::move(shield_offsets)};
}

std::vector<Offset> chain_window(int shield_size) {
  std::vector<Offset> out;
  for (int i = shield_size; i >= 1; --i) out.push_back({-i, 0});
  return out;
}

std::vector<Offset> square_shield_7() { return {{-1, 0}, {-2, 0}, {-3, 0}, {-4, 0}, {-1, 1}, {0, 1}, {1, 1}}; }

std::vector<Offset> square_shield_10() {
  return {{-1, 0}, {-2, 0}, {-3, 0}, {-4, 0}, {-5, 0}, {-2, 1}, {-1, 1}, {0, 1}, {1, 1}, {2, 1}};
}

HermitianOperator<double> ti_cluster_hamiltonian(const ModelSpec& model, Kind kind, const TiCluster& cluster) {
  if (!is_translation_invariant(kind)) throw std::invalid_argument("ti_cluster_hamiltonian: not a TI lattice kind");
  if (kind == Kind::TiChain)
    for (const Offset& o : cluster.sites)
      if (o.dy != 0) throw std::invalid_argument("ti_cluster_hamiltonian: chain clusters must have dy = 0");
  const SiteSpace space = SiteSpace::qubits(cluster.labels());
  const int origin = cluster.index_of({0, 0});
  if (origin < 0) throw std::invalid_argument("ti_cluster_hamiltonian: cluster lacks the origin");
  Matrix<double> h = Matrix<double>::Zero(space.dim(), space.dim());
  std::vector<Offset> preds = {{-1, 0}};
  if (kind == Kind::TiSquare) preds.push_back({0, 1});
  for (const Offset& p : preds) {
    const int j = cluster.index_of(p);
    if (j < 0)
      throw std::invalid_argument("shield too small: bond (" + std::to_string(p.dx) + "," + std::to_string(p.dy) +
                                  ")-(0,0) fits in no cluster");
    const std::vector<int> support = {j, origin};
    SubsystemMap(space, support).add_embedded(model_term(model, {j, origin}).matrix(), h);
  }
  if (auto f = model_field_term(model, origin)) {
    const std::vector<int> support = {origin};
    SubsystemMap(space, support).add_embedded(f->matrix(), h);
  }
  return {space, h};
}

}  // namespace qmed::lattice
