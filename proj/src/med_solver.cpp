#include "med_evaluator.hpp"

#include <atomic>
#include <limits>
#include <random>
#include <thread>

namespace qmed::med {

namespace {

constexpr double wolfe_c1 = 1e-4;
constexpr double wolfe_c2 = 0.1;
constexpr double armijo_noise = 1e-14;  // relative slack for roundoff in the sufficient-decrease test
constexpr int max_line_evals = 30;
constexpr double max_penalty = 1e8;

template <typename Scalar>
using Mats = std::vector<Matrix<Scalar>>;

template <typename Scalar>
Mats<Scalar> axpy(const Mats<Scalar>& x, double a, const Mats<Scalar>& d) {
  Mats<Scalar> out = x;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] += a * d[i];
  return out;
}

template <typename Scalar>
class Solver {
 public:
  using Eval = detail::Evaluator<Scalar>;
  using Res = typename Eval::Result;

  Solver(const Eval& ev, double temperature, std::vector<double> weights, const SolverConfig& config)
      : ev_(ev), t_(temperature), w_(std::move(weights)), cfg_(config) {}

  struct Point {
    Mats<Scalar> g;  // log weights
    Res res;
    Mats<Scalar> z;  // preconditioned gradient: the Euclidean gradient minus its trace part
    double gz = 0.0;
  };

  Point at(Mats<Scalar> g, const Mats<Scalar>& lam, double mu) const {
    Point p;
    p.res = ev_.evaluate_log_weights(g, t_, w_, lam, mu, true);
    p.g = std::move(g);
    p.z.resize(p.g.size());
    for (std::size_t a = 0; a < p.g.size(); ++a) {
      const auto& d = p.res.euclidean[a];
      const double mean = detail::inner(d, p.res.spectra[a].rho);
      p.z[a] = d - Matrix<Scalar>::Identity(d.rows(), d.cols()) * mean;
    }
    p.gz = std::max(0.0, detail::inner(p.res.gradient, p.z));
    return p;
  }

  struct Inner {
    int iterations = 0;
    bool converged = false;
  };

  /// Preconditioned nonlinear CG (Polak-Ribiere+, Powell restarts) at fixed multipliers.
  Inner inner(Point& x, const Mats<Scalar>& lam, double mu, double tol, int max_iter, InnerTrace* trace) const {
    Inner out;
    Mats<Scalar> d = x.z;
    for (auto& m : d) m = -m;
    double prev_slope = 0.0, prev_alpha = 0.0;
    bool steepest = true;
    for (;;) {
      if (std::sqrt(x.gz) <= tol) {
        out.converged = true;
        break;
      }
      if (out.iterations >= max_iter) break;
      double slope = detail::inner(x.res.gradient, d);
      if (!(slope < 0.0)) {
        d = x.z;
        for (auto& m : d) m = -m;
        slope = -x.gz;
        steepest = true;
      }
      double alpha0 = prev_alpha > 0.0 ? prev_alpha * prev_slope / slope : 1.0 / std::max(t_, 1e-2);
      alpha0 = std::clamp(alpha0, 1e-12, 1e8);
      auto next = line_search(x, d, slope, alpha0, lam, mu);
      if (!next) {
        if (steepest) break;  // no progress possible along the steepest direction either
        d = x.z;
        for (auto& m : d) m = -m;
        steepest = true;
        prev_alpha = 0.0;
        continue;
      }
      ++out.iterations;
      prev_alpha = next->second;
      prev_slope = slope;
      Point y = std::move(next->first);
      if (trace) trace->accepted_values.push_back(y.res.lagrangian);

      const double old_gz = x.gz;
      const double cross = detail::inner(y.res.gradient, x.z);
      double beta = old_gz > 0.0 ? std::max(0.0, (y.gz - cross) / old_gz) : 0.0;
      if (std::abs(cross) >= 0.2 * y.gz) beta = 0.0;  // Powell restart
      for (std::size_t a = 0; a < d.size(); ++a) d[a] = -y.z[a] + beta * d[a];
      steepest = beta == 0.0;
      x = std::move(y);
    }
    return out;
  }

 private:
  std::optional<std::pair<Point, double>> line_search(const Point& x, const Mats<Scalar>& d, double slope0,
                                                       double alpha0, const Mats<Scalar>& lam, double mu) const {
    const double phi0 = x.res.lagrangian;
    const double noise = armijo_noise * std::max(1.0, std::abs(phi0));
    auto eval = [&](double a) { return at(axpy(x.g, a, d), lam, mu); };
    auto armijo = [&](double a, double phi) { return phi <= phi0 + wolfe_c1 * a * slope0 + noise; };
    auto slope_of = [&](const Point& p) { return detail::inner(p.res.gradient, d); };

    std::optional<std::pair<Point, double>> best;  // last point satisfying sufficient decrease
    auto keep = [&](Point p, double a) {
      if (!best || p.res.lagrangian <= best->first.res.lagrangian) best = std::make_pair(std::move(p), a);
    };

    double a_lo = 0.0, phi_lo = phi0, dphi_lo = slope0;
    double a_hi = 0.0, phi_hi = 0.0;
    bool bracketed = false;
    double a = alpha0;
    int evals = 0;
    while (!bracketed && evals < max_line_evals) {
      Point p = eval(a);
      ++evals;
      const double phi = p.res.lagrangian;
      if (!std::isfinite(phi) || !armijo(a, phi) || (evals > 1 && phi >= phi_lo)) {
        a_hi = a;
        phi_hi = std::isfinite(phi) ? phi : std::numeric_limits<double>::infinity();
        bracketed = true;
        break;
      }
      const double dphi = slope_of(p);
      if (std::abs(dphi) <= -wolfe_c2 * slope0) return std::make_pair(std::move(p), a);
      keep(p, a);
      if (dphi >= 0.0) {
        a_hi = a_lo;
        phi_hi = phi_lo;
        a_lo = a;
        phi_lo = phi;
        dphi_lo = dphi;
        bracketed = true;
        break;
      }
      a_lo = a;
      phi_lo = phi;
      dphi_lo = dphi;
      a *= 4.0;
    }

    while (bracketed && evals < max_line_evals) {
      const double lo = std::min(a_lo, a_hi), hi = std::max(a_lo, a_hi);
      if (hi - lo <= 1e-14 * std::max(1.0, hi)) break;
      // Quadratic from (phi_lo, dphi_lo, phi_hi), safeguarded into the middle of the interval.
      const double h = a_hi - a_lo;
      double trial = a_lo + 0.5 * h;
      if (std::isfinite(phi_hi)) {
        const double denom = 2.0 * (phi_hi - phi_lo - dphi_lo * h);
        if (denom > 0.0) trial = a_lo - dphi_lo * h * h / denom;
      }
      trial = std::clamp(trial, lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo));
      Point p = eval(trial);
      ++evals;
      const double phi = p.res.lagrangian;
      if (!std::isfinite(phi) || !armijo(trial, phi) || phi >= phi_lo) {
        a_hi = trial;
        phi_hi = std::isfinite(phi) ? phi : std::numeric_limits<double>::infinity();
        continue;
      }
      const double dphi = slope_of(p);
      if (std::abs(dphi) <= -wolfe_c2 * slope0) return std::make_pair(std::move(p), trial);
      keep(p, trial);
      if (dphi * (a_hi - a_lo) >= 0.0) {
        a_hi = a_lo;
        phi_hi = phi_lo;
      }
      a_lo = trial;
      phi_lo = phi;
      dphi_lo = dphi;
    }
    return best;
  }

  const Eval& ev_;
  double t_;
  std::vector<double> w_;
  SolverConfig cfg_;
};

template <typename Scalar>
Mats<Scalar> cold_start(const Problem<Scalar>& problem, const SolverConfig& config) {
  Mats<Scalar> g;
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, config.initial_jitter);
  for (const auto& c : problem.clusters) {
    Matrix<Scalar> m = Matrix<Scalar>::Zero(c.dim(), c.dim());
    if (config.initial_jitter > 0.0) {
      for (Index j = 0; j < m.cols(); ++j)
        for (Index i = 0; i < m.rows(); ++i) {
          if constexpr (std::is_same_v<Scalar, double>) m(i, j) = normal(rng);
          else m(i, j) = Scalar(normal(rng), normal(rng));
        }
      m = symmetrized(m);
    }
    g.push_back(std::move(m));
  }
  return g;
}

template <typename Scalar>
bool fits(const Mats<Scalar>& ms, const std::vector<Index>& dims) {
  if (ms.size() != dims.size()) return false;
  for (std::size_t i = 0; i < ms.size(); ++i)
    if (ms[i].rows() != dims[i] || ms[i].cols() != dims[i]) return false;
  return true;
}

}  // namespace

template <typename Scalar>
MedResult<Scalar> minimize(const Problem<Scalar>& problem, double temperature, const SolverConfig& config,
                           const SolverState<Scalar>* warm, const std::vector<double>& patch_weights,
                           InnerTrace* trace) {
  config.validate();
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw std::invalid_argument("minimize: temperature must be positive and finite");
  std::vector<double> weights = patch_weights;
  if (weights.empty()) {
    if (problem.patches.size() != 1)
      throw std::invalid_argument("minimize: patch weights are required for a multi-patch problem");
    weights = {1.0};
  }
  if (weights.size() != problem.patches.size())
    throw std::invalid_argument("minimize: expected one weight per patch");

  const detail::Evaluator<Scalar> ev(problem);
  const Solver<Scalar> solver(ev, temperature, weights, config);

  std::vector<Index> cluster_dims, constraint_dims;
  for (const auto& c : problem.clusters) cluster_dims.push_back(c.dim());
  for (const auto& c : problem.constraints)
    constraint_dims.push_back(problem.clusters[c.cluster_a].subspace(c.region_a).dim());

  Mats<Scalar> g = warm && fits(warm->log_weights, cluster_dims) ? warm->log_weights : cold_start(problem, config);
  Mats<Scalar> lam;
  if (warm && fits(warm->multipliers, constraint_dims)) lam = warm->multipliers;
  else
    for (Index d : constraint_dims) lam.push_back(Matrix<Scalar>::Zero(d, d));
  double mu = config.penalty_init;

  MedResult<Scalar> out;
  out.temperature = temperature;
  auto x = solver.at(std::move(g), lam, mu);
  double prev_residual = std::numeric_limits<double>::infinity();
  const bool constrained = !problem.constraints.empty();

  for (int outer = 0; outer < config.max_outer; ++outer) {
    ++out.outer_iterations;
    // Loose inner solves while the multipliers are still moving.
    double tol = config.tol_gradient;
    if (constrained && outer + 1 < config.max_outer)
      tol = std::max(config.tol_gradient, std::min(1e-3, 1e-2 * prev_residual));
    const auto in = solver.inner(x, lam, mu, tol, config.max_inner, trace);
    out.iterations += in.iterations;
    if (trace) trace->outer_boundaries.push_back(static_cast<int>(trace->accepted_values.size()));
    const double r = x.res.max_residual;
    if (r <= config.tol_constraint && in.converged && tol <= config.tol_gradient) {
      out.converged = true;
      break;
    }
    if (!constrained) {
      if (!in.converged) break;
      continue;
    }
    for (std::size_t k = 0; k < lam.size(); ++k) lam[k] += mu * x.res.residuals[k];
    if (r > config.tol_constraint && r > 0.25 * prev_residual) mu = std::min(mu * config.penalty_growth, max_penalty);
    prev_residual = r;
    x = solver.at(std::move(x.g), lam, mu);
  }

  const auto final_res = ev.evaluate_log_weights(x.g, temperature, weights, {}, 0.0, false);
  const double n = problem.num_sites;
  out.free_energy = final_res.objective / n;
  for (std::size_t p = 0; p < weights.size(); ++p) {
    out.energy += weights[p] * final_res.patch_energy[p] / n;
    out.markov_entropy += weights[p] * final_res.patch_entropy[p] / n;
    out.patch_free_energies.push_back(final_res.patch_free_energy[p] / n);
  }
  out.patch_weights = weights;
  out.residual = final_res.max_residual;
  out.variables.constraints = problem.constraints;
  for (std::size_t a = 0; a < problem.clusters.size(); ++a)
    out.variables.states.push_back(DensityMatrix<Scalar>::normalized(problem.clusters[a], final_res.spectra[a].rho));
  out.state = {std::move(x.g), std::move(lam), mu};
  return out;
}

MedResult<double> minimize_ti(const lattice::ModelSpec& model, lattice::Kind kind,
                              const std::vector<lattice::Offset>& shield_template, double temperature,
                              const SolverConfig& config) {
  return minimize(make_ti_problem(model, kind, {shield_template}), temperature, config);
}

MedResult<double> minimize_finite(const lattice::BuiltLattice& built, const std::vector<lattice::Shield>& shields,
                                  double temperature, const SolverConfig& config) {
  return minimize(make_finite_problem(built, {shields}), temperature, config);
}

// ---------------------------------------------------------------------------
// Sweeps and bounds.

namespace {

std::vector<double> checked_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("temperature grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0) || !std::isfinite(grid[i]))
      throw std::invalid_argument("temperature grid must be positive and finite");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw std::invalid_argument("temperature grid must be strictly ascending");
  }
  return grid;
}

std::vector<MedResult<double>> solve_grid(const Problem<double>& problem, const std::vector<double>& grid,
                                          const SolverConfig& config, const SweepOptions& options) {
  std::vector<MedResult<double>> out(grid.size());
  if (options.warm_start) {
    const SolverState<double>* warm = nullptr;
    for (std::size_t i = grid.size(); i-- > 0;) {
      out[i] = minimize(problem, grid[i], config, warm);
      warm = &out[i].state;
    }
    return out;
  }
  const int threads = std::max(1, std::min<int>(options.threads, static_cast<int>(grid.size())));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](int id) {
    try {
      for (std::size_t i; (i = next++) < grid.size();) out[i] = minimize(problem, grid[i], config);
    } catch (...) {
      errors[id] = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(work, t);
  work(0);
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

SweepRow row_of(const MedResult<double>& r, const SolverConfig& config) {
  SweepRow row;
  row.temperature = r.temperature;
  row.free_energy = r.free_energy;
  row.energy = r.energy;
  row.markov_entropy = r.markov_entropy;
  row.residual = r.residual;
  row.iterations = r.iterations;
  row.converged = r.converged;
  row.verified = r.verified(config);
  return row;
}

}  // namespace

void fill_specific_heat(SweepResult& sweep) {
  auto& rows = sweep.rows;
  for (auto& r : rows) r.specific_heat = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
    const double h1 = rows[i].temperature - rows[i - 1].temperature;
    const double h2 = rows[i + 1].temperature - rows[i].temperature;
    const double f2 = 2.0 * (rows[i - 1].free_energy / (h1 * (h1 + h2)) - rows[i].free_energy / (h1 * h2) +
                             rows[i + 1].free_energy / (h2 * (h1 + h2)));
    rows[i].specific_heat = -rows[i].temperature * f2;
  }
}

SweepResult temperature_sweep(const Problem<double>& problem, const std::vector<double>& grid,
                              const SolverConfig& config, const SweepOptions& options) {
  const auto results = solve_grid(problem, checked_grid(grid), config, options);
  SweepResult out;
  for (const auto& r : results) out.rows.push_back(row_of(r, config));
  fill_specific_heat(out);
  return out;
}

GroundBound ground_energy_lower_bound(const SweepResult& sweep) {
  if (sweep.rows.empty()) throw std::invalid_argument("ground_energy_lower_bound: empty sweep");
  GroundBound out;
  out.sweep = sweep;
  std::size_t best = 0;
  bool negative = false, positive = false;
  for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
    if (sweep.rows[i].free_energy > sweep.rows[best].free_energy) best = i;
    negative |= sweep.rows[i].markov_entropy < 0.0;
    positive |= sweep.rows[i].markov_entropy > 0.0;
  }
  out.bound = sweep.rows[best].free_energy;
  out.temperature = sweep.rows[best].temperature;
  out.verified = sweep.rows[best].verified;
  out.bracketed = negative && positive;
  if (!negative) out.note = "crossing not bracketed: S_M is never negative on the grid";
  else if (!positive) out.note = "crossing not bracketed: S_M is never positive on the grid";
  return out;
}

GroundBound ground_energy_lower_bound(const Problem<double>& problem, const std::vector<double>& grid,
                                      const SolverConfig& config, double temperature_tolerance) {
  if (!(temperature_tolerance > 0.0)) throw std::invalid_argument("ground_energy_lower_bound: tolerance must be positive");
  const auto results = solve_grid(problem, checked_grid(grid), config, {});
  SweepResult sweep;
  for (const auto& r : results) sweep.rows.push_back(row_of(r, config));
  fill_specific_heat(sweep);
  GroundBound out = ground_energy_lower_bound(sweep);
  if (!out.bracketed || grid.size() < 3) return out;

  std::size_t i = 0;
  while (grid[i] != out.temperature) ++i;
  // F_MED(T) is concave (a minimum of functions affine in T), so golden section applies.
  double a = grid[i == 0 ? 0 : i - 1], b = grid[std::min(i + 1, grid.size() - 1)];
  const SolverState<double>* warm = &results[i].state;
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  auto solve = [&](double t) {
    auto r = minimize(problem, t, config, warm);
    if (r.free_energy > out.bound) {
      out.bound = r.free_energy;
      out.temperature = t;
      out.verified = r.verified(config);
    }
    return r.free_energy;
  };
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = solve(c), fd = solve(d);
  while (b - a > temperature_tolerance) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = solve(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = solve(d);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Multi-patch.

MedResult<double> multi_patch_minimize(const Problem<double>& problem, double temperature, const SolverConfig& config,
                                       double weight_tolerance) {
  const std::size_t m = problem.patches.size();
  if (m == 1) return minimize(problem, temperature, config);
  if (!(weight_tolerance > 0.0)) throw std::invalid_argument("multi_patch_minimize: tolerance must be positive");

  std::optional<MedResult<double>> best;
  SolverState<double> warm;
  bool have_warm = false;
  auto dual = [&](const std::vector<double>& w) {
    auto r = minimize(problem, temperature, config, have_warm ? &warm : nullptr, w);
    warm = r.state;
    have_warm = true;
    if (!best || r.free_energy > best->free_energy) best = r;
    return r;
  };
  auto gap = [](const MedResult<double>& r, std::size_t p, std::size_t q) {
    return r.patch_free_energies[q] - r.patch_free_energies[p];
  };

  // Maximize g over the segment that moves weight between patches p and q;
  // the derivative of g along it is F_q - F_p at the minimizer.
  auto pair_ascent = [&](std::vector<double> w, std::size_t p, std::size_t q) {
    const double total = w[p] + w[q];
    if (total <= 0.0) return w;
    auto with = [&](double s) {
      std::vector<double> v = w;
      v[p] = total - s;
      v[q] = s;
      return v;
    };
    const auto lo = dual(with(0.0));
    if (gap(lo, p, q) <= 0.0) return with(0.0);
    const auto hi = dual(with(total));
    if (gap(hi, p, q) >= 0.0) return with(total);
    double a = 0.0, b = total;
    while (b - a > weight_tolerance) {
      const double s = 0.5 * (a + b);
      const auto r = dual(with(s));
      const double gq = gap(r, p, q);
      if (std::abs(gq) <= config.tol_gradient) return with(s);
      (gq > 0.0 ? a : b) = s;
    }
    return with(0.5 * (a + b));
  };

  std::vector<double> w(m, 0.0);
  w[0] = 1.0;
  if (m == 2) {
    pair_ascent(w, 0, 1);
  } else {
    for (int sweep = 0; sweep < 10; ++sweep) {
      const double before = best ? best->free_energy : -std::numeric_limits<double>::infinity();
      for (std::size_t p = 0; p < m; ++p)
        for (std::size_t q = p + 1; q < m; ++q) w = pair_ascent(w, p, q);
      if (best && best->free_energy - before <= config.tol_gradient) break;
    }
  }
  return *best;
}

template MedResult<double> minimize<double>(const Problem<double>&, double, const SolverConfig&,
                                            const SolverState<double>*, const std::vector<double>&, InnerTrace*);
template MedResult<Complex> minimize<Complex>(const Problem<Complex>&, double, const SolverConfig&,
                                              const SolverState<Complex>*, const std::vector<double>&, InnerTrace*);

}  // namespace qmed::med
