#pragma once

// Chemical reaction networks under mass-action kinetics.
//
// Rate constants are concentration-space constants: the propensity of a
// reaction in concentration units is k * prod_i phi_i^r_i and does not depend
// on the volumetric factor N. The stochastic (count-space) rate of the same
// reaction in state x is N * alpha(x / N).

#include <Eigen/Dense>
#include <boost/rational.hpp>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lnamc/error.hpp"

namespace lnamc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Concentration = Eigen::VectorXd;
using Counts = std::vector<std::int64_t>;
using Stoichiometry = std::vector<int>;

struct Species {
  std::string name;
  std::size_t index = 0;
};

struct Reaction {
  Stoichiometry reactants;
  Stoichiometry products;
  double rate = 0.0;

  std::size_t order() const {
    return static_cast<std::size_t>(std::accumulate(reactants.begin(), reactants.end(), 0));
  }
};

// Initial molecule counts and the volumetric factor N (volume times Avogadro).
struct SystemSetup {
  Counts initial_counts;
  double volume = 1.0;

  Concentration initial_concentration() const {
    Concentration phi(static_cast<Eigen::Index>(initial_counts.size()));
    for (std::size_t i = 0; i < initial_counts.size(); ++i)
      phi[static_cast<Eigen::Index>(i)] = static_cast<double>(initial_counts[i]) / volume;
    return phi;
  }
};

class Crn {
 public:
  Crn() = default;

  Crn(std::vector<std::string> species_names, std::vector<Reaction> reactions)
      : reactions_(std::move(reactions)) {
    if (species_names.empty()) throw ModelError("a network needs at least one species");
    for (std::size_t i = 0; i < species_names.size(); ++i) {
      if (!lookup_.emplace(species_names[i], i).second)
        throw ModelError("duplicate species '" + species_names[i] + "'");
      species_.push_back({std::move(species_names[i]), i});
    }
    for (std::size_t j = 0; j < reactions_.size(); ++j) validate(reactions_[j], j);
  }

  std::size_t num_species() const { return species_.size(); }
  std::size_t num_reactions() const { return reactions_.size(); }
  const std::vector<Species>& species() const { return species_; }
  const std::vector<Reaction>& reactions() const { return reactions_; }
  const Reaction& reaction(std::size_t j) const { return reactions_.at(j); }

  // Index of a species by name, or -1.
  std::ptrdiff_t find(const std::string& name) const {
    auto it = lookup_.find(name);
    return it == lookup_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
  }

  void check_setup(const SystemSetup& setup) const {
    if (setup.initial_counts.size() != num_species())
      throw ModelError("initial counts do not match the number of species");
    if (!(setup.volume > 0.0) || !std::isfinite(setup.volume))
      throw ModelError("volumetric factor N must be positive and finite");
    for (auto c : setup.initial_counts)
      if (c < 0) throw ModelError("initial counts must be non-negative");
  }

 private:
  void validate(const Reaction& r, std::size_t j) const {
    const auto n = species_.size();
    const auto where = "reaction " + std::to_string(j + 1);
    if (r.reactants.size() != n || r.products.size() != n)
      throw ModelError(where + ": stoichiometry does not match the species list");
    if (!(r.rate > 0.0) || !std::isfinite(r.rate)) throw ModelError(where + ": rate constant must be positive");
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (r.reactants[i] < 0 || r.products[i] < 0) throw ModelError(where + ": negative stoichiometry");
      any = any || r.reactants[i] != 0 || r.products[i] != 0;
    }
    if (!any) throw ModelError(where + ": reaction has neither reactants nor products");
  }

  std::vector<Species> species_;
  std::vector<Reaction> reactions_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

inline Stoichiometry net_change(const Reaction& r) {
  Stoichiometry v(r.reactants.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = r.products[i] - r.reactants[i];
  return v;
}

namespace detail {
inline double ipow(double base, int exp) {
  double result = 1.0;  // 0^0 == 1
  for (int e = 0; e < exp; ++e) result *= base;
  return result;
}
}  // namespace detail

// Mass-action propensity in concentration units.
inline double propensity(const Reaction& r, const Eigen::Ref<const Vector>& phi) {
  double a = r.rate;
  for (std::size_t i = 0; i < r.reactants.size(); ++i)
    if (r.reactants[i] != 0) a *= detail::ipow(phi[static_cast<Eigen::Index>(i)], r.reactants[i]);
  return a;
}

// F(phi) = sum_tau v_tau * alpha_tau(phi)
inline Vector drift(const Crn& crn, const Eigen::Ref<const Vector>& phi) {
  Vector f = Vector::Zero(static_cast<Eigen::Index>(crn.num_species()));
  for (const auto& r : crn.reactions()) {
    const double a = propensity(r, phi);
    if (a == 0.0) continue;
    for (std::size_t i = 0; i < r.reactants.size(); ++i) {
      const int v = r.products[i] - r.reactants[i];
      if (v != 0) f[static_cast<Eigen::Index>(i)] += v * a;
    }
  }
  return f;
}

// Analytic Jacobian of the drift: entry (j, i) = dF_j / dphi_i.
inline Matrix jacobian(const Crn& crn, const Eigen::Ref<const Vector>& phi) {
  const auto n = static_cast<Eigen::Index>(crn.num_species());
  Matrix jac = Matrix::Zero(n, n);
  std::vector<int> change(crn.num_species());
  for (const auto& r : crn.reactions()) {
    for (std::size_t i = 0; i < change.size(); ++i) change[i] = r.products[i] - r.reactants[i];
    for (std::size_t i = 0; i < r.reactants.size(); ++i) {
      const int ri = r.reactants[i];
      if (ri == 0) continue;
      double d = r.rate * ri * detail::ipow(phi[static_cast<Eigen::Index>(i)], ri - 1);
      for (std::size_t m = 0; m < r.reactants.size() && d != 0.0; ++m)
        if (m != i && r.reactants[m] != 0) d *= detail::ipow(phi[static_cast<Eigen::Index>(m)], r.reactants[m]);
      if (d == 0.0) continue;
      for (std::size_t j = 0; j < change.size(); ++j)
        if (change[j] != 0) jac(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) += change[j] * d;
    }
  }
  return jac;
}

// G(phi) = sum_tau v_tau v_tau^T alpha_tau(phi)
inline Matrix diffusion(const Crn& crn, const Eigen::Ref<const Vector>& phi) {
  const auto n = static_cast<Eigen::Index>(crn.num_species());
  Matrix g = Matrix::Zero(n, n);
  std::vector<std::pair<Eigen::Index, int>> nz;
  for (const auto& r : crn.reactions()) {
    const double a = propensity(r, phi);
    if (a == 0.0) continue;
    nz.clear();
    for (std::size_t i = 0; i < r.reactants.size(); ++i)
      if (int v = r.products[i] - r.reactants[i]; v != 0) nz.emplace_back(static_cast<Eigen::Index>(i), v);
    for (const auto& [i, vi] : nz)
      for (const auto& [j, vj] : nz) g(i, j) += static_cast<double>(vi * vj) * a;
  }
  return g;
}

// Stochastic propensity N * alpha(x / N) of a reaction in count state x.
inline double count_propensity(const Reaction& r, const Counts& x, double volume) {
  double a = r.rate * volume;
  for (std::size_t i = 0; i < r.reactants.size(); ++i)
    if (r.reactants[i] != 0) a *= detail::ipow(static_cast<double>(x[i]) / volume, r.reactants[i]);
  return a;
}

// Transition rate of the induced CTMC from x_from to x_to.
inline double ctmc_rate(const Crn& crn, const SystemSetup& setup, const Counts& x_from, const Counts& x_to) {
  if (x_from.size() != crn.num_species() || x_to.size() != crn.num_species())
    throw ModelError("state vectors do not match the number of species");
  double rate = 0.0;
  for (const auto& r : crn.reactions()) {
    bool matches = true;
    for (std::size_t i = 0; i < x_from.size() && matches; ++i)
      matches = x_to[i] - x_from[i] == r.products[i] - r.reactants[i];
    if (matches) rate += count_propensity(r, x_from, setup.volume);
  }
  return rate;
}

// Integer basis of the left null space of the stoichiometry matrix: vectors w
// with w . v_tau = 0 for every reaction. Exact rational elimination.
inline std::vector<std::vector<std::int64_t>> conservation_vectors(const Crn& crn) {
  using Q = boost::rational<std::int64_t>;
  const std::size_t rows = crn.num_reactions();
  const std::size_t cols = crn.num_species();
  // Null space of S^T (rows: reactions, cols: species).
  std::vector<std::vector<Q>> a(rows, std::vector<Q>(cols));
  for (std::size_t j = 0; j < rows; ++j) {
    const auto v = net_change(crn.reaction(j));
    for (std::size_t i = 0; i < cols; ++i) a[j][i] = Q(v[i]);
  }
  std::vector<std::size_t> pivots;
  std::size_t rank = 0;
  for (std::size_t c = 0; c < cols && rank < rows; ++c) {
    std::size_t p = rank;
    while (p < rows && a[p][c] == Q(0)) ++p;
    if (p == rows) continue;
    std::swap(a[p], a[rank]);
    const Q inv = Q(1) / a[rank][c];
    for (auto& x : a[rank]) x *= inv;
    for (std::size_t r = 0; r < rows; ++r) {
      if (r == rank || a[r][c] == Q(0)) continue;
      const Q f = a[r][c];
      for (std::size_t k = 0; k < cols; ++k) a[r][k] -= f * a[rank][k];
    }
    pivots.push_back(c);
    ++rank;
  }
  std::vector<bool> is_pivot(cols, false);
  for (auto c : pivots) is_pivot[c] = true;

  std::vector<std::vector<std::int64_t>> basis;
  for (std::size_t free = 0; free < cols; ++free) {
    if (is_pivot[free]) continue;
    std::vector<Q> w(cols, Q(0));
    w[free] = Q(1);
    for (std::size_t r = 0; r < pivots.size(); ++r) w[pivots[r]] = -a[r][free];
    std::int64_t lcm = 1;
    for (const auto& q : w) lcm = std::lcm(lcm, q.denominator());
    std::vector<std::int64_t> iw(cols);
    std::int64_t g = 0;
    for (std::size_t i = 0; i < cols; ++i) {
      iw[i] = w[i].numerator() * (lcm / w[i].denominator());
      g = std::gcd(g, iw[i]);
    }
    if (g > 1)
      for (auto& x : iw) x /= g;
    basis.push_back(std::move(iw));
  }
  return basis;
}

}  // namespace lnamc
