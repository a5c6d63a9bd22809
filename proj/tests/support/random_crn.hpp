#pragma once

// Random mass-action networks for property tests. Bimolecular reactions never
// produce more molecules than they consume, so trajectories stay bounded on
// short horizons.

#include <random>
#include <string>
#include <vector>

#include "lnamc/crn.hpp"

namespace lnamc::testing {

struct RandomCrnShape {
  std::size_t max_species = 6;
  std::size_t max_reactions = 10;
  std::size_t min_species = 1;
  std::size_t min_reactions = 1;
  double min_rate = 0.1;
  double max_rate = 2.0;
};

inline Crn random_crn(std::mt19937_64& gen, const RandomCrnShape& shape = {}) {
  std::uniform_int_distribution<std::size_t> ns(shape.min_species, shape.max_species);
  std::uniform_int_distribution<std::size_t> nr(shape.min_reactions, shape.max_reactions);
  std::uniform_real_distribution<double> rate(shape.min_rate, shape.max_rate);
  const std::size_t n = ns(gen);
  const std::size_t m = nr(gen);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::uniform_int_distribution<int> order(0, 2);

  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back("s" + std::to_string(i));
  std::vector<Reaction> reactions;
  while (reactions.size() < m) {
    Reaction r{Stoichiometry(n, 0), Stoichiometry(n, 0), rate(gen)};
    const int ord = order(gen);
    for (int k = 0; k < ord; ++k) ++r.reactants[pick(gen)];
    // Products: up to max(order, 1) molecules, possibly fewer.
    const int max_out = std::max(ord, 1);
    const int outs = std::uniform_int_distribution<int>(ord == 0 ? 1 : 0, max_out)(gen);
    for (int k = 0; k < outs; ++k) ++r.products[pick(gen)];
    if (r.reactants == r.products) continue;
    reactions.push_back(std::move(r));
  }
  return Crn(std::move(names), std::move(reactions));
}

inline SystemSetup random_setup(std::mt19937_64& gen, const Crn& crn, double volume = 100.0) {
  std::uniform_int_distribution<std::int64_t> count(0, static_cast<std::int64_t>(volume));
  Counts x0(crn.num_species());
  for (auto& x : x0) x = count(gen);
  return {x0, volume};
}

}  // namespace lnamc::testing
