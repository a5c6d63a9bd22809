#pragma once

// Transient solution of the chemical master equation on a truncated state
// space by uniformisation. Transitions that leave the per-species bounds are
// redirected to an absorbing sink whose mass is reported as boundary loss.

#include <boost/functional/hash.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <unordered_map>
#include <vector>

#include "lnamc/crn.hpp"
#include "lnamc/error.hpp"
#include "lnamc/gaussian.hpp"
#include "lnamc/lna.hpp"

namespace lnamc {

struct TruncationLimits {
  std::size_t max_states = 5'000'000;
};

class TruncatedStateSpace {
 public:
  TruncatedStateSpace(const Crn& crn, const SystemSetup& setup, Counts bounds, TruncationLimits limits = {})
      : bounds_(std::move(bounds)), n_(crn.num_species()) {
    crn.check_setup(setup);
    if (bounds_.size() != n_) throw OracleError("one bound per species is required");
    double log10_cells = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (setup.initial_counts[i] > bounds_[i]) throw OracleError("initial state lies outside the truncation bounds");
      log10_cells += std::log10(static_cast<double>(bounds_[i]) + 1.0);
    }
    // Refuse boxes that could hold more states than allowed before exploring.
    if (log10_cells > std::log10(static_cast<double>(limits.max_states)) + 3.0)
      throw OracleError("truncated state space is too large (about 1e" + std::to_string(static_cast<long>(log10_cells)) +
                        " cells)");

    std::unordered_map<Counts, std::size_t, boost::hash<Counts>> index;
    auto intern = [&](const Counts& x) {
      auto [it, fresh] = index.emplace(x, states_.size());
      if (fresh) {
        if (states_.size() >= limits.max_states)
          throw OracleError("truncated state space exceeds " + std::to_string(limits.max_states) + " states");
        states_.push_back(x);
      }
      return it->second;
    };
    intern(setup.initial_counts);

    const auto& reactions = crn.reactions();
    Counts y(n_);
    for (std::size_t s = 0; s < states_.size(); ++s) {
      row_start_.push_back(targets_.size());
      double exit = 0.0, sink = 0.0;
      for (const auto& r : reactions) {
        const Counts& x = states_[s];
        const double a = count_propensity(r, x, setup.volume);
        if (a <= 0.0) continue;
        bool inside = true, moves = false;
        for (std::size_t i = 0; i < n_; ++i) {
          y[i] = x[i] + r.products[i] - r.reactants[i];
          moves = moves || y[i] != x[i];
          inside = inside && y[i] >= 0 && y[i] <= bounds_[i];
        }
        if (!moves) continue;
        exit += a;
        if (!inside) {
          sink += a;
          continue;
        }
        const std::size_t target = intern(y);
        targets_.push_back(target);
        rates_.push_back(a);
      }
      if (!std::isfinite(exit)) throw OracleError("non-finite exit rate in truncated state space");
      exit_.push_back(exit);
      sink_.push_back(sink);
    }
    row_start_.push_back(targets_.size());
  }

  std::size_t size() const { return states_.size(); }
  std::size_t num_species() const { return n_; }
  const std::vector<Counts>& states() const { return states_; }
  const Counts& bounds() const { return bounds_; }
  double max_exit_rate() const { return exit_.empty() ? 0.0 : *std::max_element(exit_.begin(), exit_.end()); }

  // pi_next = pi * (I + Q/q), with the sink tracked separately.
  void step(const std::vector<double>& pi, double sink_mass, double q, std::vector<double>& out, double& out_sink) const {
    out.assign(pi.size(), 0.0);
    out_sink = sink_mass;
    for (std::size_t s = 0; s < pi.size(); ++s) {
      const double p = pi[s];
      if (p == 0.0) continue;
      out[s] += p * (1.0 - exit_[s] / q);
      out_sink += p * sink_[s] / q;
      for (std::size_t e = row_start_[s]; e < row_start_[s + 1]; ++e) out[targets_[e]] += p * rates_[e] / q;
    }
  }

 private:
  Counts bounds_;
  std::size_t n_;
  std::vector<Counts> states_;
  std::vector<std::size_t> row_start_;
  std::vector<std::size_t> targets_;
  std::vector<double> rates_;
  std::vector<double> exit_;
  std::vector<double> sink_;
};

struct TransientResult {
  double time = 0.0;
  std::vector<double> probabilities;  // over TruncatedStateSpace::states()
  double boundary_mass = 0.0;         // mass absorbed at the truncation boundary
  double truncation_error = 0.0;      // Poisson weight neglected by the series
};

struct PoissonWindow {
  std::size_t left = 0;
  std::vector<double> weights;  // weights[k] = P(K = left + k)
  double neglected = 0.0;
};

// Poisson(lambda) weights on [left, right] with the neglected tail mass at
// most epsilon / 2 on each side. Bounds start at lambda -/+ c*sqrt(lambda)
// and widen until both tails are small enough.
inline PoissonWindow poisson_window(double lambda, double epsilon) {
  PoissonWindow w;
  if (lambda <= 0.0) {
    w.weights = {1.0};
    return w;
  }
  const double sd = std::sqrt(lambda);
  double c = 3.0;
  std::size_t left = 0, right = 0;
  double lower_tail = 0.0, upper_tail = 0.0;
  for (;; c += 0.5) {
    left = static_cast<std::size_t>(std::max(0.0, std::floor(lambda - c * sd)));
    right = static_cast<std::size_t>(std::ceil(lambda + c * sd)) + 1;
    // P(K < left) = Q(left, lambda); P(K > right) = P(right + 1, lambda).
    lower_tail = left == 0 ? 0.0 : boost::math::gamma_q(static_cast<double>(left), lambda);
    upper_tail = boost::math::gamma_p(static_cast<double>(right + 1), lambda);
    if (lower_tail <= epsilon / 2 && upper_tail <= epsilon / 2) break;
  }
  w.left = left;
  w.weights.resize(right - left + 1);
  const double log_lambda = std::log(lambda);
  double kept = 0.0;
  for (std::size_t k = left; k <= right; ++k) {
    const double kk = static_cast<double>(k);
    w.weights[k - left] = std::exp(-lambda + kk * log_lambda - std::lgamma(kk + 1.0));
    kept += w.weights[k - left];
  }
  w.neglected = lower_tail + upper_tail;
  if (kept < 1.0 - epsilon - 1e-12) throw OracleError("Poisson weights lost more than epsilon");
  return w;
}

// Transient distributions at each of `times` (non-decreasing, >= 0) starting
// from the point mass at the initial state.
inline std::vector<TransientResult> uniformisation_transient(const TruncatedStateSpace& space,
                                                            const std::vector<double>& times, double epsilon,
                                                            double max_boundary_mass = 1e-3) {
  if (!(epsilon > 0.0)) throw OracleError("epsilon must be positive");
  std::vector<double> pi(space.size(), 0.0), term, next;
  pi[0] = 1.0;
  double sink = 0.0, neglected = 0.0, t = 0.0;
  const double q = std::max(space.max_exit_rate() * 1.02, 1e-300);

  std::vector<TransientResult> out;
  for (double target : times) {
    if (!(target >= t)) throw OracleError("transient times must be non-decreasing and non-negative");
    const double dt = target - t;
    if (dt > 0.0 && space.max_exit_rate() > 0.0) {
      const auto w = poisson_window(q * dt, epsilon);
      std::vector<double> acc(pi.size(), 0.0);
      double acc_sink = 0.0;
      term = pi;
      double term_sink = sink;
      const std::size_t right = w.left + w.weights.size() - 1;
      for (std::size_t k = 0; k <= right; ++k) {
        if (k >= w.left) {
          const double wk = w.weights[k - w.left];
          for (std::size_t s = 0; s < acc.size(); ++s) acc[s] += wk * term[s];
          acc_sink += wk * term_sink;
        }
        if (k < right) {
          double ns = 0.0;
          space.step(term, term_sink, q, next, ns);
          term.swap(next);
          term_sink = ns;
        }
      }
      pi.swap(acc);
      sink = acc_sink;
      neglected += w.neglected;
    }
    t = target;
    if (sink > max_boundary_mass)
      throw OracleError("boundary mass " + format_real(sink, 4) + " exceeds " + format_real(max_boundary_mass, 4) +
                        " at t=" + format_real(t) + "; widen the truncation bounds");
    out.push_back({t, pi, sink, neglected});
  }
  return out;
}

inline TransientResult uniformisation_transient(const TruncatedStateSpace& space, double t, double epsilon,
                                                double max_boundary_mass = 1e-3) {
  return uniformisation_transient(space, std::vector<double>{t}, epsilon, max_boundary_mass).front();
}

// Exact statistics of B*X under a transient distribution (mass on the sink
// is excluded).
inline double transient_probability(const TruncatedStateSpace& space, const TransientResult& r, const TargetSpec& spec) {
  double p = 0.0;
  for (std::size_t s = 0; s < space.size(); ++s) {
    double v = 0.0;
    for (std::size_t i = 0; i < spec.b.size(); ++i) v += static_cast<double>(spec.b[i] * space.states()[s][i]);
    if (spec.intervals.contains(v)) p += r.probabilities[s];
  }
  return p;
}

inline GaussianSummary transient_moments(const TruncatedStateSpace& space, const TransientResult& r, const Combination& b) {
  double mass = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t s = 0; s < space.size(); ++s) {
    double v = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) v += static_cast<double>(b[i] * space.states()[s][i]);
    mass += r.probabilities[s];
    m1 += r.probabilities[s] * v;
    m2 += r.probabilities[s] * v * v;
  }
  if (mass <= 0.0) return {};
  const double mean = m1 / mass;
  return {mean, std::max(0.0, m2 / mass - mean * mean)};
}

// Bounds at mean + 12 standard deviations of each species over the LNA grid,
// never below the initial count.
inline Counts lna_bounds(const LnaSolution& sol, double sds = 12.0) {
  const std::size_t n = sol.num_species();
  Counts bounds = sol.setup().initial_counts;
  for (std::size_t k = 0; k < sol.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double mean = sol.volume() * sol.phi(k)[ii];
      const double sd = std::sqrt(std::max(0.0, sol.volume() * sol.cov_z(k)(ii, ii)));
      const double b = std::ceil(mean + sds * sd) + 1.0;
      if (b > 9e15) throw OracleError("LNA-derived bound overflows");
      bounds[i] = std::max(bounds[i], static_cast<std::int64_t>(b));
    }
  }
  return bounds;
}

}  // namespace lnamc
