#pragma once

// Gillespie direct-method simulation of the CTMC induced by a network, and
// statistical estimates built from the sampled trajectories.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <thread>
#include <vector>

#include "lnamc/crn.hpp"
#include "lnamc/error.hpp"
#include "lnamc/format.hpp"
#include "lnamc/lna.hpp"
#include "lnamc/rng.hpp"
#include "lnamc/sel.hpp"

namespace lnamc {

struct SsaConfig {
  std::size_t trials = 1000;
  std::uint64_t seed = 1;
  double t_max = 1.0;
  std::vector<double> record_times;
  unsigned threads = 0;  // 0: hardware concurrency

  void validate() const {
    if (trials == 0) throw OracleError("SSA needs at least one trial");
    if (!(t_max >= 0.0) || !std::isfinite(t_max)) throw OracleError("SSA horizon must be finite and non-negative");
    for (std::size_t i = 0; i < record_times.size(); ++i) {
      if (record_times[i] < 0.0 || record_times[i] > t_max) throw OracleError("record time outside [0, t_max]");
      if (i && !(record_times[i] > record_times[i - 1])) throw OracleError("record times must be increasing");
    }
  }
};

// States of one trial at each record time, flattened (time-major).
struct Trajectory {
  std::vector<std::int64_t> states;
  std::size_t events = 0;

  const std::int64_t* at(std::size_t k, std::size_t num_species) const { return states.data() + k * num_species; }
};

struct SsaTrajectories {
  std::vector<double> record_times;
  std::size_t num_species = 0;
  std::vector<Trajectory> trials;
};

struct Estimate {
  double point = 0.0;
  double half_width_95 = 0.0;
  std::size_t trials = 0;
};

// Runs one trial; the state recorded at time t includes every event at
// times <= t.
inline Trajectory ssa_trial(const Crn& crn, const SystemSetup& setup, const SsaConfig& cfg, std::uint64_t trial) {
  auto rng = CounterRng::substream(cfg.seed, trial);
  const std::size_t n = crn.num_species();
  const auto& reactions = crn.reactions();
  Counts x = setup.initial_counts;
  std::vector<double> rates(reactions.size());
  Trajectory out;
  out.states.reserve(cfg.record_times.size() * n);

  double t = 0.0;
  std::size_t next = 0;
  auto record_until = [&](double t_end) {
    while (next < cfg.record_times.size() && cfg.record_times[next] < t_end) {
      out.states.insert(out.states.end(), x.begin(), x.end());
      ++next;
    }
  };

  for (;;) {
    double total = 0.0;
    for (std::size_t j = 0; j < reactions.size(); ++j) {
      rates[j] = count_propensity(reactions[j], x, setup.volume);
      total += rates[j];
    }
    if (!std::isfinite(total)) throw OracleError("non-finite propensity at t=" + format_real(t));
    if (total <= 0.0) break;
    const double dt = rng.exponential(total);
    if (t + dt > cfg.t_max) break;
    record_until(t + dt);
    t += dt;
    double u = rng.uniform() * total;
    std::size_t pick = 0;
    while (pick + 1 < reactions.size() && (u -= rates[pick]) >= 0.0) ++pick;
    while (rates[pick] == 0.0 && pick > 0) --pick;  // guard against round-off past the last live reaction
    const auto& r = reactions[pick];
    for (std::size_t i = 0; i < n; ++i) x[i] += r.products[i] - r.reactants[i];
    ++out.events;
  }
  record_until(kInf);
  return out;
}

// Runs trials [0, cfg.trials) and hands each finished trajectory to `sink`
// in trial order. Trials run in parallel; the result does not depend on the
// number of threads.
template <typename Sink>
void ssa_run(const Crn& crn, const SystemSetup& setup, const SsaConfig& cfg, Sink&& sink) {
  crn.check_setup(setup);
  cfg.validate();
  unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  const std::size_t batch = 4096;
  std::vector<Trajectory> buf;
  for (std::size_t start = 0; start < cfg.trials; start += batch) {
    const std::size_t count = std::min(batch, cfg.trials - start);
    buf.assign(count, {});
    const unsigned used = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    std::vector<std::exception_ptr> errors(used);
    auto work = [&](unsigned w) {
      try {
        for (std::size_t i = w; i < count; i += used) buf[i] = ssa_trial(crn, setup, cfg, start + i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    };
    if (used == 1) {
      work(0);
    } else {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < used; ++w) pool.emplace_back(work, w);
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    for (std::size_t i = 0; i < count; ++i) sink(start + i, buf[i]);
  }
}

inline SsaTrajectories ssa_simulate(const Crn& crn, const SystemSetup& setup, const SsaConfig& cfg) {
  SsaTrajectories out{cfg.record_times, crn.num_species(), {}};
  out.trials.reserve(cfg.trials);
  ssa_run(crn, setup, cfg, [&](std::size_t, Trajectory& tr) { out.trials.push_back(std::move(tr)); });
  return out;
}

// Mean and 95% normal-approximation half-width of a sample.
inline Estimate summarize(const std::vector<double>& samples) {
  Estimate e;
  e.trials = samples.size();
  if (samples.empty()) return e;
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= static_cast<double>(samples.size());
  double ss = 0.0;
  for (double s : samples) ss += (s - mean) * (s - mean);
  e.point = mean;
  if (samples.size() > 1) e.half_width_95 = 1.96 * std::sqrt(ss / static_cast<double>(samples.size() - 1)) /
                                            std::sqrt(static_cast<double>(samples.size()));
  return e;
}

namespace detail {
inline double dot_counts(const Combination& b, const std::int64_t* x) {
  double v = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) v += static_cast<double>(b[i]) * static_cast<double>(x[i]);
  return v;
}
}  // namespace detail

// Per-trial satisfaction of (B, I) over a window: the indicator at t1 for a
// singleton window, otherwise the trapezoid time-average of the indicator
// over the record times inside the window.
inline double trial_fraction(const Trajectory& tr, const std::vector<double>& times, std::size_t num_species,
                             const TargetSpec& spec, const TimeWindow& window) {
  auto ind = [&](std::size_t k) { return spec.intervals.contains(detail::dot_counts(spec.b, tr.at(k, num_species))) ? 1.0 : 0.0; };
  if (window.singleton()) {
    auto it = std::lower_bound(times.begin(), times.end(), window.begin);
    if (it == times.end() || *it != window.begin) throw OracleError("singleton window time is not a record time");
    return ind(static_cast<std::size_t>(it - times.begin()));
  }
  auto lo = static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), window.begin) - times.begin());
  auto hi = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), window.end) - times.begin());
  if (hi < lo + 2) throw OracleError("fewer than two record times inside the window");
  double area = 0.0;
  double prev = ind(lo);
  for (std::size_t k = lo + 1; k < hi; ++k) {
    const double cur = ind(k);
    area += 0.5 * (prev + cur) * (times[k] - times[k - 1]);
    prev = cur;
  }
  return area / (times[hi - 1] - times[lo]);
}

inline Estimate ssa_estimate_prob(const SsaTrajectories& trajs, const TargetSpec& spec, const TimeWindow& window) {
  std::vector<double> samples;
  samples.reserve(trajs.trials.size());
  for (const auto& tr : trajs.trials)
    samples.push_back(trial_fraction(tr, trajs.record_times, trajs.num_species, spec, window));
  return summarize(samples);
}

// Streaming variant for large trial counts: trajectories are not retained.
inline Estimate ssa_estimate_prob(const Crn& crn, const SystemSetup& setup, const SsaConfig& cfg,
                                  const TargetSpec& spec, const TimeWindow& window) {
  std::vector<double> samples;
  samples.reserve(cfg.trials);
  ssa_run(crn, setup, cfg, [&](std::size_t, const Trajectory& tr) {
    samples.push_back(trial_fraction(tr, cfg.record_times, crn.num_species(), spec, window));
  });
  return summarize(samples);
}

// Sample moments of B * X at each record time.
struct MomentSeries {
  std::vector<double> mean;
  std::vector<double> variance;
};

inline MomentSeries ssa_moments(const SsaTrajectories& trajs, const Combination& b) {
  const std::size_t m = trajs.record_times.size();
  MomentSeries out{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0)};
  const double n = static_cast<double>(trajs.trials.size());
  for (std::size_t k = 0; k < m; ++k) {
    double s = 0.0, s2 = 0.0;
    for (const auto& tr : trajs.trials) {
      const double v = detail::dot_counts(b, tr.at(k, trajs.num_species));
      s += v;
      s2 += v * v;
    }
    out.mean[k] = s / n;
    out.variance[k] = n > 1 ? std::max(0.0, (s2 - s * s / n) / (n - 1)) : 0.0;
  }
  return out;
}

// CSV: trial, time, one column per species.
inline void write_trajectories_csv(std::ostream& os, const Crn& crn, const SsaTrajectories& trajs) {
  os << "trial,time";
  for (const auto& s : crn.species()) os << ',' << s.name;
  os << '\n';
  for (std::size_t i = 0; i < trajs.trials.size(); ++i) {
    for (std::size_t k = 0; k < trajs.record_times.size(); ++k) {
      os << i << ',' << format_real(trajs.record_times[k]);
      const auto* x = trajs.trials[i].at(k, trajs.num_species);
      for (std::size_t j = 0; j < trajs.num_species; ++j) os << ',' << x[j];
      os << '\n';
    }
  }
}

}  // namespace lnamc
