#pragma once

// Linear noise approximation of the chemical master equation.
//
// Counts are approximated by Y = N*phi(t) + sqrt(N)*Z(t) where phi solves the
// mass-action rate equations and Z is a zero-mean Gaussian whose covariance C
// solves  C' = J C + C J^T + G  with C(0) = 0. E[Z] stays identically zero and
// is never integrated. Both phi and C are independent of N.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lnamc/crn.hpp"
#include "lnamc/error.hpp"
#include "lnamc/format.hpp"
#include "lnamc/gaussian.hpp"
#include "lnamc/ode.hpp"

namespace lnamc {

using Combination = std::vector<std::int64_t>;

// Observable: linear combination B of species counts and a target set I.
struct TargetSpec {
  Combination b;
  IntervalSet intervals;
};

struct GaussianSummary {
  double mean = 0.0;
  double variance = 0.0;
};

class LnaSolution {
 public:
  LnaSolution(SystemSetup setup, std::vector<double> grid, std::vector<Concentration> phi,
              std::vector<Matrix> cov_z)
      : setup_(std::move(setup)), grid_(std::move(grid)), phi_(std::move(phi)), cov_(std::move(cov_z)) {
    for (const auto& c : cov_) max_cov_norm_ = std::max(max_cov_norm_, c.norm());
  }

  const SystemSetup& setup() const { return setup_; }
  double volume() const { return setup_.volume; }
  std::size_t num_species() const { return setup_.initial_counts.size(); }
  const std::vector<double>& grid() const { return grid_; }
  std::size_t size() const { return grid_.size(); }
  double t_max() const { return grid_.back(); }
  const Concentration& phi(std::size_t k) const { return phi_.at(k); }
  const Matrix& cov_z(std::size_t k) const { return cov_.at(k); }

  // Largest Frobenius norm of C[Z] over the grid; the Gaussian approximation
  // is only meaningful while this stays bounded.
  double max_cov_norm() const { return max_cov_norm_; }

  // Index of the grid point equal to t, or -1.
  std::ptrdiff_t index_of(double t) const {
    auto it = std::lower_bound(grid_.begin(), grid_.end(), t);
    if (it == grid_.end() || *it != t) return -1;
    return it - grid_.begin();
  }

 private:
  SystemSetup setup_;
  std::vector<double> grid_;
  std::vector<Concentration> phi_;
  std::vector<Matrix> cov_;
  double max_cov_norm_ = 0.0;
};

namespace detail {

inline Eigen::Index packed_size(Eigen::Index n) { return n * (n + 1) / 2; }

inline void pack_upper(const Matrix& m, Eigen::Ref<Vector> out) {
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = i; j < m.cols(); ++j) out[k++] = m(i, j);
}

inline Matrix unpack_upper(const Eigen::Ref<const Vector>& v, Eigen::Index n) {
  Matrix m(n, n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) m(i, j) = m(j, i) = v[k++];
  return m;
}

}  // namespace detail

// Solves the coupled mean/covariance system on [0, t_max].
inline LnaSolution solve_lna(const Crn& crn, const SystemSetup& setup, double t_max,
                             const IntegratorConfig& cfg = {}, std::vector<double> required_times = {}) {
  crn.check_setup(setup);
  if (!(t_max > 0.0) || !std::isfinite(t_max)) throw Error("LNA horizon t_max must be positive");
  const auto n = static_cast<Eigen::Index>(crn.num_species());
  const auto m = detail::packed_size(n);

  Vector x0 = Vector::Zero(n + m);
  x0.head(n) = setup.initial_concentration();

  Vector phi_pos(n);
  Matrix cov(n, n), dcov(n, n);
  auto field = [&](double, const Vector& x, Vector& dx) {
    phi_pos = x.head(n).cwiseMax(0.0);
    const Matrix jac = jacobian(crn, phi_pos);
    cov = detail::unpack_upper(x.tail(m), n);
    dcov.noalias() = jac * cov;
    dcov += dcov.transpose().eval();
    dcov += diffusion(crn, phi_pos);
    dx.resize(n + m);
    dx.head(n) = drift(crn, phi_pos);
    detail::pack_upper(dcov, dx.tail(m));
  };

  SampledSolution sol = integrate(field, x0, 0.0, t_max, cfg, std::move(required_times));

  std::vector<Concentration> phis;
  std::vector<Matrix> covs;
  phis.reserve(sol.times.size());
  covs.reserve(sol.times.size());
  const double blowup = 100.0 * cfg.abs_tol;
  for (std::size_t k = 0; k < sol.times.size(); ++k) {
    Concentration phi = sol.states[k].head(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (phi[i] < -blowup)
        throw IntegrationError(sol.times[k], "concentration of '" + crn.species()[static_cast<std::size_t>(i)].name +
                                                  "' became negative");
      if (phi[i] < 0.0) phi[i] = 0.0;
    }
    phis.push_back(std::move(phi));
    covs.push_back(detail::unpack_upper(sol.states[k].tail(m), n));
  }
  return LnaSolution(setup, std::move(sol.times), std::move(phis), std::move(covs));
}

// Mean and variance of B*Y at grid point t_index, in molecule units.
inline GaussianSummary combo_stats(const LnaSolution& sol, const Combination& b, std::size_t t_index) {
  if (b.size() != sol.num_species()) throw Error("combination length does not match the number of species");
  const auto n = static_cast<Eigen::Index>(b.size());
  Vector bv(n);
  for (Eigen::Index i = 0; i < n; ++i) bv[i] = static_cast<double>(b[static_cast<std::size_t>(i)]);
  const double volume = sol.volume();
  const Matrix& c = sol.cov_z(t_index);
  GaussianSummary s;
  s.mean = bv.dot(volume * sol.phi(t_index));
  s.variance = volume * bv.dot(c * bv);
  if (s.variance < 0.0) {
    const double scale = std::max(1.0, volume * (bv.cwiseAbs().dot(c.cwiseAbs() * bv.cwiseAbs())));
    if (-s.variance > 1e-9 * scale)
      throw Error("covariance lost positive semi-definiteness at t=" + std::to_string(sol.grid()[t_index]));
    s.variance = 0.0;
  }
  return s;
}

// Gaussian probability that B*Y lies in the interval set.
inline double omega(const GaussianSummary& s, const IntervalSet& intervals) {
  if (intervals.empty()) return 0.0;
  if (s.variance < 1e-12 * std::max(1.0, s.mean * s.mean)) return intervals.contains(s.mean) ? 1.0 : 0.0;
  const double sd = std::sqrt(s.variance);
  double p = 0.0;
  for (const auto& iv : intervals.intervals()) p += normal_mass(s.mean, sd, iv);
  return std::clamp(p, 0.0, 1.0);
}

// Right-continuous step function holding values[i] on [times[i], times[i+1]).
// The last value holds from times.back() onwards.
class StepFunction {
 public:
  StepFunction(std::vector<double> times, std::vector<double> values)
      : times_(std::move(times)), values_(std::move(values)) {
    if (times_.empty() || times_.size() != values_.size()) throw Error("malformed step function");
  }

  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }

  double operator()(double t) const {
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    if (it == times_.begin()) return values_.front();
    return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
  }

  // Exact integral over [a, b], a <= b.
  double integral(double a, double b) const {
    double total = 0.0;
    for (std::size_t i = 0; i < times_.size(); ++i) {
      const double lo = std::max(a, times_[i]);
      const double hi = std::min(b, i + 1 < times_.size() ? times_[i + 1] : b);
      if (hi > lo) total += values_[i] * (hi - lo);
    }
    if (a < times_.front()) total += values_.front() * (std::min(b, times_.front()) - a);
    return total;
  }

 private:
  std::vector<double> times_;
  std::vector<double> values_;
};

inline StepFunction prob_step_function(const LnaSolution& sol, const TargetSpec& spec) {
  std::vector<double> values(sol.size());
  for (std::size_t k = 0; k < sol.size(); ++k) values[k] = omega(combo_stats(sol, spec.b, k), spec.intervals);
  return StepFunction(sol.grid(), std::move(values));
}

struct TraceColumn {
  std::string label;
  Combination b;
  std::optional<IntervalSet> intervals;  // adds a probability column when set
};

// One column per species: mean and standard deviation of its count.
inline std::vector<TraceColumn> species_columns(const Crn& crn) {
  std::vector<TraceColumn> cols;
  for (const auto& sp : crn.species()) {
    Combination b(crn.num_species(), 0);
    b[sp.index] = 1;
    cols.push_back({sp.name, std::move(b), std::nullopt});
  }
  return cols;
}

// CSV with a time column followed by mean_<label>, sd_<label> and, for
// columns with a target set, prob_<label>.
inline void write_trace_csv(std::ostream& os, const LnaSolution& sol, const std::vector<TraceColumn>& columns) {
  os << "time";
  for (const auto& c : columns) {
    os << ",mean_" << c.label << ",sd_" << c.label;
    if (c.intervals) os << ",prob_" << c.label;
  }
  os << '\n';
  for (std::size_t k = 0; k < sol.size(); ++k) {
    os << format_real(sol.grid()[k]);
    for (const auto& c : columns) {
      const auto s = combo_stats(sol, c.b, k);
      os << ',' << format_real(s.mean) << ',' << format_real(std::sqrt(s.variance));
      if (c.intervals) os << ',' << format_real(omega(s, *c.intervals));
    }
    os << '\n';
  }
}

}  // namespace lnamc
