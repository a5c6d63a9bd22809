#pragma once

// Adaptive Dormand-Prince 5(4) integrator with PI step-size control and the
// standard fourth-order continuous extension for dense output.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "lnamc/error.hpp"

namespace lnamc {

struct IntegratorConfig {
  double rel_tol = 1e-6;
  double abs_tol = 1e-9;
  double max_step = 0.0;      // 0: unbounded (the whole horizon)
  double initial_step = 0.0;  // 0: automatic
  std::size_t max_steps = 1'000'000;

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw Error("integrator tolerances must be positive");
    if (max_step < 0.0 || initial_step < 0.0) throw Error("step bounds must be non-negative");
    if (max_steps == 0) throw Error("max_steps must be positive");
  }
};

struct SampledSolution {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
};

namespace dopri {
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                        a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;
inline constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                        d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                        d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;
}  // namespace dopri

// Integrates x' = field(t, x) on [t0, t_max]. `field` has the signature
// void(double t, const Eigen::VectorXd& x, Eigen::VectorXd& dxdt).
//
// The returned grid is the union of accepted step ends and required_times that
// fall inside [t0, t_max]; required times appear bit-for-bit as requested.
template <typename Field>
SampledSolution integrate(Field&& field, const Eigen::VectorXd& x0, double t0, double t_max,
                          const IntegratorConfig& cfg, std::vector<double> required_times = {}) {
  using Eigen::VectorXd;
  using namespace dopri;
  cfg.validate();
  if (!(t_max >= t0) || !std::isfinite(t0) || !std::isfinite(t_max))
    throw Error("integration horizon must satisfy t0 <= t_max");
  if (!x0.allFinite()) throw IntegrationError(t0, "non-finite initial state");

  std::erase_if(required_times, [&](double t) { return !(t > t0 && t < t_max); });
  std::sort(required_times.begin(), required_times.end());
  required_times.erase(std::unique(required_times.begin(), required_times.end()), required_times.end());

  SampledSolution out;
  out.times.push_back(t0);
  out.states.push_back(x0);
  if (t_max == t0) return out;

  const auto n = x0.size();
  const double horizon = t_max - t0;
  const double hmax = cfg.max_step > 0.0 ? std::min(cfg.max_step, horizon) : horizon;

  VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), y(n), y1(n), tmp(n), err(n);
  VectorXd r1(n), r2(n), r3(n), r4(n), r5(n);
  double t = t0;
  y = x0;
  field(t, y, k1);

  auto scaled_norm = [&](const VectorXd& v, const VectorXd& a, const VectorXd& b) {
    if (n == 0) return 0.0;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(a[i]), std::abs(b[i]));
      sum += (v[i] / sc) * (v[i] / sc);
    }
    return std::sqrt(sum / static_cast<double>(n));
  };

  double h = cfg.initial_step;
  if (h <= 0.0) {
    // Hairer-Wanner starting step heuristic.
    const double d0 = scaled_norm(y, y, y);
    const double d1n = scaled_norm(k1, y, y);
    double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
    h0 = std::min(h0, hmax);
    tmp = y + h0 * k1;
    field(t + h0, tmp, k2);
    const double d2 = scaled_norm(VectorXd((k2 - k1) / h0), y, y);
    const double dm = std::max(d1n, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 1.0 / 5.0);
    h = std::min({100 * h0, h1, hmax});
  }
  h = std::min(h, hmax);

  constexpr double safety = 0.9, fac_min = 0.2, fac_max = 10.0, beta = 0.04;
  const double expo = 0.2 - beta * 0.75;
  double err_old = 1e-4;
  bool last_rejected = false;
  std::size_t next_req = 0;

  while (t < t_max) {
    if (out.accepted_steps + out.rejected_steps >= cfg.max_steps)
      throw IntegrationError(t, "maximum number of steps exceeded");
    if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t)))
      throw IntegrationError(t, "step size underflow (problem is likely stiff)");
    bool final_step = false;
    if (t + h >= t_max || t + 1.01 * h >= t_max) {
      h = t_max - t;
      final_step = true;
    }

    tmp = y + h * (a21 * k1);
    field(t + c2 * h, tmp, k2);
    tmp = y + h * (a31 * k1 + a32 * k2);
    field(t + c3 * h, tmp, k3);
    tmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    field(t + c4 * h, tmp, k4);
    tmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    field(t + c5 * h, tmp, k5);
    tmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    field(t + h, tmp, k6);
    y1 = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    const double t_new = final_step ? t_max : t + h;
    field(t_new, y1, k7);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double e = scaled_norm(err, y, y1);
    if (!std::isfinite(e)) e = 1e10;

    if (e <= 1.0) {
      if (!y1.allFinite()) throw IntegrationError(t_new, "non-finite state");
      // Dense output for required times strictly inside (t, t_new).
      if (next_req < required_times.size() && required_times[next_req] < t_new) {
        r1 = y;
        r2 = y1 - y;
        r3 = h * k1 - r2;
        r4 = r2 - h * k7 - r3;
        r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
        while (next_req < required_times.size() && required_times[next_req] < t_new) {
          const double s = (required_times[next_req] - t) / h;
          const double s1 = 1.0 - s;
          out.times.push_back(required_times[next_req]);
          out.states.push_back(r1 + s * (r2 + s1 * (r3 + s * (r4 + s1 * r5))));
          ++next_req;
        }
      }
      if (next_req < required_times.size() && required_times[next_req] == t_new) ++next_req;
      t = t_new;
      y = y1;
      k1 = k7;
      out.times.push_back(t);
      out.states.push_back(y);
      ++out.accepted_steps;

      const double fac11 = std::pow(std::max(e, 1e-16), expo);
      double fac = fac11 / std::pow(err_old, beta);
      fac = std::clamp(fac / safety, 1.0 / fac_max, 1.0 / fac_min);
      double h_new = h / fac;
      if (last_rejected) h_new = std::min(h_new, h);
      err_old = std::max(e, 1e-4);
      last_rejected = false;
      h = std::min(h_new, hmax);
    } else {
      ++out.rejected_steps;
      const double fac11 = std::pow(e, expo);
      h = h / std::min(1.0 / fac_min, fac11 / safety);
      last_rejected = true;
    }
  }
  out.times.back() = t_max;
  return out;
}

}  // namespace lnamc
