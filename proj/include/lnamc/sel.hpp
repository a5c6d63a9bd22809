#pragma once

// Stochastic Evolution Logic over an LNA solution.
//
//   eta := P~p [B, I] over [t1,t2] | Q~v [B] over [t1,t2] | eta && eta | eta || eta
//   Q   := supE | infE | supV | infV,   ~ in {<, >}  (or =? for the quantity)
//
// Probabilities over a window are time averages of the right-continuous step
// function built from the grid; sup/inf operators scan grid points inside the
// window plus the grid point(s) nearest to t1.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lnamc/error.hpp"
#include "lnamc/format.hpp"
#include "lnamc/lna.hpp"

namespace lnamc {

enum class Comparison { kLess, kGreater, kQuery };
enum class StatKind { kSupE, kInfE, kSupV, kInfV };
enum class Junction { kAnd, kOr };

struct TimeWindow {
  double begin = 0.0;
  double end = 0.0;

  bool singleton() const { return begin == end; }
  friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

struct ProbNode {
  Comparison cmp = Comparison::kQuery;
  double threshold = 0.0;
  TargetSpec target;
  TimeWindow window;
};

struct StatNode {
  StatKind kind = StatKind::kSupE;
  Comparison cmp = Comparison::kQuery;
  double threshold = 0.0;
  Combination b;
  TimeWindow window;
};

class Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct JunctionNode {
  Junction op = Junction::kAnd;
  FormulaPtr lhs;
  FormulaPtr rhs;
};

class Formula {
 public:
  using Node = std::variant<ProbNode, StatNode, JunctionNode>;

  explicit Formula(Node node) : node_(std::move(node)) {}

  static FormulaPtr prob(ProbNode n) { return std::make_shared<const Formula>(std::move(n)); }
  static FormulaPtr stat(StatNode n) { return std::make_shared<const Formula>(std::move(n)); }
  static FormulaPtr both(FormulaPtr a, FormulaPtr b) {
    return std::make_shared<const Formula>(JunctionNode{Junction::kAnd, std::move(a), std::move(b)});
  }
  static FormulaPtr either(FormulaPtr a, FormulaPtr b) {
    return std::make_shared<const Formula>(JunctionNode{Junction::kOr, std::move(a), std::move(b)});
  }

  const Node& node() const { return node_; }

  // Latest time referenced anywhere in the formula.
  double horizon() const {
    return std::visit(
        [](const auto& n) -> double {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, JunctionNode>) return std::max(n.lhs->horizon(), n.rhs->horizon());
          else return n.window.end;
        },
        node_);
  }

  // Every window endpoint; these must be grid points of the solution.
  void collect_times(std::vector<double>& out) const {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, JunctionNode>) {
            n.lhs->collect_times(out);
            n.rhs->collect_times(out);
          } else {
            out.push_back(n.window.begin);
            out.push_back(n.window.end);
          }
        },
        node_);
  }

 private:
  Node node_;
};

struct NamedFormula {
  std::string name;
  FormulaPtr formula;
};

struct Verdict {
  std::string name;
  std::optional<bool> truth;  // absent in quantitative mode
  std::optional<double> value;
  std::optional<double> threshold;
  std::optional<double> margin;
  std::vector<Verdict> children;

  bool near_threshold() const { return margin && *margin < 1e-6; }
};

inline const char* to_string(StatKind k) {
  switch (k) {
    case StatKind::kSupE: return "supE";
    case StatKind::kInfE: return "infE";
    case StatKind::kSupV: return "supV";
    case StatKind::kInfV: return "infV";
  }
  return "?";
}

// Integer linear combination in symbolic form, e.g. "l2 - l1 - 2 l3".
inline std::string format_combination(const Combination& b, const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto c = b[i];
    if (c == 0) continue;
    const auto mag = c < 0 ? -c : c;
    if (out.empty()) out += c < 0 ? "-" : "";
    else out += c < 0 ? " - " : " + ";
    if (mag != 1) out += std::to_string(mag) + " ";
    out += names.at(i);
  }
  if (out.empty()) {
    out = "[";
    for (std::size_t i = 0; i < b.size(); ++i) out += (i ? "," : "") + std::string("0");
    out += "]";
  }
  return out;
}

inline std::string format_intervals(const IntervalSet& set) {
  std::string out = "{";
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& iv = set.intervals()[i];
    out += (i ? ", [" : "[") + format_shortest(iv.lower) + ", " + format_shortest(iv.upper) + "]";
  }
  return out + "}";
}

namespace detail {
inline std::string format_cmp(Comparison c, double threshold) {
  switch (c) {
    case Comparison::kLess: return "<" + format_shortest(threshold);
    case Comparison::kGreater: return ">" + format_shortest(threshold);
    case Comparison::kQuery: return "=?";
  }
  return "";
}
inline std::string format_window(const TimeWindow& w) {
  return "over [" + format_shortest(w.begin) + ", " + format_shortest(w.end) + "]";
}
}  // namespace detail

// Concrete syntax accepted by parse_property.
inline std::string format_formula(const Formula& f, const std::vector<std::string>& names) {
  return std::visit(
      [&](const auto& n) -> std::string {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ProbNode>) {
          return "P" + detail::format_cmp(n.cmp, n.threshold) + " [ " + format_combination(n.target.b, names) +
                 " in " + format_intervals(n.target.intervals) + " ] " + detail::format_window(n.window);
        } else if constexpr (std::is_same_v<T, StatNode>) {
          return std::string(to_string(n.kind)) + detail::format_cmp(n.cmp, n.threshold) + " [ " +
                 format_combination(n.b, names) + " ] " + detail::format_window(n.window);
        } else {
          return "(" + format_formula(*n.lhs, names) + (n.op == Junction::kAnd ? " && " : " || ") +
                 format_formula(*n.rhs, names) + ")";
        }
      },
      f.node());
}

namespace detail {
inline void check_window(const TimeWindow& w, const LnaSolution& sol) {
  if (!(w.begin <= w.end)) throw CheckError("time window has t1 > t2");
  if (w.begin < sol.grid().front() || w.end > sol.t_max())
    throw CheckError("time window [" + format_shortest(w.begin) + ", " + format_shortest(w.end) +
                     "] exceeds the solved horizon [" + format_shortest(sol.grid().front()) + ", " +
                     format_shortest(sol.t_max()) + "]");
}
}  // namespace detail

// Average probability of the target over the window; the value at t1 for a
// singleton window.
inline double eval_prob(const TargetSpec& spec, const TimeWindow& window, const LnaSolution& sol) {
  detail::check_window(window, sol);
  if (window.singleton()) {
    const auto& grid = sol.grid();
    auto idx = sol.index_of(window.begin);
    if (idx < 0) {
      // Not a grid point: use the step that covers t1.
      idx = std::upper_bound(grid.begin(), grid.end(), window.begin) - grid.begin() - 1;
    }
    return omega(combo_stats(sol, spec.b, static_cast<std::size_t>(idx)), spec.intervals);
  }
  const auto step = prob_step_function(sol, spec);
  const double avg = step.integral(window.begin, window.end) / (window.end - window.begin);
  return std::clamp(avg, 0.0, 1.0);
}

// Grid indices used for sup/inf over [t1, t2]: all grid points inside the
// window, every grid point nearest to t1, and, when the window contains no
// grid point, every grid point nearest to t2.
inline std::vector<std::size_t> window_indices(const LnaSolution& sol, const TimeWindow& window) {
  const auto& grid = sol.grid();
  std::vector<std::size_t> idx;
  auto lo = std::lower_bound(grid.begin(), grid.end(), window.begin);
  auto hi = std::upper_bound(grid.begin(), grid.end(), window.end);
  for (auto it = lo; it < hi; ++it) idx.push_back(static_cast<std::size_t>(it - grid.begin()));
  const bool empty_inside = idx.empty();

  auto add_nearest = [&](double t) {
    double best = kInf;
    for (double g : grid) best = std::min(best, std::abs(g - t));
    for (std::size_t k = 0; k < grid.size(); ++k)
      if (std::abs(grid[k] - t) == best) idx.push_back(k);
  };
  add_nearest(window.begin);
  if (empty_inside) add_nearest(window.end);
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return idx;
}

inline double eval_stat(StatKind kind, const Combination& b, const TimeWindow& window, const LnaSolution& sol) {
  detail::check_window(window, sol);
  const bool take_max = kind == StatKind::kSupE || kind == StatKind::kSupV;
  const bool use_mean = kind == StatKind::kSupE || kind == StatKind::kInfE;
  double best = take_max ? -kInf : kInf;
  for (auto k : window_indices(sol, window)) {
    const auto s = combo_stats(sol, b, k);
    const double v = use_mean ? s.mean : s.variance;
    best = take_max ? std::max(best, v) : std::min(best, v);
  }
  return best;
}

namespace detail {
inline Verdict leaf_verdict(std::string name, Comparison cmp, double threshold, double value) {
  Verdict v;
  v.name = std::move(name);
  v.value = value;
  if (cmp != Comparison::kQuery) {
    v.threshold = threshold;
    v.truth = cmp == Comparison::kLess ? value < threshold : value > threshold;
    v.margin = std::abs(value - threshold);
  }
  return v;
}
}  // namespace detail

// Evaluates a formula by structural recursion. Junctions report every child.
inline Verdict check(const Formula& f, const LnaSolution& sol, const std::vector<std::string>& names,
                     std::string name = {}) {
  if (name.empty()) name = format_formula(f, names);
  return std::visit(
      [&](const auto& n) -> Verdict {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ProbNode>) {
          return detail::leaf_verdict(name, n.cmp, n.threshold, eval_prob(n.target, n.window, sol));
        } else if constexpr (std::is_same_v<T, StatNode>) {
          return detail::leaf_verdict(name, n.cmp, n.threshold, eval_stat(n.kind, n.b, n.window, sol));
        } else {
          Verdict v;
          v.name = name;
          v.children.push_back(check(*n.lhs, sol, names));
          v.children.push_back(check(*n.rhs, sol, names));
          const auto& a = v.children[0];
          const auto& b = v.children[1];
          if (a.truth && b.truth) {
            v.truth = n.op == Junction::kAnd ? (*a.truth && *b.truth) : (*a.truth || *b.truth);
            v.margin = std::min(*a.margin, *b.margin);
          }
          return v;
        }
      },
      f.node());
}

inline nlohmann::ordered_json to_json(const Verdict& v) {
  auto opt = [](const auto& o) -> nlohmann::ordered_json {
    if (!o) return nullptr;
    return *o;
  };
  nlohmann::ordered_json j;
  j["name"] = v.name;
  j["truth"] = opt(v.truth);
  j["value"] = opt(v.value);
  j["threshold"] = opt(v.threshold);
  j["margin"] = opt(v.margin);
  j["children"] = nlohmann::ordered_json::array();
  for (const auto& c : v.children) j["children"].push_back(to_json(c));
  return j;
}

// Grid requirements for checking a set of formulas: every window endpoint is
// a required time and the horizon is the latest endpoint.
struct CheckPlan {
  double horizon = 0.0;
  std::vector<double> required_times;
};

inline CheckPlan plan_check(const std::vector<NamedFormula>& formulas) {
  CheckPlan plan;
  for (const auto& nf : formulas) {
    plan.horizon = std::max(plan.horizon, nf.formula->horizon());
    nf.formula->collect_times(plan.required_times);
  }
  std::sort(plan.required_times.begin(), plan.required_times.end());
  plan.required_times.erase(std::unique(plan.required_times.begin(), plan.required_times.end()),
                            plan.required_times.end());
  return plan;
}

// Solves the LNA once up to the latest formula time with a minimum sampling
// density of `density` grid intervals over the horizon (0 disables it).
inline LnaSolution solve_for(const Crn& crn, const SystemSetup& setup, const std::vector<NamedFormula>& formulas,
                             IntegratorConfig cfg = {}, double density = 1000.0) {
  auto plan = plan_check(formulas);
  double horizon = plan.horizon > 0.0 ? plan.horizon : 1.0;
  if (density > 0.0) {
    const double cap = horizon / density;
    cfg.max_step = cfg.max_step > 0.0 ? std::min(cfg.max_step, cap) : cap;
  }
  return solve_lna(crn, setup, horizon, cfg, std::move(plan.required_times));
}

}  // namespace lnamc
