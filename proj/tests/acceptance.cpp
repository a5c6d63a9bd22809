// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <boost/math/special_functions/erf.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lnamc/lnamc.hpp"
#include "support/random_crn.hpp"

using namespace lnamc;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

int failures = 0;

void report(const std::string& id, bool ok, const std::string& detail) {
  std::printf("%s [%s] %s\n", ok ? "PASS" : "FAIL", id.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(double x) { return format_real(x, 4); }

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

Combination unit(std::size_t n, std::size_t i) {
  Combination b(n, 0);
  b[i] = 1;
  return b;
}

IntegratorConfig tight() {
  IntegratorConfig cfg;
  cfg.rel_tol = 1e-10;
  cfg.abs_tol = 1e-13;
  return cfg;
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  out.back() = b;
  return out;
}

// ---------------------------------------------------------------------------

void poisson_exactness() {
  const auto start = Clock::now();
  const double k = 1.0, volume = 100.0, t_max = 5.0, eps = 1e-7;
  const Crn birth({"x"}, {{{0}, {1}, k}});
  const SystemSetup setup{{0}, volume};

  const auto sol = solve_lna(birth, setup, t_max);
  double worst_lna = 0.0;
  for (std::size_t i = 0; i < sol.size(); ++i) {
    const double t = sol.grid()[i];
    if (t == 0.0) continue;
    const auto s = combo_stats(sol, {1}, i);
    worst_lna = std::max({worst_lna, rel_err(s.mean, volume * k * t), rel_err(s.variance, volume * k * t)});
  }

  const std::vector<double> times = {0.5, 1.0, 2.5, 5.0};
  const TruncatedStateSpace space(birth, setup, {static_cast<std::int64_t>(10 * volume * k * t_max)});
  const auto results = uniformisation_transient(space, times, eps);
  double worst_excess = -kInf;
  for (std::size_t j = 0; j < times.size(); ++j) {
    const double lambda = volume * k * times[j];
    const double allowed = eps + results[j].boundary_mass;
    for (std::size_t s = 0; s < space.size(); ++s) {
      const double x = static_cast<double>(space.states()[s][0]);
      const double pmf = std::exp(-lambda + x * std::log(lambda) - std::lgamma(x + 1.0));
      worst_excess = std::max(worst_excess, std::abs(results[j].probabilities[s] - pmf) - allowed);
    }
  }
  const double elapsed = seconds_since(start);
  report("1", worst_lna <= 1e-6 && worst_excess <= 0.0 && elapsed < 5.0,
         "Poisson exactness: LNA max rel err " + fmt(worst_lna) + " (<= 1e-6), uniformisation pmf excess over eps+boundary " +
             fmt(worst_excess) + " (<= 0), " + fmt(elapsed) + " s (< 5 s)");
}

void monomolecular_exactness() {
  const auto start = Clock::now();
  const Crn chain({"l1", "l2", "l3"}, {{{1, 0, 0}, {0, 1, 0}, 1.0}, {{0, 1, 0}, {0, 0, 1}, 1.0}});
  const SystemSetup setup{{50, 0, 0}, 50.0};
  const std::vector<double> times = {0.5, 1.0, 2.0};
  const auto sol = solve_lna(chain, setup, 2.0, tight(), times);
  const TruncatedStateSpace space(chain, setup, {50, 50, 50});
  const auto results = uniformisation_transient(space, times, 1e-10);
  double worst = 0.0;
  for (std::size_t j = 0; j < times.size(); ++j) {
    const auto k = static_cast<std::size_t>(sol.index_of(times[j]));
    for (std::size_t i = 0; i < 3; ++i) {
      const auto lna = combo_stats(sol, unit(3, i), k);
      const auto exact = transient_moments(space, results[j], unit(3, i));
      worst = std::max({worst, rel_err(lna.mean, exact.mean), rel_err(lna.variance, exact.variance)});
    }
  }
  const double elapsed = seconds_since(start);
  report("2", worst <= 1e-3 && elapsed < 60.0,
         "monomolecular chain: LNA vs uniformisation max rel err " + fmt(worst) + " (<= 1e-3) at t=0.5,1,2, " + fmt(elapsed) +
             " s (< 60 s)");
}

Crn cascade() {
  return Crn({"l1", "l2", "l3"}, {{{1, 1, 0}, {0, 2, 0}, 10.0}, {{0, 1, 1}, {0, 0, 2}, 10.0}});
}

void cascade_probability() {
  const auto crn = cascade();
  const SystemSetup setup{{98, 1, 1}, 1000.0};
  const TargetSpec spec{{-1, 1, -1}, IntervalSet({{0.0, kInf}})};
  const TimeWindow window{0.5, 1.0};
  const auto formula = Formula::prob({Comparison::kQuery, 0.0, spec, window});
  const auto sol = solve_for(crn, setup, {{"p", formula}});
  const double lna = *check(*formula, sol, {"l1", "l2", "l3"}).value;

  SsaConfig cfg;
  cfg.trials = 100000;
  cfg.seed = 2024;
  cfg.t_max = 1.0;
  cfg.record_times = linspace(0.5, 1.0, 101);
  const auto est = ssa_estimate_prob(crn, setup, cfg, spec, window);
  const double diff = std::abs(lna - est.point);
  report("3a", diff <= 0.05,
         "cascade P=?[l2-l1-l3 in [0,inf]] over [0.5,1]: LNA " + fmt(lna) + ", SSA " + fmt(est.point) + " +- " +
             fmt(est.half_width_95) + " (1e5 trials), |diff| " + fmt(diff) + " (<= 0.05)");
}

void cascade_shape() {
  const auto crn = cascade();
  const SystemSetup setup{{98, 1, 1}, 1000.0};
  IntegratorConfig cfg;
  cfg.max_step = 2.0 / 1000;
  const auto sol = solve_lna(crn, setup, 2.0, cfg);
  std::vector<double> mean(sol.size());
  for (std::size_t k = 0; k < sol.size(); ++k) mean[k] = combo_stats(sol, {0, 1, 0}, k).mean;
  const auto peak = static_cast<std::size_t>(std::max_element(mean.begin(), mean.end()) - mean.begin());
  bool unimodal = peak > 0 && peak + 1 < mean.size();
  for (std::size_t k = 1; unimodal && k < mean.size(); ++k)
    unimodal = k <= peak ? mean[k] >= mean[k - 1] : mean[k] <= mean[k - 1];
  report("3b", unimodal,
         "cascade E[#l2] single interior maximum on [0,2]: max " + fmt(mean[peak]) + " at t=" + fmt(sol.grid()[peak]) +
             " (E[#l2] at t=0,0.5,1,2: " + fmt(mean.front()) + ", " +
             fmt(combo_stats(sol, {0, 1, 0}, sol.size() / 4).mean) + ", " +
             fmt(combo_stats(sol, {0, 1, 0}, sol.size() / 2).mean) + ", " + fmt(mean.back()) + ")");
}

void gaussian_machinery() {
  using boost::multiprecision::cpp_bin_float_50;
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  double worst_partition = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double mean = 50.0 * u(gen), sd = std::exp(3.0 * u(gen));
    std::vector<double> cuts = {mean + 3 * sd * u(gen), mean + 3 * sd * u(gen), mean + 3 * sd * u(gen)};
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::vector<Interval> parts;
    double lo = -kInf;
    for (double c : cuts) {
      parts.push_back({lo, c});
      lo = std::nextafter(c, kInf);
    }
    parts.push_back({lo, kInf});
    const double total = omega({mean, sd * sd}, IntervalSet(parts));
    worst_partition = std::max(worst_partition, std::abs(total - 1.0));
  }

  double worst_band = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double mean = 100.0 * u(gen), sd = std::exp(3.0 * u(gen));
    const double p = omega({mean, sd * sd}, IntervalSet({{mean - 1.96 * sd, mean + 1.96 * sd}}));
    worst_band = std::max(worst_band, std::abs(p - 0.95));
  }

  std::uniform_real_distribution<double> z(-12.0, 12.0);
  double worst_cdf = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double x = z(gen);
    const cpp_bin_float_50 hp = cpp_bin_float_50(0.5) * boost::math::erfc(-cpp_bin_float_50(x) / sqrt(cpp_bin_float_50(2)));
    worst_cdf = std::max(worst_cdf, std::abs(static_cast<double>(cpp_bin_float_50(normal_cdf(x)) - hp)));
  }
  report("4", worst_partition <= 1e-9 && worst_band <= 1e-4 && worst_cdf <= 1e-10,
         "Gaussian machinery: partition |sum-1| " + fmt(worst_partition) + " (<= 1e-9), 1.96 sd band |p-0.95| " +
             fmt(worst_band) + " (<= 1e-4), CDF abs err " + fmt(worst_cdf) + " on 1e4 points (<= 1e-10)");
}

void structural_invariants() {
  const auto start = Clock::now();
  std::mt19937_64 gen(55);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_asym = 0.0, worst_neg_eig = 0.0, worst_cons = 0.0, worst_jac = 0.0;
  for (int net = 0; net < 50; ++net) {
    const auto crn = lnamc::testing::random_crn(gen);
    const auto setup = lnamc::testing::random_setup(gen, crn);
    const auto sol = solve_lna(crn, setup, 1.0);
    const auto basis = conservation_vectors(crn);
    for (std::size_t k = 0; k < sol.size(); k += std::max<std::size_t>(1, sol.size() / 20)) {
      const Matrix& c = sol.cov_z(k);
      const double scale = std::max(1.0, c.norm());
      worst_asym = std::max(worst_asym, (c - c.transpose()).norm() / scale);
      const Eigen::SelfAdjointEigenSolver<Matrix> eig(c);
      worst_neg_eig = std::max(worst_neg_eig, -eig.eigenvalues().minCoeff() / scale);
      for (const auto& w : basis) {
        Vector wv(c.rows());
        for (Eigen::Index i = 0; i < wv.size(); ++i) wv[i] = static_cast<double>(w[static_cast<std::size_t>(i)]);
        worst_cons = std::max(worst_cons, std::abs(wv.dot(c * wv)) / (scale * std::max(1.0, wv.squaredNorm())));
      }
    }
    Vector phi(static_cast<Eigen::Index>(crn.num_species()));
    for (auto& x : phi) x = u(gen);
    const Matrix j = jacobian(crn, phi);
    for (Eigen::Index col = 0; col < phi.size(); ++col) {
      const double h = 1e-6;
      Vector up = phi, down = phi;
      up[col] += h;
      down[col] -= h;
      const Vector fd = (drift(crn, up) - drift(crn, down)) / (2 * h);
      worst_jac = std::max(worst_jac, (fd - j.col(col)).cwiseAbs().maxCoeff());
    }
  }
  const double elapsed = seconds_since(start);
  report("5",
         worst_asym <= 1e-12 && worst_neg_eig <= 1e-9 && worst_cons <= 1e-9 && worst_jac <= 1e-6 && elapsed < 120.0,
         "structural invariants on 50 random CRNs: asymmetry " + fmt(worst_asym) + ", most negative eigenvalue " +
             fmt(-worst_neg_eig) + " (relative), conserved-direction variance " + fmt(worst_cons) +
             ", Jacobian vs finite differences " + fmt(worst_jac) + " (<= 1e-6), " + fmt(elapsed) + " s (< 120 s)");
}

void complexity() {
  std::mt19937_64 gen(606);
  lnamc::testing::RandomCrnShape shape;
  shape.min_species = shape.max_species = 50;
  shape.min_reactions = shape.max_reactions = 100;
  const auto crn = lnamc::testing::random_crn(gen, shape);
  const auto small = lnamc::testing::random_setup(gen, crn, 100.0);
  SystemSetup large = small;
  large.volume *= 1e6;
  for (auto& x : large.initial_counts) x *= 1'000'000;

  // Batches of solves, interleaved between the two scales, best batch kept.
  auto batch = [&](const SystemSetup& setup) {
    const auto start = Clock::now();
    for (int rep = 0; rep < 10; ++rep) solve_lna(crn, setup, 1.0);
    return seconds_since(start) / 10.0;
  };
  batch(small);
  double t_small = kInf, t_large = kInf;
  for (int round = 0; round < 7; ++round) {
    t_small = std::min(t_small, batch(small));
    t_large = std::min(t_large, batch(large));
  }
  const double spread = std::abs(t_large - t_small) / std::min(t_small, t_large);

  std::string unif = "accepted";
  bool refused = false;
  const auto sol = solve_lna(crn, large, 1.0);
  try {
    const TruncatedStateSpace space(crn, large, lna_bounds(sol));
  } catch (const OracleError& e) {
    refused = true;
    unif = std::string("refused (") + e.what() + ")";
  }
  report("6", spread < 0.2 && refused,
         "50 species / 100 reactions: LNA " + fmt(t_small) + " s at x1 vs " + fmt(t_large) + " s at x1e6, relative gap " +
             fmt(spread) + " (< 0.2); uniformisation at x1e6 " + unif);
}

bool compare(double value, Comparison cmp, double threshold) {
  return cmp == Comparison::kGreater ? value > threshold : value < threshold;
}

void sel_semantics() {
  std::vector<std::string> problems;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  };

  {
    const auto m = parse_model("species a=7, b=3; N=10;");
    const auto props = parse_property(
        "supE>7 [a] over [0,1]; supE<7 [a] over [0,1]; supE>6.5 [a] over [0,1];"
        "supE>100 [a] over [0,1] && supE>1 [b] over [0,1];"
        "supE>1 [a] over [0,1] || supE>100 [b] over [0,1];"
        "P=? [a - b in [4,4]] over [0.5,0.5]",
        m.crn);
    const auto sol = solve_for(m.crn, m.setup, props.formulas);
    const auto names = species_names(m.crn);
    auto v = [&](std::size_t i) { return check(*props.formulas[i].formula, sol, names); };
    expect(!*v(0).truth && !*v(1).truth && *v(2).truth, "strict comparison at equality");
    const auto conj = v(3);
    expect(!*conj.truth && conj.children.size() == 2 && !*conj.children[0].truth && *conj.children[1].truth,
           "conjunction with a false side");
    expect(*v(4).truth && v(4).children.size() == 2, "disjunction with a true side");
    expect(!v(5).truth && *v(5).value == 1.0, "singleton window");
  }
  {
    const SystemSetup setup{{0}, 1.0};
    const LnaSolution sol(setup, {0.0, 1.0, 2.0, 3.0}, std::vector<Concentration>(4, Concentration::Zero(1)),
                          std::vector<Matrix>(4, Matrix::Zero(1, 1)));
    using I = std::vector<std::size_t>;
    expect(window_indices(sol, {1.2, 1.4}) == I{1}, "window between grid points");
    expect(window_indices(sol, {1.4, 1.7}) == I{1, 2}, "nearest to t1 and t2");
    expect(window_indices(sol, {1.5, 1.5}) == I{1, 2}, "tie at t1");
    expect(window_indices(sol, {0.4, 2.0}) == I{0, 1, 2}, "nearest to t1 kept with interior points");
  }

  // Quantitative and boolean readings agree on random formulas.
  std::mt19937_64 gen(707);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t agreed = 0, total = 0;
  for (int net = 0; net < 50; ++net) {
    const auto crn = lnamc::testing::random_crn(gen);
    const auto setup = lnamc::testing::random_setup(gen, crn);
    const std::size_t n = crn.num_species();
    std::vector<FormulaPtr> queries;
    for (int f = 0; f < 20; ++f) {
      Combination b(n);
      for (auto& x : b) x = static_cast<std::int64_t>(gen() % 5) - 2;
      double t1 = u(gen), t2 = u(gen);
      if (t1 > t2) std::swap(t1, t2);
      if (gen() % 4 == 0) t2 = t1;
      if (gen() % 2) {
        const double c = 100.0 * (u(gen) - 0.5);
        queries.push_back(Formula::prob({Comparison::kQuery, 0.0, {b, IntervalSet({{c - 30 * u(gen), c}})}, {t1, t2}}));
      } else {
        queries.push_back(Formula::stat({static_cast<StatKind>(gen() % 4), Comparison::kQuery, 0.0, b, {t1, t2}}));
      }
    }
    std::vector<NamedFormula> named;
    for (const auto& q : queries) named.push_back({"q", q});
    const auto sol = solve_for(crn, setup, named);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back("s" + std::to_string(i));

    for (const auto& q : queries) {
      const double value = *check(*q, sol, names).value;
      const Comparison cmp = gen() % 2 ? Comparison::kGreater : Comparison::kLess;
      const double threshold = gen() % 5 == 0 ? value : value + (u(gen) - 0.5) * (1.0 + std::abs(value));
      FormulaPtr boolean;
      if (const auto* p = std::get_if<ProbNode>(&q->node())) {
        auto node = *p;
        node.cmp = cmp;
        node.threshold = std::clamp(threshold, 0.0, 1.0);
        boolean = Formula::prob(node);
      } else {
        auto node = std::get<StatNode>(q->node());
        node.cmp = cmp;
        node.threshold = threshold;
        boolean = Formula::stat(node);
      }
      const auto verdict = check(*boolean, sol, names);
      const double th = *verdict.threshold;
      ++total;
      if (verdict.truth && *verdict.truth == compare(value, cmp, th) && *verdict.value == value) ++agreed;
    }
  }
  expect(agreed == total, "quantitative/boolean agreement " + std::to_string(agreed) + "/" + std::to_string(total));

  std::string detail = "SEL semantics: strictness, junctions, singleton window, window rule; quantitative/boolean agreement on " +
                       std::to_string(agreed) + "/" + std::to_string(total) + " random formulas";
  for (const auto& p : problems) detail += "; failed: " + p;
  report("7", problems.empty() && total == 1000, detail);
}

std::string hex_hash(const std::string& s) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016zx", std::hash<std::string>{}(s));
  return buf;
}

void determinism() {
  const auto crn = cascade();
  const SystemSetup setup{{98, 1, 1}, 1000.0};
  auto ssa_csv = [&](unsigned threads) {
    SsaConfig cfg;
    cfg.trials = 5000;
    cfg.seed = 99;
    cfg.t_max = 2.0;
    cfg.record_times = linspace(0.0, 2.0, 21);
    cfg.threads = threads;
    std::ostringstream os;
    write_trajectories_csv(os, crn, ssa_simulate(crn, setup, cfg));
    return os.str();
  };
  auto trace_csv = [&] {
    std::ostringstream os;
    write_trace_csv(os, solve_lna(crn, setup, 2.0), species_columns(crn));
    return os.str();
  };
  auto verdict_json = [&] {
    const auto m = parse_model(format_model({crn, setup}));
    const auto props = parse_property("P>0.6 [l2 - l1 - l3 in [0, inf]] over [0.5, 1]; supE<75 [l2] over [0, 2]", m.crn);
    const auto sol = solve_for(m.crn, m.setup, props.formulas);
    std::string out;
    for (const auto& nf : props.formulas) out += to_json(check(*nf.formula, sol, species_names(m.crn), nf.name)).dump();
    return out;
  };
  const std::string a1 = ssa_csv(1), a2 = ssa_csv(1), a3 = ssa_csv(4);
  const std::string b1 = trace_csv(), b2 = trace_csv();
  const std::string c1 = verdict_json(), c2 = verdict_json();
  const bool ok = a1 == a2 && a1 == a3 && b1 == b2 && c1 == c2;
  report("8", ok,
         "determinism: SSA CSV " + hex_hash(a1) + "/" + hex_hash(a2) + "/" + hex_hash(a3) + " (1, 1, 4 threads), trace CSV " +
             hex_hash(b1) + "/" + hex_hash(b2) + ", verdict JSON " + hex_hash(c1) + "/" + hex_hash(c2));
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria = {poisson_exactness, monomolecular_exactness, cascade_probability,
                                                        cascade_shape,    gaussian_machinery,      structural_invariants,
                                                        complexity,        sel_semantics,           determinism};
  for (const auto& run : criteria) {
    try {
      run();
    } catch (const std::exception& e) {
      std::printf("FAIL [?] criterion aborted: %s\n", e.what());
      ++failures;
    }
  }
  std::printf("%d criterion line(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
