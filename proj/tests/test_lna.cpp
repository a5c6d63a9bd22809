#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

#include "lnamc/crn.hpp"
#include "lnamc/lna.hpp"
#include "lnamc/uniformisation.hpp"
#include "support/random_crn.hpp"

using namespace lnamc;

namespace {

Crn birth(double k) { return Crn({"x"}, {{{0}, {1}, k}}); }

Crn cascade() {
  return Crn({"l1", "l2", "l3"}, {{{1, 1, 0}, {0, 2, 0}, 10.0}, {{0, 1, 1}, {0, 0, 2}, 10.0}});
}

IntegratorConfig tight() {
  IntegratorConfig cfg;
  cfg.rel_tol = 1e-10;
  cfg.abs_tol = 1e-13;
  return cfg;
}

}  // namespace

TEST(SolveLna, PoissonBirth) {
  const double k = 1.0, volume = 100.0;
  const auto sol = solve_lna(birth(k), {{0}, volume}, 5.0, tight(), {1.0, 2.5});
  for (std::size_t i = 0; i < sol.size(); ++i) {
    const double t = sol.grid()[i];
    const auto s = combo_stats(sol, {1}, i);
    EXPECT_NEAR(s.mean, volume * k * t, 1e-6 * std::max(1.0, volume * k * t));
    EXPECT_NEAR(s.variance, volume * k * t, 1e-6 * std::max(1.0, volume * k * t));
  }
  const auto idx = sol.index_of(1.0);
  ASSERT_GE(idx, 0);
  const auto s = combo_stats(sol, {1}, static_cast<std::size_t>(idx));
  EXPECT_NEAR(s.mean, 100.0, 1e-6 * 100);
  EXPECT_NEAR(s.variance, 100.0, 1e-6 * 100);
}

TEST(SolveLna, NoReactionsIsStatic) {
  const Crn idle({"a", "b"}, {});
  const auto sol = solve_lna(idle, {{7, 3}, 10.0}, 2.0);
  for (std::size_t i = 0; i < sol.size(); ++i) {
    EXPECT_NEAR(sol.phi(i)[0], 0.7, 1e-15);
    EXPECT_NEAR(sol.phi(i)[1], 0.3, 1e-15);
    EXPECT_EQ(sol.cov_z(i), Matrix::Zero(2, 2));
    const auto s = combo_stats(sol, {1, 0}, i);
    EXPECT_NEAR(s.mean, 7.0, 1e-12);
    EXPECT_EQ(s.variance, 0.0);
  }
}

TEST(SolveLna, ConversionMatchesBinomial) {
  const double k = 0.8, volume = 50.0;
  const std::int64_t n = 40;
  const Crn conv({"a", "b"}, {{{1, 0}, {0, 1}, k}});
  const auto sol = solve_lna(conv, {{n, 0}, volume}, 3.0, tight());
  for (std::size_t i = 0; i < sol.size(); ++i) {
    const double t = sol.grid()[i];
    const double p = std::exp(-k * t);
    EXPECT_NEAR(sol.phi(i)[0], (static_cast<double>(n) / volume) * p, 1e-9);
    const auto s = combo_stats(sol, {1, 0}, i);
    EXPECT_NEAR(s.variance, static_cast<double>(n) * p * (1 - p), 1e-6);
  }
}

TEST(SolveLna, ConservedDirectionHasNoVariance) {
  const auto sol = solve_lna(cascade(), {{98, 1, 1}, 1000.0}, 2.0);
  for (std::size_t i = 0; i < sol.size(); ++i) {
    const auto s = combo_stats(sol, {1, 1, 1}, i);
    EXPECT_NEAR(s.mean, 100.0, 1e-8 * 1000);
    EXPECT_LE(s.variance, 1e-9 * 1000);
  }
}

TEST(SolveLna, VolumeIndependence) {
  const auto crn = cascade();
  const auto a = solve_lna(crn, {{98, 1, 1}, 1000.0}, 1.0);
  const auto b = solve_lna(crn, {{196, 2, 2}, 2000.0}, 1.0);
  ASSERT_EQ(a.grid(), b.grid());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_LT((a.phi(i) - b.phi(i)).norm(), 1e-15);
    EXPECT_LT((a.cov_z(i) - b.cov_z(i)).norm(), 1e-15);
  }
}

TEST(SolveLna, RandomNetworksKeepCovarianceValid) {
  std::mt19937_64 gen(41);
  for (int trial = 0; trial < 30; ++trial) {
    const auto crn = lnamc::testing::random_crn(gen);
    const auto setup = lnamc::testing::random_setup(gen, crn);
    const auto sol = solve_lna(crn, setup, 1.0);
    const auto basis = conservation_vectors(crn);
    for (std::size_t i = 0; i < sol.size(); ++i) {
      const Matrix& c = sol.cov_z(i);
      EXPECT_EQ(c, c.transpose());
      Eigen::SelfAdjointEigenSolver<Matrix> eig(c);
      EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-9 * (1 + c.trace()));
      for (const auto& w : basis) {
        Vector wv(c.rows());
        for (Eigen::Index j = 0; j < wv.size(); ++j) wv[j] = static_cast<double>(w[static_cast<std::size_t>(j)]);
        EXPECT_LE(std::abs(wv.dot(c * wv)), 1e-9);
        EXPECT_LE(std::abs(wv.dot(sol.phi(i)) - wv.dot(sol.phi(0))), 1e-8);
      }
    }
  }
}

TEST(ComboStats, RejectsWrongLength) {
  const auto sol = solve_lna(birth(1.0), {{0}, 10.0}, 1.0);
  EXPECT_THROW(combo_stats(sol, {1, 2}, 0), Error);
}

TEST(StepFunction, IntegralAndLookup) {
  const StepFunction f({0.0, 1.0, 3.0}, {0.5, 1.0, 0.0});
  EXPECT_EQ(f(0.0), 0.5);
  EXPECT_EQ(f(0.999), 0.5);
  EXPECT_EQ(f(1.0), 1.0);
  EXPECT_EQ(f(3.0), 0.0);
  EXPECT_DOUBLE_EQ(f.integral(0.0, 3.0), 0.5 + 2.0);
  EXPECT_DOUBLE_EQ(f.integral(0.5, 2.0), 0.25 + 1.0);
  EXPECT_DOUBLE_EQ(f.integral(2.0, 2.0), 0.0);
}

TEST(ProbStepFunction, StaticNetwork) {
  const Crn idle({"a", "b"}, {});
  const auto sol = solve_lna(idle, {{7, 3}, 10.0}, 2.0);
  const auto in = prob_step_function(sol, {{1, -1}, IntervalSet({{4, 4}})});
  for (double v : in.values()) EXPECT_EQ(v, 1.0);
  const auto out = prob_step_function(sol, {{1, -1}, IntervalSet({{5, kInf}})});
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(ProbStepFunction, HalfAtTheMean) {
  const double k = 1.0, volume = 100.0, t_star = 0.5;
  const auto sol = solve_lna(birth(k), {{0}, volume}, 1.0, tight(), {t_star});
  const auto step = prob_step_function(sol, {{1}, IntervalSet({{volume * k * t_star, kInf}})});
  EXPECT_NEAR(step(t_star), 0.5, 1e-6);
}

TEST(TraceCsv, ColumnsAndRows) {
  const auto crn = birth(1.0);
  const auto sol = solve_lna(crn, {{0}, 100.0}, 1.0);
  std::ostringstream os;
  auto cols = species_columns(crn);
  cols.push_back({"hi", {1}, IntervalSet({{50, kInf}})});
  write_trace_csv(os, sol, cols);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header, "time,mean_x,sd_x,mean_hi,sd_hi,prob_hi");
  std::size_t rows = 0;
  for (std::string line; std::getline(is, line);) ++rows;
  EXPECT_EQ(rows, sol.size());
}
