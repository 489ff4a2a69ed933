#include <array>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "racing/solver.hpp"

using namespace racing::solver;

namespace {

// Dense Gaussian elimination, test-side oracle for small linear solves.
std::vector<double> solve_linear(std::vector<std::vector<double>> A, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(A[r][col]) > std::abs(A[pivot][col])) pivot = r;
    }
    std::swap(A[col], A[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = A[r][col] / A[col][col];
      for (std::size_t c = col; c < n; ++c) A[r][c] -= f * A[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t r = n; r-- > 0;) {
    double acc = b[r];
    for (std::size_t c = r + 1; c < n; ++c) acc -= A[r][c] * x[c];
    x[r] = acc / A[r][r];
  }
  return x;
}

BoxBounds unbounded(std::size_t n) {
  const double inf = std::numeric_limits<double>::infinity();
  return {std::vector<double>(n, -inf), std::vector<double>(n, inf)};
}

NlpProblem quadratic_problem(std::vector<double> center, BoxBounds box) {
  NlpProblem p;
  p.n = center.size();
  p.box = std::move(box);
  p.cost_grad = [c = std::move(center)](std::span<const double> u,
                                        std::span<double> g) -> double {
    double v = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      v += (u[i] - c[i]) * (u[i] - c[i]);
      if (!g.empty()) g[i] = 2.0 * (u[i] - c[i]);
    }
    return v;
  };
  return p;
}

double rosenbrock(std::span<const double> u, std::span<double> g) {
  const double a = 1.0 - u[0];
  const double b = u[1] - u[0] * u[0];
  if (!g.empty()) {
    g[0] = -2.0 * a - 400.0 * u[0] * b;
    g[1] = 200.0 * b;
  }
  return a * a + 100.0 * b * b;
}

}  // namespace

TEST_CASE("project_box: identity inside, clamped outside, optimality property") {
  BoxBounds box{{0.0, -M_PI / 6.0}, {1.0, M_PI / 6.0}};

  const auto inside = project_box(std::vector<double>{0.4, 0.1}, box);
  CHECK(inside == std::vector<double>{0.4, 0.1});

  const auto clamped = project_box(std::vector<double>{2.0, -2.0}, box);
  CHECK(clamped[0] == 1.0);
  CHECK(clamped[1] == -M_PI / 6.0);

  // Projection is the closest feasible point: no feasible v beats it.
  std::mt19937 rng(41);
  std::uniform_real_distribution<double> wide(-3.0, 3.0);
  std::uniform_real_distribution<double> d1(0.0, 1.0);
  std::uniform_real_distribution<double> d2(-M_PI / 6.0, M_PI / 6.0);
  for (int i = 0; i < 200; ++i) {
    const std::vector<double> u{wide(rng), wide(rng)};
    const auto pu = project_box(u, box);
    const double base = std::hypot(pu[0] - u[0], pu[1] - u[1]);
    for (int j = 0; j < 20; ++j) {
      const double vd = std::hypot(d1(rng) - u[0], d2(rng) - u[1]);
      CHECK(base <= vd + 1e-12);
    }
  }

  CHECK_THROWS_AS(project_box(std::vector<double>{1.0}, box), std::invalid_argument);
}

TEST_CASE("lbfgs: empty history falls back to steepest descent") {
  LbfgsHistory h(5, 2);
  std::vector<double> d(2);
  h.direction(std::vector<double>{1.0, 0.0}, d);
  CHECK(d[0] == -1.0);
  CHECK(d[1] == 0.0);
}

TEST_CASE("lbfgs: a single s = y pair keeps the identity scaling") {
  LbfgsHistory h(5, 3);
  const std::vector<double> s{0.3, -0.2, 0.5};
  h.push(s, s);
  std::vector<double> d(3);
  const std::vector<double> g{1.0, 2.0, -0.7};
  h.direction(g, d);
  for (int i = 0; i < 3; ++i) CHECK(d[i] == doctest::Approx(-g[i]).epsilon(1e-14));
}

TEST_CASE("lbfgs: n conjugate updates reproduce the Newton direction") {
  // SPD test matrix; directions made A-conjugate by test-side Gram-Schmidt.
  const std::size_t n = 4;
  const std::vector<std::vector<double>> A{{4.0, 1.0, 0.2, 0.0},
                                           {1.0, 3.0, 0.5, 0.1},
                                           {0.2, 0.5, 2.0, 0.3},
                                           {0.0, 0.1, 0.3, 1.5}};
  const auto a_dot = [&](const std::vector<double>& x, const std::vector<double>& y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) acc += x[i] * A[i][j] * y[j];
    return acc;
  };

  std::vector<std::vector<double>> dirs;
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> v(n, 0.0);
    v[k] = 1.0;
    for (const auto& prev : dirs) {
      const double f = a_dot(v, prev) / a_dot(prev, prev);
      for (std::size_t i = 0; i < n; ++i) v[i] -= f * prev[i];
    }
    dirs.push_back(v);
  }

  LbfgsHistory h(8, n);
  for (const auto& s : dirs) {
    std::vector<double> y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) y[i] += A[i][j] * s[j];
    h.push(s, y);
  }
  CHECK(h.size() == n);

  const std::vector<double> g{1.0, -2.0, 0.5, 3.0};
  std::vector<double> d(n);
  h.direction(g, d);
  const auto newton = solve_linear(A, g);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(d[i] == doctest::Approx(-newton[i]).epsilon(1e-8));
  }
}

TEST_CASE("lbfgs: diagonal case with coordinate updates") {
  const std::size_t n = 6;
  std::vector<double> diag{2.0, 0.5, 7.0, 1.3, 3.3, 0.9};
  LbfgsHistory h(10, n);
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> s(n, 0.0), y(n, 0.0);
    s[k] = 1.0;
    y[k] = diag[k];
    h.push(s, y);
  }
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> val(-2.0, 2.0);
  std::vector<double> g(n), d(n);
  for (double& v : g) v = val(rng);
  h.direction(g, d);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(d[i] == doctest::Approx(-g[i] / diag[i]).epsilon(1e-10));
  }
}

TEST_CASE("lbfgs: non-curved pairs are skipped at insertion") {
  LbfgsHistory h(4, 2);
  h.push(std::vector<double>{1.0, 0.0}, std::vector<double>{-1.0, 0.0});  // s'y < 0
  CHECK(h.size() == 0);
  h.push(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 1.0});  // s'y = 0
  CHECK(h.size() == 0);
}

TEST_CASE("panoc: unconstrained quadratic hits the center") {
  SolverConfig cfg;
  cfg.eps_inner = 1e-10;
  const auto p = quadratic_problem({0.3, -0.4}, unbounded(2));
  const auto sol = panoc_solve(p, std::vector<double>{5.0, 5.0}, cfg);
  CHECK(sol.status == SolveStatus::converged);
  CHECK(sol.u_star[0] == doctest::Approx(0.3).epsilon(1e-8));
  CHECK(sol.u_star[1] == doctest::Approx(-0.4).epsilon(1e-8));
}

TEST_CASE("panoc: clipped minimizer lands on the box corner") {
  SolverConfig cfg;
  const auto p = quadratic_problem({2.0, 2.0},
                                   {std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 1.0}});
  const auto sol = panoc_solve(p, std::vector<double>{0.5, 0.5}, cfg);
  CHECK(sol.status == SolveStatus::converged);
  CHECK(sol.u_star[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(sol.u_star[1] == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("panoc: rosenbrock from the standard start") {
  SolverConfig cfg;
  cfg.eps_inner = 1e-7;
  NlpProblem p;
  p.n = 2;
  p.box = unbounded(2);
  p.cost_grad = rosenbrock;
  const auto sol = panoc_solve(p, std::vector<double>{-1.2, 1.0}, cfg);
  CHECK(sol.status == SolveStatus::converged);
  CHECK(sol.inner_iters <= 500);
  CHECK(std::abs(sol.u_star[0] - 1.0) < 1e-4);
  CHECK(std::abs(sol.u_star[1] - 1.0) < 1e-4);
}

TEST_CASE("panoc: fbe trace is non-increasing at fixed gamma") {
  SolverConfig cfg;
  cfg.eps_inner = 1e-7;
  cfg.record_fbe_trace = true;
  NlpProblem p;
  p.n = 2;
  p.box = unbounded(2);
  p.cost_grad = rosenbrock;
  const auto sol = panoc_solve(p, std::vector<double>{-1.2, 1.0}, cfg);
  REQUIRE(sol.fbe_trace.size() > 5);
  for (std::size_t i = 0; i + 1 < sol.fbe_trace.size(); ++i) {
    const auto& [gamma0, fbe0] = sol.fbe_trace[i];
    const auto& [gamma1, fbe1] = sol.fbe_trace[i + 1];
    if (gamma0 == gamma1) CHECK(fbe1 <= fbe0 + 1e-12 * std::max(1.0, std::abs(fbe0)));
  }
}

TEST_CASE("panoc: deterministic across repeated runs") {
  SolverConfig cfg;
  cfg.eps_inner = 1e-7;
  NlpProblem p;
  p.n = 2;
  p.box = unbounded(2);
  p.cost_grad = rosenbrock;
  const auto a = panoc_solve(p, std::vector<double>{-1.2, 1.0}, cfg);
  const auto b = panoc_solve(p, std::vector<double>{-1.2, 1.0}, cfg);
  CHECK(a.u_star == b.u_star);  // bitwise
  CHECK(a.inner_iters == b.inner_iters);
}

TEST_CASE("panoc: rejects problems with constraint maps") {
  auto p = quadratic_problem({0.0, 0.0}, unbounded(2));
  p.pm_map.emplace();
  CHECK_THROWS_AS(panoc_solve(p, std::vector<double>{0.0, 0.0}, SolverConfig{}),
                  std::invalid_argument);
}

TEST_CASE("alm_pm_solve: no maps reduces to panoc exactly") {
  std::mt19937 rng(43);
  std::uniform_real_distribution<double> val(-3.0, 3.0);
  SolverConfig cfg;
  for (int rep = 0; rep < 10; ++rep) {
    const std::vector<double> center{val(rng), val(rng), val(rng)};
    const auto p = quadratic_problem(center, unbounded(3));
    const std::vector<double> u0{val(rng), val(rng), val(rng)};
    const auto a = panoc_solve(p, u0, cfg);
    const auto b = alm_pm_solve(p, u0, cfg);
    CHECK(a.u_star == b.u_star);  // same inner path, bitwise identical
    CHECK(b.status == SolveStatus::converged);
  }
}

TEST_CASE("alm_pm_solve: equality-constrained quadratic reaches the KKT point") {
  // min |u|^2  s.t.  u1 + u2 = 1; solution (0.5, 0.5), multiplier -1.
  NlpProblem p = quadratic_problem({0.0, 0.0}, unbounded(2));
  ConstraintMap eq;
  eq.dim = 1;
  eq.value = [](std::span<const double> u, std::span<double> out) { out[0] = u[0] + u[1]; };
  eq.add_vjp = [](std::span<const double>, std::span<const double> y, std::span<double> g) {
    g[0] += y[0];
    g[1] += y[0];
  };
  p.alm_map = std::move(eq);
  p.alm_set = {{1.0}, {1.0}};

  SolverConfig cfg;
  cfg.eps_inner = 1e-8;
  cfg.eps_outer = 1e-6;
  const auto sol = alm_pm_solve(p, std::vector<double>{0.0, 0.0}, cfg);
  CHECK(sol.status == SolveStatus::converged);
  CHECK(std::abs(sol.u_star[0] - 0.5) < 1e-4);
  CHECK(std::abs(sol.u_star[1] - 0.5) < 1e-4);
  REQUIRE(sol.multipliers.size() == 1);
  CHECK(std::abs(sol.multipliers[0] - (-1.0)) < 1e-3);
}

TEST_CASE("alm_pm_solve: one-sided penalty residual activates the constraint") {
  // min (u1-2)^2  s.t.  u1 <= 1 via the residual max(0, u1 - 1).
  NlpProblem p;
  p.n = 1;
  p.box = unbounded(1);
  p.cost_grad = [](std::span<const double> u, std::span<double> g) {
    if (!g.empty()) g[0] = 2.0 * (u[0] - 2.0);
    return (u[0] - 2.0) * (u[0] - 2.0);
  };
  ConstraintMap pm;
  pm.dim = 1;
  pm.value = [](std::span<const double> u, std::span<double> out) {
    out[0] = std::max(0.0, u[0] - 1.0);
  };
  pm.add_vjp = [](std::span<const double> u, std::span<const double> y, std::span<double> g) {
    if (u[0] > 1.0) g[0] += y[0];
  };
  p.pm_map = std::move(pm);

  SolverConfig cfg;
  cfg.eps_inner = 1e-8;
  cfg.eps_outer = 1e-5;
  cfg.max_outer_iters = 20;
  const auto sol = alm_pm_solve(p, std::vector<double>{0.0}, cfg);
  CHECK(sol.status == SolveStatus::converged);
  CHECK(std::abs(sol.u_star[0] - 1.0) < 1e-3);
  CHECK(sol.penalty >= cfg.penalty_init);
  CHECK(sol.penalty <= cfg.max_penalty);
}

TEST_CASE("alm_pm_solve: unreachable target exhausts the penalty") {
  // u is boxed below 1 but the mapping demands u = 2.
  NlpProblem p = quadratic_problem({0.0}, {std::vector<double>{-1.0}, std::vector<double>{1.0}});
  ConstraintMap eq;
  eq.dim = 1;
  eq.value = [](std::span<const double> u, std::span<double> out) { out[0] = u[0]; };
  eq.add_vjp = [](std::span<const double>, std::span<const double> y, std::span<double> g) {
    g[0] += y[0];
  };
  p.alm_map = std::move(eq);
  p.alm_set = {{2.0}, {2.0}};

  SolverConfig cfg;
  cfg.max_penalty = 1e4;
  cfg.max_outer_iters = 30;
  const auto sol = alm_pm_solve(p, std::vector<double>{0.0}, cfg);
  CHECK(sol.status == SolveStatus::infeasible_penalty_exhausted);
  CHECK(sol.constraint_violation > cfg.eps_outer);
  CHECK(sol.u_star[0] <= 1.0);  // still inside the box
}

TEST_CASE("alm_pm_solve: multipliers respect the configured safeguard range") {
  NlpProblem p = quadratic_problem({0.0, 0.0}, unbounded(2));
  ConstraintMap eq;
  eq.dim = 1;
  eq.value = [](std::span<const double> u, std::span<double> out) { out[0] = u[0] + u[1]; };
  eq.add_vjp = [](std::span<const double>, std::span<const double> y, std::span<double> g) {
    g[0] += y[0];
    g[1] += y[0];
  };
  p.alm_map = std::move(eq);
  p.alm_set = {{1.0}, {1.0}};

  SolverConfig cfg;
  cfg.multiplier_min = -0.25;
  cfg.multiplier_max = 0.25;
  const auto sol = alm_pm_solve(p, std::vector<double>{0.0, 0.0}, cfg);
  REQUIRE(sol.multipliers.size() == 1);
  CHECK(sol.multipliers[0] >= -0.25);
  CHECK(sol.multipliers[0] <= 0.25);
}

TEST_CASE("solver config validation") {
  SolverConfig cfg;
  cfg.eps_inner = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.penalty_update_factor = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  CHECK_NOTHROW(cfg.validate());
}
