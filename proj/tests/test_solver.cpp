#include <cstdlib>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "pldm/al.hpp"
#include "pldm/errors.hpp"
#include "pldm/instances.hpp"
#include "pldm/solver.hpp"

using namespace pldm;

namespace {

// Random but structurally valid state on a given instance.
SolverState random_state(const std::vector<AgentProblem>& problems,
                         const ConsensusLayout& layout, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  SolverState s;
  s.z.resize(layout.global_dim);
  for (int m = 0; m < layout.global_dim; ++m) {
    const double mid =
        0.5 * (layout.global_lower[m] + layout.global_upper[m]);
    const double half =
        0.5 * (layout.global_upper[m] - layout.global_lower[m]);
    s.z[m] = mid + 0.9 * half * unit(rng);
  }
  const int n = static_cast<int>(problems.size());
  s.x_bar.resize(n);
  s.lambda.resize(n);
  s.mu.resize(n);
  for (int i = 0; i < n; ++i) {
    const int nbar = problems[i].dim_local;
    s.x_bar[i].resize(2 * nbar);
    for (int t = 0; t < 2 * nbar; ++t) s.x_bar[i][t] = 1.5 * unit(rng);
    s.lambda[i].resize(problems[i].dim_h);
    for (int t = 0; t < problems[i].dim_h; ++t) s.lambda[i][t] = unit(rng);
    s.mu[i].resize(nbar);
    for (int t = 0; t < nbar; ++t) s.mu[i][t] = unit(rng);
  }
  s.x_bar_prev = s.x_bar;
  s.rho = 0.5 + 2.5 * std::abs(unit(rng));
  s.step_sizes = Eigen::VectorXd::Ones(n);
  s.step_sizes_prev = s.step_sizes;
  return s;
}

// Scalar agent with a pure quadratic objective; its smooth term has Hessian
// diag(2, 2M), which makes the linesearch acceptance threshold exact.
std::vector<AgentProblem> quadratic_network(double slack_penalty) {
  AgentProblem ap;
  ap.agent_id = 1;
  ap.neighbor_ids = {1};
  ap.dim_own = 1;
  ap.dim_local = 1;
  ap.own_offset = 0;
  ap.dim_h = 0;
  ap.f = [](const Eigen::VectorXd& x) { return x[0] * x[0]; };
  ap.f_grad = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd g(1);
    g << 2.0 * x[0];
    return g;
  };
  ap.phi = [](const Eigen::VectorXd&) { return 0.0; };
  ap.phi_grad = [](const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Zero(x.size()).eval();
  };
  ap.h = [](const Eigen::VectorXd&) { return Eigen::VectorXd(0); };
  ap.h_jac = [](const Eigen::VectorXd& x) {
    return Eigen::MatrixXd::Zero(0, x.size()).eval();
  };
  ap.box_lower = Eigen::VectorXd::Constant(1, -1.0);
  ap.box_upper = Eigen::VectorXd::Constant(1, 1.0);
  ap.slack_penalty = slack_penalty;
  return {ap};
}

bool traces_equal(const std::vector<IterationTrace>& a,
                  const std::vector<IterationTrace>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    // Everything the file output contains; wall_time may differ.
    if (a[k].iter != b[k].iter || a[k].residual != b[k].residual ||
        a[k].al_value != b[k].al_value || a[k].lyapunov != b[k].lyapunov ||
        a[k].grad_x != b[k].grad_x || a[k].grad_z != b[k].grad_z ||
        a[k].grad_gamma != b[k].grad_gamma || a[k].grad_u != b[k].grad_u ||
        a[k].rho != b[k].rho || a[k].beta != b[k].beta ||
        a[k].sum_h != b[k].sum_h || a[k].in_region != b[k].in_region ||
        a[k].step_min != b[k].step_min || a[k].step_max != b[k].step_max) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("consensus update matches the long projected-gradient oracle") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    RandomInstance inst =
        build_random(1 + seed % 4, 1 + seed % 3, 0.5, 200 + seed);
    const SolverState s = random_state(inst.problems, inst.layout, seed);
    const Eigen::VectorXd fast = solve_z(s, inst.problems, inst.layout);
    const Eigen::VectorXd slow =
        oracles::solve_z_pgd(s, inst.problems, inst.layout, 20000);
    CHECK((fast - slow).lpNorm<Eigen::Infinity>() <= 1e-8);
  }
}

TEST_CASE("consensus update has the average-and-clip form") {
  Instance toy = build_toy();
  SolverState s = random_state(toy.problems, toy.layout, 77);
  const Eigen::VectorXd z = solve_z(s, toy.problems, toy.layout);
  for (int m = 0; m < 2; ++m) {
    double acc = 0.0;
    for (int i = 0; i < 2; ++i) {
      const Eigen::VectorXd v =
          s.x_part(i) + s.y_part(i) + s.mu[i] / s.rho;
      acc += v[m];  // both agents hold both coordinates in the same order
    }
    double expect = acc / 2.0;
    expect = std::min(std::max(expect, toy.layout.global_lower[m]),
                      toy.layout.global_upper[m]);
    CHECK(z[m] == doctest::Approx(expect).epsilon(1e-15));
  }
}

TEST_CASE("primal update matches dense and iterative oracles") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    RandomInstance inst =
        build_random(1 + seed % 3, 1 + seed % 3, 0.6, 300 + seed);
    const SolverState s = random_state(inst.problems, inst.layout, 50 + seed);
    for (std::size_t i = 0; i < inst.problems.size(); ++i) {
      const int idx = static_cast<int>(i);
      const Eigen::VectorXd ez = inst.layout.gather(idx, s.z);
      const double c = 0.7 + 0.1 * static_cast<double>(seed);
      const Eigen::VectorXd fast =
          primal_x_update(inst.problems[i], s.x_bar[i], s.lambda[i], s.mu[i],
                          ez, s.rho, c);
      const Eigen::VectorXd dense = oracles::primal_dense(
          inst.problems[i], s.x_bar[i], s.lambda[i], s.mu[i], ez, s.rho, c);
      CHECK((fast - dense).lpNorm<Eigen::Infinity>() <= 1e-8);
      const Eigen::VectorXd iterative = oracles::primal_iterative(
          inst.problems[i], s.x_bar[i], s.lambda[i], s.mu[i], ez, s.rho, c,
          200000);
      CHECK((fast - iterative).lpNorm<Eigen::Infinity>() <= 1e-8);
    }
  }
}

TEST_CASE("primal update rejects a singular step") {
  Instance toy = build_toy();
  const SolverState s = random_state(toy.problems, toy.layout, 5);
  const Eigen::VectorXd ez = toy.layout.gather(0, s.z);
  CHECK_THROWS_AS(primal_x_update(toy.problems[0], s.x_bar[0], s.lambda[0],
                                  s.mu[0], ez, s.rho, 0.0),
                  SingularStep);
}

TEST_CASE("backward linesearch growth on an exact quadratic") {
  // g(x, y) = x^2 + M y^2 with M = 1 has Hessian 2I; the descent test
  // accepts exactly when c >= 2 + 2 alpha.
  const std::vector<AgentProblem> problems = quadratic_network(1.0);
  Eigen::VectorXd x_bar(2), mu(1), ez(1), lambda(0);
  x_bar << 0.8, -0.4;
  mu << 0.0;
  ez << -0.6;
  const double rho = 1.0;
  const double alpha = 0.1;

  SUBCASE("doubling from 1 stops at 4") {
    const LinesearchResult r = linesearch_step(problems[0], x_bar, lambda, mu,
                                               ez, rho, 1.0, alpha, 0.5);
    CHECK(r.step == doctest::Approx(4.0));
    CHECK(r.retries == 2);
    CHECK(r.candidate.isApprox(primal_x_update(problems[0], x_bar, lambda,
                                               mu, ez, rho, 4.0)));
  }
  SUBCASE("a step above the threshold is accepted immediately") {
    const LinesearchResult r = linesearch_step(problems[0], x_bar, lambda, mu,
                                               ez, rho, 2.2 + 1e-6, alpha, 0.5);
    CHECK(r.retries == 0);
  }
  SUBCASE("a step just below the threshold needs one retry") {
    const LinesearchResult r = linesearch_step(problems[0], x_bar, lambda, mu,
                                               ez, rho, 2.0, alpha, 0.5);
    CHECK(r.retries == 1);
    CHECK(r.step == doctest::Approx(4.0));
  }
  SUBCASE("growth too slow to reach the threshold exhausts the budget") {
    // With divisor 0.99 the step grows by barely 1% per retry; sixty
    // retries from 1 reach ~1.83, which stays below the 2 + 2 alpha
    // acceptance threshold, so the search can never succeed.
    CHECK_THROWS_AS(linesearch_step(problems[0], x_bar, lambda, mu, ez, rho,
                                    1.0, alpha, 0.99),
                    LinesearchStall);
  }
  SUBCASE("parameter validation") {
    CHECK_THROWS_AS(linesearch_step(problems[0], x_bar, lambda, mu, ez, rho,
                                    0.0, alpha, 0.5),
                    InvalidParams);
    CHECK_THROWS_AS(linesearch_step(problems[0], x_bar, lambda, mu, ez, rho,
                                    1.0, alpha, 1.0),
                    InvalidParams);
  }
}

TEST_CASE("dual update applies the exact multiplier ascent") {
  Instance toy = build_toy();
  SolverState s = random_state(toy.problems, toy.layout, 9);
  const std::vector<Eigen::VectorXd> lambda0 = s.lambda;
  const std::vector<Eigen::VectorXd> mu0 = s.mu;
  dual_update(s, toy.problems, toy.layout);
  for (int i = 0; i < 2; ++i) {
    const Eigen::VectorXd dh =
        s.rho * toy.problems[i].h(s.x_part(i));
    const Eigen::VectorXd dgap =
        s.rho *
        (s.x_part(i) + s.y_part(i) - toy.layout.gather(i, s.z));
    CHECK((s.lambda[i] - lambda0[i] - dh).lpNorm<Eigen::Infinity>() <= 1e-15);
    CHECK((s.mu[i] - mu0[i] - dgap).lpNorm<Eigen::Infinity>() <= 1e-15);
  }
}

TEST_CASE("penalty adaptation and region bookkeeping") {
  Instance toy = build_toy();
  SolverState s = random_state(toy.problems, toy.layout, 13);
  s.rho = 2.0;
  s.iter = 7;
  SUBCASE("outside the region the penalty grows") {
    CHECK_FALSE(adapt_penalty(s, 1.0, 0.5, 0.25));
    CHECK(s.rho == doctest::Approx(2.25));
    CHECK_FALSE(s.k_underbar.has_value());
  }
  SUBCASE("entering the region freezes the penalty and records the iterate") {
    CHECK(adapt_penalty(s, 0.4, 0.5, 0.25));
    CHECK(s.rho == doctest::Approx(2.0));
    REQUIRE(s.k_underbar.has_value());
    CHECK(*s.k_underbar == 7);
    // A later in-region call keeps the start of the streak.
    s.iter = 12;
    CHECK(adapt_penalty(s, 0.1, 0.5, 0.25));
    CHECK(*s.k_underbar == 7);
  }
  SUBCASE("leaving the region clears the mark and re-entry re-records it") {
    CHECK(adapt_penalty(s, 0.4, 0.5, 0.25));
    REQUIRE(s.k_underbar.has_value());
    s.iter = 9;
    CHECK_FALSE(adapt_penalty(s, 0.9, 0.5, 0.25));
    CHECK(s.rho == doctest::Approx(2.25));
    CHECK_FALSE(s.k_underbar.has_value());
    s.iter = 10;
    CHECK(adapt_penalty(s, 0.3, 0.5, 0.25));
    REQUIRE(s.k_underbar.has_value());
    CHECK(*s.k_underbar == 10);
    CHECK(s.rho == doctest::Approx(2.25));
  }
}

TEST_CASE("start states") {
  Instance toy = build_toy();
  SUBCASE("midpoint") {
    const SolverState s =
        make_init(toy.problems, toy.layout, InitKind::Midpoint, 0);
    CHECK(s.z.isApprox(Eigen::Vector2d(2.0, 2.5)));
    for (int i = 0; i < 2; ++i) {
      CHECK(s.x_part(i).isApprox(toy.layout.gather(i, s.z)));
      CHECK(s.y_part(i).norm() == 0.0);
      CHECK(s.mu[i].norm() == 0.0);
      CHECK(s.lambda[i].norm() == 0.0);
    }
  }
  SUBCASE("seeded draws stay in the box and are reproducible") {
    const SolverState a =
        make_init(toy.problems, toy.layout, InitKind::RandomInBox, 4);
    const SolverState b =
        make_init(toy.problems, toy.layout, InitKind::RandomInBox, 4);
    const SolverState c =
        make_init(toy.problems, toy.layout, InitKind::RandomInBox, 5);
    CHECK(a.z == b.z);
    CHECK(a.z != c.z);
    for (int m = 0; m < 2; ++m) {
      CHECK(a.z[m] >= toy.layout.global_lower[m]);
      CHECK(a.z[m] <= toy.layout.global_upper[m]);
    }
  }
}

TEST_CASE("toy run converges to the good local optimum") {
  Instance toy = build_toy();
  SolverConfig config;
  config.eps_stop = 1e-6;
  config.max_iters = 5000;
  const SolverState init =
      make_init(toy.problems, toy.layout, InitKind::RandomInBox, 1);
  const RunResult result = run(toy.problems, toy.layout, config, init);
  CHECK(result.converged);
  // Both constrained optima are valid attractors; the seeded start should
  // land on one of them.
  const double to_best = (result.state.z - Eigen::Vector2d(2.0, 1.0)).norm();
  const double to_other = (result.state.z - Eigen::Vector2d(1.0, 2.0)).norm();
  CHECK(std::min(to_best, to_other) <= 1e-2);
  CHECK(result.trace.back().residual <= 1e-6);
  CHECK(result.trace.size() <= 5000);
}

TEST_CASE("a critical point is a fixed point of the iteration") {
  oracles::CriticalFixture fx = oracles::critical_fixture();
  SolverConfig config;
  config.rho0 = fx.state.rho;
  config.eps_stop = 1e-10;
  config.max_iters = 50;
  const RunResult result = run(fx.problems, fx.layout, config, fx.state);
  CHECK(result.converged);
  CHECK(result.trace.size() <= 2);
  CHECK((result.state.z - Eigen::Vector2d(2.0, 1.0)).norm() <= 1e-9);
  for (int i = 0; i < 2; ++i) {
    CHECK((result.state.x_bar[i] - fx.state.x_bar[i]).norm() <= 1e-9);
  }
}

TEST_CASE("zero iteration budget returns the start state") {
  Instance toy = build_toy();
  SolverConfig config;
  config.max_iters = 0;
  const SolverState init =
      make_init(toy.problems, toy.layout, InitKind::Midpoint, 0);
  const RunResult result = run(toy.problems, toy.layout, config, init);
  CHECK(result.trace.empty());
  CHECK_FALSE(result.converged);
  CHECK(result.state.z == init.z);
  CHECK(result.state.x_bar[0] == init.x_bar[0]);
}

TEST_CASE("penalty growth is monotone and stops inside the region") {
  Instance toy = build_toy();
  SolverConfig config;
  config.rho0 = 0.25;
  config.delta_penalty = 0.5;
  config.eta = 0.5;
  config.eps_stop = 1e-5;
  config.max_iters = 4000;
  const SolverState init =
      make_init(toy.problems, toy.layout, InitKind::RandomInBox, 2);
  const RunResult result = run(toy.problems, toy.layout, config, init);
  REQUIRE(result.converged);
  REQUIRE(result.state.k_underbar.has_value());
  const int kbar = *result.state.k_underbar;
  double prev = 0.0;
  for (const IterationTrace& row : result.trace) {
    CHECK(row.rho >= prev);
    prev = row.rho;
    CHECK(row.in_region == (row.sum_h <= config.eta));
    if (row.iter >= kbar) {
      CHECK(row.sum_h <= config.eta);
      CHECK(row.rho == result.trace[kbar].rho);
    }
  }
}

TEST_CASE("identical runs produce identical traces across thread counts") {
  Instance toy = build_toy();
  SolverConfig config;
  config.eps_stop = 1e-5;
  config.max_iters = 3000;
  const SolverState init =
      make_init(toy.problems, toy.layout, InitKind::RandomInBox, 3);

  const RunResult a = run(toy.problems, toy.layout, config, init);
  const RunResult b = run(toy.problems, toy.layout, config, init);
  CHECK(traces_equal(a.trace, b.trace));

  setenv("PLDM_THREADS", "4", 1);
  const RunResult c = run(toy.problems, toy.layout, config, init);
  setenv("PLDM_THREADS", "0", 1);
  const RunResult d = run(toy.problems, toy.layout, config, init);
  unsetenv("PLDM_THREADS");
  CHECK(traces_equal(a.trace, c.trace));
  CHECK(traces_equal(a.trace, d.trace));
  CHECK(c.state.z == a.state.z);
}

TEST_CASE("theoretical step policy runs inside its admissible interval") {
  std::vector<AgentProblem> problems = quadratic_network(0.5);
  const ConsensusLayout layout = build_layout(problems);

  SolverConfig config;
  config.step_policy = StepPolicy::Theoretical;
  config.beta_policy = BetaPolicy::FromNu;
  config.nu = 2000.0;
  config.eps_stop = 1e-3;
  config.max_iters = 20000;
  config.constants = {estimate_constants(problems[0], 1000, 17)};

  SolverState init = make_init(problems, layout, InitKind::Midpoint, 0);
  init.z[0] = 0.5;
  init.x_bar[0][0] = 0.5;
  const RunResult result = run(problems, layout, config, init);
  CHECK(result.converged);
  CHECK(std::abs(result.state.z[0]) <= 2e-2);

  // Iteration 0 must take the midpoint of the interval the policy reports
  // for the starting step sizes.  Later iterations may fall back: the drift
  // factors are evaluated at the previously accepted step, so one large
  // accepted step can make the next interval infeasible.
  const TheoreticalStep plan =
      theoretical_stepsize(config.constants, problems, config.rho0,
                           Eigen::VectorXd::Constant(1, config.c0), config.nu);
  CHECK(result.trace.front().step_min ==
        doctest::Approx(0.5 * (plan.c_lo + plan.c_hi)));
  CHECK(result.trace.front().step_min >= plan.c_lo);
  CHECK(result.trace.front().step_max <= plan.c_hi);
  CHECK(result.trace.front().beta == doctest::Approx(plan.beta));
  for (const int k : result.step_fallbacks) {
    CHECK(k >= 1);  // the start interval itself was feasible
  }
}

TEST_CASE("an infeasible rate parameter falls back to the linesearch") {
  std::vector<AgentProblem> problems = quadratic_network(0.5);
  const ConsensusLayout layout = build_layout(problems);

  SolverConfig config;
  config.step_policy = StepPolicy::Theoretical;
  config.nu = 1e-3;  // far below the feasibility threshold
  config.eps_stop = 1e-4;
  config.max_iters = 4000;
  config.constants = {estimate_constants(problems[0], 1000, 17)};

  SolverState init = make_init(problems, layout, InitKind::Midpoint, 0);
  init.z[0] = 0.5;
  init.x_bar[0][0] = 0.5;
  const RunResult result = run(problems, layout, config, init);
  CHECK(result.converged);
  REQUIRE_FALSE(result.step_fallbacks.empty());
  CHECK(result.step_fallbacks.front() == 0);
}

TEST_CASE("solver configuration validation") {
  Instance toy = build_toy();
  const SolverState init =
      make_init(toy.problems, toy.layout, InitKind::Midpoint, 0);

  SolverConfig config;
  config.rho0 = -1.0;
  CHECK_THROWS_AS(run(toy.problems, toy.layout, config, init), InvalidParams);

  config = SolverConfig{};
  config.step_policy = StepPolicy::Theoretical;  // nu missing
  CHECK_THROWS_AS(run(toy.problems, toy.layout, config, init), InvalidParams);

  config = SolverConfig{};
  config.beta_policy = BetaPolicy::FromNu;
  config.nu = 10.0;  // constants missing
  CHECK_THROWS_AS(run(toy.problems, toy.layout, config, init), InvalidParams);

  config = SolverConfig{};
  config.backtrack_divisor = 1.0;
  CHECK_THROWS_AS(run(toy.problems, toy.layout, config, init), InvalidParams);
}
