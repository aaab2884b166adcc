#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "pldm/errors.hpp"
#include "pldm/instances.hpp"
#include "pldm/problem.hpp"

using namespace pldm;

namespace {

AgentProblem simple_agent() {
  AgentProblem ap;
  ap.agent_id = 1;
  ap.neighbor_ids = {1};
  ap.dim_own = 2;
  ap.dim_local = 2;
  ap.own_offset = 0;
  ap.dim_h = 1;
  ap.f = [](const Eigen::VectorXd& x) { return x[0] * x[0] + x[1]; };
  ap.f_grad = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd g(2);
    g << 2.0 * x[0], 1.0;
    return g;
  };
  ap.phi = [](const Eigen::VectorXd&) { return 0.0; };
  ap.phi_grad = [](const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Zero(x.size()).eval();
  };
  ap.h = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd v(1);
    v[0] = x[0] * x[1] - 6.0;
    return v;
  };
  ap.h_jac = [](const Eigen::VectorXd& x) {
    Eigen::MatrixXd j(1, 2);
    j << x[1], x[0];
    return j;
  };
  ap.box_lower = Eigen::Vector2d(-4.0, -4.0);
  ap.box_upper = Eigen::Vector2d(4.0, 4.0);
  return ap;
}

}  // namespace

TEST_CASE("layout of the two-agent toy network") {
  Instance toy = build_toy();
  const ConsensusLayout& layout = toy.layout;

  CHECK(layout.global_dim == 2);
  CHECK(layout.num_agents() == 2);
  CHECK(layout.copy_count == std::vector<int>{2, 2});
  CHECK(layout.block_offset == std::vector<int>{0, 1});
  CHECK(layout.block_dim == std::vector<int>{1, 1});
  CHECK(layout.global_lower.isApprox(Eigen::Vector2d(0.0, 0.0)));
  CHECK(layout.global_upper.isApprox(Eigen::Vector2d(4.0, 5.0)));
  CHECK(layout.copy_map[0] == std::vector<int>{0, 1});
  CHECK(layout.copy_map[1] == std::vector<int>{0, 1});
}

TEST_CASE("gather, scatter and add_scatter are consistent") {
  // Line network 1-2-3: agent 2 sees everyone, the ends see two blocks.
  std::vector<AgentProblem> problems(3);
  for (int i = 0; i < 3; ++i) {
    AgentProblem& ap = problems[i];
    ap.agent_id = i + 1;
    ap.dim_own = i + 1;  // blocks of size 1, 2, 3
    ap.dim_h = 0;
    ap.f = [](const Eigen::VectorXd&) { return 0.0; };
    ap.f_grad = [](const Eigen::VectorXd& x) {
      return Eigen::VectorXd::Zero(x.size()).eval();
    };
    ap.phi = ap.f;
    ap.phi_grad = ap.f_grad;
    ap.h = [](const Eigen::VectorXd&) { return Eigen::VectorXd(0); };
    ap.h_jac = [](const Eigen::VectorXd& x) {
      return Eigen::MatrixXd::Zero(0, x.size()).eval();
    };
    ap.box_lower = Eigen::VectorXd::Constant(i + 1, -1.0);
    ap.box_upper = Eigen::VectorXd::Constant(i + 1, 1.0);
  }
  problems[0].neighbor_ids = {1, 2};
  problems[0].dim_local = 3;
  problems[0].own_offset = 0;
  problems[1].neighbor_ids = {1, 2, 3};
  problems[1].dim_local = 6;
  problems[1].own_offset = 1;
  problems[2].neighbor_ids = {2, 3};
  problems[2].dim_local = 5;
  problems[2].own_offset = 2;

  const ConsensusLayout layout = build_layout(problems);
  CHECK(layout.global_dim == 6);
  CHECK(layout.local_dim(0) == 3);
  CHECK(layout.local_dim(1) == 6);
  CHECK(layout.local_dim(2) == 5);

  Eigen::VectorXd z(6);
  z << 10, 20, 21, 30, 31, 32;
  // Agent 1 holds blocks 1 and 2; agent 3 holds blocks 2 and 3.
  Eigen::VectorXd g0 = layout.gather(0, z);
  REQUIRE(g0.size() == 3);
  CHECK(g0.isApprox(Eigen::Vector3d(10, 20, 21)));
  Eigen::VectorXd g2 = layout.gather(2, z);
  REQUIRE(g2.size() == 5);
  CHECK(g2[0] == 20);
  CHECK(g2[4] == 32);

  // add_scatter of all-ones accumulates one unit per holder.
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(6);
  for (int i = 0; i < 3; ++i) {
    layout.add_scatter(i, Eigen::VectorXd::Ones(layout.local_dim(i)), acc);
  }
  for (int m = 0; m < 6; ++m) {
    CHECK(acc[m] == doctest::Approx(layout.copy_count[m]));
  }
  // Block 1 is held by agents 1 and 2 only; block 2 by all three.
  CHECK(layout.copy_count[0] == 2);
  CHECK(layout.copy_count[1] == 3);
  CHECK(layout.copy_count[3] == 2);

  // scatter writes the local values into the mapped global slots.
  Eigen::VectorXd target = Eigen::VectorXd::Zero(6);
  layout.scatter(1, layout.gather(1, z), target);
  CHECK(target.isApprox(z));
}

TEST_CASE("layout validation rejects malformed networks") {
  CHECK_THROWS_AS(build_layout({}), EmptyNetwork);

  Instance toy = build_toy();
  SUBCASE("non-contiguous ids") {
    toy.problems[1].agent_id = 3;
    toy.problems[1].neighbor_ids = {1, 3};
    toy.problems[0].neighbor_ids = {1, 3};
    CHECK_THROWS_AS(build_layout(toy.problems), DimensionMismatch);
  }
  SUBCASE("neighbor list must contain self") {
    toy.problems[0].neighbor_ids = {2};
    toy.problems[0].dim_local = 1;
    CHECK_THROWS_AS(build_layout(toy.problems), DimensionMismatch);
  }
  SUBCASE("neighbor list must be strictly ascending") {
    toy.problems[0].neighbor_ids = {2, 1};
    CHECK_THROWS_AS(build_layout(toy.problems), DimensionMismatch);
  }
  SUBCASE("declared local dim must match the neighbour blocks") {
    toy.problems[0].dim_local = 3;
    CHECK_THROWS_AS(build_layout(toy.problems), DimensionMismatch);
  }
  SUBCASE("own offset must match the stacked order") {
    toy.problems[1].own_offset = 0;
    CHECK_THROWS_AS(build_layout(toy.problems), DimensionMismatch);
  }
  SUBCASE("boxes must be ordered") {
    toy.problems[0].box_lower[0] = 9.0;
    CHECK_THROWS_AS(build_layout(toy.problems), InvalidParams);
  }
  SUBCASE("boxes must be finite") {
    toy.problems[0].box_upper[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(build_layout(toy.problems), InvalidParams);
  }
  SUBCASE("slack penalty must be positive") {
    toy.problems[0].slack_penalty = 0.0;
    CHECK_THROWS_AS(build_layout(toy.problems), InvalidParams);
  }
}

TEST_CASE("gradient validation accepts correct derivatives") {
  Instance toy = build_toy();
  Eigen::VectorXd p(2);
  p << 1.7, 2.3;
  for (const AgentProblem& ap : toy.problems) {
    const GradientCheckReport report = validate_gradients(ap, p);
    CHECK(report.max_error() <= 1e-6);
  }
}

TEST_CASE("gradient validation flags wrong derivatives") {
  AgentProblem ap = simple_agent();
  Eigen::VectorXd p(2);
  p << 1.0, 2.0;
  CHECK(validate_gradients(ap, p).max_error() <= 1e-6);

  SUBCASE("biased gradient") {
    ap.f_grad = [](const Eigen::VectorXd& x) {
      Eigen::VectorXd g(2);
      g << 2.0 * x[0] + 0.25, 1.0;
      return g;
    };
    CHECK(validate_gradients(ap, p).err_f >= 0.1);
  }
  SUBCASE("wrong Jacobian shape") {
    ap.h_jac = [](const Eigen::VectorXd& x) {
      return Eigen::MatrixXd::Zero(2, x.size()).eval();
    };
    CHECK_THROWS_AS(validate_gradients(ap, p), DimensionMismatch);
  }
  SUBCASE("non-finite value") {
    ap.f = [](const Eigen::VectorXd&) {
      return std::numeric_limits<double>::quiet_NaN();
    };
    CHECK_THROWS_AS(validate_gradients(ap, p), NonFiniteValue);
  }
}

TEST_CASE("constraint stack layout and regularity") {
  AgentProblem ap = simple_agent();
  Eigen::VectorXd p(2);
  p << 2.0, 3.0;

  const Eigen::MatrixXd stack = constraint_stack(ap, p);
  REQUIRE(stack.rows() == 3);  // one equality + two consensus rows
  REQUIRE(stack.cols() == 4);
  CHECK(stack(0, 0) == 3.0);  // J_h = [x2, x1]
  CHECK(stack(0, 1) == 2.0);
  CHECK(stack(0, 2) == 0.0);  // slack columns of the equality rows are zero
  CHECK(stack(0, 3) == 0.0);
  CHECK(stack.block(1, 0, 2, 2).isApprox(Eigen::Matrix2d::Identity()));
  CHECK(stack.block(1, 2, 2, 2).isApprox(Eigen::Matrix2d::Identity()));

  // Smallest singular value agrees with an eigen-decomposition oracle.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(stack * stack.transpose());
  const double oracle = std::sqrt(std::max(0.0, eig.eigenvalues().minCoeff()));
  CHECK(check_regularity(ap, p) == doctest::Approx(oracle).epsilon(1e-10));
}

TEST_CASE("regularity is zero when full row rank is impossible") {
  AgentProblem ap = simple_agent();
  ap.dim_h = 5;  // 5 + 2 rows > 4 columns
  ap.h = [](const Eigen::VectorXd&) {
    return Eigen::VectorXd::Zero(5).eval();
  };
  ap.h_jac = [](const Eigen::VectorXd& x) {
    return Eigen::MatrixXd::Ones(5, x.size()).eval();
  };
  CHECK(check_regularity(ap, Eigen::Vector2d(1.0, 1.0)) == 0.0);
}

TEST_CASE("regularity matches the eigen oracle on random instances") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    RandomInstance inst = build_random(3, 2, 0.5, seed);
    std::mt19937_64 rng(seed * 97 + 1);
    std::uniform_real_distribution<double> unit(-2.0, 2.0);
    for (const AgentProblem& ap : inst.problems) {
      Eigen::VectorXd p(ap.dim_local);
      for (int t = 0; t < ap.dim_local; ++t) p[t] = unit(rng);
      const Eigen::MatrixXd stack = constraint_stack(ap, p);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(stack *
                                                         stack.transpose());
      const double oracle =
          std::sqrt(std::max(0.0, eig.eigenvalues().minCoeff()));
      CHECK(check_regularity(ap, p) ==
            doctest::Approx(oracle).epsilon(1e-8));
    }
  }
}

TEST_CASE("constant estimation is deterministic and monotone in samples") {
  AgentProblem ap = simple_agent();
  const ConstantsEstimate a = estimate_constants(ap, 400, 11);
  const ConstantsEstimate b = estimate_constants(ap, 400, 11);
  CHECK(a.L_f == b.L_f);
  CHECK(a.L_h == b.L_h);
  CHECK(a.C_h == b.C_h);
  CHECK(a.theta == b.theta);
  CHECK(a.B == b.B);

  // Same seed, more samples: suprema can only grow, theta can only shrink.
  const ConstantsEstimate c = estimate_constants(ap, 800, 11);
  CHECK(c.L_f >= a.L_f);
  CHECK(c.L_phi >= a.L_phi);
  CHECK(c.L_h >= a.L_h);
  CHECK(c.M_h >= a.M_h);
  CHECK(c.C_h >= a.C_h);
  CHECK(c.B >= a.B);
  CHECK(c.theta <= a.theta);
}

TEST_CASE("constant estimates respect analytic bounds") {
  AgentProblem ap = simple_agent();
  const ConstantsEstimate est = estimate_constants(ap, 2000, 5);
  // f = x1^2 + x2 on [-4,4]^2: |grad f| <= sqrt(64 + 1).
  CHECK(est.L_f > 1.0);
  CHECK(est.L_f <= std::sqrt(65.0) + 1e-6);
  // h = x1 x2 - 6: |J| <= sqrt(32); the Jacobian is 1-Lipschitz rows.
  CHECK(est.L_h > 1.0);
  CHECK(est.L_h <= std::sqrt(32.0) + 1e-6);
  CHECK(est.M_h > 0.5);
  CHECK(est.M_h <= std::sqrt(2.0) + 1e-6);
  CHECK(est.L_phi == 0.0);
  CHECK(est.C_h > 0.0);
  CHECK(est.theta > 0.0);
  CHECK(est.B >= est.theta);
}

TEST_CASE("degenerate single-point box yields point estimates") {
  AgentProblem ap = simple_agent();
  ap.box_lower = Eigen::Vector2d(2.0, 3.0);
  ap.box_upper = Eigen::Vector2d(2.0, 3.0);
  const ConstantsEstimate est = estimate_constants(ap, 100, 3);
  CHECK(est.L_f == 0.0);
  CHECK(est.L_phi == 0.0);
  CHECK(est.L_h == 0.0);
  CHECK(est.M_h == 0.0);
  // h(2,3) = 0, so the pull J^T h vanishes there too.
  CHECK(est.C_h == doctest::Approx(0.0));
  CHECK(est.theta > 0.0);
  CHECK(est.B > 0.0);
}
