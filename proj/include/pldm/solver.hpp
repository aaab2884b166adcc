#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "pldm/al.hpp"
#include "pldm/constants.hpp"
#include "pldm/problem.hpp"

namespace pldm {

enum class StepPolicy { Linesearch, Theoretical };
enum class BetaPolicy { Fixed, FromNu };
enum class InitKind { Midpoint, RandomInBox };

/// Backtracking retry budget; exceeding it raises LinesearchStall.
inline constexpr int kLinesearchRetryCap = 60;

struct SolverConfig {
  double rho0 = 1.0;
  double delta_penalty = 1.0;      // additive penalty increment
  double eta = 0.5;                // threshold on sum_i |h_i|
  double eps_stop = 1e-4;          // stop when the residual drops below
  int max_iters = 2000;

  StepPolicy step_policy = StepPolicy::Linesearch;
  double c0 = 1.0;                 // backtracking restart value
  double backtrack_divisor = 0.5;  // c grows by 1/divisor on failure
  double alpha = 0.1;              // descent-test margin
  double nu = 0.0;                 // target rate parameter (Theoretical)

  BetaPolicy beta_policy = BetaPolicy::Fixed;
  double beta = 1.0;               // Lyapunov proximal weight (Fixed)

  std::uint64_t seed = 0;
  bool record_states = false;      // keep per-iteration snapshots

  // Sampled constants, one per agent; required by the Theoretical step
  // policy and the FromNu beta policy.
  std::vector<ConstantsEstimate> constants;

  /// Throws InvalidParams when a field violates its documented range.
  void validate(int num_agents) const;
};

/// One row of the convergence trace.  wall_time is excluded from file
/// output so traces compare bitwise across runs.
struct IterationTrace {
  int iter = 0;
  double residual = 0;
  double al_value = 0;
  double lyapunov = 0;
  double grad_x = 0;
  double grad_z = 0;
  double grad_gamma = 0;
  double grad_u = 0;
  double rho = 0;        // penalty used by this iteration
  double beta = 0;
  double sum_h = 0;
  bool in_region = false;
  double step_min = 0;
  double step_max = 0;
  double wall_time = 0;  // seconds since run start
};

struct RunResult {
  SolverState state;
  std::vector<IterationTrace> trace;
  std::vector<SolverState> states;      // snapshots, when requested; entry 0
                                        // is the initial state
  std::vector<int> step_fallbacks;      // iterations where the theoretical
                                        // interval was unusable
  bool converged = false;
};

struct LinesearchResult {
  double step = 0;             // accepted c
  Eigen::VectorXd candidate;   // update computed with the accepted c
  int retries = 0;
};

/// Exact minimizer of the consensus subproblem over the box: coordinate m
/// averages (X_i + Y_i + mu_i/rho) over the agents holding a copy, then
/// clips to the box.
Eigen::VectorXd solve_z(const SolverState& state,
                        const std::vector<AgentProblem>& problems,
                        const ConsensusLayout& layout);

/// Closed-form minimizer of the proximal-linearized agent subproblem.
/// With g evaluated at the current iterate and r_x, r_y the prox targets,
/// each coordinate pair solves a 2x2 system with determinant c*(c+2rho);
/// SingularStep when that determinant is not positive.
Eigen::VectorXd primal_x_update(const AgentProblem& problem,
                                const Eigen::VectorXd& x_bar_i,
                                const Eigen::VectorXd& lambda_i,
                                const Eigen::VectorXd& mu_i,
                                const Eigen::VectorXd& ez_new, double rho,
                                double c);

/// Backward linesearch: propose with the current c, test the descent
/// inequality
///   g(cand) + alpha*|d|^2 <= g(prev) + <grad g(prev), d> + (c/2)|d|^2,
/// and divide c by `divisor` (in (0,1), so c grows) until it passes.  The
/// returned candidate is the one computed with the accepted c.
LinesearchResult linesearch_step(const AgentProblem& problem,
                                 const Eigen::VectorXd& x_bar_i,
                                 const Eigen::VectorXd& lambda_i,
                                 const Eigen::VectorXd& mu_i,
                                 const Eigen::VectorXd& ez_new, double rho,
                                 double c_init, double alpha,
                                 double divisor);

/// Ascent step on the multipliers with the current penalty:
/// lambda += rho*h(X), mu += rho*(X + Y - E Z).
void dual_update(SolverState& state,
                 const std::vector<AgentProblem>& problems,
                 const ConsensusLayout& layout);

/// Additive penalty growth while the iterate is outside the region
/// sum_i |h_i| <= eta.  k_underbar marks the start of the current
/// uninterrupted in-region streak and is cleared when the iterate leaves
/// the region, so after a run it points at the iteration from which the
/// penalty stayed frozen.  Returns whether the iterate was in the region.
bool adapt_penalty(SolverState& state,
                   const std::vector<AgentProblem>& problems, double eta,
                   double delta_penalty);
bool adapt_penalty(SolverState& state, double sum_h, double eta,
                   double delta_penalty);

struct TheoreticalStep {
  double c_lo = 0;
  double c_hi = 0;
  double beta = 0;   // proximal weight produced by the rate parameter
};

/// Step interval for a target rate parameter nu, evaluated from sampled
/// constants at the previous accepted steps.  Throws InfeasibleNu when the
/// interval is empty and ZeroRegularity when a theta is unusable.
TheoreticalStep theoretical_stepsize(
    const std::vector<ConstantsEstimate>& constants,
    const std::vector<AgentProblem>& problems, double rho,
    const Eigen::VectorXd& steps_prev, double nu);

/// Build a start state: box midpoint or a seeded uniform draw from the
/// box, copied consistently to every agent; slacks and duals start at zero.
SolverState make_init(const std::vector<AgentProblem>& problems,
                      const ConsensusLayout& layout, InitKind kind,
                      std::uint64_t seed);

/// Run the solver from `init`.  Per iteration: consensus update, parallel
/// per-agent proximal updates, dual ascent, penalty adaptation; stop when
/// the residual reaches eps_stop or the iteration budget is exhausted.
/// The number of worker threads for the agent loop is capped by the
/// PLDM_THREADS environment variable (0 or unset runs sequentially); the
/// produced iterates and trace do not depend on the thread count.
RunResult run(const std::vector<AgentProblem>& problems,
              const ConsensusLayout& layout, const SolverConfig& config,
              const SolverState& init);

}  // namespace pldm
