#include "pldm/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

namespace pldm {

namespace {

int thread_budget() {
  const char* env = std::getenv("PLDM_THREADS");
  if (env == nullptr) {
    return 0;
  }
  const long v = std::strtol(env, nullptr, 10);
  return v > 0 ? static_cast<int>(v) : 0;
}

/// Run fn(i) for i in [0, n), split over up to `threads` workers.  Each
/// index writes only its own output slot, so results are identical to the
/// sequential order.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
  const int workers = std::min(threads, n);
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (int i = w; i < n; i += workers) {
          fn(i);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) {
    t.join();
  }
  for (auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
}

}  // namespace

void SolverConfig::validate(int num_agents) const {
  if (!(rho0 > 0)) {
    throw InvalidParams("config: rho0 must be positive");
  }
  if (delta_penalty < 0) {
    throw InvalidParams("config: delta_penalty must be non-negative");
  }
  if (!(eta > 0)) {
    throw InvalidParams("config: eta must be positive");
  }
  if (!(eps_stop > 0)) {
    throw InvalidParams("config: eps_stop must be positive");
  }
  if (max_iters < 0) {
    throw InvalidParams("config: max_iters must be non-negative");
  }
  if (!(c0 > 0)) {
    throw InvalidParams("config: c0 must be positive");
  }
  if (!(backtrack_divisor > 0) || backtrack_divisor >= 1) {
    throw InvalidParams("config: backtrack_divisor must lie in (0, 1)");
  }
  if (alpha < 0) {
    throw InvalidParams("config: alpha must be non-negative");
  }
  if (!(beta > 0)) {
    throw InvalidParams("config: beta must be positive");
  }
  const bool needs_constants = step_policy == StepPolicy::Theoretical ||
                               beta_policy == BetaPolicy::FromNu;
  if (needs_constants) {
    if (!(nu > 0)) {
      throw InvalidParams("config: the chosen policy needs nu > 0");
    }
    if (static_cast<int>(constants.size()) != num_agents) {
      throw InvalidParams(
          "config: the chosen policy needs one ConstantsEstimate per agent");
    }
  }
}

Eigen::VectorXd solve_z(const SolverState& state,
                        const std::vector<AgentProblem>& problems,
                        const ConsensusLayout& layout) {
  if (!(state.rho > 0)) {
    throw InvalidParams("solve_z: rho must be positive");
  }
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(layout.global_dim);
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const int idx = static_cast<int>(i);
    const Eigen::VectorXd v = state.x_part(idx) + state.y_part(idx) +
                              state.mu[idx] / state.rho;
    layout.add_scatter(idx, v, acc);
  }
  Eigen::VectorXd z(layout.global_dim);
  for (int m = 0; m < layout.global_dim; ++m) {
    if (layout.copy_count[m] <= 0) {
      throw EmptyCopySet("solve_z: coordinate " + std::to_string(m) +
                         " has no copies");
    }
    z[m] = acc[m] / layout.copy_count[m];
  }
  z = z.cwiseMax(layout.global_lower).cwiseMin(layout.global_upper);
  if (!z.allFinite()) {
    throw NonFiniteValue("solve_z produced a non-finite vector");
  }
  return z;
}

Eigen::VectorXd primal_x_update(const AgentProblem& problem,
                                const Eigen::VectorXd& x_bar_i,
                                const Eigen::VectorXd& lambda_i,
                                const Eigen::VectorXd& mu_i,
                                const Eigen::VectorXd& ez_new, double rho,
                                double c) {
  const int nbar = static_cast<int>(x_bar_i.size()) / 2;
  const double det = c * (c + 2 * rho);
  if (!(det > 0)) {
    throw SingularStep("primal update: c*(c + 2 rho) must be positive");
  }
  const Eigen::VectorXd g = grad_g(problem, x_bar_i, lambda_i, rho);
  const Eigen::VectorXd r_x = c * x_bar_i.head(nbar) + rho * ez_new - mu_i -
                              g.head(nbar);
  const Eigen::VectorXd r_y = c * x_bar_i.tail(nbar) + rho * ez_new - mu_i -
                              g.tail(nbar);
  Eigen::VectorXd out(2 * nbar);
  out.head(nbar) = ((c + rho) * r_x - rho * r_y) / det;
  out.tail(nbar) = ((c + rho) * r_y - rho * r_x) / det;
  if (!out.allFinite()) {
    throw NonFiniteValue("primal update produced a non-finite vector");
  }
  return out;
}

LinesearchResult linesearch_step(const AgentProblem& problem,
                                 const Eigen::VectorXd& x_bar_i,
                                 const Eigen::VectorXd& lambda_i,
                                 const Eigen::VectorXd& mu_i,
                                 const Eigen::VectorXd& ez_new, double rho,
                                 double c_init, double alpha,
                                 double divisor) {
  if (!(c_init > 0) || !(divisor > 0) || divisor >= 1) {
    throw InvalidParams("linesearch: need c_init > 0 and divisor in (0, 1)");
  }
  const double g_prev = eval_g(problem, x_bar_i, lambda_i, rho);
  const Eigen::VectorXd grad_prev = grad_g(problem, x_bar_i, lambda_i, rho);
  // Rounding guard: near a fixed point both sides agree to machine
  // precision and the quadratic terms vanish; without the slack the test
  // would fail on noise forever.
  const double slack = 1e-12 * std::max(1.0, std::abs(g_prev));

  double c = c_init;
  for (int attempt = 0; attempt <= kLinesearchRetryCap; ++attempt) {
    const Eigen::VectorXd cand =
        primal_x_update(problem, x_bar_i, lambda_i, mu_i, ez_new, rho, c);
    const Eigen::VectorXd d = cand - x_bar_i;
    const double lhs = eval_g(problem, cand, lambda_i, rho) +
                       alpha * d.squaredNorm();
    const double rhs = g_prev + grad_prev.dot(d) + 0.5 * c * d.squaredNorm();
    if (lhs <= rhs + slack) {
      return {c, cand, attempt};
    }
    c /= divisor;
  }
  throw LinesearchStall("linesearch: retry budget exhausted");
}

void dual_update(SolverState& state,
                 const std::vector<AgentProblem>& problems,
                 const ConsensusLayout& layout) {
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const int idx = static_cast<int>(i);
    if (problems[i].dim_h > 0) {
      state.lambda[idx] += state.rho * problems[i].h(state.x_part(idx));
    }
    state.mu[idx] += state.rho * (state.x_part(idx) + state.y_part(idx) -
                                  layout.gather(idx, state.z));
    if (!state.lambda[idx].allFinite() || !state.mu[idx].allFinite()) {
      throw NonFiniteValue("dual update produced a non-finite multiplier");
    }
  }
}

bool adapt_penalty(SolverState& state, double sum_h, double eta,
                   double delta_penalty) {
  const bool in_region = sum_h <= eta;
  if (in_region) {
    if (!state.k_underbar.has_value()) {
      state.k_underbar = state.iter;
    }
  } else {
    state.k_underbar.reset();
    state.rho += delta_penalty;
  }
  return in_region;
}

bool adapt_penalty(SolverState& state,
                   const std::vector<AgentProblem>& problems, double eta,
                   double delta_penalty) {
  return adapt_penalty(state, sum_h_norms(state, problems), eta,
                       delta_penalty);
}

TheoreticalStep theoretical_stepsize(
    const std::vector<ConstantsEstimate>& constants,
    const std::vector<AgentProblem>& problems, double rho,
    const Eigen::VectorXd& steps_prev, double nu) {
  std::vector<double> penalties(problems.size());
  double max_b = 0;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    penalties[i] = problems[i].slack_penalty;
    max_b = std::max(max_b, constants[i].B);
  }
  // The drift factors depend on the step being chosen; evaluate them at the
  // previous accepted steps and treat them as constants for this iteration.
  DerivedConstants base = compute_derived(constants, penalties, rho,
                                          steps_prev, steps_prev, 0.0, 0.0);
  TheoreticalStep out;
  out.beta = beta_from_nu(base, max_b, rho, nu);
  const DerivedConstants with_beta =
      compute_derived(constants, penalties, rho, steps_prev, steps_prev,
                      out.beta, out.beta);
  const auto interval =
      step_interval(with_beta.step_bound_m, with_beta.step_bound_l, nu);
  out.c_lo = interval.first;
  out.c_hi = interval.second;
  return out;
}

SolverState make_init(const std::vector<AgentProblem>& problems,
                      const ConsensusLayout& layout, InitKind kind,
                      std::uint64_t seed) {
  SolverState state;
  state.z.resize(layout.global_dim);
  if (kind == InitKind::Midpoint) {
    state.z = 0.5 * (layout.global_lower + layout.global_upper);
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int m = 0; m < layout.global_dim; ++m) {
      state.z[m] = layout.global_lower[m] +
                   (layout.global_upper[m] - layout.global_lower[m]) *
                       unit(rng);
    }
  }
  const int n = static_cast<int>(problems.size());
  state.x_bar.resize(n);
  state.lambda.resize(n);
  state.mu.resize(n);
  for (int i = 0; i < n; ++i) {
    const int nbar = problems[i].dim_local;
    state.x_bar[i] = Eigen::VectorXd::Zero(2 * nbar);
    state.x_bar[i].head(nbar) = layout.gather(i, state.z);
    state.lambda[i] = Eigen::VectorXd::Zero(problems[i].dim_h);
    state.mu[i] = Eigen::VectorXd::Zero(nbar);
  }
  state.x_bar_prev = state.x_bar;
  state.step_sizes = Eigen::VectorXd::Ones(n);
  state.step_sizes_prev = state.step_sizes;
  return state;
}

RunResult run(const std::vector<AgentProblem>& problems,
              const ConsensusLayout& layout, const SolverConfig& config,
              const SolverState& init) {
  const int n = static_cast<int>(problems.size());
  config.validate(n);

  RunResult result;
  result.state = init;
  SolverState& state = result.state;
  state.rho = config.rho0;
  state.beta = config.beta;
  state.step_sizes = Eigen::VectorXd::Constant(n, config.c0);
  state.step_sizes_prev = state.step_sizes;

  if (config.record_states) {
    result.states.push_back(state);
  }
  if (config.max_iters == 0) {
    return result;
  }

  const int threads = thread_budget();
  std::vector<double> penalties(n);
  for (int i = 0; i < n; ++i) {
    penalties[i] = problems[i].slack_penalty;
  }
  const auto start_time = std::chrono::steady_clock::now();
  result.trace.reserve(static_cast<std::size_t>(config.max_iters));

  for (int k = 0; k < config.max_iters; ++k) {
    const double rho_used = state.rho;
    state.iter = k;

    // Step size and proximal weight plan for this iteration.
    double beta_k = config.beta;
    bool theoretical_ok = false;
    double c_theoretical = 0;
    if (config.step_policy == StepPolicy::Theoretical ||
        config.beta_policy == BetaPolicy::FromNu) {
      try {
        const TheoreticalStep plan =
            theoretical_stepsize(config.constants, problems, rho_used,
                                 state.step_sizes, config.nu);
        if (config.beta_policy == BetaPolicy::FromNu) {
          beta_k = plan.beta;
        }
        c_theoretical = 0.5 * (plan.c_lo + plan.c_hi);
        theoretical_ok = c_theoretical > 0;
      } catch (const InfeasibleNu&) {
        theoretical_ok = false;
      } catch (const ZeroRegularity&) {
        theoretical_ok = false;
      }
      if (config.step_policy == StepPolicy::Theoretical && !theoretical_ok) {
        result.step_fallbacks.push_back(k);
      }
    }
    state.beta = beta_k;

    // Consensus update uses the current primal/dual iterates.
    const Eigen::VectorXd z_new = solve_z(state, problems, layout);

    // Parallel agent updates read the pre-update snapshot only.
    std::vector<Eigen::VectorXd> x_new(n);
    Eigen::VectorXd steps_new(n);
    const bool use_theoretical =
        config.step_policy == StepPolicy::Theoretical && theoretical_ok;
    parallel_for(n, threads, [&](int i) {
      const Eigen::VectorXd ez = layout.gather(i, z_new);
      if (use_theoretical) {
        x_new[i] = primal_x_update(problems[i], state.x_bar[i],
                                   state.lambda[i], state.mu[i], ez,
                                   rho_used, c_theoretical);
        steps_new[i] = c_theoretical;
      } else {
        const LinesearchResult ls = linesearch_step(
            problems[i], state.x_bar[i], state.lambda[i], state.mu[i], ez,
            rho_used, config.c0, config.alpha, config.backtrack_divisor);
        x_new[i] = ls.candidate;
        steps_new[i] = ls.step;
      }
    });

    state.x_bar_prev = state.x_bar;
    state.x_bar = std::move(x_new);
    state.z = z_new;
    state.step_sizes_prev = state.step_sizes;
    state.step_sizes = steps_new;

    dual_update(state, problems, layout);

    const double sum_h = sum_h_norms(state, problems);
    const double res = residual(state, problems, layout);
    const SubgradNorms norms = subgrad_norms(state, problems, layout);

    IterationTrace row;
    row.iter = k;
    row.residual = res;
    row.al_value = eval_al(state, problems, layout);
    row.lyapunov = lyapunov(state, problems, layout);
    row.grad_x = norms.norm_x;
    row.grad_z = norms.norm_z;
    row.grad_gamma = norms.norm_gamma;
    row.grad_u = norms.norm_u;
    row.rho = rho_used;
    row.beta = beta_k;
    row.sum_h = sum_h;
    row.step_min = state.step_sizes.minCoeff();
    row.step_max = state.step_sizes.maxCoeff();
    row.wall_time = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - start_time)
                        .count();

    if (config.record_states) {
      // Snapshot before the penalty bump so the stored rho is the one this
      // iteration actually used.
      result.states.push_back(state);
    }

    row.in_region = adapt_penalty(state, sum_h, config.eta,
                                  config.delta_penalty);
    result.trace.push_back(row);
    state.iter = k + 1;

    if (res <= config.eps_stop) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace pldm
