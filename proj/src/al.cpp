#include "pldm/al.hpp"

#include <cmath>

namespace pldm {

namespace {

constexpr double kCriticalTol = 1e-8;

void check_state_shapes(const SolverState& state,
                        const std::vector<AgentProblem>& problems,
                        const ConsensusLayout& layout) {
  const int n = static_cast<int>(problems.size());
  if (static_cast<int>(state.x_bar.size()) != n ||
      static_cast<int>(state.lambda.size()) != n ||
      static_cast<int>(state.mu.size()) != n) {
    throw DimensionMismatch("state holds a different number of agents");
  }
  if (state.z.size() != layout.global_dim) {
    throw DimensionMismatch("state z size does not match the layout");
  }
  for (int i = 0; i < n; ++i) {
    const int nbar = problems[i].dim_local;
    if (state.x_bar[i].size() != 2 * nbar ||
        state.mu[i].size() != nbar ||
        state.lambda[i].size() != problems[i].dim_h) {
      throw DimensionMismatch("state vectors for agent " +
                              std::to_string(problems[i].agent_id) +
                              " have wrong sizes");
    }
  }
}

double finite_or_throw(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw NonFiniteValue(std::string(what) + " is non-finite");
  }
  return v;
}

}  // namespace

double eval_g(const AgentProblem& problem, const Eigen::VectorXd& x_bar_i,
              const Eigen::VectorXd& lambda_i, double rho) {
  const int nbar = static_cast<int>(x_bar_i.size()) / 2;
  const Eigen::VectorXd x = x_bar_i.head(nbar);
  const Eigen::VectorXd y = x_bar_i.tail(nbar);
  double value = problem.f(x) + problem.phi(x) +
                 problem.slack_penalty * y.squaredNorm();
  if (problem.dim_h > 0) {
    const Eigen::VectorXd hx = problem.h(x);
    value += lambda_i.dot(hx) + 0.5 * rho * hx.squaredNorm();
  }
  return finite_or_throw(value, "g");
}

Eigen::VectorXd grad_g(const AgentProblem& problem,
                       const Eigen::VectorXd& x_bar_i,
                       const Eigen::VectorXd& lambda_i, double rho) {
  const int nbar = static_cast<int>(x_bar_i.size()) / 2;
  const Eigen::VectorXd x = x_bar_i.head(nbar);
  const Eigen::VectorXd y = x_bar_i.tail(nbar);
  Eigen::VectorXd grad(2 * nbar);
  grad.head(nbar) = problem.f_grad(x) + problem.phi_grad(x);
  if (problem.dim_h > 0) {
    const Eigen::VectorXd hx = problem.h(x);
    const Eigen::MatrixXd jac = problem.h_jac(x);
    grad.head(nbar) += jac.transpose() * (lambda_i + rho * hx);
  }
  grad.tail(nbar) = 2 * problem.slack_penalty * y;
  if (!grad.allFinite()) {
    throw NonFiniteValue("grad g is non-finite");
  }
  return grad;
}

double eval_al(const SolverState& state,
               const std::vector<AgentProblem>& problems,
               const ConsensusLayout& layout,
               const std::vector<Eigen::VectorXd>& lambda,
               const std::vector<Eigen::VectorXd>& mu) {
  check_state_shapes(state, problems, layout);
  double total = 0;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const int idx = static_cast<int>(i);
    const double g = eval_g(problems[i], state.x_bar[idx], lambda[idx],
                            state.rho);
    const Eigen::VectorXd gap = state.x_part(idx) + state.y_part(idx) -
                                layout.gather(idx, state.z);
    total += g + mu[idx].dot(gap) + 0.5 * state.rho * gap.squaredNorm();
  }
  return finite_or_throw(total, "augmented Lagrangian");
}

double eval_al(const SolverState& state,
               const std::vector<AgentProblem>& problems,
               const ConsensusLayout& layout) {
  return eval_al(state, problems, layout, state.lambda, state.mu);
}

double residual(const SolverState& state,
                const std::vector<AgentProblem>& problems,
                const ConsensusLayout& layout) {
  check_state_shapes(state, problems, layout);
  double total = 0;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const int idx = static_cast<int>(i);
    if (problems[i].dim_h > 0) {
      total += problems[i].h(state.x_part(idx)).norm();
    }
    total += (state.x_part(idx) + state.y_part(idx) -
              layout.gather(idx, state.z))
                 .norm();
  }
  return finite_or_throw(total, "residual");
}

double sum_h_norms(const SolverState& state,
                   const std::vector<AgentProblem>& problems) {
  double total = 0;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    if (problems[i].dim_h > 0) {
      total += problems[i].h(state.x_part(static_cast<int>(i))).norm();
    }
  }
  return finite_or_throw(total, "sum of constraint norms");
}

double lyapunov(const SolverState& state,
                const std::vector<AgentProblem>& problems,
                const ConsensusLayout& layout) {
  double drift = 0;
  for (std::size_t i = 0; i < state.x_bar.size(); ++i) {
    drift += (state.x_bar[i] - state.x_bar_prev[i]).squaredNorm();
  }
  return eval_al(state, problems, layout) + state.beta * drift;
}

SubgradNorms subgrad_norms(const SolverState& state,
                           const std::vector<AgentProblem>& problems,
                           const ConsensusLayout& layout) {
  check_state_shapes(state, problems, layout);
  SubgradNorms norms;

  double sq_x = 0;
  double sq_gamma = 0;
  double sq_u = 0;
  Eigen::VectorXd z_grad = Eigen::VectorXd::Zero(layout.global_dim);
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const int idx = static_cast<int>(i);
    const int nbar = problems[i].dim_local;
    const Eigen::VectorXd gap = state.x_part(idx) + state.y_part(idx) -
                                layout.gather(idx, state.z);
    const Eigen::VectorXd pull = state.mu[idx] + state.rho * gap;

    Eigen::VectorXd grad = grad_g(problems[i], state.x_bar[idx],
                                  state.lambda[idx], state.rho);
    grad.head(nbar) += pull;
    grad.tail(nbar) += pull;
    sq_x += grad.squaredNorm();

    if (problems[i].dim_h > 0) {
      sq_gamma += problems[i].h(state.x_part(idx)).squaredNorm();
    }
    sq_gamma += gap.squaredNorm();

    layout.add_scatter(idx, -pull, z_grad);
    sq_u += (state.x_bar[idx] - state.x_bar_prev[idx]).squaredNorm();
  }
  norms.norm_x = std::sqrt(sq_x);
  norms.norm_gamma = std::sqrt(sq_gamma);
  norms.norm_u = 2 * state.beta * std::sqrt(sq_u);

  const Eigen::VectorXd projected = (state.z - z_grad)
                                        .cwiseMax(layout.global_lower)
                                        .cwiseMin(layout.global_upper);
  norms.norm_z = (state.z - projected).norm();

  if (!std::isfinite(norms.max_norm())) {
    throw NonFiniteValue("stationarity norms are non-finite");
  }
  return norms;
}

SolutionClass classify_solution(const SolverState& state,
                                const std::vector<AgentProblem>& problems,
                                const ConsensusLayout& layout, double eps) {
  const SubgradNorms norms = subgrad_norms(state, problems, layout);
  const double res = residual(state, problems, layout);
  if (norms.max_norm() <= kCriticalTol && res <= kCriticalTol) {
    return SolutionClass::Critical;
  }
  double max_slack = 0;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    max_slack = std::max(max_slack, state.y_part(static_cast<int>(i)).norm());
  }
  if (norms.max_norm() <= eps && res <= eps && max_slack <= eps) {
    return SolutionClass::EpsCritical;
  }
  return SolutionClass::NotConverged;
}

const char* to_string(SolutionClass c) {
  switch (c) {
    case SolutionClass::Critical:
      return "Critical";
    case SolutionClass::EpsCritical:
      return "EpsCritical";
    case SolutionClass::NotConverged:
      return "NotConverged";
  }
  return "NotConverged";
}

}  // namespace pldm
