#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "pldm/problem.hpp"

namespace pldm {

/// Full iterate of the solver.  Each agent's slack-extended vector
/// x_bar[i] stacks X_i on top of the slack block Y_i (both length
/// dim_local), so x_bar[i] has length 2*dim_local.
struct SolverState {
  std::vector<Eigen::VectorXd> x_bar;
  std::vector<Eigen::VectorXd> x_bar_prev;   // previous iterate, for the
                                             // Lyapunov proximal term
  Eigen::VectorXd z;                         // consensus vector, inside box
  std::vector<Eigen::VectorXd> lambda;       // per-agent, length dim_h
  std::vector<Eigen::VectorXd> mu;           // per-agent, length dim_local
  double rho = 1.0;                          // penalty in use this iteration
  Eigen::VectorXd step_sizes;                // c_i of the last primal update
  Eigen::VectorXd step_sizes_prev;
  double beta = 1.0;                         // Lyapunov proximal weight
  int iter = 0;
  std::optional<int> k_underbar;             // first iteration with
                                             // sum_i |h_i| <= eta

  Eigen::Ref<const Eigen::VectorXd> x_part(int i) const {
    return x_bar[i].head(x_bar[i].size() / 2);
  }
  Eigen::Ref<const Eigen::VectorXd> y_part(int i) const {
    return x_bar[i].tail(x_bar[i].size() / 2);
  }
};

enum class SolutionClass { Critical, EpsCritical, NotConverged };

/// Stationarity measures of a state, one per variable group.  norm_z is a
/// projected-gradient residual so the box constraint on Z is respected.
struct SubgradNorms {
  double norm_x = 0;      // gradient over all slack-extended vectors
  double norm_z = 0;      // |Z - P_box(Z - dL/dZ)|
  double norm_gamma = 0;  // stacked constraint violations (dual gradient)
  double norm_u = 0;      // 2 beta |x_bar - x_bar_prev|
  double max_norm() const {
    return std::max(std::max(norm_x, norm_z), std::max(norm_gamma, norm_u));
  }
};

/// Value of the augmented Lagrangian
///   sum_i [ f_i + phi_i + M_i|Y_i|^2 + lambda_i.h_i + (rho/2)|h_i|^2
///           + mu_i.(X_i + Y_i - E_i Z) + (rho/2)|X_i + Y_i - E_i Z|^2 ].
/// Terms are accumulated in ascending agent order so the result is
/// reproducible.  Throws NonFiniteValue if a term is NaN or infinite.
double eval_al(const SolverState& state,
               const std::vector<AgentProblem>& problems,
               const ConsensusLayout& layout);

/// Same sum with the multipliers overridden (used when comparing
/// consecutive iterates at frozen duals).
double eval_al(const SolverState& state,
               const std::vector<AgentProblem>& problems,
               const ConsensusLayout& layout,
               const std::vector<Eigen::VectorXd>& lambda,
               const std::vector<Eigen::VectorXd>& mu);

/// Smooth per-agent part of the Lagrangian,
///   g_i = f_i + phi_i + lambda_i.h_i + (rho/2)|h_i|^2 + M_i|Y_i|^2,
/// evaluated at one slack-extended vector.
double eval_g(const AgentProblem& problem, const Eigen::VectorXd& x_bar_i,
              const Eigen::VectorXd& lambda_i, double rho);

/// Gradient of g_i: the X block is
///   grad f + grad phi + J_h^T lambda + rho J_h^T h,
/// the slack block is 2 M_i Y_i.
Eigen::VectorXd grad_g(const AgentProblem& problem,
                       const Eigen::VectorXd& x_bar_i,
                       const Eigen::VectorXd& lambda_i, double rho);

/// Stopping quantity R = sum_i ( |h_i(X_i)| + |X_i + Y_i - E_i Z| ).
double residual(const SolverState& state,
                const std::vector<AgentProblem>& problems,
                const ConsensusLayout& layout);

/// sum_i |h_i(X_i)|, the quantity the penalty adaptation watches.
double sum_h_norms(const SolverState& state,
                   const std::vector<AgentProblem>& problems);

/// Lyapunov value: eval_al plus beta * |x_bar - x_bar_prev|^2.
double lyapunov(const SolverState& state,
                const std::vector<AgentProblem>& problems,
                const ConsensusLayout& layout);

/// Stationarity norms of the state (all four variable groups).
SubgradNorms subgrad_norms(const SolverState& state,
                           const std::vector<AgentProblem>& problems,
                           const ConsensusLayout& layout);

/// Critical when every stationarity norm and the residual are at machine
/// level (1e-8); EpsCritical when they are within eps and every slack block
/// is within eps of zero; NotConverged otherwise.
SolutionClass classify_solution(const SolverState& state,
                                const std::vector<AgentProblem>& problems,
                                const ConsensusLayout& layout, double eps);

const char* to_string(SolutionClass c);

}  // namespace pldm
