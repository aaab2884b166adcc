#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "pldm/problem.hpp"

namespace pldm {

struct Instance {
  std::vector<AgentProblem> problems;
  ConsensusLayout layout;
};

/// Two scalar agents with objective x1 + x2 + x1*x2^2, the product split
/// half-and-half between them.  Agent 1 carries x1*x2 = 2, agent 2 carries
/// x1^2 + x2^2 = 5; boxes are [0,4] and [0,5].  The feasible points are
/// (1,2) and (2,1); (2,1) attains the smaller objective, 5.
Instance build_toy();

/// Multi-zone HVAC tracking problem over a horizon.  Each zone decides its
/// supply-air mass flows and room temperatures; zone dynamics couple
/// neighbouring temperatures, and a cubic fan-power term couples every
/// zone's flow, so the copy layout is the complete graph.  Unset
/// coefficient fields are generated from the seed.
struct HvacParams {
  int zones = 3;
  int horizon = 8;
  double dt_hours = 0.25;
  double comfort_low = 24.0;
  double comfort_high = 26.0;
  double flow_max = 0.5;       // kg/s, lower bound 0
  double coil_temp = 15.0;     // supply-air temperature, degrees C
  double heat_capacity = 1.005;  // c_p, kJ/(kg K)
  double duct_ratio = 0.8;     // recirculating fraction of supply air
  double fan_coeff = 0.005;    // cubic fan-power coefficient
  double slack_penalty = 100.0;

  Eigen::VectorXd prices;        // length horizon; default flat 0.1
  Eigen::VectorXd outside_temp;  // length horizon; default flat 30
  Eigen::VectorXd initial_temp;  // length zones; default flat 25
  Eigen::MatrixXd a_coupling;    // zones x zones, ring pattern, rows sum < 1
  Eigen::VectorXd c_flow;        // per-zone flow-temperature coefficient < 0
  Eigen::MatrixXd disturbance;   // zones x horizon

  /// Fill every unset array with seeded defaults.
  void fill_defaults(std::uint64_t seed);
  void validate() const;
};

Instance build_hvac(HvacParams params, std::uint64_t seed);

/// Seeded random network: quartic-plus-linear objectives, bilinear coupling
/// terms and one quadratic equality per agent calibrated to vanish at an
/// interior anchor point, so a feasible point exists and the constraint
/// Jacobian is generically full rank there.
struct RandomInstance {
  std::vector<AgentProblem> problems;
  ConsensusLayout layout;
  Eigen::VectorXd anchor;                    // feasible interior point
  std::vector<ConstantsEstimate> constants;  // sampled certificate inputs
};

RandomInstance build_random(int n_agents, int dim, double density,
                            std::uint64_t seed);

/// Multistart quadratic-penalty baseline on the original coupled problem:
/// projected gradient descent with the penalty weight escalated tenfold per
/// round, keeping the best start whose constraint violation ends within
/// feas_tol.  Ties go to the lowest start index.  Deterministic given the
/// seed; throws NoFeasiblePointFound when every start misses feas_tol.
struct BaselineResult {
  Eigen::VectorXd x;         // global minimizer candidate
  double objective = 0;
  double max_violation = 0;  // max over agents of |h_i|_inf
  int start_index = -1;
};

BaselineResult centralized_baseline(const std::vector<AgentProblem>& problems,
                                    const ConsensusLayout& layout,
                                    int multistarts, std::uint64_t seed,
                                    double feas_tol = 1e-6);

/// Plain objective sum f_i + phi_i at a global point (used to compare the
/// solver against the baseline).
double global_objective(const std::vector<AgentProblem>& problems,
                        const ConsensusLayout& layout,
                        const Eigen::VectorXd& x);

}  // namespace pldm
