#pragma once

#include <Eigen/Dense>
#include <vector>

#include "pldm/problem.hpp"

namespace pldm {

/// Per-agent constants derived from a ConstantsEstimate at a given penalty
/// and step size.
struct AgentDerived {
  double L_g = 0;      // smoothness bound of the per-agent term g_i
  double Omega1 = 0;   // multiplier drift factor on the new displacement
  double Omega2 = 0;   // multiplier drift factor on the old displacement
};

/// Aggregated certificate constants.  b1/b2 bound the Lyapunov decrease,
/// b3/b4 its gradient norm.  The window is the admissible range for the
/// proximal weight beta so that both decrease coefficients are positive.
struct DerivedConstants {
  std::vector<AgentDerived> agents;
  double b1 = 0;
  double b2 = 0;
  double b3 = 0;
  double b4 = 0;
  double beta_window_lo = 0;    // max_i 2*Omega2^2/rho
  double beta_window_hi = 0;    // min_i (c_prev - L_g)/2 - 2*Omega1^2/rho
  bool cond_a = false;          // b1 > 0 and b2 > 0
  double nu_ratio = 0;          // b4^2/b2, NaN when b2 <= 0
  double cond_b_rhs = 0;        // b3^2/b1, NaN when b1 <= 0
  bool cond_b = false;          // nu_ratio <= cond_b_rhs, both defined
  double step_bound_m = 0;      // max_i L_g/2 + 2*Omega1^2/rho + beta_next
  double step_bound_l = 0;      // max_i L_g + Omega1*B + 4*beta_next
                                //       + rho + Omega1/rho
};

/// Evaluate every derived constant from sampled inputs.
///
///   L_g    = max(L_f + L_phi + M_gamma*L_h + rho*C_h, 2*M_i)
///   Omega1 = (L_g + c_i + L_f + L_phi + M_h*M_gamma) / theta
///   Omega2 = (L_g + c_prev_i) / theta
///   b1     = min_i (c_i - L_g)/2 - 2*Omega1^2/rho - beta_next
///   b2     = min_i beta - 2*Omega2^2/rho
///   b3     = max_i L_g + c_i + Omega1*B + 4*beta_next + rho + Omega1/rho
///   b4     = max_i Omega2*B + Omega2/rho
///
/// Throws ZeroRegularity when an agent's theta is not positive.
DerivedConstants compute_derived(const std::vector<ConstantsEstimate>& inputs,
                                 const std::vector<double>& slack_penalties,
                                 double rho, const Eigen::VectorXd& steps,
                                 const Eigen::VectorXd& steps_prev,
                                 double beta, double beta_next);

/// Proximal weight that makes the decrease/gradient constants hit a target
/// rate parameter nu:  2*((1 + B*rho)^2 + nu)/(nu*rho) * max_i Omega2^2.
double beta_from_nu(const DerivedConstants& derived, double B, double rho,
                    double nu);

/// Admissible step interval for a target rate parameter nu.  The interval
/// is the solution set of (c + L)^2 <= nu*(c/2 - M) intersected with
/// (0, inf); it collapses to a point when nu == 8L + 16M and is empty below
/// that, in which case InfeasibleNu is thrown.
std::pair<double, double> step_interval(double m_bound, double l_bound,
                                        double nu);

}  // namespace pldm
