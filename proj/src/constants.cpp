#include "pldm/constants.hpp"

#include <cmath>
#include <limits>

namespace pldm {

DerivedConstants compute_derived(const std::vector<ConstantsEstimate>& inputs,
                                 const std::vector<double>& slack_penalties,
                                 double rho, const Eigen::VectorXd& steps,
                                 const Eigen::VectorXd& steps_prev,
                                 double beta, double beta_next) {
  const int n = static_cast<int>(inputs.size());
  if (n == 0) {
    throw EmptyNetwork("compute_derived: no constants supplied");
  }
  if (static_cast<int>(slack_penalties.size()) != n || steps.size() != n ||
      steps_prev.size() != n) {
    throw DimensionMismatch("compute_derived: per-agent inputs disagree");
  }
  if (!(rho > 0)) {
    throw InvalidParams("compute_derived: rho must be positive");
  }

  DerivedConstants out;
  out.agents.resize(n);
  const double inf = std::numeric_limits<double>::infinity();
  out.b1 = inf;
  out.b2 = inf;
  out.beta_window_lo = 0;
  out.beta_window_hi = inf;
  double max_b = 0;
  for (int i = 0; i < n; ++i) {
    const ConstantsEstimate& c = inputs[i];
    if (!(c.theta > 0)) {
      throw ZeroRegularity("compute_derived: agent " + std::to_string(i + 1) +
                           " has theta <= 0");
    }
    AgentDerived& d = out.agents[i];
    d.L_g = std::max(c.L_f + c.L_phi + c.M_gamma * c.L_h + rho * c.C_h,
                     2 * slack_penalties[i]);
    d.Omega1 = (d.L_g + steps[i] + c.L_f + c.L_phi + c.M_h * c.M_gamma) /
               c.theta;
    d.Omega2 = (d.L_g + steps_prev[i]) / c.theta;

    out.b1 = std::min(out.b1, 0.5 * (steps[i] - d.L_g) -
                                  2 * d.Omega1 * d.Omega1 / rho - beta_next);
    out.b2 = std::min(out.b2, beta - 2 * d.Omega2 * d.Omega2 / rho);
    out.b3 = std::max(out.b3, d.L_g + steps[i] + d.Omega1 * c.B +
                                  4 * beta_next + rho + d.Omega1 / rho);
    out.b4 = std::max(out.b4, d.Omega2 * c.B + d.Omega2 / rho);

    out.beta_window_lo =
        std::max(out.beta_window_lo, 2 * d.Omega2 * d.Omega2 / rho);
    out.beta_window_hi =
        std::min(out.beta_window_hi, 0.5 * (steps_prev[i] - d.L_g) -
                                         2 * d.Omega1 * d.Omega1 / rho);

    out.step_bound_m =
        std::max(out.step_bound_m,
                 0.5 * d.L_g + 2 * d.Omega1 * d.Omega1 / rho + beta_next);
    out.step_bound_l =
        std::max(out.step_bound_l, d.L_g + d.Omega1 * c.B + 4 * beta_next +
                                       rho + d.Omega1 / rho);
    max_b = std::max(max_b, c.B);
  }

  out.cond_a = out.b1 > 0 && out.b2 > 0;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out.nu_ratio = out.b2 > 0 ? out.b4 * out.b4 / out.b2 : nan;
  out.cond_b_rhs = out.b1 > 0 ? out.b3 * out.b3 / out.b1 : nan;
  out.cond_b = out.b1 > 0 && out.b2 > 0 && out.nu_ratio <= out.cond_b_rhs;
  return out;
}

double beta_from_nu(const DerivedConstants& derived, double B, double rho,
                    double nu) {
  if (!(nu > 0) || !(rho > 0)) {
    throw InvalidParams("beta_from_nu: nu and rho must be positive");
  }
  double max_omega2_sq = 0;
  for (const AgentDerived& d : derived.agents) {
    max_omega2_sq = std::max(max_omega2_sq, d.Omega2 * d.Omega2);
  }
  const double one_plus = 1 + B * rho;
  return 2 * (one_plus * one_plus + nu) / (nu * rho) * max_omega2_sq;
}

std::pair<double, double> step_interval(double m_bound, double l_bound,
                                        double nu) {
  if (!(nu > 0)) {
    throw InvalidParams("step_interval: nu must be positive");
  }
  if (m_bound < 0 || l_bound < 0) {
    throw InvalidParams("step_interval: bounds must be non-negative");
  }
  // (c + L)^2 <= nu*(c/2 - M) expands to
  //   c^2 + (2L - nu/2) c + (L^2 + nu M) <= 0,
  // real roots need nu >= 8L + 16M.
  const double discriminant = nu * nu - (8 * l_bound + 16 * m_bound) * nu;
  if (discriminant < 0) {
    throw InfeasibleNu("step_interval: nu below 8L + 16M admits no step");
  }
  const double root = std::sqrt(discriminant);
  double lo = (nu - 4 * l_bound - root) / 4;
  double hi = (nu - 4 * l_bound + root) / 4;
  lo = std::max(lo, 0.0);
  if (hi <= 0) {
    throw InfeasibleNu("step_interval: admissible interval has no positive "
                       "step");
  }
  return {lo, hi};
}

}  // namespace pldm
