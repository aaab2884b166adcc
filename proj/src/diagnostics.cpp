#include "pldm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pldm {

namespace {

constexpr double kHoldSlack = 1e-9;

bool holds_with_slack(double margin, double scale) {
  return margin >= -kHoldSlack * std::max(1.0, std::abs(scale));
}

double lyapunov_at(const SolverState& state,
                   const std::vector<AgentProblem>& problems,
                   const ConsensusLayout& layout, double beta, double rho) {
  SolverState s = state;
  s.rho = rho;
  double drift = 0;
  for (std::size_t i = 0; i < s.x_bar.size(); ++i) {
    drift += (s.x_bar[i] - s.x_bar_prev[i]).squaredNorm();
  }
  return eval_al(s, problems, layout) + beta * drift;
}

/// Gradient norm of the Lyapunov function at a post-update state: the
/// slack-extended block picks up 2*beta times the last displacement, the
/// consensus block is a projected residual, the multiplier block is the
/// constraint gap and the prox-center block mirrors the displacement.
double lyapunov_grad_norm(const SolverState& state,
                          const std::vector<AgentProblem>& problems,
                          const ConsensusLayout& layout, double beta,
                          double rho) {
  double sq = 0;
  Eigen::VectorXd z_grad = Eigen::VectorXd::Zero(layout.global_dim);
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const int idx = static_cast<int>(i);
    const int nbar = problems[i].dim_local;
    const Eigen::VectorXd gap = state.x_part(idx) + state.y_part(idx) -
                                layout.gather(idx, state.z);
    const Eigen::VectorXd pull = state.mu[idx] + rho * gap;

    Eigen::VectorXd grad = grad_g(problems[i], state.x_bar[idx],
                                  state.lambda[idx], rho);
    grad.head(nbar) += pull;
    grad.tail(nbar) += pull;
    grad += 2 * beta * (state.x_bar[idx] - state.x_bar_prev[idx]);
    sq += grad.squaredNorm();

    if (problems[i].dim_h > 0) {
      sq += problems[i].h(state.x_part(idx)).squaredNorm();
    }
    sq += gap.squaredNorm();
    sq += 4 * beta * beta *
          (state.x_bar[idx] - state.x_bar_prev[idx]).squaredNorm();
    layout.add_scatter(idx, -pull, z_grad);
  }
  const Eigen::VectorXd projected = (state.z - z_grad)
                                        .cwiseMax(layout.global_lower)
                                        .cwiseMin(layout.global_upper);
  sq += (state.z - projected).squaredNorm();
  return std::sqrt(sq);
}

struct Regression {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
};

Regression regress(const std::vector<double>& xs,
                   const std::vector<double>& ys) {
  const int n = static_cast<int>(xs.size());
  double sx = 0, sy = 0;
  for (int i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  Regression out;
  if (sxx <= 0) {
    return out;
  }
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  out.r_squared = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return out;
}

}  // namespace

const std::vector<std::string>& certificate_names() {
  static const std::vector<std::string> names = {
      "al_descent",        "al_gradient_bound", "dual_drift_bound",
      "lyapunov_decrease", "lyapunov_grad_bound", "step_window",
      "rate_ratio"};
  return names;
}

double CertificateReport::tail_pass_rate(const std::string& name) const {
  int total = 0;
  int held = 0;
  for (const CertificateRow& row : rows) {
    if (row.in_tail && row.name == name) {
      ++total;
      held += row.holds ? 1 : 0;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(held) / total;
}

DerivedConstants derive_constants(const std::vector<ConstantsEstimate>& inputs,
                                  const std::vector<AgentProblem>& problems,
                                  const SolverState& state) {
  std::vector<double> penalties(problems.size());
  for (std::size_t i = 0; i < problems.size(); ++i) {
    penalties[i] = problems[i].slack_penalty;
  }
  return compute_derived(inputs, penalties, state.rho, state.step_sizes,
                         state.step_sizes_prev, state.beta, state.beta);
}

void refine_constants(std::vector<ConstantsEstimate>& inputs,
                      const std::vector<AgentProblem>& problems,
                      const std::vector<SolverState>& states) {
  if (inputs.size() != problems.size()) {
    throw DimensionMismatch("refine_constants: one estimate per agent");
  }
  for (const SolverState& state : states) {
    for (std::size_t i = 0; i < problems.size(); ++i) {
      const int idx = static_cast<int>(i);
      const Eigen::MatrixXd stack =
          constraint_stack(problems[i], state.x_part(idx));
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(stack);
      const double smin = (stack.rows() > stack.cols())
                              ? 0.0
                              : svd.singularValues().tail(1)[0];
      if (inputs[i].theta == 0 || smin < inputs[i].theta) {
        inputs[i].theta = smin;
      }
      inputs[i].B = std::max(inputs[i].B, svd.singularValues()[0]);
      const double gamma_norm = std::sqrt(
          state.lambda[idx].squaredNorm() + state.mu[idx].squaredNorm());
      inputs[i].M_gamma = std::max(inputs[i].M_gamma, gamma_norm);
    }
  }
}

CertificateReport check_certificates(const RunResult& result,
                                     const std::vector<AgentProblem>& problems,
                                     const ConsensusLayout& layout,
                                     const std::vector<ConstantsEstimate>&
                                         inputs) {
  const std::vector<SolverState>& states = result.states;
  if (states.size() < 3) {
    throw InsufficientHistory(
        "check_certificates: need at least three recorded snapshots");
  }
  if (result.trace.size() + 1 != states.size()) {
    throw DimensionMismatch(
        "check_certificates: snapshots and trace rows disagree");
  }
  const int n = static_cast<int>(problems.size());
  std::vector<double> penalties(n);
  for (int i = 0; i < n; ++i) {
    penalties[i] = problems[i].slack_penalty;
  }

  CertificateReport report;
  const int transitions = static_cast<int>(states.size()) - 1;
  report.tail_start = result.state.k_underbar.value_or(transitions);

  for (int t = 0; t < transitions; ++t) {
    const SolverState& prev = states[t];
    const SolverState& next = states[t + 1];
    const double rho = result.trace[t].rho;
    const double beta_now = result.trace[t].beta;
    const double beta_next = (t + 1 < transitions)
                                 ? result.trace[t + 1].beta
                                 : beta_now;
    const bool in_tail = t >= report.tail_start;

    const DerivedConstants derived =
        compute_derived(inputs, penalties, rho, next.step_sizes,
                        next.step_sizes_prev, beta_now, beta_next);
    report.derived.push_back(derived);

    double disp_new_sq = 0;
    double disp_old_sq = 0;
    double disp_new_sum = 0;
    double disp_old_sum = 0;
    for (int i = 0; i < n; ++i) {
      const double dn = (next.x_bar[i] - prev.x_bar[i]).norm();
      const double do_ = (prev.x_bar[i] - prev.x_bar_prev[i]).norm();
      disp_new_sq += dn * dn;
      disp_old_sq += do_ * do_;
      disp_new_sum += dn;
      disp_old_sum += do_;
    }

    auto push = [&](const std::string& name, double margin, double scale) {
      CertificateRow row;
      row.iter = t;
      row.name = name;
      row.margin = margin;
      row.holds = holds_with_slack(margin, scale);
      row.in_tail = in_tail;
      report.rows.push_back(row);
    };

    // Frozen-dual decrease of the Lagrangian across the primal update.
    {
      SolverState at_prev = prev;
      at_prev.rho = rho;
      const double value_prev = eval_al(at_prev, problems, layout);
      SolverState at_next = next;
      at_next.rho = rho;
      const double value_next =
          eval_al(at_next, problems, layout, prev.lambda, prev.mu);
      double quad = 0;
      for (int i = 0; i < n; ++i) {
        quad += 0.5 * (next.step_sizes[i] - derived.agents[i].L_g) *
                (next.x_bar[i] - prev.x_bar[i]).squaredNorm();
      }
      push("al_descent", (value_prev - quad) - value_next, value_prev);
    }

    // Per-agent gradient norm against the displacement.
    {
      double margin = std::numeric_limits<double>::infinity();
      double scale = 1;
      for (int i = 0; i < n; ++i) {
        const int nbar = problems[i].dim_local;
        const Eigen::VectorXd gap = next.x_part(i) + next.y_part(i) -
                                    layout.gather(i, next.z);
        const Eigen::VectorXd pull = prev.mu[i] + rho * gap;
        Eigen::VectorXd grad =
            grad_g(problems[i], next.x_bar[i], prev.lambda[i], rho);
        grad.head(nbar) += pull;
        grad.tail(nbar) += pull;
        const double bound = (derived.agents[i].L_g + next.step_sizes[i]) *
                             (next.x_bar[i] - prev.x_bar[i]).norm();
        margin = std::min(margin, bound - grad.norm());
        scale = std::max(scale, bound);
      }
      push("al_gradient_bound", margin, scale);
    }

    // Multiplier drift against the last two displacements.
    {
      double margin = std::numeric_limits<double>::infinity();
      double scale = 1;
      for (int i = 0; i < n; ++i) {
        const double drift = std::sqrt(
            (next.lambda[i] - prev.lambda[i]).squaredNorm() +
            (next.mu[i] - prev.mu[i]).squaredNorm());
        const double bound =
            derived.agents[i].Omega1 * (next.x_bar[i] - prev.x_bar[i]).norm() +
            derived.agents[i].Omega2 *
                (prev.x_bar[i] - prev.x_bar_prev[i]).norm();
        margin = std::min(margin, bound - drift);
        scale = std::max(scale, bound);
      }
      push("dual_drift_bound", margin, scale);
    }

    // Weighted decrease of the Lyapunov value.
    const double phi_prev = lyapunov_at(prev, problems, layout, beta_now, rho);
    const double phi_next =
        lyapunov_at(next, problems, layout, beta_next, rho);
    push("lyapunov_decrease",
         (phi_prev - phi_next) -
             (derived.b1 * disp_new_sq + derived.b2 * disp_old_sq),
         phi_prev);

    // Gradient norm of the Lyapunov function at the new state.
    {
      const double grad_norm =
          lyapunov_grad_norm(next, problems, layout, beta_next, rho);
      const double bound =
          derived.b3 * disp_new_sum + derived.b4 * disp_old_sum;
      push("lyapunov_grad_bound", bound - grad_norm, bound);
    }

    // Positivity of the decrease coefficients and the rate ratio.
    {
      CertificateRow row;
      row.iter = t;
      row.name = "step_window";
      row.margin = std::min(derived.b1, derived.b2);
      row.holds = row.margin > 0;
      row.in_tail = in_tail;
      report.rows.push_back(row);

      CertificateRow ratio;
      ratio.iter = t;
      ratio.name = "rate_ratio";
      if (std::isfinite(derived.nu_ratio) &&
          std::isfinite(derived.cond_b_rhs)) {
        ratio.margin = derived.cond_b_rhs - derived.nu_ratio;
        ratio.holds = derived.cond_b;
      } else {
        ratio.margin = std::numeric_limits<double>::quiet_NaN();
        ratio.holds = false;
      }
      ratio.in_tail = in_tail;
      report.rows.push_back(ratio);
    }
  }
  return report;
}

RateFit fit_rate(const std::vector<IterationTrace>& trace, double phi_star) {
  const int n = static_cast<int>(trace.size());
  if (n < 10) {
    throw InsufficientHistory("fit_rate: need at least ten trace rows");
  }
  std::vector<double> delta(n);
  const double neg_tol = 1e-12 * std::max(1.0, std::abs(phi_star));
  for (int k = 0; k < n; ++k) {
    delta[k] = trace[k].lyapunov - phi_star;
    if (delta[k] < -neg_tol) {
      throw InvalidParams(
          "fit_rate: phi_star exceeds a recorded Lyapunov value");
    }
    delta[k] = std::max(delta[k], 0.0);
  }

  RateFit fit;
  fit.tail_start = n - std::max(5, n / 3);
  const double zero_tol = 1e-13 * std::max(1.0, std::abs(phi_star));

  // A gap that reaches (numerical) zero and stays there is finite
  // termination, not an asymptotic rate.
  for (int k = fit.tail_start; k < n; ++k) {
    if (delta[k] <= zero_tol) {
      fit.kind = RateKind::FiniteTermination;
      return fit;
    }
  }

  const double grow_tol = 1e-12 * std::max(1.0, std::abs(phi_star));
  for (int k = fit.tail_start + 1; k < n; ++k) {
    if (delta[k] > delta[k - 1] * 1.01 + grow_tol) {
      throw NonMonotoneTail("fit_rate: the gap grows inside the tail");
    }
  }

  std::vector<double> ks, log_ks, log_delta;
  for (int k = fit.tail_start; k < n; ++k) {
    ks.push_back(static_cast<double>(k));
    log_ks.push_back(std::log(static_cast<double>(k + 1)));
    log_delta.push_back(std::log(delta[k]));
  }
  const Regression lin = regress(ks, log_delta);
  const Regression pow = regress(log_ks, log_delta);
  const double q = std::exp(lin.slope);
  if (lin.r_squared >= pow.r_squared - 1e-12 && q > 0 && q < 1 - 1e-9) {
    fit.kind = RateKind::Linear;
    fit.ratio = q;
  } else {
    fit.kind = RateKind::Sublinear;
    fit.exponent = pow.slope;
  }
  return fit;
}

const char* to_string(RateKind k) {
  switch (k) {
    case RateKind::FiniteTermination:
      return "FiniteTermination";
    case RateKind::Linear:
      return "Linear";
    case RateKind::Sublinear:
      return "Sublinear";
  }
  return "Sublinear";
}

}  // namespace pldm
