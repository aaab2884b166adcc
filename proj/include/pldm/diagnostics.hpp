#pragma once

#include <string>
#include <vector>

#include "pldm/constants.hpp"
#include "pldm/solver.hpp"

namespace pldm {

/// One evaluated certificate at one transition.  `holds` allows a relative
/// slack of 1e-9 against the row's natural scale; rows before the penalty
/// stabilizes are reported with in_tail = false and carry no guarantee.
struct CertificateRow {
  int iter = 0;            // transition index, aligned with the trace rows
  std::string name;
  double margin = 0;       // >= 0 means the inequality holds exactly
  bool holds = false;
  bool in_tail = false;
};

struct CertificateReport {
  std::vector<CertificateRow> rows;
  std::vector<DerivedConstants> derived;   // one per transition
  int tail_start = 0;                      // first in-tail transition, or
                                           // trace length when none
  /// Fraction of in-tail rows with this certificate name that hold.
  double tail_pass_rate(const std::string& name) const;
};

/// Names of the certificates evaluated per transition:
///   al_descent            frozen-dual decrease of the Lagrangian
///   al_gradient_bound     gradient norm vs displacement, per agent
///   dual_drift_bound      multiplier movement vs displacements
///   lyapunov_decrease     b1/b2-weighted decrease of the Lyapunov value
///   lyapunov_grad_bound   b3/b4 bound on the Lyapunov gradient norm
///   step_window           both decrease coefficients positive
///   rate_ratio            b4^2/b2 <= b3^2/b1
const std::vector<std::string>& certificate_names();

/// Derived certificate constants at a given state (penalty, step sizes and
/// proximal weight are read from the state; the next-iteration weight is
/// taken equal to the current one).
DerivedConstants derive_constants(const std::vector<ConstantsEstimate>& inputs,
                                  const std::vector<AgentProblem>& problems,
                                  const SolverState& state);

/// Tighten theta / B / M_gamma with the values actually visited by a
/// recorded run; box sampling cannot see the iterates, the run can.
void refine_constants(std::vector<ConstantsEstimate>& inputs,
                      const std::vector<AgentProblem>& problems,
                      const std::vector<SolverState>& states);

/// Evaluate every certificate on a recorded run (needs
/// config.record_states).  Requires at least three snapshots, otherwise
/// InsufficientHistory.  Violations are reported, never fatal: sampled
/// constants may under-estimate the true ones.
CertificateReport check_certificates(const RunResult& result,
                                     const std::vector<AgentProblem>& problems,
                                     const ConsensusLayout& layout,
                                     const std::vector<ConstantsEstimate>&
                                         inputs);

enum class RateKind { FiniteTermination, Linear, Sublinear };

struct RateFit {
  RateKind kind = RateKind::Sublinear;
  double ratio = 0;      // geometric ratio for Linear
  double exponent = 0;   // power-law exponent for Sublinear
  int tail_start = 0;    // first trace row used by the fit
};

/// Fit the tail of the Lyapunov gap Phi_k - phi_star.  Requires at least
/// ten rows (InsufficientHistory), phi_star below every recorded value
/// (InvalidParams) and a non-increasing tail (NonMonotoneTail).  The gap
/// hitting zero is classified as finite termination; otherwise the better
/// of a geometric and a power-law fit wins.
RateFit fit_rate(const std::vector<IterationTrace>& trace, double phi_star);

const char* to_string(RateKind k);

}  // namespace pldm
