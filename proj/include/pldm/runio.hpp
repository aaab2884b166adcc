#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "pldm/diagnostics.hpp"
#include "pldm/instances.hpp"
#include "pldm/solver.hpp"

namespace pldm {

/// Iteration trace as CSV with columns iter, residual, al_value, lyapunov,
/// grad_x, grad_z, grad_gamma, grad_u, rho, beta, sum_h, in_region,
/// step_min, step_max.  Floats are written with 17 significant digits so
/// identical runs produce byte-identical files.
void write_trace_csv(const std::string& path,
                     const std::vector<IterationTrace>& trace);

/// One row per iteration per certificate: iter, certificate, margin, holds,
/// in_tail.
void write_certificates_csv(const std::string& path,
                            const CertificateReport& report);

/// Final point report: consensus vector, per-agent primal/slack/duals,
/// classification at eps_classify, and the plain objective (sum of f + phi
/// over agents, recomputed from the final primal point).
nlohmann::json solution_to_json(const std::vector<AgentProblem>& problems,
                                const ConsensusLayout& layout,
                                const SolverState& state, double eps_classify);

/// Attach a baseline comparison to a solution report.
void attach_baseline(nlohmann::json& solution, const BaselineResult& baseline);

/// Run-level summary: iteration count, convergence flag, final residual,
/// first in-region iteration (null if never reached), fitted tail rate
/// (null if unavailable) and classification.
nlohmann::json summary_to_json(const RunResult& result,
                               const std::vector<AgentProblem>& problems,
                               const ConsensusLayout& layout,
                               double eps_classify, const RateFit* rate);

void write_json(const std::string& path, const nlohmann::json& j);

}  // namespace pldm
