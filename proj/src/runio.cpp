#include "pldm/runio.hpp"

#include <cstdio>
#include <fstream>

#include "pldm/al.hpp"
#include "pldm/errors.hpp"

namespace pldm {
namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path);
  return out;
}

nlohmann::json vec_json(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index t = 0; t < v.size(); ++t) arr.push_back(v[t]);
  return arr;
}

}  // namespace

void write_trace_csv(const std::string& path,
                     const std::vector<IterationTrace>& trace) {
  std::ofstream out = open_out(path);
  out << "iter,residual,al_value,lyapunov,grad_x,grad_z,grad_gamma,grad_u,"
         "rho,beta,sum_h,in_region,step_min,step_max\n";
  for (const IterationTrace& row : trace) {
    out << row.iter << ',' << fmt(row.residual) << ',' << fmt(row.al_value)
        << ',' << fmt(row.lyapunov) << ',' << fmt(row.grad_x) << ','
        << fmt(row.grad_z) << ',' << fmt(row.grad_gamma) << ','
        << fmt(row.grad_u) << ',' << fmt(row.rho) << ',' << fmt(row.beta)
        << ',' << fmt(row.sum_h) << ',' << (row.in_region ? 1 : 0) << ','
        << fmt(row.step_min) << ',' << fmt(row.step_max) << '\n';
  }
  if (!out) throw Error("failed while writing: " + path);
}

void write_certificates_csv(const std::string& path,
                            const CertificateReport& report) {
  std::ofstream out = open_out(path);
  out << "iter,certificate,margin,holds,in_tail\n";
  for (const CertificateRow& row : report.rows) {
    out << row.iter << ',' << row.name << ',' << fmt(row.margin) << ','
        << (row.holds ? 1 : 0) << ',' << (row.in_tail ? 1 : 0) << '\n';
  }
  if (!out) throw Error("failed while writing: " + path);
}

nlohmann::json solution_to_json(const std::vector<AgentProblem>& problems,
                                const ConsensusLayout& layout,
                                const SolverState& state,
                                double eps_classify) {
  // Recompute the plain objective from scratch at the final primal point.
  double objective = 0.0;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const Eigen::VectorXd x = state.x_part(static_cast<int>(i));
    objective += problems[i].f(x) + problems[i].phi(x);
  }

  nlohmann::json j;
  j["classification"] =
      to_string(classify_solution(state, problems, layout, eps_classify));
  j["eps_classify"] = eps_classify;
  j["objective"] = objective;
  j["z"] = vec_json(state.z);
  nlohmann::json agents = nlohmann::json::array();
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const int idx = static_cast<int>(i);
    nlohmann::json a;
    a["id"] = problems[i].agent_id;
    a["x"] = vec_json(state.x_part(idx));
    a["y"] = vec_json(state.y_part(idx));
    a["lambda"] = vec_json(state.lambda[i]);
    a["mu"] = vec_json(state.mu[i]);
    agents.push_back(std::move(a));
  }
  j["agents"] = std::move(agents);
  return j;
}

void attach_baseline(nlohmann::json& solution, const BaselineResult& baseline) {
  nlohmann::json b;
  b["objective"] = baseline.objective;
  b["x"] = vec_json(baseline.x);
  b["max_violation"] = baseline.max_violation;
  b["start_index"] = baseline.start_index;
  const double own = solution.at("objective").get<double>();
  if (baseline.objective != 0.0)
    b["objective_ratio"] = own / baseline.objective;
  solution["baseline"] = std::move(b);
}

nlohmann::json summary_to_json(const RunResult& result,
                               const std::vector<AgentProblem>& problems,
                               const ConsensusLayout& layout,
                               double eps_classify, const RateFit* rate) {
  nlohmann::json j;
  j["iterations"] = result.trace.size();
  j["converged"] = result.converged;
  j["final_residual"] =
      result.trace.empty() ? residual(result.state, problems, layout)
                           : result.trace.back().residual;
  if (result.state.k_underbar)
    j["k_underbar"] = *result.state.k_underbar;
  else
    j["k_underbar"] = nullptr;
  j["rho_final"] = result.state.rho;
  j["classification"] =
      to_string(classify_solution(result.state, problems, layout, eps_classify));
  j["step_fallbacks"] = result.step_fallbacks;
  if (rate != nullptr) {
    nlohmann::json r;
    r["kind"] = to_string(rate->kind);
    r["tail_start"] = rate->tail_start;
    if (rate->kind == RateKind::Linear) r["ratio"] = rate->ratio;
    if (rate->kind == RateKind::Sublinear) r["exponent"] = rate->exponent;
    j["rate"] = std::move(r);
  } else {
    j["rate"] = nullptr;
  }
  return j;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw Error("failed while writing: " + path);
}

}  // namespace pldm
