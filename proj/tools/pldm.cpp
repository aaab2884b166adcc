// Experiment runner: builds an instance, runs the decentralized solver
// (optionally with certificate checking and a centralized baseline) and
// writes trace/solution artifacts.
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pldm/al.hpp"
#include "pldm/config.hpp"
#include "pldm/diagnostics.hpp"
#include "pldm/errors.hpp"
#include "pldm/instances.hpp"
#include "pldm/runio.hpp"
#include "pldm/solver.hpp"

namespace {

pldm::Instance build_instance(const pldm::RunConfig& config) {
  if (config.instance == "toy") return pldm::build_toy();
  if (config.instance == "hvac") {
    pldm::HvacParams params;
    params.zones = config.hvac_zones;
    params.horizon = config.hvac_horizon;
    return pldm::build_hvac(params, config.seed);
  }
  pldm::RandomInstance r =
      pldm::build_random(config.random_agents, config.random_dim,
                         config.random_density, config.seed);
  return pldm::Instance{std::move(r.problems), std::move(r.layout)};
}

int run_main(const pldm::RunConfig& config) {
  pldm::Instance inst = build_instance(config);
  const int n_agents = static_cast<int>(inst.problems.size());

  pldm::SolverConfig solver = config.solver;
  solver.seed = config.seed;
  solver.record_states = config.certificates;
  const bool needs_constants =
      solver.step_policy == pldm::StepPolicy::Theoretical ||
      solver.beta_policy == pldm::BetaPolicy::FromNu;
  if ((needs_constants && solver.constants.empty()) || config.certificates) {
    std::vector<pldm::ConstantsEstimate> est;
    est.reserve(inst.problems.size());
    for (int i = 0; i < n_agents; ++i)
      est.push_back(pldm::estimate_constants(inst.problems[i], 2000,
                                             config.seed + 7000 + i));
    if (needs_constants && solver.constants.empty()) solver.constants = est;
    if (config.certificates && solver.constants.empty())
      solver.constants = est;  // reused below for certificate inputs
  }

  const pldm::InitKind init_kind = config.init == "midpoint"
                                       ? pldm::InitKind::Midpoint
                                       : pldm::InitKind::RandomInBox;
  const pldm::SolverState init =
      pldm::make_init(inst.problems, inst.layout, init_kind, config.seed);
  pldm::RunResult result = pldm::run(inst.problems, inst.layout, solver, init);

  const double eps_classify = 100.0 * solver.eps_stop;
  const std::string classification = pldm::to_string(pldm::classify_solution(
      result.state, inst.problems, inst.layout, eps_classify));

  // Advisory tail-rate fit against the last recorded merit value.
  std::optional<pldm::RateFit> rate;
  if (result.trace.size() >= 11) {
    std::vector<pldm::IterationTrace> head(result.trace.begin(),
                                           result.trace.end() - 1);
    try {
      rate = pldm::fit_rate(head, result.trace.back().lyapunov);
    } catch (const pldm::Error&) {
      rate.reset();
    }
  }

  std::optional<pldm::CertificateReport> certificates;
  if (config.certificates) {
    std::vector<pldm::ConstantsEstimate> inputs = solver.constants;
    pldm::refine_constants(inputs, inst.problems, result.states);
    certificates =
        pldm::check_certificates(result, inst.problems, inst.layout, inputs);
  }

  std::optional<pldm::BaselineResult> baseline;
  if (config.baseline_multistarts > 0)
    baseline = pldm::centralized_baseline(inst.problems, inst.layout,
                                          config.baseline_multistarts,
                                          config.seed);

  if (!config.out_dir.empty()) {
    const std::filesystem::path dir(config.out_dir);
    std::filesystem::create_directories(dir);
    if (config.format_csv) {
      pldm::write_trace_csv((dir / "trace.csv").string(), result.trace);
      if (certificates)
        pldm::write_certificates_csv((dir / "certificates.csv").string(),
                                     *certificates);
    }
    if (config.format_json) {
      nlohmann::json solution = pldm::solution_to_json(
          inst.problems, inst.layout, result.state, eps_classify);
      if (baseline) pldm::attach_baseline(solution, *baseline);
      pldm::write_json((dir / "solution.json").string(), solution);
      pldm::write_json(
          (dir / "summary.json").string(),
          pldm::summary_to_json(result, inst.problems, inst.layout,
                                eps_classify, rate ? &*rate : nullptr));
    }
  }

  const double final_residual =
      result.trace.empty()
          ? pldm::residual(result.state, inst.problems, inst.layout)
          : result.trace.back().residual;
  std::cout << "instance=" << config.instance
            << " iterations=" << result.trace.size()
            << " residual=" << final_residual
            << " converged=" << (result.converged ? "yes" : "no")
            << " classification=" << classification << "\n";
  if (baseline)
    std::cout << "baseline objective=" << baseline->objective
              << " (start " << baseline->start_index << ")\n";
  if (certificates) {
    for (const std::string& name : pldm::certificate_names())
      std::cout << "certificate " << name
                << " tail_pass_rate=" << certificates->tail_pass_rate(name)
                << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Decentralized augmented-Lagrangian solver for box-constrained "
      "networks with coupled nonlinear equality constraints.\n"
      "Solutions are classified at eps_classify = 100 * eps."};
  app.footer("Config file keys (flat key=value, '#' comments) and defaults:\n" +
             pldm::serialize_config(pldm::RunConfig{}));

  std::string config_path, instance, out_dir, format;
  double eps = 0, rho0 = 0, delta = 0, eta = 0;
  int max_iters = 0, baseline = 0;
  std::uint64_t seed = 0;
  bool certificates = false;

  auto* opt_config = app.add_option("--config", config_path, "Config file");
  auto* opt_instance =
      app.add_option("--instance", instance, "Instance: toy, hvac or random");
  auto* opt_eps = app.add_option("--eps", eps, "Stopping tolerance (> 0)");
  auto* opt_max =
      app.add_option("--max-iters", max_iters, "Iteration cap (>= 0)");
  auto* opt_rho0 = app.add_option("--rho0", rho0, "Initial penalty (> 0)");
  auto* opt_delta =
      app.add_option("--delta", delta, "Penalty increment (>= 0)");
  auto* opt_eta =
      app.add_option("--eta", eta, "Constraint-norm region threshold (> 0)");
  auto* opt_seed =
      app.add_option("--seed", seed, "Instance/init/baseline seed");
  auto* opt_baseline = app.add_option(
      "--baseline", baseline, "Run the centralized baseline with this many starts");
  auto* opt_cert = app.add_flag("--certificates", certificates,
                                "Check runtime convergence certificates");
  auto* opt_out = app.add_option("--out", out_dir, "Output directory");
  auto* opt_format = app.add_option(
      "--format", format, "Artifact formats: csv, json or csv,json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    pldm::RunConfig config;
    if (opt_config->count() > 0) config = pldm::load_config(config_path);
    if (opt_instance->count() > 0) config.instance = instance;
    if (opt_eps->count() > 0) config.solver.eps_stop = eps;
    if (opt_max->count() > 0) config.solver.max_iters = max_iters;
    if (opt_rho0->count() > 0) config.solver.rho0 = rho0;
    if (opt_delta->count() > 0) config.solver.delta_penalty = delta;
    if (opt_eta->count() > 0) config.solver.eta = eta;
    if (opt_seed->count() > 0) config.seed = seed;
    if (opt_baseline->count() > 0) config.baseline_multistarts = baseline;
    if (opt_cert->count() > 0) config.certificates = certificates;
    if (opt_out->count() > 0) config.out_dir = out_dir;
    if (opt_format->count() > 0)
      pldm::apply_config_entry(config, "format", format);
    config.validate();

    try {
      return run_main(config);
    } catch (const pldm::InvalidParams& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    } catch (const pldm::Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 3;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 3;
    }
  } catch (const pldm::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
}
