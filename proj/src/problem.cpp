#include "pldm/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace pldm {

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw NonFiniteValue(std::string(what) + " produced a non-finite value");
  }
}

void require_finite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) {
    throw NonFiniteValue(std::string(what) + " produced a non-finite value");
  }
}

void require_finite(const Eigen::MatrixXd& v, const char* what) {
  if (!v.allFinite()) {
    throw NonFiniteValue(std::string(what) + " produced a non-finite value");
  }
}

}  // namespace

Eigen::VectorXd ConsensusLayout::gather(int agent,
                                        const Eigen::VectorXd& z) const {
  const auto& map = copy_map[agent];
  Eigen::VectorXd out(static_cast<int>(map.size()));
  for (std::size_t t = 0; t < map.size(); ++t) {
    out[static_cast<int>(t)] = z[map[t]];
  }
  return out;
}

void ConsensusLayout::scatter(int agent, const Eigen::VectorXd& local,
                              Eigen::VectorXd& z) const {
  const auto& map = copy_map[agent];
  if (local.size() != static_cast<int>(map.size())) {
    throw DimensionMismatch("scatter: local vector size does not match layout");
  }
  for (std::size_t t = 0; t < map.size(); ++t) {
    z[map[t]] = local[static_cast<int>(t)];
  }
}

void ConsensusLayout::add_scatter(int agent, const Eigen::VectorXd& local,
                                  Eigen::VectorXd& z) const {
  const auto& map = copy_map[agent];
  if (local.size() != static_cast<int>(map.size())) {
    throw DimensionMismatch(
        "add_scatter: local vector size does not match layout");
  }
  for (std::size_t t = 0; t < map.size(); ++t) {
    z[map[t]] += local[static_cast<int>(t)];
  }
}

ConsensusLayout build_layout(const std::vector<AgentProblem>& problems) {
  if (problems.empty()) {
    throw EmptyNetwork("build_layout: no agents supplied");
  }
  const int n = static_cast<int>(problems.size());
  for (int i = 0; i < n; ++i) {
    if (problems[i].agent_id != i + 1) {
      std::ostringstream msg;
      msg << "build_layout: agent ids must be 1.." << n
          << " in order, got id " << problems[i].agent_id << " at position "
          << i;
      throw DimensionMismatch(msg.str());
    }
  }

  ConsensusLayout layout;
  layout.block_offset.resize(n);
  layout.block_dim.resize(n);
  int offset = 0;
  for (int i = 0; i < n; ++i) {
    const AgentProblem& p = problems[i];
    if (p.dim_own <= 0) {
      throw DimensionMismatch("build_layout: agent " +
                              std::to_string(p.agent_id) +
                              " has non-positive own dimension");
    }
    if (p.box_lower.size() != p.dim_own || p.box_upper.size() != p.dim_own) {
      throw DimensionMismatch("build_layout: agent " +
                              std::to_string(p.agent_id) +
                              " box size does not match its own dimension");
    }
    for (int t = 0; t < p.dim_own; ++t) {
      if (!std::isfinite(p.box_lower[t]) || !std::isfinite(p.box_upper[t]) ||
          p.box_lower[t] > p.box_upper[t]) {
        throw InvalidParams("build_layout: agent " +
                            std::to_string(p.agent_id) +
                            " has an unordered or non-finite box");
      }
    }
    if (!(p.slack_penalty > 0)) {
      throw InvalidParams("build_layout: agent " +
                          std::to_string(p.agent_id) +
                          " needs a positive slack penalty");
    }
    layout.block_offset[i] = offset;
    layout.block_dim[i] = p.dim_own;
    offset += p.dim_own;
  }
  layout.global_dim = offset;
  layout.global_lower.resize(offset);
  layout.global_upper.resize(offset);
  for (int i = 0; i < n; ++i) {
    layout.global_lower.segment(layout.block_offset[i], layout.block_dim[i]) =
        problems[i].box_lower;
    layout.global_upper.segment(layout.block_offset[i], layout.block_dim[i]) =
        problems[i].box_upper;
  }

  layout.copy_map.resize(n);
  layout.copy_count.assign(offset, 0);
  for (int i = 0; i < n; ++i) {
    const AgentProblem& p = problems[i];
    bool self_seen = false;
    int prev = 0;
    for (std::size_t t = 0; t < p.neighbor_ids.size(); ++t) {
      const int j = p.neighbor_ids[t];
      if (j < 1 || j > n) {
        throw DimensionMismatch("build_layout: agent " +
                                std::to_string(p.agent_id) +
                                " references unknown agent " +
                                std::to_string(j));
      }
      if (t > 0 && j <= prev) {
        throw DimensionMismatch("build_layout: agent " +
                                std::to_string(p.agent_id) +
                                " neighbour list must be strictly ascending");
      }
      prev = j;
      self_seen = self_seen || j == p.agent_id;
    }
    if (!self_seen) {
      throw DimensionMismatch("build_layout: agent " +
                              std::to_string(p.agent_id) +
                              " neighbour list must contain itself");
    }
    auto& map = layout.copy_map[i];
    int own_offset = -1;
    for (int j : p.neighbor_ids) {
      if (j == p.agent_id) {
        own_offset = static_cast<int>(map.size());
      }
      const int start = layout.block_offset[j - 1];
      for (int t = 0; t < layout.block_dim[j - 1]; ++t) {
        map.push_back(start + t);
        ++layout.copy_count[start + t];
      }
    }
    if (p.dim_local != static_cast<int>(map.size()) ||
        p.own_offset != own_offset) {
      throw DimensionMismatch(
          "build_layout: agent " + std::to_string(p.agent_id) +
          " declares dim_local/own_offset inconsistent with its neighbours");
    }
  }
  for (int m = 0; m < offset; ++m) {
    if (layout.copy_count[m] == 0) {
      throw EmptyCopySet("build_layout: global coordinate " +
                         std::to_string(m) + " has no copies");
    }
  }
  return layout;
}

GradientCheckReport validate_gradients(const AgentProblem& problem,
                                       const Eigen::VectorXd& point,
                                       double step) {
  if (!(step > 0)) {
    throw InvalidParams("validate_gradients: step must be positive");
  }
  const int nbar = static_cast<int>(point.size());

  auto relative = [](double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
  };

  GradientCheckReport report;
  Eigen::VectorXd probe = point;

  auto check_scalar = [&](const ScalarFn& fn, const VectorFn& grad,
                          const char* what) {
    const Eigen::VectorXd analytic = grad(point);
    require_finite(analytic, what);
    double worst = 0;
    for (int t = 0; t < nbar; ++t) {
      probe[t] = point[t] + step;
      const double up = fn(probe);
      probe[t] = point[t] - step;
      const double dn = fn(probe);
      probe[t] = point[t];
      require_finite(up, what);
      require_finite(dn, what);
      const double numeric = (up - dn) / (2 * step);
      worst = std::max(worst, relative(analytic[t], numeric));
    }
    return worst;
  };

  report.err_f = check_scalar(problem.f, problem.f_grad, "f");
  report.err_phi = check_scalar(problem.phi, problem.phi_grad, "phi");

  if (problem.dim_h > 0) {
    const Eigen::MatrixXd analytic = problem.h_jac(point);
    require_finite(analytic, "h jacobian");
    if (analytic.rows() != problem.dim_h || analytic.cols() != nbar) {
      throw DimensionMismatch("validate_gradients: h jacobian shape is " +
                              std::to_string(analytic.rows()) + "x" +
                              std::to_string(analytic.cols()));
    }
    double worst = 0;
    for (int t = 0; t < nbar; ++t) {
      probe[t] = point[t] + step;
      const Eigen::VectorXd up = problem.h(probe);
      probe[t] = point[t] - step;
      const Eigen::VectorXd dn = problem.h(probe);
      probe[t] = point[t];
      require_finite(up, "h");
      require_finite(dn, "h");
      for (int r = 0; r < problem.dim_h; ++r) {
        const double numeric = (up[r] - dn[r]) / (2 * step);
        worst = std::max(worst, relative(analytic(r, t), numeric));
      }
    }
    report.err_h = worst;
  }
  return report;
}

Eigen::MatrixXd constraint_stack(const AgentProblem& problem,
                                 const Eigen::VectorXd& local_x) {
  const int nbar = static_cast<int>(local_x.size());
  const int m = problem.dim_h;
  Eigen::MatrixXd stack = Eigen::MatrixXd::Zero(m + nbar, 2 * nbar);
  if (m > 0) {
    const Eigen::MatrixXd jac = problem.h_jac(local_x);
    require_finite(jac, "h jacobian");
    if (jac.rows() != m || jac.cols() != nbar) {
      throw DimensionMismatch("constraint_stack: h jacobian shape is " +
                              std::to_string(jac.rows()) + "x" +
                              std::to_string(jac.cols()));
    }
    stack.topLeftCorner(m, nbar) = jac;
  }
  stack.block(m, 0, nbar, nbar).setIdentity();
  stack.block(m, nbar, nbar, nbar).setIdentity();
  return stack;
}

double check_regularity(const AgentProblem& problem,
                        const Eigen::VectorXd& local_x) {
  const Eigen::MatrixXd stack = constraint_stack(problem, local_x);
  // Full row rank is impossible with more rows than columns.
  if (stack.rows() > stack.cols()) {
    return 0.0;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(stack);
  return svd.singularValues().tail(1)[0];
}

ConstantsEstimate estimate_constants(const AgentProblem& problem,
                                     int sample_count, std::uint64_t seed) {
  if (sample_count <= 0) {
    throw InvalidParams("estimate_constants: sample_count must be positive");
  }
  const int n_own = problem.dim_own;
  const int nbar = problem.dim_local;
  if (n_own <= 0 || nbar < n_own || problem.own_offset < 0 ||
      problem.own_offset + n_own > nbar) {
    throw InvalidParams("estimate_constants: agent structure is incomplete");
  }

  // Copy blocks are sampled from the hull of the own-block box; neighbours'
  // boxes are not visible from a single AgentProblem.
  const double hull_lo = problem.box_lower.minCoeff();
  const double hull_hi = problem.box_upper.maxCoeff();
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(nbar, hull_lo);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(nbar, hull_hi);
  lo.segment(problem.own_offset, n_own) = problem.box_lower;
  hi.segment(problem.own_offset, n_own) = problem.box_upper;

  const bool degenerate = ((hi - lo).maxCoeff() <= 0);
  const double span = degenerate ? 0.0 : (hi - lo).maxCoeff();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  auto draw_point = [&]() {
    Eigen::VectorXd x(nbar);
    for (int t = 0; t < nbar; ++t) {
      x[t] = lo[t] + (hi[t] - lo[t]) * unit(rng);
    }
    return x;
  };

  auto spectral_norm = [](const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues()[0];
  };

  ConstantsEstimate est;
  est.theta = std::numeric_limits<double>::infinity();

  auto account_point = [&](const Eigen::VectorXd& x) {
    if (problem.dim_h > 0) {
      const Eigen::VectorXd hx = problem.h(x);
      const Eigen::MatrixXd jx = problem.h_jac(x);
      require_finite(hx, "h");
      require_finite(jx, "h jacobian");
      est.C_h = std::max(est.C_h, (jx.transpose() * hx).norm());
    }
    const Eigen::MatrixXd stack = constraint_stack(problem, x);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(stack);
    const double smin =
        (stack.rows() > stack.cols()) ? 0.0 : svd.singularValues().tail(1)[0];
    est.theta = std::min(est.theta, smin);
    est.B = std::max(est.B, svd.singularValues()[0]);
  };

  auto account_pair = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const double dist = (x - y).norm();
    if (dist <= 0) {
      return;
    }
    const double df = std::abs(problem.f(x) - problem.f(y));
    const double dphi = std::abs(problem.phi(x) - problem.phi(y));
    require_finite(df, "f");
    require_finite(dphi, "phi");
    est.L_f = std::max(est.L_f, df / dist);
    est.L_phi = std::max(est.L_phi, dphi / dist);
    if (problem.dim_h > 0) {
      const double dh = (problem.h(x) - problem.h(y)).norm();
      const double dj = spectral_norm(problem.h_jac(x) - problem.h_jac(y));
      est.L_h = std::max(est.L_h, dh / dist);
      est.M_h = std::max(est.M_h, dj / dist);
    }
  };

  if (degenerate) {
    // Point box: no quotient is defined, evaluate the point quantities once.
    account_point(lo);
    return est;
  }

  for (int s = 0; s < sample_count; ++s) {
    const Eigen::VectorXd x = draw_point();
    account_point(x);
    if (s % 2 == 0) {
      account_pair(x, draw_point());
    } else {
      // Short step: the quotient approaches a directional derivative.
      Eigen::VectorXd dir(nbar);
      for (int t = 0; t < nbar; ++t) {
        dir[t] = gauss(rng);
      }
      const double norm = dir.norm();
      if (norm > 0) {
        Eigen::VectorXd y = x + (1e-3 * span / norm) * dir;
        y = y.cwiseMax(lo).cwiseMin(hi);
        account_pair(x, y);
      }
    }
  }
  if (!std::isfinite(est.theta)) {
    est.theta = 0;
  }
  return est;
}

}  // namespace pldm
