#include "pldm/instances.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>

#include "pldm/errors.hpp"

namespace pldm {
namespace {

Eigen::VectorXd clip(const Eigen::VectorXd& v, const Eigen::VectorXd& lo,
                     const Eigen::VectorXd& hi) {
  return v.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace

// ---------------------------------------------------------------------------
// Toy instance
// ---------------------------------------------------------------------------

Instance build_toy() {
  // Large enough that the slack bias on the consensus point stays well
  // inside 1e-2, small enough that the slack curvature does not inflate
  // the terminal stationarity norms past the same scale.
  const double slack_penalty = 550.0;

  auto phi = [](const Eigen::VectorXd& x) {
    return 0.5 * x[0] * x[1] * x[1];
  };
  auto phi_grad = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd g(2);
    g << 0.5 * x[1] * x[1], x[0] * x[1];
    return g;
  };

  AgentProblem a1;
  a1.agent_id = 1;
  a1.neighbor_ids = {1, 2};
  a1.dim_own = 1;
  a1.dim_local = 2;
  a1.own_offset = 0;
  a1.dim_h = 1;
  a1.f = [](const Eigen::VectorXd& x) { return x[0]; };
  a1.f_grad = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
    g[0] = 1.0;
    return g;
  };
  a1.phi = phi;
  a1.phi_grad = phi_grad;
  a1.h = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd v(1);
    v[0] = x[0] * x[1] - 2.0;
    return v;
  };
  a1.h_jac = [](const Eigen::VectorXd& x) {
    Eigen::MatrixXd j(1, 2);
    j << x[1], x[0];
    return j;
  };
  a1.box_lower = Eigen::VectorXd::Constant(1, 0.0);
  a1.box_upper = Eigen::VectorXd::Constant(1, 4.0);
  a1.slack_penalty = slack_penalty;

  AgentProblem a2 = a1;
  a2.agent_id = 2;
  a2.own_offset = 1;
  a2.box_upper = Eigen::VectorXd::Constant(1, 5.0);
  a2.f = [](const Eigen::VectorXd& x) { return x[1]; };
  a2.f_grad = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
    g[1] = 1.0;
    return g;
  };
  a2.h = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd v(1);
    v[0] = x[0] * x[0] + x[1] * x[1] - 5.0;
    return v;
  };
  a2.h_jac = [](const Eigen::VectorXd& x) {
    Eigen::MatrixXd j(1, 2);
    j << 2.0 * x[0], 2.0 * x[1];
    return j;
  };

  Instance inst;
  inst.problems = {a1, a2};
  inst.layout = build_layout(inst.problems);
  return inst;
}

// ---------------------------------------------------------------------------
// HVAC instance
// ---------------------------------------------------------------------------

void HvacParams::fill_defaults(std::uint64_t seed) {
  const int I = zones;
  const int H = horizon;
  std::mt19937_64 rng(seed);
  auto uni = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };

  if (prices.size() == 0) prices = Eigen::VectorXd::Constant(H, 0.1);
  if (outside_temp.size() == 0) outside_temp = Eigen::VectorXd::Constant(H, 30.0);
  if (initial_temp.size() == 0) initial_temp = Eigen::VectorXd::Constant(I, 25.0);

  if (a_coupling.size() == 0) {
    // Ring-coupled zones: strong self term, weak exchange with the two ring
    // neighbours, rows summing below one so the free dynamics are stable.
    a_coupling = Eigen::MatrixXd::Zero(I, I);
    for (int i = 0; i < I; ++i) {
      a_coupling(i, i) = uni(0.60, 0.72);
      if (I > 1) {
        const int prev = (i + I - 1) % I;
        const int next = (i + 1) % I;
        a_coupling(i, prev) += uni(0.03, 0.06);
        a_coupling(i, next) += uni(0.03, 0.06);
      }
    }
  }
  if (c_flow.size() == 0) {
    c_flow = Eigen::VectorXd::Zero(I);
    for (int i = 0; i < I; ++i) c_flow[i] = -uni(0.45, 0.55);
  }
  if (disturbance.size() == 0) {
    // Leakage toward the outside temperature plus a small internal gain, so
    // an uncooled zone drifts upward out of the comfort band.
    disturbance = Eigen::MatrixXd::Zero(I, H);
    for (int i = 0; i < I; ++i) {
      const double gain = uni(0.10, 0.30);
      const double leak = 1.0 - a_coupling.row(i).sum();
      for (int t = 0; t < H; ++t)
        disturbance(i, t) = leak * outside_temp[t] + gain;
    }
  }
}

void HvacParams::validate() const {
  if (zones < 1) throw InvalidParams("hvac: zones must be >= 1");
  if (horizon < 1) throw InvalidParams("hvac: horizon must be >= 1");
  if (dt_hours <= 0) throw InvalidParams("hvac: dt_hours must be positive");
  if (!(comfort_low < comfort_high))
    throw InvalidParams("hvac: comfort band is empty");
  if (flow_max <= 0) throw InvalidParams("hvac: flow_max must be positive");
  if (slack_penalty <= 0)
    throw InvalidParams("hvac: slack_penalty must be positive");
  if (prices.size() != horizon || outside_temp.size() != horizon)
    throw DimensionMismatch("hvac: prices/outside_temp must have length horizon");
  if (initial_temp.size() != zones)
    throw DimensionMismatch("hvac: initial_temp must have length zones");
  if (a_coupling.rows() != zones || a_coupling.cols() != zones)
    throw DimensionMismatch("hvac: a_coupling must be zones x zones");
  if (c_flow.size() != zones)
    throw DimensionMismatch("hvac: c_flow must have length zones");
  if (disturbance.rows() != zones || disturbance.cols() != horizon)
    throw DimensionMismatch("hvac: disturbance must be zones x horizon");
  for (int i = 0; i < zones; ++i) {
    if (a_coupling.row(i).sum() >= 1.0)
      throw InvalidParams("hvac: a_coupling row sums must stay below 1");
  }
}

namespace {

// Shared, immutable view of the generated coefficients so the per-agent
// closures stay cheap to copy.
struct HvacData {
  HvacParams p;
  // Per-zone block offset inside the stacked local vector (complete graph:
  // zone j's block sits at j * 2H for every agent).
  int block(int zone) const { return zone * 2 * p.horizon; }
  int flow_at(int zone, int t) const { return block(zone) + t; }
  // Temperature decision T_t lives at H + (t-1); only valid for t >= 1.
  int temp_at(int zone, int t) const { return block(zone) + p.horizon + t - 1; }
  double temp(const Eigen::VectorXd& x, int zone, int t) const {
    return t == 0 ? p.initial_temp[zone] : x[temp_at(zone, t)];
  }
};

}  // namespace

Instance build_hvac(HvacParams params, std::uint64_t seed) {
  params.fill_defaults(seed);
  params.validate();

  const int I = params.zones;
  const int H = params.horizon;
  const int nbar = I * 2 * H;
  auto data = std::make_shared<const HvacData>(HvacData{params});

  std::vector<AgentProblem> problems;
  problems.reserve(I);
  for (int z = 0; z < I; ++z) {
    AgentProblem ap;
    ap.agent_id = z + 1;
    ap.neighbor_ids.resize(I);
    for (int j = 0; j < I; ++j) ap.neighbor_ids[j] = j + 1;
    ap.dim_own = 2 * H;
    ap.dim_local = nbar;
    ap.own_offset = data->block(z);
    ap.dim_h = H;

    // Energy bill of this zone: coil load on fresh and recirculated air.
    ap.f = [data, z](const Eigen::VectorXd& x) {
      const HvacParams& p = data->p;
      double total = 0.0;
      for (int t = 0; t < p.horizon; ++t) {
        const double w = p.prices[t] * p.heat_capacity * p.dt_hours;
        const double m = x[data->flow_at(z, t)];
        total += w * m *
                 ((1.0 - p.duct_ratio) * (p.outside_temp[t] - p.coil_temp) +
                  p.duct_ratio * (data->temp(x, z, t) - p.coil_temp));
      }
      return total;
    };
    ap.f_grad = [data, z](const Eigen::VectorXd& x) {
      const HvacParams& p = data->p;
      Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
      for (int t = 0; t < p.horizon; ++t) {
        const double w = p.prices[t] * p.heat_capacity * p.dt_hours;
        const double m = x[data->flow_at(z, t)];
        g[data->flow_at(z, t)] =
            w * ((1.0 - p.duct_ratio) * (p.outside_temp[t] - p.coil_temp) +
                 p.duct_ratio * (data->temp(x, z, t) - p.coil_temp));
        if (t >= 1) g[data->temp_at(z, t)] += w * p.duct_ratio * m;
      }
      return g;
    };

    // Shared fan power: cubic in the building-wide flow, split evenly across
    // the zones so the sum over agents reproduces the full term.
    ap.phi = [data, I](const Eigen::VectorXd& x) {
      const HvacParams& p = data->p;
      double total = 0.0;
      for (int t = 0; t < p.horizon; ++t) {
        double flow = 0.0;
        for (int j = 0; j < I; ++j) flow += x[data->flow_at(j, t)];
        total += p.prices[t] * p.dt_hours * p.fan_coeff * flow * flow * flow;
      }
      return total / I;
    };
    ap.phi_grad = [data, I](const Eigen::VectorXd& x) {
      const HvacParams& p = data->p;
      Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
      for (int t = 0; t < p.horizon; ++t) {
        double flow = 0.0;
        for (int j = 0; j < I; ++j) flow += x[data->flow_at(j, t)];
        const double d =
            3.0 * p.prices[t] * p.dt_hours * p.fan_coeff * flow * flow / I;
        for (int j = 0; j < I; ++j) g[data->flow_at(j, t)] += d;
      }
      return g;
    };

    // Zone dynamics: next temperature from self/neighbour temperatures,
    // coil cooling proportional to the flow, and the exogenous drift.
    ap.h = [data, z, I](const Eigen::VectorXd& x) {
      const HvacParams& p = data->p;
      Eigen::VectorXd v(p.horizon);
      for (int t = 0; t < p.horizon; ++t) {
        double next = data->temp(x, z, t + 1);
        double rhs = p.disturbance(z, t) +
                     p.c_flow[z] * x[data->flow_at(z, t)] *
                         (data->temp(x, z, t) - p.coil_temp);
        for (int j = 0; j < I; ++j)
          rhs += data->p.a_coupling(z, j) * data->temp(x, j, t);
        v[t] = next - rhs;
      }
      return v;
    };
    ap.h_jac = [data, z, I](const Eigen::VectorXd& x) {
      const HvacParams& p = data->p;
      Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(p.horizon, x.size());
      for (int t = 0; t < p.horizon; ++t) {
        jac(t, data->temp_at(z, t + 1)) = 1.0;
        jac(t, data->flow_at(z, t)) =
            -p.c_flow[z] * (data->temp(x, z, t) - p.coil_temp);
        if (t >= 1) {
          jac(t, data->temp_at(z, t)) -=
              p.a_coupling(z, z) + p.c_flow[z] * x[data->flow_at(z, t)];
          for (int j = 0; j < I; ++j) {
            if (j == z) continue;
            if (p.a_coupling(z, j) != 0.0)
              jac(t, data->temp_at(j, t)) -= p.a_coupling(z, j);
          }
        }
      }
      return jac;
    };

    ap.box_lower = Eigen::VectorXd::Zero(2 * H);
    ap.box_upper = Eigen::VectorXd::Zero(2 * H);
    ap.box_lower.head(H).setZero();
    ap.box_upper.head(H).setConstant(params.flow_max);
    ap.box_lower.tail(H).setConstant(params.comfort_low);
    ap.box_upper.tail(H).setConstant(params.comfort_high);
    ap.slack_penalty = params.slack_penalty;

    problems.push_back(std::move(ap));
  }

  Instance inst;
  inst.problems = std::move(problems);
  inst.layout = build_layout(inst.problems);
  return inst;
}

// ---------------------------------------------------------------------------
// Random instances
// ---------------------------------------------------------------------------

RandomInstance build_random(int n_agents, int dim, double density,
                            std::uint64_t seed) {
  if (n_agents < 1) throw InvalidParams("random: n_agents must be >= 1");
  if (dim < 1) throw InvalidParams("random: dim must be >= 1");
  if (density < 0.0 || density > 1.0)
    throw InvalidParams("random: density must lie in [0,1]");

  std::mt19937_64 rng(seed);
  auto uni = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };

  // Connected undirected graph: random spanning tree plus density-sampled
  // extra edges.
  std::vector<std::vector<bool>> adj(n_agents,
                                     std::vector<bool>(n_agents, false));
  for (int i = 1; i < n_agents; ++i) {
    const int parent = static_cast<int>(
        std::uniform_int_distribution<int>(0, i - 1)(rng));
    adj[i][parent] = adj[parent][i] = true;
  }
  for (int i = 0; i < n_agents; ++i)
    for (int j = i + 1; j < n_agents; ++j)
      if (!adj[i][j] && uni(0.0, 1.0) < density) adj[i][j] = adj[j][i] = true;

  const int total_dim = n_agents * dim;
  Eigen::VectorXd anchor(total_dim);
  for (int t = 0; t < total_dim; ++t) anchor[t] = uni(-1.0, 1.0);

  std::vector<AgentProblem> problems;
  problems.reserve(n_agents);
  for (int i = 0; i < n_agents; ++i) {
    AgentProblem ap;
    ap.agent_id = i + 1;
    ap.neighbor_ids.push_back(i + 1);
    for (int j = 0; j < n_agents; ++j)
      if (adj[i][j]) ap.neighbor_ids.push_back(j + 1);
    std::sort(ap.neighbor_ids.begin(), ap.neighbor_ids.end());

    const int deg = static_cast<int>(ap.neighbor_ids.size());
    const int nbar = deg * dim;
    ap.dim_own = dim;
    ap.dim_local = nbar;
    int own_pos = 0;
    for (int k = 0; k < deg; ++k)
      if (ap.neighbor_ids[k] == i + 1) own_pos = k;
    ap.own_offset = own_pos * dim;
    ap.dim_h = 1;

    // Quartic double-well plus linear tilt on the agent's own block.
    Eigen::VectorXd q(dim), r(dim), s(dim);
    for (int t = 0; t < dim; ++t) {
      q[t] = uni(0.2, 1.0);
      r[t] = uni(0.3, 1.0);
      s[t] = uni(-1.0, 1.0);
    }
    const int own = ap.own_offset;
    ap.f = [q, r, s, own, dim](const Eigen::VectorXd& x) {
      double total = 0.0;
      for (int t = 0; t < dim; ++t) {
        const double v = x[own + t];
        const double w = v * v - r[t];
        total += 0.25 * q[t] * w * w + s[t] * v;
      }
      return total;
    };
    ap.f_grad = [q, r, s, own, dim](const Eigen::VectorXd& x) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
      for (int t = 0; t < dim; ++t) {
        const double v = x[own + t];
        g[own + t] = q[t] * (v * v - r[t]) * v + s[t];
      }
      return g;
    };

    // Symmetric bilinear coupling over the whole stacked vector.
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(nbar, nbar);
    for (int a = 0; a < nbar; ++a)
      for (int b = a; b < nbar; ++b) {
        const double val = uni(-0.3, 0.3) / nbar;
        w(a, b) = val;
        w(b, a) = val;
      }
    ap.phi = [w](const Eigen::VectorXd& x) {
      return 0.5 * x.dot(w * x);
    };
    ap.phi_grad = [w](const Eigen::VectorXd& x) {
      return Eigen::VectorXd(w * x);
    };

    // One quadratic equality, shifted to vanish at the anchor.
    Eigen::MatrixXd qc = Eigen::MatrixXd::Zero(nbar, nbar);
    for (int a = 0; a < nbar; ++a)
      for (int b = a; b < nbar; ++b) {
        const double val = uni(-0.5, 0.5);
        qc(a, b) = val;
        qc(b, a) = val;
      }
    Eigen::VectorXd pc(nbar);
    for (int t = 0; t < nbar; ++t) pc[t] = uni(-1.0, 1.0);
    ap.box_lower = Eigen::VectorXd::Constant(dim, -2.0);
    ap.box_upper = Eigen::VectorXd::Constant(dim, 2.0);

    // ap.h needs the anchor restricted to this agent; layout not built yet,
    // so assemble the gather by hand from the neighbour ids.
    Eigen::VectorXd local_anchor(nbar);
    for (int k = 0; k < deg; ++k)
      local_anchor.segment(k * dim, dim) =
          anchor.segment((ap.neighbor_ids[k] - 1) * dim, dim);
    const double cc =
        -(0.5 * local_anchor.dot(qc * local_anchor) + pc.dot(local_anchor));
    ap.h = [qc, pc, cc](const Eigen::VectorXd& x) {
      Eigen::VectorXd v(1);
      v[0] = 0.5 * x.dot(qc * x) + pc.dot(x) + cc;
      return v;
    };
    ap.h_jac = [qc, pc](const Eigen::VectorXd& x) {
      Eigen::MatrixXd j(1, x.size());
      j.row(0) = (qc * x + pc).transpose();
      return j;
    };
    ap.slack_penalty = 50.0;
    problems.push_back(std::move(ap));
  }

  RandomInstance inst;
  inst.problems = std::move(problems);
  inst.layout = build_layout(inst.problems);
  inst.anchor = anchor;
  inst.constants.reserve(n_agents);
  for (int i = 0; i < n_agents; ++i)
    inst.constants.push_back(
        estimate_constants(inst.problems[i], 500, seed + 1000 + i));
  return inst;
}

// ---------------------------------------------------------------------------
// Centralized baseline
// ---------------------------------------------------------------------------

double global_objective(const std::vector<AgentProblem>& problems,
                        const ConsensusLayout& layout,
                        const Eigen::VectorXd& x) {
  double total = 0.0;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const Eigen::VectorXd local = layout.gather(static_cast<int>(i), x);
    total += problems[i].f(local) + problems[i].phi(local);
  }
  return total;
}

namespace {

double penalty_value(const std::vector<AgentProblem>& problems,
                     const ConsensusLayout& layout, const Eigen::VectorXd& x,
                     double sigma) {
  double total = 0.0;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const Eigen::VectorXd local = layout.gather(static_cast<int>(i), x);
    total += problems[i].f(local) + problems[i].phi(local);
    if (problems[i].dim_h > 0) total += sigma * problems[i].h(local).squaredNorm();
  }
  return total;
}

Eigen::VectorXd penalty_grad(const std::vector<AgentProblem>& problems,
                             const ConsensusLayout& layout,
                             const Eigen::VectorXd& x, double sigma) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const int idx = static_cast<int>(i);
    const Eigen::VectorXd local = layout.gather(idx, x);
    Eigen::VectorXd gl = problems[i].f_grad(local) + problems[i].phi_grad(local);
    if (problems[i].dim_h > 0) {
      const Eigen::VectorXd hv = problems[i].h(local);
      gl += 2.0 * sigma * problems[i].h_jac(local).transpose() * hv;
    }
    layout.add_scatter(idx, gl, g);
  }
  return g;
}

// Projected gradient descent with a backtracking Armijo condition; the step
// is warm-started across iterations so the stiff late penalty rounds do not
// pay the full backtracking cost every step.
Eigen::VectorXd projected_gradient(const std::vector<AgentProblem>& problems,
                                   const ConsensusLayout& layout,
                                   Eigen::VectorXd x, double sigma,
                                   int max_iters) {
  double step = 1.0;
  double value = penalty_value(problems, layout, x, sigma);
  for (int it = 0; it < max_iters; ++it) {
    const Eigen::VectorXd grad = penalty_grad(problems, layout, x, sigma);
    step = std::min(step * 2.0, 1.0);
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt) {
      const Eigen::VectorXd cand =
          clip(x - step * grad, layout.global_lower, layout.global_upper);
      const Eigen::VectorXd diff = x - cand;
      if (diff.lpNorm<Eigen::Infinity>() == 0.0) break;
      const double cand_value = penalty_value(problems, layout, cand, sigma);
      if (cand_value <= value - 1e-4 * grad.dot(diff)) {
        x = cand;
        value = cand_value;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;  // stationary within the box at this penalty weight
  }
  return x;
}

double max_violation(const std::vector<AgentProblem>& problems,
                     const ConsensusLayout& layout, const Eigen::VectorXd& x) {
  double worst = 0.0;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    if (problems[i].dim_h == 0) continue;
    const Eigen::VectorXd local = layout.gather(static_cast<int>(i), x);
    worst = std::max(worst, problems[i].h(local).lpNorm<Eigen::Infinity>());
  }
  return worst;
}

}  // namespace

BaselineResult centralized_baseline(const std::vector<AgentProblem>& problems,
                                    const ConsensusLayout& layout,
                                    int multistarts, std::uint64_t seed,
                                    double feas_tol) {
  if (multistarts < 1)
    throw InvalidParams("baseline: multistarts must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  BaselineResult best;
  bool found = false;
  for (int s = 0; s < multistarts; ++s) {
    Eigen::VectorXd x(layout.global_dim);
    for (int t = 0; t < layout.global_dim; ++t) {
      const double lo = layout.global_lower[t];
      const double hi = layout.global_upper[t];
      x[t] = lo + (hi - lo) * u01(rng);
    }
    // Tenfold penalty continuation; late rounds mostly polish feasibility.
    double sigma = 10.0;
    for (int round = 0; round < 8; ++round) {
      x = projected_gradient(problems, layout, x, sigma, 600);
      sigma *= 10.0;
    }
    const double viol = max_violation(problems, layout, x);
    if (viol > feas_tol) continue;
    const double obj = global_objective(problems, layout, x);
    if (!found || obj < best.objective) {
      best.x = x;
      best.objective = obj;
      best.max_violation = viol;
      best.start_index = s;
      found = true;
    }
  }
  if (!found)
    throw NoFeasiblePointFound(
        "baseline: no start reached the feasibility tolerance");
  return best;
}

}  // namespace pldm
