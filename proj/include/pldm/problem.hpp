#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "pldm/errors.hpp"

namespace pldm {

using ScalarFn = std::function<double(const Eigen::VectorXd&)>;
using VectorFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

/// One agent of the coupled problem
///
///   min  sum_i f_i + phi_i   s.t.  h_i = 0,  own block in a box.
///
/// Every callable acts on the agent's stacked local vector X_i (its own
/// block plus one copy of each neighbour's block, ordered by ascending
/// agent id), so f here is the extension of the private objective to the
/// stacked space.  h may be empty (dim_h == 0) for agents without a
/// coupling constraint.
struct AgentProblem {
  int agent_id = 0;                // 1-based, contiguous across the network
  std::vector<int> neighbor_ids;   // ascending, contains agent_id
  int dim_own = 0;                 // n_i, size of the block owned by agent i
  int dim_local = 0;               // nbar_i, length of the stacked vector X_i
  int own_offset = 0;              // start of the own block inside X_i
  int dim_h = 0;                   // m_i, number of equality constraints

  ScalarFn f;          // objective term, stacked-space extension
  VectorFn f_grad;
  ScalarFn phi;        // coupling term over local copies
  VectorFn phi_grad;
  VectorFn h;          // equality constraints, R^{nbar_i} -> R^{m_i}
  JacobianFn h_jac;    // m_i x nbar_i

  Eigen::VectorXd box_lower;   // own-block bounds, finite, lower <= upper
  Eigen::VectorXd box_upper;
  double slack_penalty = 1.0;  // M_i > 0, weight of the slack term M_i|Y_i|^2
};

/// Copy bookkeeping for the consensus reformulation.  Each agent's local
/// vector X_i maps coordinate-by-coordinate onto the global vector Z;
/// copy_map[i][t] is the global index of local coordinate t of agent i.
/// Own blocks map identically onto their slice of Z.
struct ConsensusLayout {
  int global_dim = 0;
  std::vector<std::vector<int>> copy_map;
  std::vector<int> copy_count;      // per global coordinate, always >= 1
  std::vector<int> block_offset;    // start of agent i's own block in Z
  std::vector<int> block_dim;       // n_i
  Eigen::VectorXd global_lower;     // box for Z, assembled from own blocks
  Eigen::VectorXd global_upper;

  int num_agents() const { return static_cast<int>(copy_map.size()); }
  int local_dim(int agent) const {
    return static_cast<int>(copy_map[agent].size());
  }

  /// E_i Z: pull the coordinates agent i holds copies of.
  Eigen::VectorXd gather(int agent, const Eigen::VectorXd& z) const;

  /// Write a local vector back into the global slots it maps to.
  void scatter(int agent, const Eigen::VectorXd& local,
               Eigen::VectorXd& z) const;

  /// z += E_i^T local (accumulates into shared coordinates).
  void add_scatter(int agent, const Eigen::VectorXd& local,
                   Eigen::VectorXd& z) const;
};

/// Sampled problem constants used by the step-size and certificate
/// machinery.  All values are suprema observed over a finite sample, so
/// they may under-estimate the true constants.
struct ConstantsEstimate {
  double L_f = 0;      // difference quotient of f
  double L_phi = 0;    // difference quotient of phi
  double L_h = 0;      // difference quotient of h
  double M_h = 0;      // difference quotient of the h Jacobian
  double C_h = 0;      // max |J_h^T h| over sample points
  double theta = 0;    // min smallest singular value of the constraint stack
  double B = 0;        // max spectral norm of the constraint stack
  double M_gamma = 0;  // multiplier-norm bound, filled from a recorded run
};

/// Report of an analytic-vs-numeric derivative comparison.  Errors are
/// max over components of |analytic - numeric| / max(1, |numeric|).
struct GradientCheckReport {
  double err_f = 0;
  double err_phi = 0;
  double err_h = 0;
  double max_error() const { return std::max(err_f, std::max(err_phi, err_h)); }
};

/// Validate the agent list and build the copy layout.
///
/// Requires ids 1..N contiguous, neighbour lists ascending and
/// self-containing, consistent block dims, finite ordered boxes and
/// positive slack penalties.  Throws EmptyNetwork or DimensionMismatch on
/// structural faults, InvalidParams on bad boxes or penalties.
ConsensusLayout build_layout(const std::vector<AgentProblem>& problems);

/// Compare the supplied gradients and Jacobian against central differences
/// at `point` (one local vector).  Throws NonFiniteValue if a callable
/// returns NaN or infinity at any probe point.
GradientCheckReport validate_gradients(const AgentProblem& problem,
                                       const Eigen::VectorXd& point,
                                       double step = 1e-5);

/// Estimate Lipschitz-style constants by sampling `sample_count` point
/// pairs.  Own-block coordinates are drawn uniformly from the box; copy
/// coordinates from the hull of the own-block box.  Half the pairs are
/// independent draws, half are short random steps so the quotients approach
/// directional derivatives.  Deterministic given the seed, and monotone in
/// sample_count for a fixed seed because samples are drawn as one stream.
/// A box that is a single point yields zero quotients and point evaluations
/// for C_h / theta / B.
ConstantsEstimate estimate_constants(const AgentProblem& problem,
                                     int sample_count, std::uint64_t seed);

/// Stack the constraint Jacobian over the slack-extended vector:
/// rows [J_h(X) 0; I I]; the identity rows are the consensus map.
Eigen::MatrixXd constraint_stack(const AgentProblem& problem,
                                 const Eigen::VectorXd& local_x);

/// Smallest singular value of the constraint stack at a point (0 when the
/// stack has more rows than columns and cannot have full row rank).
double check_regularity(const AgentProblem& problem,
                        const Eigen::VectorXd& local_x);

}  // namespace pldm
