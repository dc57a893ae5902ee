#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "reachsos/sdp_problem.h"

namespace reachsos {

enum class SdpStatus {
  kOptimal,
  kFeasible,
  kInfeasible,
  kNumericalFailure,
  kIterationLimit,
};

std::string to_string(SdpStatus status);

struct SdpOptions {
  double feasibility_tol = 1e-8;
  double gap_tol = 1e-8;
  double infeasibility_tol = 1e-8;
  /// Primal residual below which a non-converged run is still "feasible".
  double loose_feasibility_tol = 1e-6;
  int max_iterations = 200;
  double step_fraction = 0.98;
  bool verbose = false;
};

/// One interior-point iterate, in the minimization form of the conic problem.
struct SdpIterate {
  int iteration = 0;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  /// ⟨X, S⟩ summed over all cones.
  double complementarity = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double relative_gap = 0.0;
  double primal_step = 0.0;
  double dual_step = 0.0;
  double sigma = 0.0;
};

struct SdpSolution {
  SdpStatus status = SdpStatus::kNumericalFailure;
  std::vector<Eigen::MatrixXd> blocks;
  std::vector<double> scalars;
  /// Multipliers of the source equalities.
  std::vector<double> duals;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double relative_gap = 0.0;
  /// Value of the source objective (maximization) and its dual bound.
  double objective = 0.0;
  double dual_bound = 0.0;
  int iterations = 0;
  std::vector<SdpIterate> history;
  /// Conic-form ray y with bᵀy = 1 and −Aᵀy ⪰ 0 up to tolerance.
  std::optional<Eigen::VectorXd> infeasibility_ray;
  std::string message;

  bool ok() const {
    return status == SdpStatus::kOptimal || status == SdpStatus::kFeasible;
  }
  /// Value of a decision variable in the solution.
  double value(const VarRef& v) const;
};

/// Primal-dual path following with Nesterov–Todd scaling and Mehrotra
/// predictor-corrector steps. Deterministic for identical inputs.
SdpSolution solve_sdp(const SdpProblem& problem, const SdpOptions& options = {});

/// Checks a conic infeasibility ray: returns the worst violation of
/// bᵀy = 1 and −Aᵀy ⪰ 0.
double infeasibility_ray_violation(const ConicForm& conic,
                                   const Eigen::VectorXd& y);

/// Reads a CSDP-style solution file (y vector line, then
/// `matno block i j value` with matno 1 = S and 2 = X) for `conic`,
/// mapping it back onto `problem`.
SdpSolution read_sdpa_solution(const SdpProblem& problem,
                               const ConicForm& conic, std::istream& in);

}  // namespace reachsos
