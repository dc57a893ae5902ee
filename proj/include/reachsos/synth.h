#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "reachsos/certificate.h"
#include "reachsos/expect.h"
#include "reachsos/sdp_solver.h"
#include "reachsos/semisets.h"
#include "reachsos/sos_program.h"
#include "reachsos/system_spec.h"

namespace reachsos {

/// Raised when a synthesis step cannot produce a certificate (solver
/// failure, infeasibility, or a rejected extraction).
class SynthesisError : public std::runtime_error {
 public:
  SynthesisError(const std::string& what, SdpStatus status)
      : std::runtime_error(what), status_(status) {}
  SdpStatus status() const { return status_; }

 private:
  SdpStatus status_;
};

/// Which SDP solver runs a compiled program.
struct SolverChoice {
  SdpOptions options;
  /// Empty selects the embedded interior-point solver.
  std::function<SdpSolution(const SdpProblem&, const SdpOptions&)> backend;

  SdpSolution solve(const SdpProblem& problem) const;
};

/// Statistics of one SDP solve.
struct SolveReport {
  std::string status;
  std::string message;
  int iterations = 0;
  double seconds = 0.0;
  int num_blocks = 0;
  int largest_block = 0;
  int num_equalities = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double relative_gap = 0.0;
  double objective = 0.0;
};
nlohmann::json to_json(const SolveReport& report);

/// x = center + radius ⊙ ξ, reusing the state variables for ξ.
class Normalization {
 public:
  Normalization() = default;
  Normalization(std::vector<Variable> vars, const BoxSet& box);

  const std::vector<Variable>& vars() const { return vars_; }
  const std::vector<double>& center() const { return center_; }
  const std::vector<double>& radius() const { return radius_; }

  /// p(x) ↦ p(center + radius ⊙ ξ).
  Polynomial to_normalized(const Polynomial& p) const;
  /// q(ξ) ↦ q((x − center) / radius).
  Polynomial from_normalized(const Polynomial& q) const;
  /// ξ⁺ = (f(center + radius ⊙ ξ, u) − center) / radius.
  Dynamics dynamics(const Dynamics& d) const;

 private:
  std::vector<Variable> vars_;
  std::vector<double> center_;
  std::vector<double> radius_;
};

/// Smallest even multiplier degree d with d + deg(generator) ≥ row degree.
int auto_multiplier_degree(int row_degree, int generator_degree);

/// Input distribution of the decrease row.
struct ExpectationChoice {
  ExpectationMode mode = ExpectationMode::kUniform;
  /// ũ0 in original coordinates (eps-greedy and greedy).
  std::vector<Polynomial> controller;
  double epsilon = 1.0;
  double delta = 0.0;
};

/// A built but unsolved reach-avoid program, in normalized coordinates.
struct ReachAvoidProgram {
  SosProgram program;
  DecisionPoly v;
  std::vector<std::pair<std::string, SosPoly>> multipliers;
  /// Positive factors dividing each generator after normalization.
  double h_scale = 1.0;
  double g_scale = 1.0;
  double xhat_scale = 1.0;
  Normalization normalization;
  Polynomial xhat_h;
};

/// With `anchor_target`, adds v = 1 at a point of T.
ReachAvoidProgram build_reach_avoid_program(const SystemSpec& spec,
                                            const SolveConfig& cfg,
                                            const ExpectationChoice& choice,
                                            bool anchor_target = false);

/// The integral optimum counts as zero when it is below this fraction of
/// coeff_bound times the measure of X, and v counts as zero when its largest
/// normalized coefficient is below this fraction of coeff_bound.
inline constexpr double kTrivialFraction = 1e-6;

/// Initial CRAS from the uniform-input program. When the integral optimum is
/// zero, the anchored program (v = 1 at a point of T) is tried instead; if
/// it has no solution and v is zero, the certificate has phase "trivial".
Certificate solve_initial(const SystemSpec& spec, const SolveConfig& cfg,
                          const SolverChoice& solver = {},
                          SolveReport* report = nullptr);

enum class StateSampling { kGrid, kRandom };

struct ArgmaxDataset {
  /// N × n states in X∖T and N × m grid-argmax controls.
  PointSet states;
  PointSet controls;
  int grid_states = 0;
  int grid_controls = 0;
};

/// Per sampled state, the control on the M-point-per-axis grid maximizing
/// v(f(x, u)); ties go to the smallest grid index.
ArgmaxDataset gen_argmax_data(const Polynomial& v, const SystemSpec& spec,
                              int num_states, int num_controls,
                              StateSampling sampling, std::uint64_t seed);

struct ControllerFit {
  std::vector<Polynomial> u_tilde;
  double fit_residual = 0.0;
  BoxSet ubox_shrunk;
  /// Smallest sampled distance of ũ0 to the boundary of Û on X∖T.
  double min_box_margin = 0.0;
  SolveReport report;
};

/// Least-squares fit of a degree-`degree` controller to the data subject to
/// ũ0 ∈ Û = [u̲ + δ, ū − δ] on X∖T via SOS rows.
ControllerFit fit_controller(const ArgmaxDataset& data, const SystemSpec& spec,
                             int degree, double delta,
                             const SolverChoice& solver = {},
                             const SolveConfig& cfg = {});

/// Certificate under the ε-greedy mixture around `fit`.
Certificate solve_refined(const SystemSpec& spec, const ControllerFit& fit,
                          double epsilon, double delta, const SolveConfig& cfg,
                          const SolverChoice& solver = {},
                          SolveReport* report = nullptr);

/// Certificate with u = ũ0(x) substituted (the greedy baseline).
Certificate solve_greedy(const SystemSpec& spec, const ControllerFit& fit,
                         const SolveConfig& cfg, const SolverChoice& solver = {},
                         SolveReport* report = nullptr);

struct IterationConfig {
  int iterations = 10;
  double eps0 = 0.5;
  double schedule_factor = 0.8;
  double delta = 0.1;
  int num_states = 100;
  int num_controls = 10;
  StateSampling sampling = StateSampling::kGrid;
  /// Baseline arm: ε = δ = 0 with ũ0 substituted.
  bool greedy = false;
  std::int64_t volume_samples = 1'000'000;
  std::uint64_t seed = 0;
  SolveConfig solve;

  void validate() const;
};

/// Applies "eps0", "eps_factor", "delta", "iters", "states", "controls",
/// "state_sampling" and the SolveConfig keys.
void apply_iteration_config(const nlohmann::json& config, IterationConfig* cfg);

struct IterationRecord {
  int iteration = 0;
  double epsilon = 1.0;
  bool failed = false;
  std::string failure;
  Certificate certificate;
  double gamma = 0.0;
  double union_gamma = 0.0;
  double seconds = 0.0;
  double fit_residual = 0.0;
  SolveReport report;
};
nlohmann::json to_json(const IterationRecord& record);

struct CrasResult {
  /// v₀..v_K; a failed iteration repeats the previous certificate.
  std::vector<Certificate> certificates;
  std::vector<IterationRecord> records;
  double union_gamma = 0.0;
};

/// The ε-greedy enlargement loop. `on_iteration` is called after every record.
CrasResult run_alg1(const SystemSpec& spec, const IterationConfig& cfg,
                    const SolverChoice& solver = {},
                    const std::function<void(const IterationRecord&)>&
                        on_iteration = {});

/// Safety barrier certificate at the configured degree; B ≥ eta on X_I.
Certificate solve_safety(const SafetySpec& spec, const SolveConfig& cfg,
                         const SolverChoice& solver = {},
                         SolveReport* report = nullptr);

}  // namespace reachsos
