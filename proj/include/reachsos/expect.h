#pragma once

#include <optional>
#include <vector>

#include "reachsos/polynomial.h"
#include "reachsos/system_spec.h"

namespace reachsos {

/// Mixture density over U: mass (1−ε)/Z on the δ-box around ũ0(x) plus ε/Z on
/// all of U, with Z = (1−ε)(2δ)^m + ε·vol(U). ε = δ = 0 is reserved for the
/// greedy substitution and rejected here.
class EpsGreedyParams {
 public:
  /// Throws std::invalid_argument on an invalid combination. `controller`
  /// may be empty when only Z is needed.
  EpsGreedyParams(double epsilon, double delta, const BoxSet& ubox,
                  std::vector<Polynomial> controller = {},
                  double schedule_factor = 0.8);

  double epsilon() const { return epsilon_; }
  double delta() const { return delta_; }
  double Z() const { return z_; }
  double schedule_factor() const { return schedule_factor_; }
  const std::vector<Polynomial>& controller() const { return controller_; }
  const BoxSet& ubox() const { return ubox_; }

  void set_epsilon(double epsilon);
  void set_delta(double delta);
  void set_controller(std::vector<Polynomial> controller);
  /// ε ← ε·factor.
  void advance_schedule();

 private:
  void refresh();

  double epsilon_;
  double delta_;
  BoxSet ubox_;
  std::vector<Polynomial> controller_;
  double schedule_factor_;
  double z_ = 0.0;
};

/// Linear map v ↦ E[v(f(x,u))] for a fixed input distribution. Caches the
/// powers of f so mapping an entire monomial basis is cheap.
class ExpectationOperator {
 public:
  static ExpectationOperator Uniform(const Dynamics& dynamics,
                                     const BoxSet& ubox);
  /// Requires a controller with one polynomial per input, over state vars.
  static ExpectationOperator EpsGreedy(const Dynamics& dynamics,
                                       const EpsGreedyParams& params);
  /// v(f(x, ũ0(x))).
  static ExpectationOperator Greedy(const Dynamics& dynamics,
                                    const std::vector<Polynomial>& controller);

  Polynomial apply(const Polynomial& v);

 private:
  enum class Kind { kUniform, kEpsGreedy, kGreedy };
  ExpectationOperator(Kind kind, const Dynamics& dynamics,
                      Substitution successor);

  Polynomial integrate_box(Polynomial w) const;
  Polynomial integrate_window(Polynomial w) const;

  Kind kind_;
  std::vector<Variable> inputs_;
  BoxSet ubox_;
  std::vector<Polynomial> controller_;
  double delta_ = 0.0;
  double window_weight_ = 0.0;
  double box_weight_ = 0.0;
  double z_ = 1.0;
  Composer composer_;
};

Polynomial expect_uniform(const Polynomial& v, const Dynamics& dynamics,
                          const BoxSet& ubox);
Polynomial expect_eps_greedy(const Polynomial& v, const Dynamics& dynamics,
                             const EpsGreedyParams& params);
Polynomial expect_greedy(const Polynomial& v, const Dynamics& dynamics,
                         const std::vector<Polynomial>& controller);

}  // namespace reachsos
