#include "reachsos/expect.h"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace reachsos {
namespace {

Polynomial divide(const Polynomial& p, double d) {
  Polynomial::TermMap terms;
  for (const auto& [m, c] : p.terms()) terms.emplace(m, c / d);
  return Polynomial(std::move(terms));
}

void check_controller(const Dynamics& dynamics,
                      const std::vector<Polynomial>& controller) {
  if (static_cast<int>(controller.size()) != dynamics.num_inputs()) {
    throw std::invalid_argument("controller needs one polynomial per input");
  }
  for (const Polynomial& u : controller) {
    for (Variable v : u.variables()) {
      if (std::find(dynamics.state_vars.begin(), dynamics.state_vars.end(),
                    v) == dynamics.state_vars.end()) {
        throw std::invalid_argument("controller uses non-state variable '" +
                                    v.name() + "'");
      }
    }
  }
}

}  // namespace

EpsGreedyParams::EpsGreedyParams(double epsilon, double delta,
                                 const BoxSet& ubox,
                                 std::vector<Polynomial> controller,
                                 double schedule_factor)
    : epsilon_(epsilon),
      delta_(delta),
      ubox_(ubox),
      controller_(std::move(controller)),
      schedule_factor_(schedule_factor) {
  if (!(schedule_factor_ > 0.0 && schedule_factor_ <= 1.0)) {
    throw std::invalid_argument("schedule factor must lie in (0, 1]");
  }
  refresh();
}

void EpsGreedyParams::set_epsilon(double epsilon) {
  epsilon_ = epsilon;
  refresh();
}

void EpsGreedyParams::set_delta(double delta) {
  delta_ = delta;
  refresh();
}

void EpsGreedyParams::set_controller(std::vector<Polynomial> controller) {
  controller_ = std::move(controller);
}

void EpsGreedyParams::advance_schedule() { set_epsilon(epsilon_ * schedule_factor_); }

void EpsGreedyParams::refresh() {
  if (!(epsilon_ >= 0.0 && epsilon_ <= 1.0)) {
    throw std::invalid_argument("epsilon must lie in [0, 1]");
  }
  if (epsilon_ == 0.0 && delta_ == 0.0) {
    throw std::invalid_argument(
        "epsilon and delta cannot both be zero; use the greedy substitution");
  }
  if (delta_ < 0.0) throw std::invalid_argument("delta must be non-negative");
  if (delta_ > 0.0) {
    for (int j = 0; j < ubox_.size(); ++j) {
      if (!(delta_ < 0.5 * ubox_.width(j))) {
        throw std::invalid_argument(
            "delta must be below half the width of every input interval");
      }
    }
  }
  double window = 1.0;
  for (int j = 0; j < ubox_.size(); ++j) window *= 2.0 * delta_;
  z_ = (1.0 - epsilon_) * window + epsilon_ * ubox_.volume();
  if (!(z_ > 0.0)) throw std::invalid_argument("normalization Z must be positive");
}

ExpectationOperator::ExpectationOperator(Kind kind, const Dynamics& dynamics,
                                         Substitution successor)
    : kind_(kind),
      inputs_(dynamics.input_vars),
      composer_(std::move(successor)) {}

ExpectationOperator ExpectationOperator::Uniform(const Dynamics& dynamics,
                                                 const BoxSet& ubox) {
  if (ubox.size() != dynamics.num_inputs()) {
    throw std::invalid_argument("input box dimension mismatch");
  }
  ExpectationOperator op(Kind::kUniform, dynamics, dynamics.successor_map());
  op.ubox_ = ubox;
  return op;
}

ExpectationOperator ExpectationOperator::EpsGreedy(
    const Dynamics& dynamics, const EpsGreedyParams& params) {
  check_controller(dynamics, params.controller());
  if (params.ubox().size() != dynamics.num_inputs()) {
    throw std::invalid_argument("input box dimension mismatch");
  }
  ExpectationOperator op(Kind::kEpsGreedy, dynamics, dynamics.successor_map());
  op.ubox_ = params.ubox();
  op.controller_ = params.controller();
  op.delta_ = params.delta();
  op.window_weight_ = 1.0 - params.epsilon();
  op.box_weight_ = params.epsilon();
  op.z_ = params.Z();
  return op;
}

ExpectationOperator ExpectationOperator::Greedy(
    const Dynamics& dynamics, const std::vector<Polynomial>& controller) {
  check_controller(dynamics, controller);
  Substitution closed_loop;
  for (Variable x : dynamics.state_vars) closed_loop.emplace(x, Polynomial(x));
  for (int j = 0; j < dynamics.num_inputs(); ++j) {
    closed_loop.emplace(dynamics.input_vars[j], controller[j]);
  }
  Substitution successor;
  for (int i = 0; i < dynamics.num_states(); ++i) {
    successor.emplace(dynamics.state_vars[i],
                      compose(dynamics.f[i], closed_loop));
  }
  return ExpectationOperator(Kind::kGreedy, dynamics, std::move(successor));
}

Polynomial ExpectationOperator::integrate_box(Polynomial w) const {
  for (std::size_t j = 0; j < inputs_.size(); ++j) {
    w = integrate_var(w, inputs_[j], ubox_.lower[j], ubox_.upper[j]);
  }
  return w;
}

Polynomial ExpectationOperator::integrate_window(Polynomial w) const {
  for (std::size_t j = 0; j < inputs_.size(); ++j) {
    w = integrate_var(w, inputs_[j], controller_[j] - delta_,
                      controller_[j] + delta_);
  }
  return w;
}

Polynomial ExpectationOperator::apply(const Polynomial& v) {
  Polynomial w = composer_.apply(v);
  switch (kind_) {
    case Kind::kGreedy:
      return w;
    case Kind::kUniform:
      return divide(integrate_box(w), ubox_.volume());
    case Kind::kEpsGreedy: {
      Polynomial mixed;
      if (window_weight_ != 0.0) {
        mixed += window_weight_ * integrate_window(w);
      }
      if (box_weight_ != 0.0) mixed += box_weight_ * integrate_box(w);
      return divide(mixed, z_);
    }
  }
  return w;
}

Polynomial expect_uniform(const Polynomial& v, const Dynamics& dynamics,
                          const BoxSet& ubox) {
  return ExpectationOperator::Uniform(dynamics, ubox).apply(v);
}

Polynomial expect_eps_greedy(const Polynomial& v, const Dynamics& dynamics,
                             const EpsGreedyParams& params) {
  return ExpectationOperator::EpsGreedy(dynamics, params).apply(v);
}

Polynomial expect_greedy(const Polynomial& v, const Dynamics& dynamics,
                         const std::vector<Polynomial>& controller) {
  return ExpectationOperator::Greedy(dynamics, controller).apply(v);
}

}  // namespace reachsos
