#include "reachsos/semisets.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace reachsos {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int index_of(std::span<const Variable> vars, Variable v) {
  auto it = std::find(vars.begin(), vars.end(), v);
  if (it == vars.end()) return -1;
  return static_cast<int>(it - vars.begin());
}

// Splits `box` into a grid of at most `max_boxes` cells, doubling the axis
// whose cells are currently widest.
std::vector<int> grid_counts(const BoxSet& box, int max_boxes) {
  std::vector<int> counts(box.size(), 1);
  long total = 1;
  while (true) {
    int best = -1;
    double best_width = 0.0;
    for (int i = 0; i < box.size(); ++i) {
      const double w = box.width(i) / counts[i];
      if (w > best_width) {
        best_width = w;
        best = i;
      }
    }
    if (best < 0 || total * 2 > max_boxes) break;
    counts[best] *= 2;
    total *= 2;
  }
  return counts;
}

template <typename Fn>
void for_each_cell(const BoxSet& box, const std::vector<int>& counts, Fn fn) {
  const int d = box.size();
  std::vector<int> idx(d, 0);
  BoxSet cell = box;
  while (true) {
    for (int i = 0; i < d; ++i) {
      const double w = box.width(i) / counts[i];
      cell.lower[i] = box.lower[i] + w * idx[i];
      cell.upper[i] = idx[i] + 1 == counts[i] ? box.upper[i]
                                              : box.lower[i] + w * (idx[i] + 1);
    }
    fn(cell);
    int k = 0;
    while (k < d && ++idx[k] == counts[k]) {
      idx[k] = 0;
      ++k;
    }
    if (k == d) return;
  }
}

struct Ball {
  std::vector<double> center;
  double radius = 0.0;
};

std::optional<Ball> as_ball(const SublevelSet& set) {
  if (set.defining().size() != 1) return std::nullopt;
  const Polynomial& p = set.defining().front();
  if (p.degree() != 2) return std::nullopt;
  const int n = set.dim();
  std::vector<double> linear(n, 0.0);
  double a = 0.0;
  double c0 = 0.0;
  std::vector<bool> seen(n, false);
  for (const auto& [m, c] : p.terms()) {
    if (m.is_constant()) {
      c0 = c;
      continue;
    }
    if (m.powers().size() != 1) return std::nullopt;
    const auto [v, k] = m.powers().front();
    const int i = index_of(set.vars(), v);
    if (i < 0) return std::nullopt;
    if (k == 1) {
      linear[i] = c;
    } else {
      if (seen[i]) return std::nullopt;
      seen[i] = true;
      if (a == 0.0) a = c;
      if (c != a) return std::nullopt;
    }
  }
  if (a <= 0.0 || std::count(seen.begin(), seen.end(), true) != n) {
    return std::nullopt;
  }
  Ball ball;
  ball.center.resize(n);
  double r2 = -c0 / a;
  for (int i = 0; i < n; ++i) {
    ball.center[i] = -linear[i] / (2.0 * a);
    r2 += ball.center[i] * ball.center[i];
  }
  if (r2 <= 0.0) return std::nullopt;
  ball.radius = std::sqrt(r2);
  return ball;
}

// Generators that are each a univariate quadratic with two real roots in a
// distinct coordinate, covering every coordinate.
std::optional<BoxSet> as_box(const SublevelSet& set) {
  const int n = set.dim();
  if (static_cast<int>(set.defining().size()) != n) return std::nullopt;
  std::vector<double> lower(n), upper(n);
  std::vector<bool> seen(n, false);
  for (const Polynomial& p : set.defining()) {
    const auto vars = p.variables();
    if (vars.size() != 1 || p.degree() != 2) return std::nullopt;
    const int i = index_of(set.vars(), vars.front());
    if (i < 0 || seen[i]) return std::nullopt;
    seen[i] = true;
    const double a = p.coefficient(Monomial(vars.front(), 2));
    const double b = p.coefficient(Monomial(vars.front(), 1));
    const double c = p.coefficient(Monomial());
    const double disc = b * b - 4 * a * c;
    if (a <= 0.0 || disc <= 0.0) return std::nullopt;
    lower[i] = (-b - std::sqrt(disc)) / (2 * a);
    upper[i] = (-b + std::sqrt(disc)) / (2 * a);
  }
  return BoxSet(lower, upper);
}

double centered_ball_moment(const std::vector<int>& beta, double radius) {
  double log_num = 0.0;
  double beta_sum = 0.0;
  int total = 0;
  for (int b : beta) {
    if (b % 2 != 0) return 0.0;
    log_num += std::lgamma((b + 1) / 2.0);
    beta_sum += (b + 1) / 2.0;
    total += b;
  }
  const int n = static_cast<int>(beta.size());
  const double ratio = std::exp(log_num - std::lgamma(beta_sum));
  return 2.0 * ratio * std::pow(radius, total + n) / (total + n);
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

double ball_moment(const Ball& ball, const std::vector<int>& alpha) {
  // Expand Π (cᵢ + yᵢ)^{αᵢ} and integrate the centered monomials.
  const int n = static_cast<int>(alpha.size());
  std::vector<int> beta(n, 0);
  double total = 0.0;
  while (true) {
    double weight = 1.0;
    for (int i = 0; i < n; ++i) {
      weight *= binomial(alpha[i], beta[i]) *
                std::pow(ball.center[i], alpha[i] - beta[i]);
    }
    if (weight != 0.0) total += weight * centered_ball_moment(beta, ball.radius);
    int k = 0;
    while (k < n && ++beta[k] > alpha[k]) {
      beta[k] = 0;
      ++k;
    }
    if (k == n) return total;
  }
}

std::vector<int> exponents(std::span<const Variable> vars, const Monomial& m) {
  std::vector<int> alpha(vars.size(), 0);
  for (const auto& [v, k] : m.powers()) {
    const int i = index_of(vars, v);
    if (i < 0) {
      throw std::invalid_argument("monomial variable '" + v.name() +
                                  "' is not a set coordinate");
    }
    alpha[i] = k;
  }
  return alpha;
}

}  // namespace

Interval Interval::pow(int k) const {
  if (k == 0) return {1.0, 1.0};
  const double a = std::pow(lo, k);
  const double b = std::pow(hi, k);
  if (k % 2 == 1) return {a, b};
  if (lo >= 0.0) return {a, b};
  if (hi <= 0.0) return {b, a};
  return {0.0, std::max(a, b)};
}

Interval operator+(Interval a, Interval b) { return {a.lo + b.lo, a.hi + b.hi}; }

Interval operator*(Interval a, Interval b) {
  const double p[] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
  return {*std::min_element(p, p + 4), *std::max_element(p, p + 4)};
}

Interval operator*(double c, Interval a) {
  return c >= 0 ? Interval{c * a.lo, c * a.hi} : Interval{c * a.hi, c * a.lo};
}

Interval interval_eval(const Polynomial& p, std::span<const Variable> vars,
                       const BoxSet& box) {
  Interval acc{0.0, 0.0};
  for (const auto& [m, c] : p.terms()) {
    Interval term{1.0, 1.0};
    for (const auto& [v, k] : m.powers()) {
      const int i = index_of(vars, v);
      if (i < 0) {
        throw std::invalid_argument("interval_eval: variable '" + v.name() +
                                    "' has no box coordinate");
      }
      term = term * Interval{box.lower[i], box.upper[i]}.pow(k);
    }
    acc = acc + c * term;
  }
  return acc;
}

BoxSet derive_bounding_box(std::span<const Variable> vars,
                           std::span<const Polynomial> defining, bool* empty) {
  const int n = static_cast<int>(vars.size());
  std::vector<double> lower(n, -kInf), upper(n, kInf);
  *empty = false;
  for (const Polynomial& p : defining) {
    const auto pv = p.variables();
    std::vector<int> idx;
    for (Variable v : pv) {
      const int i = index_of(vars, v);
      if (i < 0) {
        throw std::invalid_argument("set generator uses variable '" +
                                    v.name() + "' outside the coordinates");
      }
      idx.push_back(i);
    }
    const int k = static_cast<int>(pv.size());
    if (p.degree() == 1 && k == 1) {
      // a·x + c ≤ 0
      const double a = p.coefficient(Monomial(pv[0]));
      const double c = p.coefficient(Monomial());
      if (a > 0) upper[idx[0]] = std::min(upper[idx[0]], -c / a);
      if (a < 0) lower[idx[0]] = std::max(lower[idx[0]], -c / a);
      continue;
    }
    if (p.degree() != 2) continue;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
    double c = 0.0;
    for (const auto& [m, coef] : p.terms()) {
      if (m.is_constant()) {
        c = coef;
        continue;
      }
      const auto& pw = m.powers();
      const int i = static_cast<int>(
          std::find(pv.begin(), pv.end(), pw[0].first) - pv.begin());
      if (pw.size() == 1 && pw[0].second == 1) {
        b(i) = coef;
      } else if (pw.size() == 1) {
        A(i, i) = coef;
      } else {
        const int j = static_cast<int>(
            std::find(pv.begin(), pv.end(), pw[1].first) - pv.begin());
        A(i, j) = A(j, i) = coef / 2.0;
      }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) continue;
    // xᵀAx + bᵀx + c ≤ 0 ⇔ (x−x₀)ᵀA(x−x₀) ≤ K.
    const Eigen::VectorXd x0 = -0.5 * llt.solve(b);
    const double K = x0.dot(A * x0) - c;
    if (K < 0.0) {
      *empty = true;
      continue;
    }
    const Eigen::MatrixXd Ainv = llt.solve(Eigen::MatrixXd::Identity(k, k));
    for (int i = 0; i < k; ++i) {
      const double half = std::sqrt(K * Ainv(i, i));
      lower[idx[i]] = std::max(lower[idx[i]], x0(i) - half);
      upper[idx[i]] = std::min(upper[idx[i]], x0(i) + half);
    }
  }
  for (int i = 0; i < n; ++i) {
    if (*empty) {
      if (!std::isfinite(lower[i])) lower[i] = std::isfinite(upper[i]) ? upper[i] - 1.0 : 0.0;
      if (!std::isfinite(upper[i])) upper[i] = lower[i] + 1.0;
    }
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i])) {
      throw UnboundedSetError("cannot derive a bounding box for coordinate '" +
                              vars[i].name() + "'; supply state_box");
    }
    if (lower[i] >= upper[i]) {
      *empty = true;
      upper[i] = lower[i] + 1.0;
    }
  }
  if (*empty) {
    for (int i = 0; i < n; ++i) {
      if (lower[i] >= upper[i]) upper[i] = lower[i] + 1.0;
    }
  }
  return BoxSet(lower, upper);
}

SublevelSet::SublevelSet(std::vector<Variable> vars,
                         std::vector<Polynomial> defining, bool strict,
                         std::optional<BoxSet> box)
    : vars_(std::move(vars)), defining_(std::move(defining)), strict_(strict) {
  if (defining_.empty()) {
    throw std::invalid_argument("a sublevel set needs at least one generator");
  }
  for (const Polynomial& p : defining_) evaluators_.emplace_back(p, vars_);
  if (box) {
    if (box->size() != dim()) {
      throw std::invalid_argument("bounding box dimension mismatch");
    }
    box_ = *box;
  } else {
    box_ = derive_bounding_box(vars_, defining_, &empty_);
  }
}

bool SublevelSet::contains(std::span<const double> x) const {
  for (const PolyEvaluator& e : evaluators_) {
    const double value = e(x);
    if (strict_ ? !(value < 0.0) : !(value <= 0.0)) return false;
  }
  return true;
}

SublevelSet safe_set(const SystemSpec& spec) {
  return SublevelSet(spec.dynamics.state_vars, {spec.safe_h}, true,
                     spec.state_box);
}

SublevelSet target_set(const SystemSpec& spec) {
  const auto& vars = spec.dynamics.state_vars;
  try {
    return SublevelSet(vars, {spec.target_g}, true);
  } catch (const UnboundedSetError&) {
    return SublevelSet(vars, {spec.target_g}, true,
                       safe_set(spec).bounding_box());
  }
}

SafetySets safety_sets(const SafetySpec& spec) {
  const auto& vars = spec.dynamics.state_vars;
  SublevelSet domain(vars, spec.domain_h, false, spec.state_box);
  auto make = [&](const std::vector<Polynomial>& gens) {
    try {
      return SublevelSet(vars, gens, false);
    } catch (const UnboundedSetError&) {
      return SublevelSet(vars, gens, false, domain.bounding_box());
    }
  };
  return SafetySets{domain, make(spec.init_hI), make(spec.unsafe_hU)};
}

XhatResult compute_xhat(const SystemSpec& spec, int max_boxes) {
  const Dynamics& dyn = spec.dynamics;
  const SublevelSet X = safe_set(spec);
  const std::vector<Variable> vars = dyn.all_vars();
  const int n = dyn.num_states();

  BoxSet box;
  box.lower = X.bounding_box().lower;
  box.upper = X.bounding_box().upper;
  box.lower.insert(box.lower.end(), spec.input_box.lower.begin(),
                   spec.input_box.lower.end());
  box.upper.insert(box.upper.end(), spec.input_box.upper.begin(),
                   spec.input_box.upper.end());

  Polynomial image_norm;
  Polynomial state_norm;
  for (int i = 0; i < n; ++i) {
    image_norm += dyn.f[i] * dyn.f[i];
    state_norm += Polynomial(dyn.state_vars[i]).pow(2);
  }

  double max_sq = 0.0;
  bool any = false;
  for_each_cell(box, grid_counts(box, max_boxes), [&](const BoxSet& cell) {
    if (interval_eval(spec.safe_h, vars, cell).lo >= 0.0) return;
    any = true;
    max_sq = std::max(max_sq, interval_eval(image_norm, vars, cell).hi);
    max_sq = std::max(max_sq, interval_eval(state_norm, vars, cell).hi);
  });
  if (!any) throw std::invalid_argument("safe set X is empty");

  XhatResult result;
  result.radius_sq = max_sq * (1.0 + 1e-9) + 1e-12;
  result.h = state_norm - Polynomial(result.radius_sq);
  return result;
}

double monomial_moment(const BoxSet& box, std::span<const Variable> vars,
                       const Monomial& alpha) {
  const std::vector<int> a = exponents(vars, alpha);
  double result = 1.0;
  for (int i = 0; i < box.size(); ++i) {
    const int k = a[i] + 1;
    result *= (std::pow(box.upper[i], k) - std::pow(box.lower[i], k)) / k;
  }
  return result;
}

bool has_closed_form_moments(const SublevelSet& set) {
  return as_ball(set).has_value() || as_box(set).has_value();
}

double monomial_moment(const SublevelSet& set, const Monomial& alpha) {
  if (auto ball = as_ball(set)) {
    return ball_moment(*ball, exponents(set.vars(), alpha));
  }
  if (auto box = as_box(set)) return monomial_moment(*box, set.vars(), alpha);
  throw UnsupportedSetError(
      "closed-form moments need a Euclidean ball or a box; use sample_sum");
}

PointSet sample_uniform(const SublevelSet& set, std::int64_t n,
                        std::uint64_t seed) {
  if (set.provably_empty()) throw ThinSetError("sampled set is empty");
  const int d = set.dim();
  const BoxSet& box = set.bounding_box();
  PointSet out(n, d);
  std::mt19937_64 rng(seed);
  std::vector<std::uniform_real_distribution<double>> axes;
  for (int i = 0; i < d; ++i) axes.emplace_back(box.lower[i], box.upper[i]);
  std::vector<double> x(d);
  std::int64_t accepted = 0;
  std::int64_t proposals = 0;
  while (accepted < n) {
    for (int i = 0; i < d; ++i) x[i] = axes[i](rng);
    ++proposals;
    if (set.contains(x)) {
      std::copy(x.begin(), x.end(), out.row(accepted).data());
      ++accepted;
    }
    if (proposals >= 10'000'000 &&
        (proposals % 1'000'000 == 0 &&
         (accepted + 3.0) / static_cast<double>(proposals) < 1e-6)) {
      throw ThinSetError("acceptance rate below 1e-6; set too thin to sample");
    }
    if (proposals >= 100'000'000 &&
        accepted / static_cast<double>(proposals) < 1e-6) {
      throw ThinSetError("acceptance rate below 1e-6 after 1e8 proposals");
    }
  }
  return out;
}

}  // namespace reachsos
