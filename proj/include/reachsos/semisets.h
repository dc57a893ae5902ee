#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "reachsos/polynomial.h"
#include "reachsos/system_spec.h"

namespace reachsos {

/// Row-major sample matrix: one point per row.
using PointSet =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Closed interval with outward-sound arithmetic helpers.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  /// Exact range of t^k for t in this interval.
  Interval pow(int k) const;
  friend Interval operator+(Interval a, Interval b);
  friend Interval operator*(Interval a, Interval b);
  friend Interval operator*(double c, Interval a);
};

/// Enclosure of p over `box`, where box coordinate i belongs to vars[i].
Interval interval_eval(const Polynomial& p, std::span<const Variable> vars,
                       const BoxSet& box);

class UnboundedSetError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ThinSetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedSetError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Intersection of {p < 0} (strict) or {p ≤ 0} over `defining`, on the
/// coordinates `vars`.
class SublevelSet {
 public:
  /// Derives a bounding box from the quadratic generators when `box` is
  /// absent; throws UnboundedSetError if some coordinate stays unbounded.
  SublevelSet(std::vector<Variable> vars, std::vector<Polynomial> defining,
              bool strict, std::optional<BoxSet> box = std::nullopt);

  const std::vector<Variable>& vars() const { return vars_; }
  const std::vector<Polynomial>& defining() const { return defining_; }
  bool strict() const { return strict_; }
  const BoxSet& bounding_box() const { return box_; }
  /// True when the quadratic analysis proved the set empty.
  bool provably_empty() const { return empty_; }
  int dim() const { return static_cast<int>(vars_.size()); }

  bool contains(std::span<const double> x) const;

 private:
  std::vector<Variable> vars_;
  std::vector<Polynomial> defining_;
  bool strict_ = true;
  bool empty_ = false;
  BoxSet box_;
  std::vector<PolyEvaluator> evaluators_;
};

/// Bounding box implied by degree-2 generators with positive definite
/// quadratic part, and by univariate affine generators. Sets `*empty` when a
/// generator has no real solutions. Throws UnboundedSetError.
BoxSet derive_bounding_box(std::span<const Variable> vars,
                           std::span<const Polynomial> defining, bool* empty);

/// X in the state coordinates of `spec`, with its bounding box.
SublevelSet safe_set(const SystemSpec& spec);
SublevelSet target_set(const SystemSpec& spec);

struct SafetySets {
  SublevelSet domain;
  SublevelSet init;
  SublevelSet unsafe;
};
SafetySets safety_sets(const SafetySpec& spec);

struct XhatResult {
  Polynomial h;
  double radius_sq = 0.0;
};

/// ĥ = Σ xᵢ² − r² with r² an interval upper bound of max(|f(x,u)|², |x|²)
/// over X × U, refined on a grid of at most `max_boxes` sub-boxes.
XhatResult compute_xhat(const SystemSpec& spec, int max_boxes = 4096);

/// ∫_box z^α dz with box coordinate i belonging to vars[i].
double monomial_moment(const BoxSet& box, std::span<const Variable> vars,
                       const Monomial& alpha);
/// Closed form for a single Euclidean-ball generator Σ a(xᵢ − cᵢ)² − a r²,
/// or for a set whose generators are one interval per coordinate.
/// Throws UnsupportedSetError otherwise.
double monomial_moment(const SublevelSet& set, const Monomial& alpha);
bool has_closed_form_moments(const SublevelSet& set);

/// Uniform rejection samples from the bounding box, deterministic in
/// `seed`. Throws ThinSetError for empty or extremely thin sets.
PointSet sample_uniform(const SublevelSet& set, std::int64_t n,
                        std::uint64_t seed);

}  // namespace reachsos
