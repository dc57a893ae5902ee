#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "reachsos/certificate.h"
#include "reachsos/semisets.h"
#include "reachsos/system_spec.h"

namespace reachsos {

/// Monte Carlo fraction of X on which a certificate is positive.
struct VolumeEstimate {
  double gamma = 0.0;
  std::int64_t n_samples = 0;
  std::int64_t inside = 0;
  std::uint64_t seed = 0;
  /// sqrt(γ(1 − γ)/n).
  double std_error = 0.0;
};

/// γ = #{v > 0} / n over n uniform samples of X.
VolumeEstimate estimate_volume(const Polynomial& v, const SystemSpec& spec,
                               std::int64_t n = 1'000'000,
                               std::uint64_t seed = 0);
/// γ of {x ∈ X | some vₖ(x) > 0}.
VolumeEstimate estimate_union_volume(const std::vector<Polynomial>& vs,
                                     const SystemSpec& spec,
                                     std::int64_t n = 1'000'000,
                                     std::uint64_t seed = 0);

/// Up to n uniform samples of `keep` outside `remove` (which may be null).
/// Fewer rows are returned if the difference is too thin to fill within
/// `max_rounds` batches.
PointSet sample_difference(const SublevelSet& keep, const SublevelSet* remove,
                           std::int64_t n, std::uint64_t seed,
                           int max_rounds = 200);

/// Worst value of one certificate inequality over its region.
struct RowMargin {
  std::string row;
  std::string region;
  double worst = 0.0;
  std::vector<double> witness;
  std::int64_t samples = 0;
};

struct ValidationReport {
  bool pass = true;
  double tol = 0.0;
  std::vector<RowMargin> rows;

  std::string summary() const;
};

/// Rows: "decrease" on X∖T (E[v(f)] − λv, with the expectation rebuilt from
/// the stored mode and controller) and "outside" on X̂∖X (−v).
ValidationReport validate_certificate(const Certificate& cert,
                                      const SystemSpec& spec,
                                      std::int64_t n_per_region = 10'000,
                                      double tol = 1e-6,
                                      std::uint64_t seed = 0);
/// Rows: "decrease" on D, "unsafe" on X_U (−B) and "init" on X_I (B − η).
ValidationReport validate_certificate(const Certificate& cert,
                                      const SafetySpec& spec,
                                      std::int64_t n_per_region = 10'000,
                                      double tol = 1e-6,
                                      std::uint64_t seed = 0);

enum class Verdict { kReached, kLeftSafe, kHorizonExhausted };
std::string to_string(Verdict verdict);

/// φ(0..k) and u(0..k−1) with φ(t+1) = f(φ(t), u(t)).
struct Trajectory {
  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> controls;
  Verdict verdict = Verdict::kHorizonExhausted;

  int steps() const { return static_cast<int>(controls.size()); }
};

/// Greedy closed loop: u(t) maximizes v(f(φ(t), u)) over a grid with
/// `controls_per_axis` points per input axis. Throws std::invalid_argument
/// unless x0 ∈ X.
Trajectory simulate_greedy(const Polynomial& v, const SystemSpec& spec,
                           const std::vector<double>& x0,
                           std::int64_t horizon = 100'000,
                           int controls_per_axis = 101);

/// CSV rows "x1,...,xn,v,sign" on a resolution^n grid spanning `box`.
void write_levelset_csv(const Polynomial& v, const std::vector<Variable>& vars,
                        const BoxSet& box, int resolution, std::ostream& out);

/// Maximal open intervals of [lo, hi] on which the univariate v is positive,
/// with endpoints located by bisection between `resolution` grid points.
std::vector<std::pair<double, double>> positive_intervals(const Polynomial& v,
                                                          const Variable& x,
                                                          double lo, double hi,
                                                          int resolution = 20'000);

/// All points of the grid with `per_axis` equally spaced values per
/// coordinate (endpoints included); the first coordinate varies slowest.
PointSet control_grid(const BoxSet& box, int per_axis);

}  // namespace reachsos
