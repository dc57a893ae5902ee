#include "reachsos/validate.h"

#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "reachsos/expect.h"

namespace reachsos {

namespace {

VolumeEstimate make_estimate(std::int64_t inside, std::int64_t n,
                             std::uint64_t seed) {
  VolumeEstimate e;
  e.n_samples = n;
  e.inside = inside;
  e.seed = seed;
  e.gamma = n > 0 ? static_cast<double>(inside) / static_cast<double>(n) : 0.0;
  e.std_error = n > 0 ? std::sqrt(e.gamma * (1.0 - e.gamma) / n) : 0.0;
  return e;
}

std::span<const double> row_span(const PointSet& pts, Eigen::Index i) {
  return {pts.row(i).data(), static_cast<std::size_t>(pts.cols())};
}

RowMargin worst_margin(const std::string& row, const std::string& region,
                       const Polynomial& p, const std::vector<Variable>& vars,
                       const PointSet& pts) {
  RowMargin m;
  m.row = row;
  m.region = region;
  m.samples = pts.rows();
  m.worst = std::numeric_limits<double>::infinity();
  const PolyEvaluator eval(p, vars);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const double value = eval(row_span(pts, i));
    if (value < m.worst || std::isnan(value)) {
      m.worst = value;
      m.witness.assign(pts.row(i).data(), pts.row(i).data() + pts.cols());
      if (std::isnan(value)) break;
    }
  }
  if (pts.rows() == 0) m.worst = 0.0;
  return m;
}

RowMargin region_margin(const std::string& row, const std::string& region,
                        const Polynomial& p, const std::vector<Variable>& vars,
                        const std::function<PointSet()>& sampler) {
  PointSet pts;
  try {
    pts = sampler();
  } catch (const std::exception&) {
    pts.resize(0, static_cast<Eigen::Index>(vars.size()));
  }
  return worst_margin(row, region, p, vars, pts);
}

void finish(ValidationReport* report) {
  report->pass = true;
  for (const RowMargin& r : report->rows) {
    if (!(r.worst >= -report->tol)) report->pass = false;
  }
}

}  // namespace

VolumeEstimate estimate_volume(const Polynomial& v, const SystemSpec& spec,
                               std::int64_t n, std::uint64_t seed) {
  return estimate_union_volume({v}, spec, n, seed);
}

VolumeEstimate estimate_union_volume(const std::vector<Polynomial>& vs,
                                     const SystemSpec& spec, std::int64_t n,
                                     std::uint64_t seed) {
  if (n <= 0) throw std::invalid_argument("sample count must be positive");
  const auto& vars = spec.dynamics.state_vars;
  const PointSet pts = sample_uniform(safe_set(spec), n, seed);
  std::vector<PolyEvaluator> evals;
  for (const Polynomial& v : vs) evals.emplace_back(v, vars);
  std::int64_t inside = 0;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (const PolyEvaluator& e : evals) {
      if (e(row_span(pts, i)) > 0.0) {
        ++inside;
        break;
      }
    }
  }
  return make_estimate(inside, n, seed);
}

PointSet sample_difference(const SublevelSet& keep, const SublevelSet* remove,
                           std::int64_t n, std::uint64_t seed,
                           int max_rounds) {
  PointSet out(n, keep.dim());
  std::int64_t filled = 0;
  const std::int64_t batch = std::max<std::int64_t>(n, 1000);
  for (int round = 0; round < max_rounds && filled < n; ++round) {
    const PointSet pts = sample_uniform(keep, batch, seed + 7919 * round);
    for (Eigen::Index i = 0; i < pts.rows() && filled < n; ++i) {
      if (remove != nullptr && remove->contains(row_span(pts, i))) continue;
      out.row(filled++) = pts.row(i);
    }
  }
  out.conservativeResize(filled, keep.dim());
  return out;
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  os << (pass ? "pass" : "FAIL") << " (tol " << tol << ")";
  for (const RowMargin& r : rows) {
    os << "\n  " << r.row << " on " << r.region << ": worst "
       << std::setprecision(6) << r.worst << " over " << r.samples
       << " samples";
    if (!(r.worst >= -tol) && !r.witness.empty()) {
      os << " at (";
      for (std::size_t i = 0; i < r.witness.size(); ++i) {
        os << (i ? ", " : "") << r.witness[i];
      }
      os << ")";
    }
  }
  return os.str();
}

ValidationReport validate_certificate(const Certificate& cert,
                                      const SystemSpec& spec,
                                      std::int64_t n_per_region, double tol,
                                      std::uint64_t seed) {
  ValidationReport report;
  report.tol = tol;
  const auto& vars = spec.dynamics.state_vars;
  const SublevelSet X = safe_set(spec);

  Polynomial ev;
  switch (cert.mode) {
    case ExpectationMode::kUniform:
      ev = expect_uniform(cert.v, spec.dynamics, spec.input_box);
      break;
    case ExpectationMode::kEpsGreedy:
      ev = expect_eps_greedy(
          cert.v, spec.dynamics,
          EpsGreedyParams(cert.epsilon, cert.delta, spec.input_box,
                          cert.controller));
      break;
    case ExpectationMode::kGreedy:
      ev = expect_greedy(cert.v, spec.dynamics, cert.controller);
      break;
  }
  const Polynomial decrease = ev - cert.lambda * cert.v;
  report.rows.push_back(region_margin(
      "decrease", "X\\T", decrease, vars, [&] {
        const SublevelSet T = target_set(spec);
        return sample_difference(X, &T, n_per_region, seed);
      }));

  const Polynomial xhat =
      cert.xhat_h.is_zero() ? compute_xhat(spec).h : cert.xhat_h;
  report.rows.push_back(region_margin(
      "outside", "Xhat\\X", -cert.v, vars, [&] {
        const SublevelSet Xhat(vars, {xhat}, true);
        return sample_difference(Xhat, &X, n_per_region, seed + 1);
      }));
  finish(&report);
  return report;
}

ValidationReport validate_certificate(const Certificate& cert,
                                      const SafetySpec& spec,
                                      std::int64_t n_per_region, double tol,
                                      std::uint64_t seed) {
  ValidationReport report;
  report.tol = tol;
  const auto& vars = spec.dynamics.state_vars;
  const SafetySets sets = safety_sets(spec);
  const Polynomial decrease =
      expect_uniform(cert.v, spec.dynamics, spec.input_box) -
      cert.lambda * cert.v;
  report.rows.push_back(region_margin("decrease", "D", decrease, vars, [&] {
    return sample_difference(sets.domain, nullptr, n_per_region, seed);
  }));
  report.rows.push_back(region_margin("unsafe", "X_U", -cert.v, vars, [&] {
    return sample_difference(sets.unsafe, nullptr, n_per_region, seed + 1);
  }));
  report.rows.push_back(
      region_margin("init", "X_I", cert.v - cert.eta, vars, [&] {
        return sample_difference(sets.init, nullptr, n_per_region, seed + 2);
      }));
  finish(&report);
  return report;
}

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::kReached: return "reached";
    case Verdict::kLeftSafe: return "left_safe";
    case Verdict::kHorizonExhausted: return "horizon_exhausted";
  }
  return "unknown";
}

PointSet control_grid(const BoxSet& box, int per_axis) {
  if (per_axis < 2) throw std::invalid_argument("need at least 2 grid points");
  const int m = box.size();
  std::int64_t total = 1;
  for (int j = 0; j < m; ++j) total *= per_axis;
  PointSet grid(total, m);
  for (std::int64_t k = 0; k < total; ++k) {
    std::int64_t rest = k;
    for (int j = m - 1; j >= 0; --j) {
      const int idx = static_cast<int>(rest % per_axis);
      rest /= per_axis;
      grid(k, j) = box.lower[j] + box.width(j) * idx / (per_axis - 1);
    }
  }
  return grid;
}

Trajectory simulate_greedy(const Polynomial& v, const SystemSpec& spec,
                           const std::vector<double>& x0, std::int64_t horizon,
                           int controls_per_axis) {
  const Dynamics& dyn = spec.dynamics;
  const int n = dyn.num_states();
  const int m = dyn.num_inputs();
  if (static_cast<int>(x0.size()) != n) {
    throw std::invalid_argument("initial state has the wrong dimension");
  }
  const PolyEvaluator h(spec.safe_h, dyn.state_vars);
  const PolyEvaluator g(spec.target_g, dyn.state_vars);
  if (!(h(x0) < 0.0)) throw std::invalid_argument("initial state is outside X");

  const std::vector<Variable> all = dyn.all_vars();
  const PolyEvaluator successor_value(compose(v, [&] {
    Substitution s = dyn.successor_map();
    for (const Variable& u : dyn.input_vars) s[u] = Polynomial(u);
    return s;
  }()), all);
  std::vector<PolyEvaluator> f;
  for (const Polynomial& fi : dyn.f) f.emplace_back(fi, all);
  const PointSet grid = control_grid(spec.input_box, controls_per_axis);

  Trajectory traj;
  traj.states.push_back(x0);
  std::vector<double> z(n + m);
  for (std::int64_t t = 0;; ++t) {
    const std::vector<double>& x = traj.states.back();
    if (g(x) < 0.0) {
      traj.verdict = Verdict::kReached;
      break;
    }
    if (!(h(x) < 0.0)) {
      traj.verdict = Verdict::kLeftSafe;
      break;
    }
    if (t >= horizon) {
      traj.verdict = Verdict::kHorizonExhausted;
      break;
    }
    std::copy(x.begin(), x.end(), z.begin());
    Eigen::Index best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < grid.rows(); ++k) {
      for (int j = 0; j < m; ++j) z[n + j] = grid(k, j);
      const double value = successor_value(z);
      if (value > best_value) {
        best_value = value;
        best = k;
      }
    }
    std::vector<double> u(grid.row(best).data(), grid.row(best).data() + m);
    for (int j = 0; j < m; ++j) z[n + j] = u[j];
    std::vector<double> next(n);
    for (int i = 0; i < n; ++i) next[i] = f[i](z);
    traj.controls.push_back(std::move(u));
    traj.states.push_back(std::move(next));
  }
  return traj;
}

std::vector<std::pair<double, double>> positive_intervals(const Polynomial& v,
                                                          const Variable& x,
                                                          double lo, double hi,
                                                          int resolution) {
  if (!(hi > lo) || resolution < 2) {
    throw std::invalid_argument("need hi > lo and at least 2 grid points");
  }
  const PolyEvaluator eval(v, std::span<const Variable>(&x, 1));
  auto at = [&](double t) { return eval(std::span<const double>(&t, 1)); };
  // Boundary between a and b where the sign of v changes.
  auto crossing = [&](double a, double b) {
    const bool pos_a = at(a) > 0.0;
    for (int i = 0; i < 60; ++i) {
      const double mid = 0.5 * (a + b);
      if ((at(mid) > 0.0) == pos_a) {
        a = mid;
      } else {
        b = mid;
      }
    }
    return 0.5 * (a + b);
  };
  std::vector<std::pair<double, double>> out;
  double prev = lo;
  bool inside = at(lo) > 0.0;
  double start = lo;
  for (int i = 1; i < resolution; ++i) {
    const double t = lo + (hi - lo) * i / (resolution - 1);
    const bool pos = at(t) > 0.0;
    if (pos != inside) {
      const double c = crossing(prev, t);
      if (pos) {
        start = c;
      } else {
        out.emplace_back(start, c);
      }
      inside = pos;
    }
    prev = t;
  }
  if (inside) out.emplace_back(start, hi);
  return out;
}

void write_levelset_csv(const Polynomial& v, const std::vector<Variable>& vars,
                        const BoxSet& box, int resolution, std::ostream& out) {
  if (resolution < 2) throw std::invalid_argument("resolution must be >= 2");
  if (box.size() != static_cast<int>(vars.size())) {
    throw std::invalid_argument("box dimension does not match variables");
  }
  const PolyEvaluator eval(v, vars);
  for (const Variable& x : vars) out << x.name() << ",";
  out << "v,sign\n";
  const PointSet grid = control_grid(box, resolution);
  out << std::setprecision(17);
  for (Eigen::Index k = 0; k < grid.rows(); ++k) {
    const double value = eval(row_span(grid, k));
    for (Eigen::Index j = 0; j < grid.cols(); ++j) out << grid(k, j) << ",";
    out << value << "," << (value > 0.0 ? 1 : (value < 0.0 ? -1 : 0)) << "\n";
  }
}

}  // namespace reachsos
