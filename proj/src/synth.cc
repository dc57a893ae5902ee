#include "reachsos/synth.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <Eigen/QR>

#include "reachsos/validate.h"

namespace reachsos {

using nlohmann::json;

SdpSolution SolverChoice::solve(const SdpProblem& problem) const {
  return backend ? backend(problem, options) : solve_sdp(problem, options);
}

json to_json(const SolveReport& r) {
  return json{{"status", r.status},
              {"message", r.message},
              {"iterations", r.iterations},
              {"seconds", r.seconds},
              {"num_blocks", r.num_blocks},
              {"largest_block", r.largest_block},
              {"num_equalities", r.num_equalities},
              {"primal_residual", r.primal_residual},
              {"dual_residual", r.dual_residual},
              {"relative_gap", r.relative_gap},
              {"objective", r.objective}};
}

Normalization::Normalization(std::vector<Variable> vars, const BoxSet& box)
    : vars_(std::move(vars)) {
  if (box.size() != static_cast<int>(vars_.size())) {
    throw std::invalid_argument("normalization box has the wrong dimension");
  }
  for (int i = 0; i < box.size(); ++i) {
    center_.push_back(0.5 * (box.lower[i] + box.upper[i]));
    radius_.push_back(0.5 * box.width(i));
  }
}

Polynomial Normalization::to_normalized(const Polynomial& p) const {
  Substitution s;
  for (const Variable& v : p.variables()) s[v] = Polynomial(v);
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    s[vars_[i]] = center_[i] + radius_[i] * Polynomial(vars_[i]);
  }
  return compose(p, s);
}

Polynomial Normalization::from_normalized(const Polynomial& q) const {
  Substitution s;
  for (const Variable& v : q.variables()) s[v] = Polynomial(v);
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    s[vars_[i]] = (1.0 / radius_[i]) * (Polynomial(vars_[i]) - center_[i]);
  }
  return compose(q, s);
}

Dynamics Normalization::dynamics(const Dynamics& d) const {
  Dynamics out = d;
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    out.f[i] = (1.0 / radius_[i]) * (to_normalized(d.f[i]) - center_[i]);
  }
  return out;
}

int auto_multiplier_degree(int row_degree, int generator_degree) {
  int d = std::max(0, row_degree - std::max(0, generator_degree));
  return d + (d % 2);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double unit_scale(const Polynomial& p) {
  const double s = p.max_abs_coefficient();
  return s > 0.0 ? s : 1.0;
}

/// Normalized generator divided by its largest coefficient.
Polynomial scaled(const Normalization& nz, const Polynomial& p, double* scale) {
  const Polynomial q = nz.to_normalized(p);
  *scale = unit_scale(q);
  return (1.0 / *scale) * q;
}

int multiplier_degree(const SolveConfig& cfg, int row_degree,
                      const Polynomial& generator) {
  const int needed = auto_multiplier_degree(row_degree, generator.degree());
  if (cfg.deg_multipliers == SolveConfig::kAutoDegree) return needed;
  return std::max(cfg.deg_multipliers, needed);
}

SdpSolution run_solver(const SosProgram& prog, const SolverChoice& solver,
                       const std::string& what, SolveReport* report) {
  const SdpProblem problem = prog.compile();
  const auto start = Clock::now();
  SdpSolution sol = solver.solve(problem);
  SolveReport r;
  r.seconds = seconds_since(start);
  r.status = to_string(sol.status);
  r.message = sol.message;
  r.iterations = sol.iterations;
  r.num_blocks = static_cast<int>(problem.block_dims.size());
  for (int d : problem.block_dims) r.largest_block = std::max(r.largest_block, d);
  r.num_equalities = static_cast<int>(problem.equalities.size());
  r.primal_residual = sol.primal_residual;
  r.dual_residual = sol.dual_residual;
  r.relative_gap = sol.relative_gap;
  r.objective = sol.objective;
  if (report != nullptr) *report = r;
  if (!sol.ok()) {
    std::ostringstream os;
    os << what << ": solver returned " << r.status;
    if (!sol.message.empty()) os << " (" << sol.message << ")";
    os << "; " << r.num_blocks << " blocks, largest " << r.largest_block
       << ", " << r.num_equalities << " equalities";
    throw SynthesisError(os.str(), sol.status);
  }
  return sol;
}

/// Largest identity residual; rejects solutions whose Gram matrices do not
/// reproduce their rows.
constexpr double kFitIdentityTol = 1e-4;
// Fraction of the shrunk box width kept clear by the SOS box rows.
constexpr double kFitBackoff = 1e-5;

double verified_residual(const SosProgram& prog, const SdpSolution& sol,
                         const std::string& what, double tol = 1e-6) {
  try {
    double worst = 0.0;
    for (const IdentityResidual& r : prog.check_identities(sol, tol)) {
      worst = std::max(worst, r.max_abs);
    }
    return worst;
  } catch (const ExtractionError& e) {
    throw SynthesisError(what + ": " + e.what(), SdpStatus::kNumericalFailure);
  }
}

Certificate solve_reach_avoid(const SystemSpec& spec, const SolveConfig& cfg,
                              const ExpectationChoice& choice,
                              const SolverChoice& solver,
                              SolveReport* report) {
  const std::string what = spec.name.empty()
                               ? std::string("reach-avoid program")
                               : spec.name + " reach-avoid program";
  Certificate cert;
  cert.kind = CertificateKind::kReachAvoid;
  cert.mode = choice.mode;
  cert.system = spec.name;
  cert.lambda = spec.lambda;
  cert.controller = choice.controller;
  cert.epsilon = choice.epsilon;
  cert.delta = choice.delta;

  ReachAvoidProgram rap = build_reach_avoid_program(spec, cfg, choice);
  cert.xhat_h = rap.xhat_h;
  SdpSolution sol = run_solver(rap.program, solver, what, report);
  const double trivial = kTrivialFraction * cfg.coeff_bound;
  const auto& obj_terms = rap.program.objective().terms();
  const auto unit = obj_terms.find(rap.v.coeff_ids[0]);
  const double measure = unit == obj_terms.end() ? 1.0 : std::abs(unit->second);
  const bool zero_objective = sol.objective <= trivial * measure;
  bool zero_v = rap.program.value(rap.v, sol).max_abs_coefficient() <= trivial;
  double residual = 0.0;
  try {
    residual = verified_residual(rap.program, sol, what);
  } catch (const SynthesisError&) {
    // v ≡ 0 satisfies every row, and a zero optimum says nothing better
    // was found.
    if (!zero_objective) throw;
    zero_v = true;
  }
  if (zero_v || zero_objective) {
    try {
      SolveReport anchored_report;
      ReachAvoidProgram anchored =
          build_reach_avoid_program(spec, cfg, choice, true);
      const SdpSolution anchored_sol =
          run_solver(anchored.program, solver, what, &anchored_report);
      residual = verified_residual(anchored.program, anchored_sol, what);
      rap = std::move(anchored);
      sol = anchored_sol;
      cert.phase = "anchored";
      if (report != nullptr) *report = anchored_report;
    } catch (const SynthesisError&) {
      if (zero_v) {
        cert.phase = "trivial";
        cert.solve_status = to_string(sol.status);
        cert.solver_iterations = sol.iterations;
        return cert;
      }
    }
  }

  // The rows are homogeneous in (v, s), so v is reported with unit largest
  // normalized coefficient.
  const Normalization& nz = rap.normalization;
  const Polynomial vn = rap.program.value(rap.v, sol);
  const double k = unit_scale(vn);
  cert.v = (1.0 / k) * nz.from_normalized(vn);
  const double scales[] = {rap.h_scale, rap.g_scale, rap.xhat_scale,
                           rap.h_scale};
  for (std::size_t i = 0; i < rap.multipliers.size(); ++i) {
    const auto& [name, s] = rap.multipliers[i];
    cert.multipliers[name] = (1.0 / (k * scales[i])) *
                             nz.from_normalized(rap.program.value(s, sol));
  }
  cert.solve_status = to_string(sol.status);
  cert.objective_value = sol.objective / k;
  cert.solver_iterations = sol.iterations;
  cert.max_identity_residual = residual / k;
  return cert;
}

}  // namespace

ReachAvoidProgram build_reach_avoid_program(const SystemSpec& spec,
                                            const SolveConfig& cfg,
                                            const ExpectationChoice& choice,
                                            bool anchor_target) {
  cfg.validate();
  const std::vector<Variable>& vars = spec.dynamics.state_vars;
  const SublevelSet X = safe_set(spec);
  ReachAvoidProgram out;
  out.xhat_h = spec.xhat_h ? *spec.xhat_h : compute_xhat(spec).h;
  out.normalization = Normalization(vars, X.bounding_box());
  const Normalization& nz = out.normalization;
  const Polynomial h = scaled(nz, spec.safe_h, &out.h_scale);
  const Polynomial g = scaled(nz, spec.target_g, &out.g_scale);
  const Polynomial xhat = scaled(nz, out.xhat_h, &out.xhat_scale);
  const Dynamics dyn = nz.dynamics(spec.dynamics);
  std::vector<Polynomial> controller;
  for (const Polynomial& c : choice.controller) {
    controller.push_back(nz.to_normalized(c));
  }

  ExpectationOperator op = [&] {
    switch (choice.mode) {
      case ExpectationMode::kEpsGreedy:
        return ExpectationOperator::EpsGreedy(
            dyn, EpsGreedyParams(choice.epsilon, choice.delta,
                                 spec.input_box, controller));
      case ExpectationMode::kGreedy:
        return ExpectationOperator::Greedy(dyn, controller);
      case ExpectationMode::kUniform:
        break;
    }
    return ExpectationOperator::Uniform(dyn, spec.input_box);
  }();

  SosProgram& prog = out.program;
  out.v = prog.new_template(vars, cfg.deg_v, cfg.coeff_bound, "v");
  AffinePolynomial decrease =
      out.v.transformed([&](const Polynomial& b) { return op.apply(b); }) -
      spec.lambda * out.v.expr();
  const int row1 = decrease.degree();
  const SosPoly s1 = prog.new_sos_poly(vars, multiplier_degree(cfg, row1, h), "s1");
  const SosPoly s2 = prog.new_sos_poly(vars, multiplier_degree(cfg, row1, g), "s2");
  decrease.add_product(s1.value, h);
  decrease.add_product(s2.value, g, -1.0);
  prog.add_sos(decrease, "decrease");

  AffinePolynomial outside = -1.0 * out.v.expr();
  const int row2 = cfg.deg_v;
  const SosPoly s3 = prog.new_sos_poly(vars, multiplier_degree(cfg, row2, xhat), "s3");
  const SosPoly s4 = prog.new_sos_poly(vars, multiplier_degree(cfg, row2, h), "s4");
  outside.add_product(s3.value, xhat);
  outside.add_product(s4.value, h, -1.0);
  prog.add_sos(outside, "outside");
  out.multipliers = {{"s1", s1}, {"s2", s2}, {"s3", s3}, {"s4", s4}};

  const int n = static_cast<int>(vars.size());
  const SublevelSet unit_x(vars, {h}, true,
                           BoxSet(std::vector<double>(n, -1.0),
                                  std::vector<double>(n, 1.0)));
  prog.set_objective_integral(out.v, unit_x, cfg.objective_mode,
                              cfg.objective_samples, cfg.rng_seed + 1);
  if (anchor_target) {
    // The rows are homogeneous, so v = 1 at a target point only fixes scale.
    const SublevelSet T = target_set(spec);
    const BoxSet& tb = T.bounding_box();
    std::vector<double> xt(n);
    for (int i = 0; i < n; ++i) xt[i] = 0.5 * (tb.lower[i] + tb.upper[i]);
    if (!T.contains(xt)) {
      const PointSet p = sample_uniform(T, 1, cfg.rng_seed + 3);
      for (int i = 0; i < n; ++i) xt[i] = p(0, i);
    }
    Point p;
    for (int i = 0; i < n; ++i) {
      p[vars[i]] = (xt[i] - nz.center()[i]) / nz.radius()[i];
    }
    LinearExpr e(-1.0);
    for (std::size_t j = 0; j < out.v.basis.size(); ++j) {
      e += LinearExpr::Decision(out.v.coeff_ids[j], out.v.basis[j].eval(p));
    }
    prog.add_equality(e);
  }
  return out;
}

Certificate solve_initial(const SystemSpec& spec, const SolveConfig& cfg,
                          const SolverChoice& solver, SolveReport* report) {
  return solve_reach_avoid(spec, cfg, ExpectationChoice{}, solver, report);
}

ArgmaxDataset gen_argmax_data(const Polynomial& v, const SystemSpec& spec,
                              int num_states, int num_controls,
                              StateSampling sampling, std::uint64_t seed) {
  if (num_states < 1) throw std::invalid_argument("need at least one state");
  if (num_controls < 2) {
    throw std::invalid_argument("need at least two controls per axis");
  }
  const Dynamics& dyn = spec.dynamics;
  const int n = dyn.num_states();
  const int m = dyn.num_inputs();
  const SublevelSet X = safe_set(spec);
  const SublevelSet T = target_set(spec);

  ArgmaxDataset data;
  data.grid_controls = num_controls;
  if (sampling == StateSampling::kGrid) {
    int per = 1;
    while (std::pow(static_cast<double>(per), n) < num_states) ++per;
    data.grid_states = per;
    const BoxSet& box = X.bounding_box();
    BoxSet centers;
    for (int i = 0; i < n; ++i) {
      const double half_cell = 0.5 * box.width(i) / per;
      centers.lower.push_back(box.lower[i] + half_cell);
      centers.upper.push_back(box.upper[i] - half_cell);
    }
    const PointSet grid = per > 1 ? control_grid(centers, per) : [&] {
      PointSet mid(1, n);
      for (int i = 0; i < n; ++i) mid(0, i) = 0.5 * (box.lower[i] + box.upper[i]);
      return mid;
    }();
    std::vector<Eigen::Index> keep;
    for (Eigen::Index k = 0; k < grid.rows(); ++k) {
      std::span<const double> x(grid.row(k).data(), n);
      if (X.contains(x) && !T.contains(x)) keep.push_back(k);
    }
    data.states.resize(static_cast<Eigen::Index>(keep.size()), n);
    for (std::size_t r = 0; r < keep.size(); ++r) {
      data.states.row(r) = grid.row(keep[r]);
    }
  } else {
    data.states = sample_difference(X, &T, num_states, seed);
  }
  if (data.states.rows() == 0) {
    throw SynthesisError("no state samples found in X\\T",
                         SdpStatus::kInfeasible);
  }

  Substitution succ = dyn.successor_map();
  for (const Variable& u : dyn.input_vars) succ[u] = Polynomial(u);
  const PolyEvaluator value(compose(v, succ), dyn.all_vars());
  const PointSet controls = control_grid(spec.input_box, num_controls);
  data.controls.resize(data.states.rows(), m);
  std::vector<double> z(n + m);
  for (Eigen::Index i = 0; i < data.states.rows(); ++i) {
    for (int k = 0; k < n; ++k) z[k] = data.states(i, k);
    Eigen::Index best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < controls.rows(); ++c) {
      for (int j = 0; j < m; ++j) z[n + j] = controls(c, j);
      const double val = value(z);
      if (val > best_value) {
        best_value = val;
        best = c;
      }
    }
    data.controls.row(i) = controls.row(best);
  }
  return data;
}

ControllerFit fit_controller(const ArgmaxDataset& data, const SystemSpec& spec,
                             int degree, double delta,
                             const SolverChoice& solver,
                             const SolveConfig& cfg) {
  const Dynamics& dyn = spec.dynamics;
  const int n = dyn.num_states();
  const int m = dyn.num_inputs();
  const Eigen::Index N = data.states.rows();
  if (N == 0) throw std::invalid_argument("controller fit needs data");
  if (data.states.cols() != n || data.controls.cols() != m ||
      data.controls.rows() != N) {
    throw std::invalid_argument("controller data has the wrong shape");
  }
  if (degree < 0) throw std::invalid_argument("controller degree must be >= 0");
  for (int j = 0; j < m; ++j) {
    if (!(delta > 0.0 && delta < 0.5 * spec.input_box.width(j))) {
      throw std::invalid_argument(
          "delta must lie in (0, half the input box width)");
    }
  }
  const std::vector<Variable>& vars = dyn.state_vars;
  const SublevelSet X = safe_set(spec);
  const Normalization nz(vars, X.bounding_box());
  double h_scale = 1.0, g_scale = 1.0;
  const Polynomial h = scaled(nz, spec.safe_h, &h_scale);
  const Polynomial g = scaled(nz, spec.target_g, &g_scale);

  ControllerFit fit;
  std::vector<double> lo(m), hi(m);
  for (int j = 0; j < m; ++j) {
    lo[j] = spec.input_box.lower[j] + delta;
    hi[j] = spec.input_box.upper[j] - delta;
  }
  fit.ubox_shrunk = BoxSet(lo, hi);

  SosProgram prog;
  std::vector<DecisionPoly> a;
  for (int j = 0; j < m; ++j) {
    a.push_back(prog.new_template(vars, degree, SosProgram::kUnbounded,
                                  "u" + std::to_string(j)));
  }
  const auto& basis = a[0].basis;
  const Eigen::Index nb = static_cast<Eigen::Index>(basis.size());

  // ‖Φa − u‖ = ‖Ra − Qᵀu‖ up to a constant, with Φ = QR.
  Eigen::MatrixXd phi(N, nb);
  for (Eigen::Index i = 0; i < N; ++i) {
    Point xi;
    for (int k = 0; k < n; ++k) {
      xi[vars[k]] = (data.states(i, k) - nz.center()[k]) / nz.radius()[k];
    }
    for (Eigen::Index l = 0; l < nb; ++l) phi(i, l) = basis[l].eval(xi);
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(phi);
  const Eigen::Index rank_rows = std::min(N, nb);
  Eigen::MatrixXd R = qr.matrixQR().topRows(rank_rows);
  for (Eigen::Index r = 0; r < R.rows(); ++r) {
    for (Eigen::Index c = 0; c < std::min(r, R.cols()); ++c) R(r, c) = 0.0;
  }
  const Eigen::MatrixXd qtu =
      (qr.householderQ().transpose() * Eigen::MatrixXd(data.controls))
          .topRows(rank_rows);

  // t ≥ ‖r‖ as the LMI [[tI, r], [rᵀ, t]] ⪰ 0.
  const int t = prog.new_scalar(0.0, SosProgram::kUnbounded, "t");
  const int size = static_cast<int>(m * rank_rows) + 1;
  std::vector<std::vector<LinearExpr>> lmi(size, std::vector<LinearExpr>(size));
  for (int j = 0; j < m; ++j) {
    for (Eigen::Index r = 0; r < rank_rows; ++r) {
      const int row = static_cast<int>(j * rank_rows + r);
      LinearExpr residual(-qtu(r, j));
      for (Eigen::Index l = 0; l < nb; ++l) {
        if (R(r, l) != 0.0) {
          residual += LinearExpr::Decision(a[j].coeff_ids[l], R(r, l));
        }
      }
      lmi[row][row] = LinearExpr::Decision(t);
      lmi[row][size - 1] = residual;
      lmi[size - 1][row] = residual;
    }
  }
  lmi[size - 1][size - 1] = LinearExpr::Decision(t);
  prog.add_psd(lmi, "fit");
  prog.set_objective(LinearExpr::Decision(t, -1.0));

  const int d_h = multiplier_degree(cfg, degree, h);
  const int d_g = multiplier_degree(cfg, degree, g);
  for (int j = 0; j < m; ++j) {
    const std::string tag = "u" + std::to_string(j);
    const double backoff = kFitBackoff * (hi[j] - lo[j]);
    AffinePolynomial lower =
        a[j].expr() - AffinePolynomial(Polynomial(lo[j] + backoff));
    lower.add_product(prog.new_sos_poly(vars, d_h, tag + "_lh").value, h);
    lower.add_product(prog.new_sos_poly(vars, d_g, tag + "_lg").value, g, -1.0);
    prog.add_sos(lower, tag + "_lower");
    AffinePolynomial upper =
        AffinePolynomial(Polynomial(hi[j] - backoff)) - a[j].expr();
    upper.add_product(prog.new_sos_poly(vars, d_h, tag + "_uh").value, h);
    upper.add_product(prog.new_sos_poly(vars, d_g, tag + "_ug").value, g, -1.0);
    prog.add_sos(upper, tag + "_upper");
  }

  const SdpSolution sol =
      run_solver(prog, solver, "controller fit", &fit.report);
  // Box soundness is checked by sampling below.
  verified_residual(prog, sol, "controller fit", kFitIdentityTol);
  for (int j = 0; j < m; ++j) {
    fit.u_tilde.push_back(nz.from_normalized(prog.value(a[j], sol)));
  }

  std::vector<PolyEvaluator> u_eval;
  for (const Polynomial& p : fit.u_tilde) u_eval.emplace_back(p, vars);
  for (Eigen::Index i = 0; i < N; ++i) {
    std::span<const double> x(data.states.row(i).data(), n);
    for (int j = 0; j < m; ++j) {
      const double e = u_eval[j](x) - data.controls(i, j);
      fit.fit_residual += e * e;
    }
  }

  const SublevelSet T = target_set(spec);
  const PointSet check = sample_difference(X, &T, 10'000, cfg.rng_seed + 17);
  fit.min_box_margin = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < check.rows(); ++i) {
    std::span<const double> x(check.row(i).data(), n);
    for (int j = 0; j < m; ++j) {
      const double u = u_eval[j](x);
      fit.min_box_margin = std::min({fit.min_box_margin, u - lo[j], hi[j] - u});
    }
  }
  if (fit.min_box_margin < -1e-6) {
    std::ostringstream os;
    os << "fitted controller leaves the shrunk input box by "
       << -fit.min_box_margin;
    throw SynthesisError(os.str(), SdpStatus::kNumericalFailure);
  }
  return fit;
}

Certificate solve_refined(const SystemSpec& spec, const ControllerFit& fit,
                          double epsilon, double delta, const SolveConfig& cfg,
                          const SolverChoice& solver, SolveReport* report) {
  ExpectationChoice choice;
  choice.mode = ExpectationMode::kEpsGreedy;
  choice.controller = fit.u_tilde;
  choice.epsilon = epsilon;
  choice.delta = delta;
  return solve_reach_avoid(spec, cfg, choice, solver, report);
}

Certificate solve_greedy(const SystemSpec& spec, const ControllerFit& fit,
                         const SolveConfig& cfg, const SolverChoice& solver,
                         SolveReport* report) {
  ExpectationChoice choice;
  choice.mode = ExpectationMode::kGreedy;
  choice.controller = fit.u_tilde;
  choice.epsilon = 0.0;
  choice.delta = 0.0;
  return solve_reach_avoid(spec, cfg, choice, solver, report);
}

void IterationConfig::validate() const {
  if (iterations < 0) throw SpecError("iters must be >= 0");
  if (!(eps0 > 0.0 && eps0 <= 1.0)) throw SpecError("eps0 must lie in (0, 1]");
  if (!(schedule_factor > 0.0 && schedule_factor < 1.0)) {
    throw SpecError("eps_factor must lie in (0, 1)");
  }
  if (!(delta > 0.0)) throw SpecError("delta must be positive");
  if (num_states < 1) throw SpecError("states must be >= 1");
  if (num_controls < 2) throw SpecError("controls must be >= 2");
  if (volume_samples < 1) throw SpecError("volume samples must be >= 1");
  solve.validate();
}

void apply_iteration_config(const json& config, IterationConfig* cfg) {
  if (config.is_null()) return;
  if (!config.is_object()) throw SpecError("config must be an object");
  apply_config(config, &cfg->solve);
  try {
    if (config.contains("eps0")) cfg->eps0 = config.at("eps0").get<double>();
    if (config.contains("eps_factor")) {
      cfg->schedule_factor = config.at("eps_factor").get<double>();
    }
    if (config.contains("delta")) cfg->delta = config.at("delta").get<double>();
    if (config.contains("iters")) cfg->iterations = config.at("iters").get<int>();
    if (config.contains("states")) cfg->num_states = config.at("states").get<int>();
    if (config.contains("controls")) {
      cfg->num_controls = config.at("controls").get<int>();
    }
    if (config.contains("state_sampling")) {
      const std::string s = config.at("state_sampling").get<std::string>();
      if (s == "grid") {
        cfg->sampling = StateSampling::kGrid;
      } else if (s == "random") {
        cfg->sampling = StateSampling::kRandom;
      } else {
        throw SpecError("state_sampling must be 'grid' or 'random'");
      }
    }
  } catch (const json::exception& e) {
    throw SpecError(std::string("config: ") + e.what());
  }
}

json to_json(const IterationRecord& r) {
  json j{{"iteration", r.iteration},
         {"epsilon", r.epsilon},
         {"failed", r.failed},
         {"gamma", r.gamma},
         {"union_gamma", r.union_gamma},
         {"seconds", r.seconds},
         {"fit_residual", r.fit_residual},
         {"solve", to_json(r.report)},
         {"certificate", to_json(r.certificate)}};
  if (r.failed) j["failure"] = r.failure;
  return j;
}

CrasResult run_alg1(const SystemSpec& spec, const IterationConfig& cfg,
                    const SolverChoice& solver,
                    const std::function<void(const IterationRecord&)>&
                        on_iteration) {
  cfg.validate();
  const auto& vars = spec.dynamics.state_vars;
  const PointSet samples =
      sample_uniform(safe_set(spec), cfg.volume_samples, cfg.seed);
  std::vector<char> covered(samples.rows(), 0);
  std::int64_t covered_count = 0;
  auto measure = [&](const Polynomial& v, IterationRecord* rec) {
    const PolyEvaluator eval(v, vars);
    std::int64_t inside = 0;
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
      std::span<const double> x(samples.row(i).data(), samples.cols());
      if (eval(x) > 0.0) {
        ++inside;
        if (!covered[i]) {
          covered[i] = 1;
          ++covered_count;
        }
      }
    }
    const double n = static_cast<double>(samples.rows());
    rec->gamma = inside / n;
    rec->union_gamma = covered_count / n;
  };

  CrasResult result;
  auto finish = [&](IterationRecord rec) {
    result.certificates.push_back(rec.certificate);
    result.union_gamma = rec.union_gamma;
    if (on_iteration) on_iteration(rec);
    result.records.push_back(std::move(rec));
  };

  IterationRecord first;
  auto start = Clock::now();
  first.certificate = solve_initial(spec, cfg.solve, solver, &first.report);
  first.seconds = seconds_since(start);
  measure(first.certificate.v, &first);
  Certificate current = first.certificate;
  finish(std::move(first));

  double epsilon = cfg.eps0;
  for (int k = 1; k <= cfg.iterations; ++k) {
    IterationRecord rec;
    rec.iteration = k;
    rec.epsilon = cfg.greedy ? 0.0 : epsilon;
    start = Clock::now();
    try {
      const ArgmaxDataset data =
          gen_argmax_data(current.v, spec, cfg.num_states, cfg.num_controls,
                          cfg.sampling, cfg.seed + k);
      const ControllerFit fit =
          fit_controller(data, spec, cfg.solve.deg_controller, cfg.delta,
                         solver, cfg.solve);
      rec.fit_residual = fit.fit_residual;
      Certificate next =
          cfg.greedy
              ? solve_greedy(spec, fit, cfg.solve, solver, &rec.report)
              : solve_refined(spec, fit, epsilon, cfg.delta, cfg.solve, solver,
                              &rec.report);
      next.iteration = k;
      current = std::move(next);
    } catch (const SynthesisError& e) {
      rec.failed = true;
      rec.failure = e.what();
    }
    rec.seconds = seconds_since(start);
    rec.certificate = current;
    measure(current.v, &rec);
    finish(std::move(rec));
    epsilon *= cfg.schedule_factor;
  }
  return result;
}

Certificate solve_safety(const SafetySpec& spec, const SolveConfig& cfg,
                         const SolverChoice& solver, SolveReport* report) {
  cfg.validate();
  constexpr double kEta = 1.0;
  const std::vector<Variable>& vars = spec.dynamics.state_vars;
  const SafetySets sets = safety_sets(spec);
  const Normalization nz(vars, sets.domain.bounding_box());
  auto scale_all = [&](const std::vector<Polynomial>& gens,
                       std::vector<double>* scales) {
    std::vector<Polynomial> out;
    for (const Polynomial& p : gens) {
      scales->emplace_back();
      out.push_back(scaled(nz, p, &scales->back()));
    }
    return out;
  };
  std::vector<double> d_scale, u_scale, i_scale;
  const auto domain = scale_all(spec.domain_h, &d_scale);
  const auto unsafe = scale_all(spec.unsafe_hU, &u_scale);
  const auto init = scale_all(spec.init_hI, &i_scale);
  const Dynamics dyn = nz.dynamics(spec.dynamics);
  ExpectationOperator op = ExpectationOperator::Uniform(dyn, spec.input_box);

  SosProgram prog;
  const DecisionPoly B = prog.new_template(vars, cfg.deg_v, cfg.coeff_bound, "B");
  std::vector<std::tuple<std::string, SosPoly, double>> multipliers;
  auto add_row = [&](AffinePolynomial row, const std::vector<Polynomial>& gens,
                     const std::vector<double>& scales, const std::string& tag) {
    const int deg = row.degree();
    for (std::size_t k = 0; k < gens.size(); ++k) {
      const std::string name = tag + "_" + std::to_string(k);
      const SosPoly s =
          prog.new_sos_poly(vars, multiplier_degree(cfg, deg, gens[k]), name);
      row.add_product(s.value, gens[k]);
      multipliers.emplace_back(name, s, scales[k]);
    }
    prog.add_sos(row, tag);
  };
  add_row(B.transformed([&](const Polynomial& b) { return op.apply(b); }) -
              spec.lambda * B.expr(),
          domain, d_scale, "s1");
  add_row(-1.0 * B.expr(), unsafe, u_scale, "s2");
  add_row(B.expr() - AffinePolynomial(Polynomial(kEta)), init, i_scale, "s3");

  const std::string what = spec.name.empty() ? std::string("safety program")
                                             : spec.name + " safety program";
  const SdpSolution sol = run_solver(prog, solver, what, report);
  const double residual = verified_residual(prog, sol, what);

  Certificate cert;
  cert.kind = CertificateKind::kSafety;
  cert.mode = ExpectationMode::kUniform;
  cert.system = spec.name;
  cert.v = nz.from_normalized(prog.value(B, sol));
  cert.lambda = spec.lambda;
  cert.eta = kEta;
  for (const auto& [name, s, scale] : multipliers) {
    cert.multipliers[name] =
        (1.0 / scale) * nz.from_normalized(prog.value(s, sol));
  }
  cert.solve_status = to_string(sol.status);
  cert.objective_value = sol.objective;
  cert.solver_iterations = sol.iterations;
  cert.max_identity_residual = residual;
  return cert;
}

}  // namespace reachsos
