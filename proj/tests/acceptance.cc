// Acceptance run: one PASS/FAIL line per criterion. The exit status is 0
// whenever every criterion was evaluated, whatever the verdicts.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "reachsos/expect.h"
#include "reachsos/parser.h"
#include "reachsos/sdp_solver.h"
#include "reachsos/semisets.h"
#include "reachsos/sos_program.h"
#include "reachsos/synth.h"
#include "reachsos/validate.h"
#include "test_util.h"

namespace reachsos {
namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string path_of(const std::string& name) {
  return std::string(REACHSOS_SOURCE_DIR) + "/benchmarks/" + name + ".json";
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string intervals_text(const std::vector<std::pair<double, double>>& p) {
  if (p.empty()) return "empty";
  std::ostringstream os;
  for (std::size_t i = 0; i < p.size(); ++i) {
    os << (i ? " or " : "") << fmt("%.4f", p[i].first) << " < x < "
       << fmt("%.4f", p[i].second);
  }
  return os.str();
}

std::vector<std::pair<double, double>> intervals(const Polynomial& v,
                                                 const SystemSpec& spec) {
  const BoxSet box = safe_set(spec).bounding_box();
  return positive_intervals(v, spec.dynamics.state_vars[0], box.lower[0],
                            box.upper[0]);
}

SolveConfig solve_config(const std::string& name) {
  SolveConfig cfg;
  apply_config(read_json_file(path_of(name)).at("config"), &cfg);
  return cfg;
}

IterationConfig iteration_config(const std::string& name) {
  IterationConfig cfg;
  apply_iteration_config(read_json_file(path_of(name)).at("config"), &cfg);
  return cfg;
}

// Initial certificates shared between criteria.
std::map<std::string, Certificate> g_initial;

const Certificate& initial(const std::string& name) {
  auto it = g_initial.find(name);
  if (it == g_initial.end()) {
    it = g_initial
             .emplace(name, solve_initial(load_system(path_of(name)),
                                          solve_config(name)))
             .first;
  }
  return it->second;
}

Outcome example_one_interval() {
  const SystemSpec spec = load_system(path_of("ex1"));
  const auto t0 = Clock::now();
  const Certificate cert = solve_initial(spec, solve_config("ex1"));
  const double secs = seconds_since(t0);
  g_initial.emplace("ex1", cert);
  const auto pieces = intervals(cert.v, spec);
  const ValidationReport report = validate_certificate(cert, spec);
  const bool near = pieces.size() == 1 &&
                    std::abs(pieces[0].first - 0.1391) <= 0.05 &&
                    std::abs(pieces[0].second - 0.9299) <= 0.05;
  return {near && report.pass && secs <= 60.0,
          "phase " + cert.phase + ", CRAS " + intervals_text(pieces) +
              " (want 0.1391 < x < 0.9299 +/- 0.05), validation " +
              (report.pass ? "pass" : "fail") + ", " + fmt("%.2f s", secs)};
}

Outcome example_two_refinement() {
  const SystemSpec spec = load_system(path_of("ex1"));
  const SolveConfig cfg = solve_config("ex1");
  const Certificate& v0 = initial("ex1");
  const ArgmaxDataset data =
      gen_argmax_data(v0.v, spec, 50, 5, StateSampling::kGrid, 0);
  const ControllerFit fit = fit_controller(data, spec, 6, 0.1, {}, cfg);
  const Certificate cert = solve_refined(spec, fit, 0.5, 0.1, cfg);
  const auto pieces = intervals(cert.v, spec);
  bool ok = false;
  for (const auto& [a, b] : pieces) {
    ok = ok || (a <= 0.0 && b >= 0.94 && a < 0.05 &&
                std::abs(a + 0.0290) <= 0.08 && std::abs(b - 0.9480) <= 0.08);
  }
  return {ok, "phase " + cert.phase + ", CRAS " + intervals_text(pieces) +
                  " (want about -0.0290 < x < 0.9480 +/- 0.08)"};
}

Outcome example_three_iterations() {
  const SystemSpec spec = load_system(path_of("ex1"));
  IterationConfig cfg;
  cfg.solve = solve_config("ex1");
  cfg.iterations = 5;
  cfg.eps0 = 0.5;
  cfg.schedule_factor = 0.8;
  cfg.delta = 0.1;
  const auto t0 = Clock::now();
  const CrasResult r = run_alg1(spec, cfg);
  const double secs = seconds_since(t0);
  const double g0 = r.records.front().gamma;
  const double growth = g0 > 0.0 ? r.union_gamma / g0 - 1.0 : 0.0;
  return {g0 > 0.0 && growth >= 0.8 && secs <= 300.0,
          "initial gamma " + fmt("%.4f", g0) + ", union gamma " +
              fmt("%.4f", r.union_gamma) +
              (g0 > 0.0 ? ", growth " + fmt("%.0f%%", 100 * growth)
                        : std::string(", growth undefined")) +
              " (want >= 80%), final CRAS " +
              intervals_text(intervals(r.certificates.back().v, spec)) + ", " +
              fmt("%.1f s", secs)};
}

Outcome vanderpol_schedule() {
  const SystemSpec spec = load_system(path_of("vanderpol"));
  IterationConfig cfg = iteration_config("vanderpol");
  const CrasResult eg = run_alg1(spec, cfg);
  cfg.greedy = true;
  const CrasResult greedy = run_alg1(spec, cfg);
  const double g0 = eg.records.front().gamma;
  const double g1 = eg.union_gamma;
  const bool ok = std::abs(g0 - 0.54) <= 0.08 && g1 >= g0 + 0.20 &&
                  greedy.union_gamma < g1;
  return {ok, "initial gamma " + fmt("%.4f", g0) + " (want 0.54 +/- 0.08), " +
                  "eps-greedy final " + fmt("%.4f", g1) + ", greedy final " +
                  fmt("%.4f", greedy.union_gamma)};
}

Outcome table_rows(bool high_dim) {
  struct Row {
    const char* name;
    double initial, final;
  };
  bool ok = true;
  std::string detail;
  for (const Row& row : {Row{"moore_greitzer", 0.6951, 0.8005},
                         Row{"predator_prey", 0.8380, 0.8971}}) {
    const SystemSpec spec = load_system(path_of(row.name));
    const auto t0 = Clock::now();
    const CrasResult r = run_alg1(spec, iteration_config(row.name));
    const double g0 = r.records.front().gamma;
    const bool good = r.union_gamma >= g0 + 0.03 &&
                      std::abs(g0 - row.initial) <= 0.10 &&
                      std::abs(r.union_gamma - row.final) <= 0.10;
    ok = ok && good;
    detail += std::string(detail.empty() ? "" : "; ") + row.name + " " +
              fmt("%.4f", g0) + " -> " + fmt("%.4f", r.union_gamma) +
              " (want " + fmt("%.4f", row.initial) + " -> " +
              fmt("%.4f", row.final) + "), " + fmt("%.1f s", seconds_since(t0));
  }
  for (const char* name : {"vanderpol3d", "model4d", "model6d"}) {
    if (!high_dim) {
      detail += std::string("; ") + name + " not attempted (--high-dim)";
      continue;
    }
    const auto t0 = Clock::now();
    try {
      const CrasResult r =
          run_alg1(load_system(path_of(name)), iteration_config(name));
      detail += std::string("; ") + name + " " +
                fmt("%.4f", r.records.front().gamma) + " -> " +
                fmt("%.4f", r.union_gamma);
    } catch (const std::exception& e) {
      detail += std::string("; ") + name + " failed: " + e.what();
    }
    detail += ", " + fmt("%.1f s", seconds_since(t0));
  }
  return {ok, detail};
}

Outcome safety_suite() {
  bool ok = true;
  std::string detail;
  for (const char* name : {"safe1", "lorenz12"}) {
    const SafetySpec spec = load_safety(path_of(name));
    const auto t0 = Clock::now();
    std::string what;
    bool good = false;
    try {
      const Certificate cert = solve_safety(spec, solve_config(name));
      const double secs = seconds_since(t0);
      const ValidationReport report = validate_certificate(cert, spec);
      good = report.pass && secs <= 600.0;
      what = std::string("validation ") + (report.pass ? "pass" : "fail") +
             ", " + fmt("%.1f s", secs);
    } catch (const SynthesisError& e) {
      what = std::string("no certificate: ") + e.what();
    }
    ok = ok && good;
    detail += std::string(detail.empty() ? "" : "; ") + name + " " + what;
  }
  return {ok, detail};
}

double quad(const std::function<double(double)>& fn, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      fn, a, b, 15, 1e-14);
}

std::string expectation_property(bool* ok) {
  const Variable x("x"), u("u");
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit(-1.0, 1.0), half(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Dynamics d;
    d.state_vars = {x};
    d.input_vars = {u};
    d.f = {test::random_polynomial(rng, {x, u}, 2, 1.0) * 0.5};
    const double lo = -1.0 - half(rng), hi = 1.0 + half(rng);
    const BoxSet U({lo}, {hi});
    const Polynomial v = test::random_polynomial(rng, {x}, 4, 1.0);
    const double gain = 0.3 * unit(rng);
    const double delta = 0.05 + 0.2 * half(rng);
    const double eps = half(rng);
    const EpsGreedyParams p(eps, delta, U, {gain * Polynomial(x)});
    const double xv = unit(rng);
    auto integrand = [&](double uv) {
      return v.eval({{x, d.f[0].eval({{x, xv}, {u, uv}})}});
    };
    const double uniform = quad(integrand, lo, hi) / (hi - lo);
    const double u0 = gain * xv;
    const double mixture = ((1 - eps) * quad(integrand, u0 - delta, u0 + delta) +
                            eps * quad(integrand, lo, hi)) /
                           ((1 - eps) * 2 * delta + eps * (hi - lo));
    worst = std::max(worst, std::abs(expect_uniform(v, d, U).eval({{x, xv}}) -
                                     uniform));
    worst = std::max(worst, std::abs(expect_eps_greedy(v, d, p).eval({{x, xv}}) -
                                     mixture));
  }
  *ok = worst <= 1e-8;
  return "expectation vs quadrature worst " + fmt("%.1e", worst);
}

std::string normalization_property(bool* ok) {
  const SystemSpec spec = load_system(path_of("ex1"));
  *ok = true;
  for (double eps : {0.0, 0.25, 0.5, 1.0}) {
    const EpsGreedyParams p(eps, 0.1, spec.input_box,
                            {parse_polynomial("0.3*x - 0.2*x^2")});
    *ok = *ok && expect_eps_greedy(Polynomial(1.0), spec.dynamics, p) ==
                     Polynomial(1.0);
  }
  return std::string("mixture expect(1) = 1 ") + (*ok ? "exact" : "inexact");
}

std::string xhat_property(bool* ok) {
  int total = 0;
  for (const char* name : {"ex1", "vanderpol", "xue2021", "tan2008",
                           "moore_greitzer", "predator_prey", "vanderpol3d",
                           "model4d", "model6d"}) {
    const SystemSpec spec = load_system(path_of(name));
    const XhatResult r = compute_xhat(spec);
    const Dynamics& dyn = spec.dynamics;
    const auto all = dyn.all_vars();
    std::vector<PolyEvaluator> f;
    for (const Polynomial& fi : dyn.f) f.emplace_back(fi, all);
    const PolyEvaluator hhat(r.h, dyn.state_vars);
    const PointSet xs = sample_uniform(safe_set(spec), 100'000, 17);
    std::mt19937_64 rng(5);
    std::vector<double> z(all.size()), next(dyn.num_states());
    for (Eigen::Index i = 0; i < xs.rows(); ++i) {
      for (int k = 0; k < dyn.num_states(); ++k) z[k] = xs(i, k);
      for (int j = 0; j < dyn.num_inputs(); ++j) {
        z[dyn.num_states() + j] = std::uniform_real_distribution<double>(
            spec.input_box.lower[j], spec.input_box.upper[j])(rng);
      }
      for (int k = 0; k < dyn.num_states(); ++k) next[k] = f[k](z);
      if (!(hhat(next) < 0.0)) ++total;
      if (!(hhat(std::span<const double>(z.data(), dyn.num_states())) < 0.0)) {
        ++total;
      }
    }
  }
  *ok = total == 0;
  return "xhat violations " + std::to_string(total) + " over 9 x 1e5 samples";
}

std::string sdp_property(bool* ok) {
  double worst = 0.0;
  {
    // minimize x s.t. x - 1 >= 0.
    SdpProblem prob;
    const int x = prob.add_scalar(-std::numeric_limits<double>::infinity(),
                                  std::numeric_limits<double>::infinity());
    const int blk = prob.add_block(1);
    prob.add_equality({{{blk, 0, 0}, 1.0}, {VarRef::scalar(x), -1.0}}, -1.0);
    prob.objective = {{VarRef::scalar(x), -1.0}};
    const SdpSolution sol = solve_sdp(prob);
    worst = std::max(worst, sol.status == SdpStatus::kOptimal
                                ? std::abs(sol.objective + 1.0)
                                : 1.0);
  }
  {
    // max x01 over 2x2 PSD with unit diagonal: optimum 1.
    SdpProblem prob;
    const int blk = prob.add_block(2);
    prob.add_equality({{{blk, 0, 0}, 1.0}}, 1.0);
    prob.add_equality({{{blk, 1, 1}, 1.0}}, 1.0);
    prob.objective = {{{blk, 0, 1}, 1.0}};
    const SdpSolution sol = solve_sdp(prob);
    worst = std::max(worst, sol.status == SdpStatus::kOptimal
                                ? std::abs(sol.objective - 1.0)
                                : 1.0);
  }
  {
    // max t s.t. x^2 + 2x + 3 - t is SOS: optimum 2.
    SosProgram prog;
    const int t = prog.new_scalar();
    AffinePolynomial row(parse_polynomial("x^2 + 2*x + 3"));
    row -= AffinePolynomial(
        AffinePolynomial::TermMap{{Monomial(), LinearExpr::Decision(t)}});
    prog.add_sos(row, "row");
    prog.set_objective(LinearExpr::Decision(t));
    const SdpSolution sol = solve_sdp(prog.compile());
    worst = std::max(worst, sol.ok() ? std::abs(sol.objective - 2.0) : 1.0);
  }
  SosProgram nonsos;
  nonsos.add_sos(parse_polynomial("x^4 - x^2"));
  const bool rejected =
      solve_sdp(nonsos.compile()).status == SdpStatus::kInfeasible;
  *ok = worst <= 1e-7 && rejected;
  return "SDP unit optima worst " + fmt("%.1e", worst) + ", x^4 - x^2 " +
         (rejected ? "non-SOS" : "NOT rejected");
}

std::string greedy_property(bool* ok) {
  *ok = true;
  std::string detail;
  for (const char* name : {"ex1", "vanderpol", "xue2021", "tan2008",
                           "moore_greitzer", "predator_prey"}) {
    const SystemSpec spec = load_system(path_of(name));
    const Certificate& cert = initial(name);
    const PolyEvaluator v(cert.v, spec.dynamics.state_vars);
    const PointSet pool = sample_uniform(safe_set(spec), 200'000, 31);
    int starts = 0, reached = 0;
    for (Eigen::Index i = 0; i < pool.rows() && starts < 200; ++i) {
      std::vector<double> x0(pool.cols());
      for (Eigen::Index k = 0; k < pool.cols(); ++k) x0[k] = pool(i, k);
      if (!(v(x0) > 0.0)) continue;
      ++starts;
      if (simulate_greedy(cert.v, spec, x0).verdict == Verdict::kReached) {
        ++reached;
      }
    }
    detail += std::string(detail.empty() ? "" : ", ") + name + " ";
    if (starts == 0) {
      detail += "vacuous (empty CRAS)";
      continue;
    }
    const double rate = static_cast<double>(reached) / starts;
    *ok = *ok && starts == 200 && rate >= 0.9;
    detail += std::to_string(reached) + "/" + std::to_string(starts);
  }
  return "greedy success " + detail;
}

Outcome property_suite() {
  Outcome out{true, ""};
  for (auto check : {expectation_property, normalization_property,
                     xhat_property, sdp_property, greedy_property}) {
    bool ok = false;
    const std::string d = check(&ok);
    out.pass = out.pass && ok;
    out.detail += (out.detail.empty() ? "" : "; ") + d;
  }
  return out;
}

Outcome determinism() {
  bool ok = true;
  std::string detail;
  auto same = [&](const std::string& what, const nlohmann::json& a,
                  const nlohmann::json& b) {
    const bool eq = a.dump() == b.dump();
    ok = ok && eq;
    detail += (detail.empty() ? "" : ", ") + what + (eq ? " identical" : " differ");
  };
  for (const char* name : {"ex1", "xue2021"}) {
    const SystemSpec spec = load_system(path_of(name));
    same(std::string(name) + " init",
         to_json(solve_initial(spec, solve_config(name))),
         to_json(solve_initial(spec, solve_config(name))));
  }
  {
    const SystemSpec spec = load_system(path_of("xue2021"));
    IterationConfig cfg = iteration_config("xue2021");
    cfg.iterations = 2;
    const CrasResult a = run_alg1(spec, cfg), b = run_alg1(spec, cfg);
    nlohmann::json ja = nlohmann::json::array(), jb = nlohmann::json::array();
    for (const Certificate& c : a.certificates) ja.push_back(to_json(c));
    for (const Certificate& c : b.certificates) jb.push_back(to_json(c));
    same("xue2021 iterate", ja, jb);
  }
  {
    const SafetySpec spec = load_safety(path_of("safe1"));
    same("safe1 safety", to_json(solve_safety(spec, solve_config("safe1"))),
         to_json(solve_safety(spec, solve_config("safe1"))));
  }
  return {ok, detail};
}

}  // namespace
}  // namespace reachsos

int main(int argc, char** argv) {
  using namespace reachsos;
  bool high_dim = false;
  for (int i = 1; i < argc; ++i) high_dim = high_dim || !std::strcmp(argv[i], "--high-dim");
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, example_one_interval},
      {2, example_two_refinement},
      {3, example_three_iterations},
      {4, vanderpol_schedule},
      {5, [high_dim] { return table_rows(high_dim); }},
      {6, safety_suite},
      {7, property_suite},
      {8, determinism},
  };
  int passed = 0;
  for (const auto& [id, run] : criteria) {
    Outcome v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    passed += v.pass;
    std::printf("criterion %d: %s  %s\n", id, v.pass ? "PASS" : "FAIL",
                v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria pass\n", passed, criteria.size());
  return 0;
}
