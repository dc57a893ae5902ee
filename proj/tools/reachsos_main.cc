#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "reachsos/certificate.h"
#include "reachsos/parser.h"
#include "reachsos/sdp_problem.h"
#include "reachsos/sdp_solver.h"
#include "reachsos/semisets.h"
#include "reachsos/synth.h"
#include "reachsos/system_spec.h"
#include "reachsos/validate.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace reachsos {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitSolver = 3;
constexpr int kExitValidation = 4;

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flags shared by every subcommand. Unset optionals keep the spec's values.
struct Flags {
  std::string spec;
  std::string out;
  std::string cert;
  std::string poly;
  std::string x0;
  std::string sdpa_command;
  std::optional<std::uint64_t> seed;
  std::optional<int> deg_v, deg_s, deg_u;
  std::optional<double> eps0, eps_factor, delta, lambda;
  std::optional<int> iters, states, controls;
  std::optional<std::int64_t> samples;
  std::optional<int> grid;
  std::optional<std::int64_t> horizon;
  std::optional<std::string> objective;
  std::optional<std::string> sampling;
  std::string solver = "embedded";
  bool greedy = false;
};

template <typename T>
void put(json* j, const char* key, const std::optional<T>& v) {
  if (v) (*j)[key] = *v;
}

json overrides(const Flags& f) {
  json j = json::object();
  put(&j, "deg_v", f.deg_v);
  put(&j, "deg_s", f.deg_s);
  put(&j, "deg_u", f.deg_u);
  put(&j, "eps0", f.eps0);
  put(&j, "eps_factor", f.eps_factor);
  put(&j, "delta", f.delta);
  put(&j, "iters", f.iters);
  put(&j, "states", f.states);
  put(&j, "controls", f.controls);
  put(&j, "lambda", f.lambda);
  put(&j, "samples", f.samples);
  put(&j, "grid", f.grid);
  put(&j, "horizon", f.horizon);
  put(&j, "objective", f.objective);
  put(&j, "state_sampling", f.sampling);
  put(&j, "seed", f.seed);
  if (f.greedy) j["greedy"] = true;
  if (!f.cert.empty()) j["cert"] = f.cert;
  if (!f.poly.empty()) j["poly"] = f.poly;
  if (!f.x0.empty()) j["x0"] = f.x0;
  if (f.solver != "embedded") j["solver"] = f.solver;
  if (!f.sdpa_command.empty()) j["sdpa_command"] = f.sdpa_command;
  return j;
}

json spec_document(const Flags& f) {
  if (f.spec.empty()) throw InputError("--spec is required");
  if (!fs::exists(f.spec)) throw InputError("no such spec file: " + f.spec);
  return read_json_file(f.spec);
}

bool is_safety(const json& doc) { return doc.contains("domain_h"); }

json file_config(const json& doc) {
  json cfg = doc.value("config", json::object());
  if (!cfg.is_object()) throw InputError("\"config\" must be an object");
  return cfg;
}

// Spec-file config with the command-line overrides applied on top.
json merged_config(const json& doc, const Flags& f) {
  json cfg = file_config(doc);
  const json o = overrides(f);
  for (const char* key : {"deg_v", "deg_s", "deg_u", "eps0", "eps_factor",
                          "delta", "iters", "states", "controls", "objective",
                          "state_sampling", "seed"}) {
    if (o.contains(key)) cfg[key] = o[key];
  }
  return cfg;
}

SystemSpec load_reach_avoid(const json& doc, const Flags& f) {
  if (is_safety(doc)) throw InputError(f.spec + " is a safety spec");
  SystemSpec spec = system_from_json(doc);
  if (f.lambda) spec.lambda = *f.lambda;
  validate_spec(spec);
  return spec;
}

SafetySpec load_safety_spec(const json& doc, const Flags& f) {
  if (!is_safety(doc)) throw InputError(f.spec + " is not a safety spec");
  SafetySpec spec = safety_from_json(doc);
  if (f.lambda) spec.lambda = *f.lambda;
  validate_spec(spec);
  return spec;
}

SolveConfig solve_config(const json& cfg_json) {
  SolveConfig cfg;
  apply_config(cfg_json, &cfg);
  cfg.validate();
  return cfg;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

// The run directory: --out if given (must be new or empty), else the first
// free runs/<spec>-<command>-NNN.
fs::path run_directory(const Flags& f, const std::string& command,
                       const std::string& name) {
  fs::path dir;
  if (!f.out.empty()) {
    dir = f.out;
    if (fs::exists(dir) && !fs::is_empty(dir)) {
      throw InputError("output directory is not empty: " + dir.string());
    }
  } else {
    for (int k = 0;; ++k) {
      std::ostringstream os;
      os << name << "-" << command << "-" << std::setw(3) << std::setfill('0')
         << k;
      dir = fs::path("runs") / os.str();
      if (!fs::exists(dir)) break;
    }
  }
  fs::create_directories(dir);
  return dir;
}

void write_manifest(const fs::path& dir, const std::string& command,
                    const Flags& f, const json& doc) {
  write_json(dir / "manifest.json", json{{"command", command},
                                         {"spec", f.spec},
                                         {"spec_document", doc},
                                         {"overrides", overrides(f)},
                                         {"out", dir.string()},
                                         {"seed", f.seed.value_or(0)}});
}

SolverChoice solver_choice(const Flags& f, const fs::path& dir) {
  SolverChoice choice;
  if (f.solver == "embedded") return choice;
  const fs::path sdp_dir = dir / "sdp";
  fs::create_directories(sdp_dir);
  auto counter = std::make_shared<int>(0);
  const std::string command = f.sdpa_command;
  choice.backend = [sdp_dir, counter, command](const SdpProblem& problem,
                                               const SdpOptions&) {
    std::ostringstream stem;
    stem << "problem_" << std::setw(3) << std::setfill('0') << (*counter)++;
    const fs::path in = sdp_dir / (stem.str() + ".dat-s");
    const fs::path out = sdp_dir / (stem.str() + ".sol");
    const ConicForm conic = to_conic(problem);
    {
      std::ofstream file(in);
      write_sdpa(conic, file);
    }
    SdpSolution failed;
    failed.status = SdpStatus::kNumericalFailure;
    if (command.empty()) {
      failed.message = "wrote " + in.string() + "; no --sdpa-command given";
      return failed;
    }
    std::string cmd = command;
    for (const auto& [key, value] :
         {std::pair<std::string, std::string>{"{in}", in.string()},
          {"{out}", out.string()}}) {
      for (auto pos = cmd.find(key); pos != std::string::npos;
           pos = cmd.find(key, pos + value.size())) {
        cmd.replace(pos, key.size(), value);
      }
    }
    const int rc = std::system(cmd.c_str());
    std::ifstream sol(out);
    if (!sol) {
      failed.message = "external solver (exit " + std::to_string(rc) +
                       ") wrote no " + out.string();
      return failed;
    }
    return read_sdpa_solution(problem, conic, sol);
  };
  return choice;
}

json to_json(const ValidationReport& r) {
  json rows = json::array();
  for (const RowMargin& m : r.rows) {
    json row{{"row", m.row},
             {"region", m.region},
             {"worst", m.worst},
             {"samples", m.samples}};
    if (!m.witness.empty()) row["witness"] = m.witness;
    rows.push_back(row);
  }
  return {{"pass", r.pass}, {"tol", r.tol}, {"rows", rows}};
}

json to_json(const VolumeEstimate& e) {
  return {{"gamma", e.gamma},
          {"n_samples", e.n_samples},
          {"inside", e.inside},
          {"seed", e.seed},
          {"std_error", e.std_error}};
}

// "a < x < b" pieces of the certified set for one-dimensional systems.
std::string interval_text(const Polynomial& v, const SystemSpec& spec) {
  if (spec.dynamics.num_states() != 1) return "";
  const BoxSet box = safe_set(spec).bounding_box();
  const Variable& x = spec.dynamics.state_vars[0];
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  const auto pieces = positive_intervals(v, x, box.lower[0], box.upper[0]);
  if (pieces.empty()) return "empty";
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    os << (i ? " or " : "") << pieces[i].first << " < " << x.name() << " < "
       << pieces[i].second;
  }
  return os.str();
}

std::int64_t volume_samples(const Flags& f) {
  return f.samples.value_or(1'000'000);
}

int cmd_init(const Flags& f) {
  const json doc = spec_document(f);
  const SystemSpec spec = load_reach_avoid(doc, f);
  const SolveConfig cfg = solve_config(merged_config(doc, f));
  const fs::path dir = run_directory(f, "init", spec.name);
  write_manifest(dir, "init", f, doc);

  SolveReport report;
  const Certificate cert = solve_initial(spec, cfg, solver_choice(f, dir), &report);
  save_certificate(cert, (dir / "certificate.json").string());
  const std::uint64_t seed = f.seed.value_or(0);
  const VolumeEstimate vol =
      estimate_volume(cert.v, spec, volume_samples(f), seed);
  const ValidationReport check = validate_certificate(cert, spec);
  json out{{"solve", to_json(report)},
           {"phase", cert.phase},
           {"volume", to_json(vol)},
           {"validation", to_json(check)}};
  const std::string intervals = interval_text(cert.v, spec);
  if (!intervals.empty()) out["cras"] = intervals;
  write_json(dir / "report.json", out);

  std::cout << "run directory: " << dir.string() << "\n"
            << "solve: " << report.status << " in " << report.iterations
            << " iterations, " << report.seconds << " s\n"
            << "phase: " << cert.phase << "\n";
  if (!intervals.empty()) std::cout << "CRAS: " << intervals << "\n";
  std::cout << "gamma: " << vol.gamma << " (std error " << vol.std_error
            << ")\n"
            << "validation: " << check.summary() << "\n";
  return check.pass ? kExitOk : kExitValidation;
}

int cmd_iterate(const Flags& f) {
  const json doc = spec_document(f);
  const SystemSpec spec = load_reach_avoid(doc, f);
  IterationConfig cfg;
  apply_iteration_config(merged_config(doc, f), &cfg);
  cfg.greedy = f.greedy;
  cfg.volume_samples = volume_samples(f);
  if (f.seed) cfg.seed = *f.seed;
  cfg.validate();
  const fs::path dir = run_directory(f, "iterate", spec.name);
  write_manifest(dir, "iterate", f, doc);
  fs::create_directories(dir / "iterations");
  fs::create_directories(dir / "certificates");

  bool all_valid = true;
  auto on_iteration = [&](const IterationRecord& rec) {
    std::ostringstream stem;
    stem << std::setw(2) << std::setfill('0') << rec.iteration;
    json j = to_json(rec);
    if (!rec.failed) {
      const ValidationReport check =
          validate_certificate(rec.certificate, spec);
      all_valid = all_valid && check.pass;
      j["validation"] = to_json(check);
      save_certificate(rec.certificate,
                       (dir / "certificates" / ("cert_" + stem.str() + ".json"))
                           .string());
    }
    const std::string intervals = interval_text(rec.certificate.v, spec);
    if (!intervals.empty()) j["cras"] = intervals;
    write_json(dir / "iterations" / ("iter_" + stem.str() + ".json"), j);
    std::cout << "iteration " << rec.iteration << " eps " << rec.epsilon
              << (rec.failed ? " FAILED (" + rec.failure + ")" : "")
              << " gamma " << rec.gamma << " union " << rec.union_gamma
              << (intervals.empty() ? "" : " CRAS " + intervals) << "\n";
  };
  const CrasResult result =
      run_alg1(spec, cfg, solver_choice(f, dir), on_iteration);
  const double initial = result.records.front().gamma;
  const double final_gamma = result.records.back().gamma;
  json summary{{"initial_gamma", initial},
               {"final_gamma", final_gamma},
               {"union_gamma", result.union_gamma},
               {"iterations", static_cast<int>(result.records.size()) - 1},
               {"greedy", cfg.greedy}};
  if (initial > 0.0) summary["growth"] = result.union_gamma / initial - 1.0;
  write_json(dir / "summary.json", summary);
  std::cout << "run directory: " << dir.string() << "\n"
            << "union gamma: " << result.union_gamma << "\n";
  return all_valid ? kExitOk : kExitValidation;
}

int cmd_safety(const Flags& f) {
  const json doc = spec_document(f);
  const SafetySpec spec = load_safety_spec(doc, f);
  const SolveConfig cfg = solve_config(merged_config(doc, f));
  const fs::path dir = run_directory(f, "safety", spec.name);
  write_manifest(dir, "safety", f, doc);
  SolveReport report;
  const Certificate cert = solve_safety(spec, cfg, solver_choice(f, dir), &report);
  save_certificate(cert, (dir / "certificate.json").string());
  const ValidationReport check = validate_certificate(cert, spec);
  write_json(dir / "report.json",
             json{{"solve", to_json(report)}, {"validation", to_json(check)}});
  std::cout << "run directory: " << dir.string() << "\n"
            << "solve: " << report.status << " in " << report.iterations
            << " iterations, " << report.seconds << " s\n"
            << "validation: " << check.summary() << "\n";
  return check.pass ? kExitOk : kExitValidation;
}

// v from --cert or --poly.
Polynomial certificate_polynomial(const Flags& f) {
  if (!f.cert.empty() && !f.poly.empty()) {
    throw InputError("give one of --cert and --poly");
  }
  if (!f.poly.empty()) return parse_polynomial(f.poly);
  if (f.cert.empty()) throw InputError("--cert or --poly is required");
  if (!fs::exists(f.cert)) throw InputError("no such certificate: " + f.cert);
  return load_certificate(f.cert).v;
}

int cmd_volume(const Flags& f) {
  const json doc = spec_document(f);
  const SystemSpec spec = load_reach_avoid(doc, f);
  const Polynomial v = certificate_polynomial(f);
  const VolumeEstimate vol =
      estimate_volume(v, spec, volume_samples(f), f.seed.value_or(0));
  if (!f.out.empty()) {
    const fs::path dir = run_directory(f, "volume", spec.name);
    write_manifest(dir, "volume", f, doc);
    write_json(dir / "volume.json", to_json(vol));
  }
  std::cout << "gamma: " << vol.gamma << " (std error " << vol.std_error
            << ", " << vol.n_samples << " samples)\n";
  return kExitOk;
}

std::vector<double> parse_point(const std::string& text, int dim) {
  std::vector<double> x;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      x.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw InputError("bad coordinate in --x0: " + item);
    }
  }
  if (static_cast<int>(x.size()) != dim) {
    throw InputError("--x0 needs " + std::to_string(dim) + " coordinates");
  }
  return x;
}

int cmd_simulate(const Flags& f) {
  const json doc = spec_document(f);
  const SystemSpec spec = load_reach_avoid(doc, f);
  const Polynomial v = certificate_polynomial(f);
  const std::vector<double> x0 =
      parse_point(f.x0, spec.dynamics.num_states());
  const Trajectory traj = simulate_greedy(v, spec, x0, f.horizon.value_or(100'000),
                                          f.grid.value_or(101));
  if (!f.out.empty()) {
    const fs::path dir = run_directory(f, "simulate", spec.name);
    write_manifest(dir, "simulate", f, doc);
    std::ofstream csv(dir / "trajectory.csv");
    csv << std::setprecision(17) << "t";
    for (const Variable& x : spec.dynamics.state_vars) csv << "," << x.name();
    for (const Variable& u : spec.dynamics.input_vars) csv << "," << u.name();
    csv << "\n";
    for (std::size_t t = 0; t < traj.states.size(); ++t) {
      csv << t;
      for (double xi : traj.states[t]) csv << "," << xi;
      for (std::size_t j = 0; j < spec.dynamics.input_vars.size(); ++j) {
        csv << ",";
        if (t < traj.controls.size()) csv << traj.controls[t][j];
      }
      csv << "\n";
    }
  }
  std::cout << "verdict: " << to_string(traj.verdict) << " after "
            << traj.steps() << " steps\n";
  return kExitOk;
}

int cmd_levelset(const Flags& f) {
  const json doc = spec_document(f);
  std::vector<Variable> vars;
  BoxSet box;
  if (is_safety(doc)) {
    const SafetySpec spec = load_safety_spec(doc, f);
    vars = spec.dynamics.state_vars;
    box = safety_sets(spec).domain.bounding_box();
  } else {
    const SystemSpec spec = load_reach_avoid(doc, f);
    vars = spec.dynamics.state_vars;
    box = safe_set(spec).bounding_box();
  }
  const Polynomial v = certificate_polynomial(f);
  const int resolution = f.grid.value_or(101);
  if (f.out.empty()) {
    write_levelset_csv(v, vars, box, resolution, std::cout);
    return kExitOk;
  }
  const fs::path path = f.out;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_levelset_csv(v, vars, box, resolution, out);
  return kExitOk;
}

void add_common(CLI::App* app, Flags* f) {
  app->add_option("--spec", f->spec, "Problem file (JSON)")->required();
  app->add_option("--seed", f->seed, "Random seed");
  app->add_option("--lambda", f->lambda, "Override the spec's lambda");
}

void add_solve(CLI::App* app, Flags* f) {
  app->add_option("--deg-v", f->deg_v, "Degree of v (or B)");
  app->add_option("--deg-s", f->deg_s, "Multiplier degree (-1 for auto)");
  app->add_option("--objective", f->objective, "Integral objective")
      ->check(CLI::IsMember({"closed", "sample"}));
  app->add_option("--solver", f->solver, "SDP backend")
      ->check(CLI::IsMember({"embedded", "sdpa-file"}));
  app->add_option("--sdpa-command", f->sdpa_command,
                  "External solver command with {in} and {out} placeholders");
}

}  // namespace
}  // namespace reachsos

int main(int argc, char** argv) {
  using namespace reachsos;
  CLI::App app{"Controlled reach-avoid sets and barrier certificates via SOS"};
  app.require_subcommand(1);
  Flags f;

  CLI::App* init = app.add_subcommand("init", "Initial CRAS from uniform inputs");
  add_common(init, &f);
  add_solve(init, &f);
  init->add_option("--out", f.out, "Run directory");
  init->add_option("--samples", f.samples, "Monte Carlo volume samples");

  CLI::App* iterate = app.add_subcommand("iterate", "Iterative refinement");
  add_common(iterate, &f);
  add_solve(iterate, &f);
  iterate->add_option("--out", f.out, "Run directory");
  iterate->add_option("--deg-u", f.deg_u, "Controller degree");
  iterate->add_option("--eps0", f.eps0, "Initial epsilon");
  iterate->add_option("--eps-factor", f.eps_factor, "Epsilon schedule factor");
  iterate->add_option("--delta", f.delta, "Neighborhood half-width");
  iterate->add_option("--iters", f.iters, "Number of refinement iterations");
  iterate->add_option("--states", f.states, "Sampled states per iteration");
  iterate->add_option("--controls,--grid", f.controls,
                      "Control grid points per input axis");
  iterate->add_option("--state-sampling", f.sampling, "State sampling")
      ->check(CLI::IsMember({"grid", "random"}));
  iterate->add_option("--samples", f.samples, "Monte Carlo volume samples");
  iterate->add_flag("--greedy", f.greedy, "Greedy baseline (eps = delta = 0)");

  CLI::App* safety = app.add_subcommand("safety", "Barrier certificate");
  add_common(safety, &f);
  add_solve(safety, &f);
  safety->add_option("--out", f.out, "Run directory");

  CLI::App* volume = app.add_subcommand("volume", "Monte Carlo volume of v > 0");
  add_common(volume, &f);
  volume->add_option("--cert", f.cert, "Certificate JSON");
  volume->add_option("--poly", f.poly, "Polynomial v as text");
  volume->add_option("--samples", f.samples, "Number of samples");
  volume->add_option("--out", f.out, "Run directory");

  CLI::App* simulate = app.add_subcommand("simulate", "Greedy closed loop");
  add_common(simulate, &f);
  simulate->add_option("--cert", f.cert, "Certificate JSON");
  simulate->add_option("--poly", f.poly, "Polynomial v as text");
  simulate->add_option("--x0", f.x0, "Initial state, comma separated")
      ->required();
  simulate->add_option("--horizon", f.horizon, "Maximum number of steps");
  simulate->add_option("--grid", f.grid, "Control grid points per axis");
  simulate->add_option("--out", f.out, "Run directory");

  CLI::App* levelset = app.add_subcommand("levelset", "CSV grid of v");
  add_common(levelset, &f);
  levelset->add_option("--cert", f.cert, "Certificate JSON");
  levelset->add_option("--poly", f.poly, "Polynomial v as text");
  levelset->add_option("--grid", f.grid, "Grid points per axis");
  levelset->add_option("--out", f.out, "CSV file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*init) return cmd_init(f);
    if (*iterate) return cmd_iterate(f);
    if (*safety) return cmd_safety(f);
    if (*volume) return cmd_volume(f);
    if (*simulate) return cmd_simulate(f);
    if (*levelset) return cmd_levelset(f);
  } catch (const SynthesisError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
  return kExitInput;
}
