#include "reachsos/certificate.h"

#include <fstream>
#include <stdexcept>

#include "reachsos/parser.h"

namespace reachsos {

using nlohmann::json;

std::string to_string(CertificateKind kind) {
  switch (kind) {
    case CertificateKind::kReachAvoid: return "reach_avoid";
    case CertificateKind::kSafety: return "safety";
    case CertificateKind::kControllerFit: return "controller_fit";
  }
  return "unknown";
}

std::string to_string(ExpectationMode mode) {
  switch (mode) {
    case ExpectationMode::kUniform: return "uniform";
    case ExpectationMode::kEpsGreedy: return "eps_greedy";
    case ExpectationMode::kGreedy: return "greedy";
  }
  return "unknown";
}

namespace {

template <typename Enum>
Enum parse_enum(const std::string& s, std::initializer_list<Enum> values) {
  for (Enum e : values) {
    if (to_string(e) == s) return e;
  }
  throw std::invalid_argument("unknown enum value '" + s + "'");
}

Polynomial parse_field(const json& j, const char* key) {
  if (!j.contains(key)) return Polynomial();
  return parse_polynomial(j.at(key).get<std::string>());
}

}  // namespace

json to_json(const Certificate& cert) {
  json j;
  j["kind"] = to_string(cert.kind);
  j["mode"] = to_string(cert.mode);
  j["system"] = cert.system;
  j["v"] = render(cert.v);
  j["lambda"] = cert.lambda;
  if (cert.kind == CertificateKind::kSafety) j["eta"] = cert.eta;
  json mult = json::object();
  for (const auto& [name, p] : cert.multipliers) mult[name] = render(p);
  j["multipliers"] = mult;
  json ctrl = json::array();
  for (const Polynomial& p : cert.controller) ctrl.push_back(render(p));
  j["controller"] = ctrl;
  j["epsilon"] = cert.epsilon;
  j["delta"] = cert.delta;
  if (!cert.xhat_h.is_zero()) j["xhat_h"] = render(cert.xhat_h);
  j["solve_status"] = cert.solve_status;
  if (cert.kind == CertificateKind::kReachAvoid) j["phase"] = cert.phase;
  j["objective_value"] = cert.objective_value;
  j["solver_iterations"] = cert.solver_iterations;
  j["max_identity_residual"] = cert.max_identity_residual;
  j["iteration"] = cert.iteration;
  return j;
}

Certificate certificate_from_json(const json& j) {
  try {
    Certificate c;
    c.kind = parse_enum(j.at("kind").get<std::string>(),
                        {CertificateKind::kReachAvoid, CertificateKind::kSafety,
                         CertificateKind::kControllerFit});
    c.mode = parse_enum(j.value("mode", std::string("uniform")),
                        {ExpectationMode::kUniform, ExpectationMode::kEpsGreedy,
                         ExpectationMode::kGreedy});
    c.system = j.value("system", std::string());
    c.v = parse_field(j, "v");
    c.lambda = j.value("lambda", 1.0);
    c.eta = j.value("eta", 0.0);
    if (j.contains("multipliers")) {
      for (const auto& [name, p] : j.at("multipliers").items()) {
        c.multipliers[name] = parse_polynomial(p.get<std::string>());
      }
    }
    if (j.contains("controller")) {
      for (const auto& p : j.at("controller")) {
        c.controller.push_back(parse_polynomial(p.get<std::string>()));
      }
    }
    c.epsilon = j.value("epsilon", 1.0);
    c.delta = j.value("delta", 0.0);
    c.xhat_h = parse_field(j, "xhat_h");
    c.solve_status = j.value("solve_status", std::string());
    c.phase = j.value("phase", std::string("integral"));
    c.objective_value = j.value("objective_value", 0.0);
    c.solver_iterations = j.value("solver_iterations", 0);
    c.max_identity_residual = j.value("max_identity_residual", 0.0);
    c.iteration = j.value("iteration", 0);
    return c;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed certificate: ") + e.what());
  }
}

void save_certificate(const Certificate& cert, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_json(cert).dump(2) << "\n";
}

Certificate load_certificate(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
  return certificate_from_json(j);
}

}  // namespace reachsos
