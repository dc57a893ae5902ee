#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "reachsos/polynomial.h"

namespace reachsos {

enum class CertificateKind { kReachAvoid, kSafety, kControllerFit };

/// Input distribution the expectation row was built with.
enum class ExpectationMode { kUniform, kEpsGreedy, kGreedy };

std::string to_string(CertificateKind kind);
std::string to_string(ExpectationMode mode);

/// Polynomial certificate in the original state coordinates, together with
/// everything needed to re-check it without the solver.
struct Certificate {
  CertificateKind kind = CertificateKind::kReachAvoid;
  ExpectationMode mode = ExpectationMode::kUniform;
  std::string system;
  /// v for reach-avoid, B for safety; unused for controller fits.
  Polynomial v;
  double lambda = 1.0;
  /// Level required of B on the initial set (safety only).
  double eta = 0.0;
  std::map<std::string, Polynomial> multipliers;
  /// ũ0, one polynomial per input.
  std::vector<Polynomial> controller;
  double epsilon = 1.0;
  double delta = 0.0;
  /// Superset of the one-step image used for the v ≤ 0 row.
  Polynomial xhat_h;
  std::string solve_status;
  /// "integral", "anchored" or "trivial" (v ≡ 0, empty set).
  std::string phase = "integral";
  double objective_value = 0.0;
  int solver_iterations = 0;
  double max_identity_residual = 0.0;
  int iteration = 0;
};

nlohmann::json to_json(const Certificate& cert);
/// Throws std::invalid_argument on malformed input.
Certificate certificate_from_json(const nlohmann::json& j);

void save_certificate(const Certificate& cert, const std::string& path);
Certificate load_certificate(const std::string& path);

}  // namespace reachsos
