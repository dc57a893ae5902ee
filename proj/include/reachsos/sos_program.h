#pragma once

#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "reachsos/polynomial.h"
#include "reachsos/sdp_solver.h"
#include "reachsos/semisets.h"
#include "reachsos/system_spec.h"

namespace reachsos {

/// constant + Σ coeff · decision[id].
class LinearExpr {
 public:
  LinearExpr() = default;
  LinearExpr(double constant) : constant_(constant) {}  // NOLINT
  static LinearExpr Decision(int id, double coeff = 1.0);

  double constant() const { return constant_; }
  const std::map<int, double>& terms() const { return terms_; }
  bool is_zero() const { return constant_ == 0.0 && terms_.empty(); }
  double eval(const std::vector<double>& values) const;

  LinearExpr& operator+=(const LinearExpr& o);
  LinearExpr& operator-=(const LinearExpr& o);
  LinearExpr& operator*=(double c);
  /// this += c · o
  void add_scaled(const LinearExpr& o, double c);

  friend LinearExpr operator+(LinearExpr a, const LinearExpr& b) { return a += b; }
  friend LinearExpr operator-(LinearExpr a, const LinearExpr& b) { return a -= b; }
  friend LinearExpr operator*(double c, LinearExpr a) { return a *= c; }

 private:
  void prune();
  std::map<int, double> terms_;
  double constant_ = 0.0;
};

/// Polynomial whose coefficients are affine in the decision variables.
class AffinePolynomial {
 public:
  using TermMap = std::map<Monomial, LinearExpr>;

  AffinePolynomial() = default;
  AffinePolynomial(const Polynomial& p);  // NOLINT
  explicit AffinePolynomial(TermMap terms);

  const TermMap& terms() const { return terms_; }
  int degree() const;
  std::vector<Variable> variables() const;
  /// Substitutes decision values.
  Polynomial eval(const std::vector<double>& values) const;

  /// this += c · p · q, the workhorse for Putinar products.
  void add_product(const AffinePolynomial& p, const Polynomial& q, double c = 1.0);

  AffinePolynomial& operator+=(const AffinePolynomial& o);
  AffinePolynomial& operator-=(const AffinePolynomial& o);
  AffinePolynomial& operator*=(double c);
  friend AffinePolynomial operator+(AffinePolynomial a, const AffinePolynomial& b) {
    return a += b;
  }
  friend AffinePolynomial operator-(AffinePolynomial a, const AffinePolynomial& b) {
    return a -= b;
  }
  friend AffinePolynomial operator*(double c, AffinePolynomial a) { return a *= c; }
  friend AffinePolynomial operator*(const AffinePolynomial& a, const Polynomial& q) {
    AffinePolynomial r;
    r.add_product(a, q);
    return r;
  }

 private:
  void prune();
  TermMap terms_;
};

/// Σ c_j b_j over a full monomial basis with one scalar decision per c_j.
struct DecisionPoly {
  std::vector<Monomial> basis;
  std::vector<int> coeff_ids;

  AffinePolynomial expr() const;
  /// Σ c_j · op(b_j); `op` must be linear.
  AffinePolynomial transformed(
      const std::function<Polynomial(const Polynomial&)>& op) const;
};

/// zᵀQz with Q a dedicated PSD block.
struct SosPoly {
  std::vector<Monomial> basis;
  int block = -1;
  AffinePolynomial value;
};

class ExtractionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Residual of one SOS identity after a solve.
struct IdentityResidual {
  std::string name;
  double max_abs = 0.0;
  double scale = 0.0;
};

class SosProgram {
 public:
  static constexpr double kUnbounded = std::numeric_limits<double>::infinity();

  SosProgram() = default;

  int new_scalar(double lower = -kUnbounded, double upper = kUnbounded,
                 std::string name = {});
  /// Full basis of `degree` over `vars`, every coefficient boxed to
  /// [−bound, bound].
  DecisionPoly new_template(const std::vector<Variable>& vars,
                            int degree, double bound = kUnbounded,
                            const std::string& name = "c");
  /// SOS polynomial of degree ≤ `degree` (rounded up to even).
  SosPoly new_sos_poly(const std::vector<Variable>& vars, int degree,
                       const std::string& name = "s");
  /// expression ∈ Σ[x]; returns the Gram block id.
  int add_sos(const AffinePolynomial& expression, const std::string& name = {});
  /// Symmetric matrix of affine expressions ⪰ 0 (upper triangle is read).
  int add_psd(const std::vector<std::vector<LinearExpr>>& matrix,
              const std::string& name = {});
  void add_equality(const LinearExpr& expr);

  void set_objective(const LinearExpr& objective);
  /// Objective Σ_j w_j c_j with w_j the moments (closed form) or sample
  /// sums of the template basis over `set`.
  void set_objective_integral(const DecisionPoly& v, const SublevelSet& set,
                              ObjectiveMode mode, int samples = 100,
                              std::uint64_t seed = 1);

  SdpProblem compile() const;

  int num_decisions() const { return static_cast<int>(refs_.size()); }
  int num_blocks() const { return static_cast<int>(block_dims_.size()); }
  const LinearExpr& objective() const { return objective_; }

  /// Decision values read from a solution of compile().
  std::vector<double> values(const SdpSolution& sol) const;
  Polynomial value(const DecisionPoly& p, const SdpSolution& sol) const;
  Polynomial value(const SosPoly& p, const SdpSolution& sol) const;

  /// Recomputes every SOS identity from the solution; throws
  /// ExtractionError naming the worst identity above
  /// tol · max(1, coefficient scale).
  std::vector<IdentityResidual> check_identities(const SdpSolution& sol,
                                                 double tol = 1e-6) const;

 private:
  struct SosRow {
    std::string name;
    AffinePolynomial expression;
    std::vector<Monomial> basis;
    int block;
  };
  int new_gram(const std::vector<Monomial>& basis, AffinePolynomial* value);

  std::vector<VarRef> refs_;
  std::vector<ScalarVar> scalars_;
  std::vector<int> block_dims_;
  std::vector<SosRow> rows_;
  std::vector<LinearExpr> equalities_;
  std::vector<std::pair<std::vector<std::vector<LinearExpr>>, int>> lmis_;
  LinearExpr objective_;
};

/// Half-degree Gram basis for an expression of `degree` in `vars`.
std::vector<Monomial> gram_basis(const std::vector<Variable>& vars, int degree);

/// ∫_set b dx for each basis element (closed-form moments).
std::vector<double> moment_weights(const std::vector<Monomial>& basis,
                                   const SublevelSet& set);
/// Σ_i b(x_i) over the rows of `points` (coordinates in `vars` order).
std::vector<double> sample_weights(const std::vector<Monomial>& basis,
                                   const std::vector<Variable>& vars,
                                   const PointSet& points);

}  // namespace reachsos
