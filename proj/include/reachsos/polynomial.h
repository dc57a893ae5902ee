#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace reachsos {

/// A named indeterminate. Names are interned into a process-wide table so a
/// Variable is a cheap value type; two Variables with the same name compare
/// equal. Ordering follows interning order, which drives the canonical term
/// order of every Polynomial.
class Variable {
 public:
  Variable() = default;
  explicit Variable(std::string_view name);

  int id() const { return id_; }
  const std::string& name() const;

  friend bool operator==(Variable a, Variable b) { return a.id_ == b.id_; }
  friend auto operator<=>(Variable a, Variable b) { return a.id_ <=> b.id_; }

 private:
  int id_ = -1;
};

using Point = std::map<Variable, double>;

/// Product of variable powers. Zero exponents are never stored.
class Monomial {
 public:
  Monomial() = default;
  explicit Monomial(Variable v, int power = 1);
  /// Builds from (variable, power) pairs in any order; repeated variables
  /// accumulate and zero powers are dropped. Negative powers throw.
  explicit Monomial(std::vector<std::pair<Variable, int>> powers);

  int degree() const { return degree_; }
  int power(Variable v) const;
  bool contains(Variable v) const { return power(v) != 0; }
  bool is_constant() const { return powers_.empty(); }
  const std::vector<std::pair<Variable, int>>& powers() const {
    return powers_;
  }
  /// The same monomial with `v` removed.
  Monomial without(Variable v) const;

  double eval(const Point& point) const;

  friend Monomial operator*(const Monomial& a, const Monomial& b);
  friend bool operator==(const Monomial& a, const Monomial& b) = default;
  /// Graded lexicographic: lower total degree first; within a degree the
  /// monomial with the larger power of the earliest variable comes first.
  friend std::strong_ordering operator<=>(const Monomial& a,
                                          const Monomial& b);

 private:
  std::vector<std::pair<Variable, int>> powers_;
  int degree_ = 0;
};

/// Sparse multivariate polynomial with double coefficients. Values are
/// immutable once built; all arithmetic returns new polynomials. Terms with
/// magnitude below kDropTolerance are removed after every operation.
class Polynomial {
 public:
  using TermMap = std::map<Monomial, double>;
  static constexpr double kDropTolerance = 1e-14;

  Polynomial() = default;
  Polynomial(double constant);  // NOLINT(runtime/explicit)
  Polynomial(Variable v);       // NOLINT(runtime/explicit)
  Polynomial(const Monomial& m, double coefficient = 1.0);
  explicit Polynomial(TermMap terms);

  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  /// Total degree; -1 for the zero polynomial.
  int degree() const;
  /// Degree in a single variable.
  int degree_in(Variable v) const;
  double coefficient(const Monomial& m) const;
  /// Variables that appear with a nonzero power, in canonical order.
  std::vector<Variable> variables() const;
  bool contains(Variable v) const;

  /// Throws std::invalid_argument if a variable of the polynomial is missing
  /// from `point`.
  double eval(const Point& point) const;

  Polynomial pow(int exponent) const;
  /// Maximum absolute coefficient; 0 for the zero polynomial.
  double max_abs_coefficient() const;

  friend Polynomial operator+(const Polynomial& p, const Polynomial& q);
  friend Polynomial operator-(const Polynomial& p, const Polynomial& q);
  friend Polynomial operator*(const Polynomial& p, const Polynomial& q);
  friend Polynomial operator-(const Polynomial& p);
  Polynomial& operator+=(const Polynomial& q);
  Polynomial& operator-=(const Polynomial& q);
  Polynomial& operator*=(const Polynomial& q);

  friend bool operator==(const Polynomial& p, const Polynomial& q) = default;

 private:
  void cleanup();
  TermMap terms_;
};

using Substitution = std::map<Variable, Polynomial>;

/// p(σ(z)). Every variable of `p` must have an image in `substitution`;
/// otherwise std::invalid_argument is thrown.
Polynomial compose(const Polynomial& p, const Substitution& substitution);

/// Replaces a single variable by a polynomial, leaving the others untouched.
Polynomial substitute(const Polynomial& p, Variable var, const Polynomial& q);

/// Antiderivative in `var` with zero constant of integration.
Polynomial antiderivative(const Polynomial& p, Variable var);

/// ∫_{lower}^{upper} p d(var). The bounds may be polynomials but must not
/// contain `var` (std::invalid_argument otherwise).
Polynomial integrate_var(const Polynomial& p, Variable var,
                         const Polynomial& lower, const Polynomial& upper);

/// ∂p/∂var.
Polynomial differentiate(const Polynomial& p, Variable var);

/// Canonical text: graded-lex terms rendered as `c*x^a*y^b` joined by
/// " + ", coefficients printed with round-trip precision. Zero renders "0".
std::string render(const Polynomial& p);

/// Every monomial in `vars` with total degree <= `degree`, graded-lex order.
std::vector<Monomial> monomial_basis(std::span<const Variable> vars,
                                     int degree);

/// Repeated composition of many polynomials under one substitution; caches
/// powers of the images so composing a whole monomial basis stays cheap.
class Composer {
 public:
  explicit Composer(Substitution substitution);
  Polynomial apply(const Polynomial& p);
  Polynomial apply(const Monomial& m);

 private:
  const Polynomial& image_power(Variable v, int power);
  Substitution substitution_;
  std::map<std::pair<Variable, int>, Polynomial> power_cache_;
};

/// Flattened polynomial for fast repeated evaluation at points given as a
/// dense vector over a fixed variable list.
class PolyEvaluator {
 public:
  PolyEvaluator() = default;
  /// Throws if `p` has a variable that is not in `vars`.
  PolyEvaluator(const Polynomial& p, std::span<const Variable> vars);

  double operator()(std::span<const double> x) const;
  int num_vars() const { return num_vars_; }

 private:
  int num_vars_ = 0;
  int max_power_ = 0;
  std::vector<double> coefficients_;
  // term-major (variable index, power) factors
  std::vector<std::uint32_t> factor_offsets_;
  std::vector<std::pair<int, int>> factors_;
};

}  // namespace reachsos
