#include "reachsos/polynomial.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace reachsos {
namespace {

struct VariableTable {
  std::mutex mutex;
  std::deque<std::string> names;
  std::unordered_map<std::string, int> ids;
};

VariableTable& variable_table() {
  static VariableTable table;
  return table;
}

std::string format_coefficient(double c) {
  std::ostringstream os;
  os.precision(17);
  os << c;
  return os.str();
}

}  // namespace

Variable::Variable(std::string_view name) {
  if (name.empty()) throw std::invalid_argument("empty variable name");
  auto& table = variable_table();
  std::lock_guard<std::mutex> lock(table.mutex);
  auto [it, inserted] =
      table.ids.emplace(std::string(name), static_cast<int>(table.names.size()));
  if (inserted) table.names.emplace_back(name);
  id_ = it->second;
}

const std::string& Variable::name() const {
  auto& table = variable_table();
  std::lock_guard<std::mutex> lock(table.mutex);
  if (id_ < 0) throw std::logic_error("unnamed variable");
  return table.names[static_cast<std::size_t>(id_)];
}

Monomial::Monomial(Variable v, int power) {
  if (power < 0) throw std::invalid_argument("negative exponent");
  if (power > 0) {
    powers_.emplace_back(v, power);
    degree_ = power;
  }
}

Monomial::Monomial(std::vector<std::pair<Variable, int>> powers) {
  std::sort(powers.begin(), powers.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [v, e] : powers) {
    if (e < 0) throw std::invalid_argument("negative exponent");
    if (e == 0) continue;
    if (!powers_.empty() && powers_.back().first == v) {
      powers_.back().second += e;
    } else {
      powers_.emplace_back(v, e);
    }
    degree_ += e;
  }
}

int Monomial::power(Variable v) const {
  for (const auto& [var, e] : powers_) {
    if (var == v) return e;
  }
  return 0;
}

Monomial Monomial::without(Variable v) const {
  Monomial result;
  for (const auto& [var, e] : powers_) {
    if (var == v) continue;
    result.powers_.emplace_back(var, e);
    result.degree_ += e;
  }
  return result;
}

double Monomial::eval(const Point& point) const {
  double value = 1.0;
  for (const auto& [var, e] : powers_) {
    auto it = point.find(var);
    if (it == point.end()) {
      throw std::invalid_argument("unassigned variable '" + var.name() + "'");
    }
    value *= std::pow(it->second, e);
  }
  return value;
}

Monomial operator*(const Monomial& a, const Monomial& b) {
  Monomial result;
  result.powers_.reserve(a.powers_.size() + b.powers_.size());
  auto i = a.powers_.begin();
  auto j = b.powers_.begin();
  while (i != a.powers_.end() || j != b.powers_.end()) {
    if (j == b.powers_.end() || (i != a.powers_.end() && i->first < j->first)) {
      result.powers_.push_back(*i++);
    } else if (i == a.powers_.end() || j->first < i->first) {
      result.powers_.push_back(*j++);
    } else {
      result.powers_.emplace_back(i->first, i->second + j->second);
      ++i;
      ++j;
    }
  }
  result.degree_ = a.degree_ + b.degree_;
  return result;
}

std::strong_ordering operator<=>(const Monomial& a, const Monomial& b) {
  if (a.degree_ != b.degree_) return a.degree_ <=> b.degree_;
  auto i = a.powers_.begin();
  auto j = b.powers_.begin();
  while (i != a.powers_.end() && j != b.powers_.end()) {
    if (i->first != j->first) {
      // The side holding the earlier variable has the larger power there.
      return i->first < j->first ? std::strong_ordering::less
                                 : std::strong_ordering::greater;
    }
    if (i->second != j->second) {
      return i->second > j->second ? std::strong_ordering::less
                                   : std::strong_ordering::greater;
    }
    ++i;
    ++j;
  }
  if (i != a.powers_.end()) return std::strong_ordering::less;
  if (j != b.powers_.end()) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

Polynomial::Polynomial(double constant) {
  if (constant != 0.0) terms_.emplace(Monomial(), constant);
  cleanup();
}

Polynomial::Polynomial(Variable v) { terms_.emplace(Monomial(v), 1.0); }

Polynomial::Polynomial(const Monomial& m, double coefficient) {
  terms_.emplace(m, coefficient);
  cleanup();
}

Polynomial::Polynomial(TermMap terms) : terms_(std::move(terms)) { cleanup(); }

void Polynomial::cleanup() {
  std::erase_if(terms_, [](const auto& term) {
    return !(std::abs(term.second) >= kDropTolerance);
  });
}

int Polynomial::degree() const {
  return terms_.empty() ? -1 : terms_.rbegin()->first.degree();
}

int Polynomial::degree_in(Variable v) const {
  int d = 0;
  for (const auto& [m, c] : terms_) d = std::max(d, m.power(v));
  return d;
}

double Polynomial::coefficient(const Monomial& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? 0.0 : it->second;
}

std::vector<Variable> Polynomial::variables() const {
  std::vector<Variable> vars;
  for (const auto& [m, c] : terms_) {
    for (const auto& [v, e] : m.powers()) vars.push_back(v);
  }
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  return vars;
}

bool Polynomial::contains(Variable v) const {
  return std::any_of(terms_.begin(), terms_.end(),
                     [v](const auto& t) { return t.first.contains(v); });
}

double Polynomial::eval(const Point& point) const {
  double sum = 0.0;
  for (const auto& [m, c] : terms_) sum += c * m.eval(point);
  return sum;
}

Polynomial Polynomial::pow(int exponent) const {
  if (exponent < 0) throw std::invalid_argument("negative power");
  Polynomial result(1.0);
  Polynomial base = *this;
  while (exponent > 0) {
    if (exponent & 1) result *= base;
    exponent >>= 1;
    if (exponent > 0) base *= base;
  }
  return result;
}

double Polynomial::max_abs_coefficient() const {
  double m = 0.0;
  for (const auto& [mono, c] : terms_) m = std::max(m, std::abs(c));
  return m;
}

Polynomial& Polynomial::operator+=(const Polynomial& q) {
  for (const auto& [m, c] : q.terms_) terms_[m] += c;
  cleanup();
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& q) {
  for (const auto& [m, c] : q.terms_) terms_[m] -= c;
  cleanup();
  return *this;
}

Polynomial& Polynomial::operator*=(const Polynomial& q) {
  *this = *this * q;
  return *this;
}

Polynomial operator+(const Polynomial& p, const Polynomial& q) {
  Polynomial r = p;
  r += q;
  return r;
}

Polynomial operator-(const Polynomial& p, const Polynomial& q) {
  Polynomial r = p;
  r -= q;
  return r;
}

Polynomial operator-(const Polynomial& p) {
  Polynomial r = p;
  for (auto& [m, c] : r.terms_) c = -c;
  return r;
}

Polynomial operator*(const Polynomial& p, const Polynomial& q) {
  Polynomial r;
  for (const auto& [mp, cp] : p.terms_) {
    for (const auto& [mq, cq] : q.terms_) r.terms_[mp * mq] += cp * cq;
  }
  r.cleanup();
  return r;
}

Composer::Composer(Substitution substitution)
    : substitution_(std::move(substitution)) {}

const Polynomial& Composer::image_power(Variable v, int power) {
  auto key = std::make_pair(v, power);
  auto it = power_cache_.find(key);
  if (it != power_cache_.end()) return it->second;
  auto image = substitution_.find(v);
  if (image == substitution_.end()) {
    throw std::invalid_argument("no substitution for variable '" + v.name() +
                                "'");
  }
  Polynomial value = power == 1 ? image->second
                                : image_power(v, power - 1) * image->second;
  return power_cache_.emplace(key, std::move(value)).first->second;
}

Polynomial Composer::apply(const Monomial& m) {
  Polynomial result(1.0);
  for (const auto& [v, e] : m.powers()) result *= image_power(v, e);
  return result;
}

Polynomial Composer::apply(const Polynomial& p) {
  Polynomial::TermMap acc;
  for (const auto& [m, c] : p.terms()) {
    const Polynomial image = apply(m);
    for (const auto& [mm, cc] : image.terms()) acc[mm] += c * cc;
  }
  return Polynomial(std::move(acc));
}

Polynomial compose(const Polynomial& p, const Substitution& substitution) {
  Composer composer(substitution);
  return composer.apply(p);
}

Polynomial substitute(const Polynomial& p, Variable var, const Polynomial& q) {
  // Group by power of var, then Horner-free accumulation with cached powers.
  std::map<int, Polynomial::TermMap> by_power;
  for (const auto& [m, c] : p.terms()) {
    by_power[m.power(var)][m.without(var)] += c;
  }
  Polynomial result;
  Polynomial q_power(1.0);
  int current = 0;
  for (auto& [k, terms] : by_power) {
    while (current < k) {
      q_power *= q;
      ++current;
    }
    result += Polynomial(std::move(terms)) * q_power;
  }
  return result;
}

Polynomial antiderivative(const Polynomial& p, Variable var) {
  Polynomial::TermMap terms;
  for (const auto& [m, c] : p.terms()) {
    const int k = m.power(var);
    terms[m * Monomial(var)] += c / (k + 1);
  }
  return Polynomial(std::move(terms));
}

Polynomial integrate_var(const Polynomial& p, Variable var,
                         const Polynomial& lower, const Polynomial& upper) {
  if (lower.contains(var) || upper.contains(var)) {
    throw std::invalid_argument("integration bounds contain the variable '" +
                                var.name() + "'");
  }
  const Polynomial F = antiderivative(p, var);
  return substitute(F, var, upper) - substitute(F, var, lower);
}

Polynomial differentiate(const Polynomial& p, Variable var) {
  Polynomial::TermMap terms;
  for (const auto& [m, c] : p.terms()) {
    const int k = m.power(var);
    if (k == 0) continue;
    std::vector<std::pair<Variable, int>> powers = m.powers();
    for (auto& [v, e] : powers) {
      if (v == var) e -= 1;
    }
    terms[Monomial(std::move(powers))] += c * k;
  }
  return Polynomial(std::move(terms));
}

std::string render(const Polynomial& p) {
  if (p.is_zero()) return "0";
  std::string out;
  for (const auto& [m, c] : p.terms()) {
    if (!out.empty()) out += " + ";
    out += format_coefficient(c);
    for (const auto& [v, e] : m.powers()) {
      out += "*";
      out += v.name();
      if (e != 1) out += "^" + std::to_string(e);
    }
  }
  return out;
}

std::vector<Monomial> monomial_basis(std::span<const Variable> vars,
                                     int degree) {
  std::vector<Monomial> basis{Monomial()};
  if (degree < 0) return {};
  // Extend one variable at a time, then sort into graded-lex order.
  for (Variable v : vars) {
    std::vector<Monomial> next;
    for (const auto& m : basis) {
      for (int e = 0; m.degree() + e <= degree; ++e) {
        next.push_back(m * Monomial(v, e));
      }
    }
    basis = std::move(next);
  }
  std::sort(basis.begin(), basis.end());
  return basis;
}

PolyEvaluator::PolyEvaluator(const Polynomial& p,
                             std::span<const Variable> vars)
    : num_vars_(static_cast<int>(vars.size())) {
  factor_offsets_.push_back(0);
  for (const auto& [m, c] : p.terms()) {
    coefficients_.push_back(c);
    for (const auto& [v, e] : m.powers()) {
      auto it = std::find(vars.begin(), vars.end(), v);
      if (it == vars.end()) {
        throw std::invalid_argument("variable '" + v.name() +
                                    "' not in evaluation order");
      }
      factors_.emplace_back(static_cast<int>(it - vars.begin()), e);
      max_power_ = std::max(max_power_, e);
    }
    factor_offsets_.push_back(static_cast<std::uint32_t>(factors_.size()));
  }
}

double PolyEvaluator::operator()(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != num_vars_) {
    throw std::invalid_argument("evaluation point has wrong dimension");
  }
  thread_local std::vector<double> powers;
  const int stride = max_power_ + 1;
  powers.resize(static_cast<std::size_t>(num_vars_ * stride));
  for (int i = 0; i < num_vars_; ++i) {
    double* row = powers.data() + i * stride;
    row[0] = 1.0;
    for (int e = 1; e < stride; ++e) row[e] = row[e - 1] * x[i];
  }
  double sum = 0.0;
  for (std::size_t t = 0; t < coefficients_.size(); ++t) {
    double term = coefficients_[t];
    for (auto f = factor_offsets_[t]; f < factor_offsets_[t + 1]; ++f) {
      term *= powers[static_cast<std::size_t>(factors_[f].first * stride +
                                              factors_[f].second)];
    }
    sum += term;
  }
  return sum;
}

}  // namespace reachsos
