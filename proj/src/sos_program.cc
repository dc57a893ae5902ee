#include "reachsos/sos_program.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace reachsos {

namespace {
constexpr double kPrune = 1e-15;
}

LinearExpr LinearExpr::Decision(int id, double coeff) {
  LinearExpr e;
  if (coeff != 0.0) e.terms_[id] = coeff;
  return e;
}

double LinearExpr::eval(const std::vector<double>& values) const {
  double s = constant_;
  for (const auto& [id, c] : terms_) s += c * values.at(id);
  return s;
}

void LinearExpr::prune() {
  std::erase_if(terms_, [](const auto& kv) { return std::abs(kv.second) < kPrune; });
}

void LinearExpr::add_scaled(const LinearExpr& o, double c) {
  if (c == 0.0) return;
  constant_ += c * o.constant_;
  for (const auto& [id, v] : o.terms_) terms_[id] += c * v;
  prune();
}

LinearExpr& LinearExpr::operator+=(const LinearExpr& o) {
  add_scaled(o, 1.0);
  return *this;
}

LinearExpr& LinearExpr::operator-=(const LinearExpr& o) {
  add_scaled(o, -1.0);
  return *this;
}

LinearExpr& LinearExpr::operator*=(double c) {
  constant_ *= c;
  for (auto& [id, v] : terms_) v *= c;
  prune();
  return *this;
}

AffinePolynomial::AffinePolynomial(const Polynomial& p) {
  for (const auto& [m, c] : p.terms()) terms_[m] = LinearExpr(c);
}

AffinePolynomial::AffinePolynomial(TermMap terms) : terms_(std::move(terms)) {
  prune();
}

void AffinePolynomial::prune() {
  std::erase_if(terms_, [](const auto& kv) {
    return kv.second.terms().empty() && std::abs(kv.second.constant()) < kPrune;
  });
}

int AffinePolynomial::degree() const {
  int d = -1;
  for (const auto& [m, e] : terms_) d = std::max(d, m.degree());
  return d;
}

std::vector<Variable> AffinePolynomial::variables() const {
  std::set<Variable> vars;
  for (const auto& [m, e] : terms_) {
    for (const auto& [v, p] : m.powers()) vars.insert(v);
  }
  return {vars.begin(), vars.end()};
}

Polynomial AffinePolynomial::eval(const std::vector<double>& values) const {
  Polynomial::TermMap out;
  for (const auto& [m, e] : terms_) out[m] = e.eval(values);
  return Polynomial(std::move(out));
}

void AffinePolynomial::add_product(const AffinePolynomial& p, const Polynomial& q,
                                   double c) {
  for (const auto& [mp, ep] : p.terms_) {
    for (const auto& [mq, cq] : q.terms()) terms_[mp * mq].add_scaled(ep, c * cq);
  }
  prune();
}

AffinePolynomial& AffinePolynomial::operator+=(const AffinePolynomial& o) {
  for (const auto& [m, e] : o.terms_) terms_[m] += e;
  prune();
  return *this;
}

AffinePolynomial& AffinePolynomial::operator-=(const AffinePolynomial& o) {
  for (const auto& [m, e] : o.terms_) terms_[m] -= e;
  prune();
  return *this;
}

AffinePolynomial& AffinePolynomial::operator*=(double c) {
  for (auto& [m, e] : terms_) e *= c;
  prune();
  return *this;
}

AffinePolynomial DecisionPoly::expr() const {
  AffinePolynomial::TermMap terms;
  for (std::size_t j = 0; j < basis.size(); ++j) {
    terms[basis[j]] = LinearExpr::Decision(coeff_ids[j]);
  }
  return AffinePolynomial(std::move(terms));
}

AffinePolynomial DecisionPoly::transformed(
    const std::function<Polynomial(const Polynomial&)>& op) const {
  AffinePolynomial::TermMap terms;
  for (std::size_t j = 0; j < basis.size(); ++j) {
    const Polynomial image = op(Polynomial(basis[j]));
    for (const auto& [m, c] : image.terms()) {
      terms[m].add_scaled(LinearExpr::Decision(coeff_ids[j]), c);
    }
  }
  return AffinePolynomial(std::move(terms));
}

std::vector<Monomial> gram_basis(const std::vector<Variable>& vars, int degree) {
  const int half = degree <= 0 ? 0 : (degree + 1) / 2;
  return monomial_basis(vars, half);
}

int SosProgram::new_scalar(double lower, double upper, std::string name) {
  scalars_.push_back({lower, upper, std::move(name)});
  refs_.push_back(VarRef::scalar(static_cast<int>(scalars_.size()) - 1));
  return static_cast<int>(refs_.size()) - 1;
}

DecisionPoly SosProgram::new_template(const std::vector<Variable>& vars,
                                      int degree, double bound,
                                      const std::string& name) {
  if (degree < 0) throw std::invalid_argument("template degree must be >= 0");
  DecisionPoly p;
  p.basis = monomial_basis(vars, degree);
  for (std::size_t j = 0; j < p.basis.size(); ++j) {
    p.coeff_ids.push_back(
        new_scalar(-bound, bound, name + "[" + std::to_string(j) + "]"));
  }
  return p;
}

int SosProgram::new_gram(const std::vector<Monomial>& basis,
                         AffinePolynomial* value) {
  const int block = static_cast<int>(block_dims_.size());
  block_dims_.push_back(static_cast<int>(basis.size()));
  if (value == nullptr) return block;
  AffinePolynomial::TermMap terms;
  for (std::size_t a = 0; a < basis.size(); ++a) {
    for (std::size_t b = a; b < basis.size(); ++b) {
      refs_.push_back({block, static_cast<int>(a), static_cast<int>(b)});
      const int id = static_cast<int>(refs_.size()) - 1;
      terms[basis[a] * basis[b]] += LinearExpr::Decision(id, a == b ? 1.0 : 2.0);
    }
  }
  *value = AffinePolynomial(std::move(terms));
  return block;
}

SosPoly SosProgram::new_sos_poly(const std::vector<Variable>& vars, int degree,
                                 const std::string&) {
  SosPoly s;
  s.basis = gram_basis(vars, degree);
  s.block = new_gram(s.basis, &s.value);
  return s;
}

int SosProgram::add_sos(const AffinePolynomial& expression,
                        const std::string& name) {
  SosRow row;
  row.name = name.empty() ? "sos" + std::to_string(rows_.size()) : name;
  row.expression = expression;
  row.basis = gram_basis(expression.variables(), expression.degree());
  row.block = new_gram(row.basis, nullptr);
  rows_.push_back(std::move(row));
  return rows_.back().block;
}

int SosProgram::add_psd(const std::vector<std::vector<LinearExpr>>& matrix,
                        const std::string&) {
  const int block = static_cast<int>(block_dims_.size());
  block_dims_.push_back(static_cast<int>(matrix.size()));
  lmis_.emplace_back(matrix, block);
  return block;
}

void SosProgram::add_equality(const LinearExpr& expr) {
  equalities_.push_back(expr);
}

void SosProgram::set_objective(const LinearExpr& objective) {
  objective_ = objective;
}

std::vector<double> moment_weights(const std::vector<Monomial>& basis,
                                   const SublevelSet& set) {
  std::vector<double> w;
  w.reserve(basis.size());
  for (const Monomial& m : basis) w.push_back(monomial_moment(set, m));
  return w;
}

std::vector<double> sample_weights(const std::vector<Monomial>& basis,
                                   const std::vector<Variable>& vars,
                                   const PointSet& points) {
  std::vector<double> w(basis.size(), 0.0);
  for (std::size_t j = 0; j < basis.size(); ++j) {
    std::vector<std::pair<int, int>> idx;
    for (const auto& [v, p] : basis[j].powers()) {
      const auto it = std::find(vars.begin(), vars.end(), v);
      if (it == vars.end()) {
        throw std::invalid_argument("basis variable '" + v.name() +
                                    "' missing from sample coordinates");
      }
      idx.emplace_back(static_cast<int>(it - vars.begin()), p);
    }
    double s = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      double t = 1.0;
      for (auto [k, p] : idx) t *= std::pow(points(i, k), p);
      s += t;
    }
    w[j] = s;
  }
  return w;
}

void SosProgram::set_objective_integral(const DecisionPoly& v,
                                        const SublevelSet& set,
                                        ObjectiveMode mode, int samples,
                                        std::uint64_t seed) {
  std::vector<double> w;
  if (mode == ObjectiveMode::kClosedForm && has_closed_form_moments(set)) {
    w = moment_weights(v.basis, set);
  } else {
    w = sample_weights(v.basis, set.vars(), sample_uniform(set, samples, seed));
  }
  LinearExpr obj;
  for (std::size_t j = 0; j < w.size(); ++j) {
    obj += LinearExpr::Decision(v.coeff_ids[j], w[j]);
  }
  objective_ = obj;
}

namespace {

void append_linear(const std::vector<VarRef>& refs, const LinearExpr& e,
                   double sign, std::vector<LinearTerm>* terms) {
  for (const auto& [id, c] : e.terms()) terms->push_back({refs[id], sign * c});
}

}  // namespace

SdpProblem SosProgram::compile() const {
  SdpProblem prob;
  prob.block_dims = block_dims_;
  prob.scalars = scalars_;
  for (const SosRow& row : rows_) {
    std::map<Monomial, SdpEquality> eqs;
    const int n = static_cast<int>(row.basis.size());
    for (int a = 0; a < n; ++a) {
      for (int b = a; b < n; ++b) {
        eqs[row.basis[a] * row.basis[b]].terms.push_back(
            {{row.block, a, b}, a == b ? 1.0 : 2.0});
      }
    }
    for (const auto& [m, e] : row.expression.terms()) {
      SdpEquality& eq = eqs[m];
      append_linear(refs_, e, -1.0, &eq.terms);
      eq.rhs = e.constant();
    }
    for (auto& [m, eq] : eqs) prob.equalities.push_back(std::move(eq));
  }
  for (const auto& [matrix, block] : lmis_) {
    const int n = static_cast<int>(matrix.size());
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        SdpEquality eq;
        eq.terms.push_back({{block, i, j}, 1.0});
        append_linear(refs_, matrix[i][j], -1.0, &eq.terms);
        eq.rhs = matrix[i][j].constant();
        prob.equalities.push_back(std::move(eq));
      }
    }
  }
  for (const LinearExpr& e : equalities_) {
    SdpEquality eq;
    append_linear(refs_, e, 1.0, &eq.terms);
    eq.rhs = -e.constant();
    prob.equalities.push_back(std::move(eq));
  }
  append_linear(refs_, objective_, 1.0, &prob.objective);
  prob.objective_constant = objective_.constant();
  return prob;
}

std::vector<double> SosProgram::values(const SdpSolution& sol) const {
  std::vector<double> out;
  out.reserve(refs_.size());
  for (const VarRef& r : refs_) out.push_back(sol.value(r));
  return out;
}

Polynomial SosProgram::value(const DecisionPoly& p, const SdpSolution& sol) const {
  return p.expr().eval(values(sol));
}

Polynomial SosProgram::value(const SosPoly& p, const SdpSolution& sol) const {
  return p.value.eval(values(sol));
}

std::vector<IdentityResidual> SosProgram::check_identities(const SdpSolution& sol,
                                                           double tol) const {
  const std::vector<double> vals = values(sol);
  std::vector<IdentityResidual> out;
  const IdentityResidual* worst = nullptr;
  double worst_ratio = 0.0;
  for (const SosRow& row : rows_) {
    const Polynomial lhs = row.expression.eval(vals);
    const Eigen::MatrixXd& g = sol.blocks.at(row.block);
    Polynomial::TermMap gram;
    const int n = static_cast<int>(row.basis.size());
    for (int a = 0; a < n; ++a) {
      for (int b = a; b < n; ++b) {
        gram[row.basis[a] * row.basis[b]] += (a == b ? 1.0 : 2.0) * g(a, b);
      }
    }
    std::map<Monomial, double> diff(gram.begin(), gram.end());
    for (const auto& [m, c] : lhs.terms()) diff[m] -= c;
    IdentityResidual r;
    r.name = row.name;
    for (const auto& [m, d] : diff) r.max_abs = std::max(r.max_abs, std::abs(d));
    r.scale = std::max(1.0, lhs.max_abs_coefficient());
    out.push_back(r);
  }
  for (const auto& [matrix, block] : lmis_) {
    IdentityResidual r;
    r.name = "psd" + std::to_string(block);
    const Eigen::MatrixXd& x = sol.blocks.at(block);
    for (std::size_t i = 0; i < matrix.size(); ++i) {
      for (std::size_t j = i; j < matrix.size(); ++j) {
        const double e = matrix[i][j].eval(vals);
        r.max_abs = std::max(r.max_abs, std::abs(x(i, j) - e));
        r.scale = std::max(r.scale, std::abs(e));
      }
    }
    r.scale = std::max(1.0, r.scale);
    out.push_back(r);
  }
  for (const IdentityResidual& r : out) {
    const double ratio = r.max_abs / r.scale;
    if (ratio > worst_ratio) {
      worst_ratio = ratio;
      worst = &r;
    }
  }
  if (worst != nullptr && worst_ratio > tol) {
    std::ostringstream msg;
    msg << "identity '" << worst->name << "' residual " << worst->max_abs
        << " exceeds " << tol << " x scale " << worst->scale;
    throw ExtractionError(msg.str());
  }
  return out;
}

}  // namespace reachsos
