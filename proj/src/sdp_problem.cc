#include "reachsos/sdp_problem.h"

#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace reachsos {

int SdpProblem::add_block(int dim) {
  if (dim < 1) throw std::invalid_argument("block dimension must be positive");
  block_dims.push_back(dim);
  return static_cast<int>(block_dims.size()) - 1;
}

int SdpProblem::add_scalar(double lower, double upper, std::string name) {
  scalars.push_back({lower, upper, std::move(name)});
  return static_cast<int>(scalars.size()) - 1;
}

int SdpProblem::add_equality(std::vector<LinearTerm> terms, double rhs) {
  equalities.push_back({std::move(terms), rhs});
  return static_cast<int>(equalities.size()) - 1;
}

namespace {

void check_ref(const SdpProblem& p, const VarRef& v) {
  if (v.is_scalar()) {
    if (v.row < 0 || v.row >= static_cast<int>(p.scalars.size())) {
      throw std::invalid_argument("reference to undeclared scalar " +
                                  std::to_string(v.row));
    }
    return;
  }
  if (v.block >= static_cast<int>(p.block_dims.size())) {
    throw std::invalid_argument("reference to undeclared block " +
                                std::to_string(v.block));
  }
  const int n = p.block_dims[v.block];
  if (v.row < 0 || v.row >= n || v.col < 0 || v.col >= n) {
    throw std::invalid_argument("entry outside block " +
                                std::to_string(v.block));
  }
}

}  // namespace

void SdpProblem::validate() const {
  for (int d : block_dims) {
    if (d < 1) throw std::invalid_argument("block dimension must be positive");
  }
  for (const ScalarVar& s : scalars) {
    if (!(s.lower <= s.upper)) {
      throw std::invalid_argument("scalar '" + s.name + "' has empty bounds");
    }
  }
  for (const SdpEquality& e : equalities) {
    for (const LinearTerm& t : e.terms) check_ref(*this, t.var);
  }
  for (const LinearTerm& t : objective) check_ref(*this, t.var);
}

std::string to_sparse_text(const SdpProblem& problem) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "# blocks";
  for (int d : problem.block_dims) out << ' ' << d;
  out << "\n# scalars " << problem.scalars.size() << "\n";
  for (std::size_t i = 0; i < problem.equalities.size(); ++i) {
    for (const LinearTerm& t : problem.equalities[i].terms) {
      out << i << ' ' << t.var.block << ' ' << t.var.row << ' ' << t.var.col
          << ' ' << t.coeff << '\n';
    }
  }
  for (std::size_t i = 0; i < problem.equalities.size(); ++i) {
    out << "rhs " << i << ' ' << problem.equalities[i].rhs << '\n';
  }
  for (const LinearTerm& t : problem.objective) {
    out << "obj " << t.var.block << ' ' << t.var.row << ' ' << t.var.col << ' '
        << t.coeff << '\n';
  }
  return out.str();
}

namespace {

using EntryKey = std::tuple<int, int, int>;

std::vector<ConicEntry> flatten(const std::map<EntryKey, double>& acc) {
  std::vector<ConicEntry> out;
  out.reserve(acc.size());
  for (const auto& [key, value] : acc) {
    if (value == 0.0) continue;
    out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), value});
  }
  return out;
}

// Adds coeff * var to `acc`, rewriting scalars through their maps; returns
// the constant contribution.
double accumulate(const ConicForm& conic, const LinearTerm& t,
                  std::map<EntryKey, double>* acc) {
  if (t.var.is_scalar()) {
    const ScalarMap& m = conic.scalar_maps[t.var.row];
    const int lp = conic.lp_block();
    if (m.plus >= 0) (*acc)[{lp, m.plus, m.plus}] += t.coeff;
    if (m.minus >= 0) (*acc)[{lp, m.minus, m.minus}] -= t.coeff;
    return t.coeff * m.offset;
  }
  const int r = std::min(t.var.row, t.var.col);
  const int c = std::max(t.var.row, t.var.col);
  (*acc)[{t.var.block, r, c}] += t.coeff;
  return 0.0;
}

}  // namespace

ConicForm to_conic(const SdpProblem& problem) {
  problem.validate();
  ConicForm conic;
  conic.psd_dims = problem.block_dims;
  const int lp = conic.lp_block();

  std::vector<std::pair<int, double>> box_rows;  // (plus index, width)
  std::vector<int> box_slack;
  for (const ScalarVar& s : problem.scalars) {
    ScalarMap m;
    const bool has_lo = std::isfinite(s.lower);
    const bool has_hi = std::isfinite(s.upper);
    if (has_lo && has_hi && s.lower == s.upper) {
      m.offset = s.lower;
    } else if (has_lo && has_hi) {
      m.offset = s.lower;
      m.plus = conic.lp_dim++;
      box_rows.emplace_back(m.plus, s.upper - s.lower);
      box_slack.push_back(conic.lp_dim++);
    } else if (has_lo) {
      m.offset = s.lower;
      m.plus = conic.lp_dim++;
    } else if (has_hi) {
      m.offset = s.upper;
      m.minus = conic.lp_dim++;
    } else {
      m.plus = conic.lp_dim++;
      m.minus = conic.lp_dim++;
    }
    conic.scalar_maps.push_back(m);
  }

  for (std::size_t i = 0; i < problem.equalities.size(); ++i) {
    const SdpEquality& eq = problem.equalities[i];
    std::map<EntryKey, double> acc;
    double constant = 0.0;
    for (const LinearTerm& t : eq.terms) constant += accumulate(conic, t, &acc);
    std::vector<ConicEntry> row = flatten(acc);
    const double rhs = eq.rhs - constant;
    if (row.empty()) {
      const double scale = 1.0 + std::abs(eq.rhs) + std::abs(constant);
      if (std::abs(rhs) > 1e-12 * scale && conic.contradictory_row < 0) {
        conic.contradictory_row = static_cast<int>(i);
      }
      continue;
    }
    conic.rows.push_back(std::move(row));
    conic.b.push_back(rhs);
    conic.source_row.push_back(static_cast<int>(i));
  }
  for (std::size_t k = 0; k < box_rows.size(); ++k) {
    const int p = box_rows[k].first;
    const int q = box_slack[k];
    conic.rows.push_back({{lp, p, p, 1.0}, {lp, q, q, 1.0}});
    conic.b.push_back(box_rows[k].second);
    conic.source_row.push_back(-1);
  }

  std::map<EntryKey, double> obj;
  double constant = problem.objective_constant;
  for (const LinearTerm& t : problem.objective) {
    constant += accumulate(conic, {t.var, -t.coeff}, &obj) * -1.0;
  }
  conic.c = flatten(obj);
  conic.objective_offset = constant;
  return conic;
}

void write_sdpa(const ConicForm& conic, std::ostream& out) {
  out << std::setprecision(17);
  out << "\"reachsos conic problem\"\n";
  out << conic.num_rows() << "\n";
  const int nblocks = conic.lp_block() + (conic.lp_dim > 0 ? 1 : 0);
  out << nblocks << "\n";
  for (int d : conic.psd_dims) out << d << ' ';
  if (conic.lp_dim > 0) out << -conic.lp_dim;
  out << "\n";
  for (double bi : conic.b) out << bi << ' ';
  out << "\n";
  auto emit = [&](int mat, const ConicEntry& e, double sign) {
    const double v = e.row == e.col ? e.value : e.value / 2.0;
    out << mat << ' ' << e.block + 1 << ' ' << e.row + 1 << ' ' << e.col + 1
        << ' ' << sign * v << "\n";
  };
  for (const ConicEntry& e : conic.c) emit(0, e, -1.0);
  for (int i = 0; i < conic.num_rows(); ++i) {
    for (const ConicEntry& e : conic.rows[i]) emit(i + 1, e, 1.0);
  }
}

}  // namespace reachsos
