#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace reachsos {

/// Reference to one decision variable: entry (row, col) of a PSD block, or
/// the scalar with index `row` when `block` is negative.
struct VarRef {
  int block = -1;
  int row = 0;
  int col = 0;

  static VarRef scalar(int index) { return {-1, index, 0}; }
  bool is_scalar() const { return block < 0; }
  friend bool operator==(const VarRef&, const VarRef&) = default;
};

/// `coeff * var`. For an off-diagonal block entry the product means
/// coeff * X_pq with X symmetric, i.e. the pair (p,q),(q,p) is read once.
struct LinearTerm {
  VarRef var;
  double coeff = 0.0;
};

struct SdpEquality {
  std::vector<LinearTerm> terms;
  double rhs = 0.0;
};

struct ScalarVar {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  std::string name;
};

/// maximize objective  s.t.  equalities,  blocks ⪰ 0,  lower ≤ scalars ≤ upper.
struct SdpProblem {
  std::vector<int> block_dims;
  std::vector<ScalarVar> scalars;
  std::vector<SdpEquality> equalities;
  std::vector<LinearTerm> objective;
  double objective_constant = 0.0;

  int add_block(int dim);
  int add_scalar(double lower, double upper, std::string name = {});
  int add_equality(std::vector<LinearTerm> terms, double rhs);

  /// Throws std::invalid_argument on references to undeclared variables,
  /// non-positive block dimensions or inverted bounds.
  void validate() const;
};

/// Debug dump, one line per nonzero: `row block i j value` (block -1 marks
/// a scalar), followed by `rhs row value` lines and `obj block i j value`.
std::string to_sparse_text(const SdpProblem& problem);

/// Entry of a conic-form matrix. For PSD blocks row ≤ col and `value` is the
/// coefficient multiplying X_row,col; the LP block stores row == col.
struct ConicEntry {
  int block = 0;
  int row = 0;
  int col = 0;
  double value = 0.0;
};

/// How a scalar of the source problem is rebuilt from LP-orthant entries:
/// value = offset + x[plus] − x[minus], absent indices read as zero.
struct ScalarMap {
  double offset = 0.0;
  int plus = -1;
  int minus = -1;
};

/// Standard conic form
///   minimize ⟨C, X⟩  s.t.  ⟨A_i, X⟩ = b_i,  X ∈ S₊ⁿ¹ × … × S₊ⁿᵏ × R₊ᵖ.
/// The LP orthant has block index psd_dims.size().
struct ConicForm {
  std::vector<int> psd_dims;
  int lp_dim = 0;
  std::vector<std::vector<ConicEntry>> rows;
  std::vector<double> b;
  std::vector<ConicEntry> c;
  /// Source equality of each conic row; −1 for bound-splitting rows.
  std::vector<int> source_row;
  std::vector<ScalarMap> scalar_maps;
  /// Original maximization value = objective_offset − ⟨C, X⟩.
  double objective_offset = 0.0;
  /// Set when an equality reduces to 0 = rhs with rhs ≠ 0.
  int contradictory_row = -1;

  int lp_block() const { return static_cast<int>(psd_dims.size()); }
  int num_rows() const { return static_cast<int>(rows.size()); }
};

ConicForm to_conic(const SdpProblem& problem);

/// Sparse SDPA text (the `.dat-s` format), posed so that the SDPA "Y"
/// matrix is the conic X above and the SDPA "x" vector is the dual y.
void write_sdpa(const ConicForm& conic, std::ostream& out);

}  // namespace reachsos
