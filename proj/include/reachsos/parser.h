#pragma once

#include <cstddef>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

#include "reachsos/polynomial.h"

namespace reachsos {

/// Raised for malformed polynomial text. `position()` is the 0-based
/// character offset where parsing stopped.
class ParseError : public std::invalid_argument {
 public:
  ParseError(const std::string& message, std::size_t position);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Parses real literals, identifiers, `+ - * /`, `^` with a non-negative
/// integer exponent, and parentheses into an expanded Polynomial. Division
/// is only allowed by constant subexpressions. Identifiers must belong to
/// `allowed_vars` (an empty set allows any name).
Polynomial parse_polynomial(std::string_view text,
                            const std::set<std::string>& allowed_vars = {});

}  // namespace reachsos
