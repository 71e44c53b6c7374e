//===- cnf.h - CNF formulas, DIMACS I/O and literal indexing ---*- C++ -*-===//
//
// A CnfFormula is the universal input object: a variable count and an
// ordered list of clauses over 1-based signed literals. Literal rows follow
// the convention used by every downstream module: variable i (0-based) owns
// row 2i for its positive literal and row 2i+1 for its negative literal.
//
//===----------------------------------------------------------------------===//

#ifndef POLARCORE_CNF_H
#define POLARCORE_CNF_H

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace polarcore {

using Clause = std::vector<int>;

/// Raised for malformed DIMACS input. The message names the offending line.
class ParseError : public std::runtime_error {
public:
  enum class Kind {
    MissingHeader,
    DuplicateHeader,
    MalformedHeader,
    LiteralOutOfRange,
    ClauseCountMismatch,
    EmptyClause,
    BadToken,
  };

  ParseError(Kind kind, std::size_t line, const std::string &what);

  Kind kind() const { return kind_; }
  std::size_t line() const { return line_; }

private:
  Kind kind_;
  std::size_t line_;
};

class CnfFormula {
public:
  CnfFormula() = default;
  /// Validates literal ranges; throws std::invalid_argument on violation.
  CnfFormula(int numVars, std::vector<Clause> clauses);

  int numVars() const { return numVars_; }
  std::size_t numClauses() const { return clauses_.size(); }
  const std::vector<Clause> &clauses() const { return clauses_; }
  const Clause &clause(std::size_t j) const { return clauses_[j]; }

  /// Total literal occurrences, counting in-clause duplicates.
  std::size_t numOccurrences() const;

  friend bool operator==(const CnfFormula &, const CnfFormula &) = default;

private:
  int numVars_ = 0;
  std::vector<Clause> clauses_;
};

CnfFormula parseDimacs(std::string_view text);
std::string serializeDimacs(const CnfFormula &formula);

/// Negates every literal, keeping variable and clause order.
CnfFormula polarityFlip(const CnfFormula &formula);

/// Row of a signed literal in the 2N literal layout. Throws
/// std::out_of_range if |lit| is not in [1, numVars].
std::size_t literalRow(int lit, int numVars);

/// Inverse of literalRow.
inline int rowLiteral(std::size_t row) {
  int var = static_cast<int>(row / 2) + 1;
  return (row & 1U) ? -var : var;
}

inline std::size_t complementRow(std::size_t row) { return row ^ 1U; }

/// Clause subset in the given order (ids index into formula.clauses()).
CnfFormula subformula(const CnfFormula &formula,
                      const std::vector<std::size_t> &clauseIds);

} // namespace polarcore

#endif // POLARCORE_CNF_H
