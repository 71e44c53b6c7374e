//===- hypergraph.h - Clause-literal incidence and clause graph -*- C++ -*-===//
//
// H is the 2N x M binary literal/clause incidence matrix (literal rows per
// literalRow). The clause incidence graph links clauses that share an
// identical literal, weighted by the Jaccard index of their literal sets,
// and is pruned to the top-k heaviest edges per clause.
//
// Degree inverses use 1/0 := 0 so isolated literals and clauses without
// neighbours produce zero messages.
//
//===----------------------------------------------------------------------===//

#ifndef POLARCORE_HYPERGRAPH_H
#define POLARCORE_HYPERGRAPH_H

#include "polarcore/cnf.h"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace polarcore {

/// Compressed sparse rows, columns ascending within each row.
class SparseMatrix {
public:
  struct Entry {
    std::size_t row;
    std::size_t col;
    double value;
  };

  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols);

  /// Entries may come in any order; repeated coordinates are summed.
  static SparseMatrix fromEntries(std::size_t rows, std::size_t cols,
                                  std::vector<Entry> entries);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  std::span<const std::size_t> rowPtr() const { return rowPtr_; }
  std::span<const std::uint32_t> colIdx() const { return colIdx_; }
  std::span<const double> values() const { return values_; }

  /// Zero if the coordinate is not stored.
  double at(std::size_t row, std::size_t col) const;

  SparseMatrix transpose() const;
  std::vector<double> rowSums() const;
  std::vector<double> colSums() const;
  /// diag(left) * this * diag(right).
  SparseMatrix scaled(std::span<const double> left,
                      std::span<const double> right) const;
  std::vector<std::vector<double>> toDense() const;

  /// One "row col value" line per stored entry, row-major.
  std::string toCoordinateText() const;

  friend bool operator==(const SparseMatrix &, const SparseMatrix &) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> rowPtr_{0};
  std::vector<std::uint32_t> colIdx_;
  std::vector<double> values_;
};

inline double pseudoInverse(double x) { return x == 0.0 ? 0.0 : 1.0 / x; }

struct IncidenceStructure {
  SparseMatrix incidence;             ///< H, 2N x M.
  std::vector<double> literalDegree;  ///< D, length 2N.
  std::vector<double> clauseDegree;   ///< B, length M.
};

struct ClauseIncidenceGraph {
  SparseMatrix adjacency;    ///< A_C, M x M, symmetric, zero diagonal.
  std::vector<double> degree; ///< D_C, length M.
};

IncidenceStructure buildIncidence(const CnfFormula &formula);

/// Jaccard weight |L(ci) & L(cj)| / |L(ci) | L(cj)| over literal sets.
double jaccardWeight(const Clause &a, const Clause &b);

/// Keeps the union of every clause's topK heaviest edges, plus any edge tied
/// with the topK-th weight. topK must be at least 1.
ClauseIncidenceGraph buildCig(const CnfFormula &formula, std::size_t topK);

/// The three normalized operators used by message passing.
struct MessageOperators {
  SparseMatrix literalToClause;  ///< B^-1 H^T, M x 2N.
  SparseMatrix clauseToLiteral;  ///< D^-1 H, 2N x M.
  SparseMatrix clauseToClause;   ///< D_C^-1/2 A_C D_C^-1/2, M x M.
};

MessageOperators buildOperators(const IncidenceStructure &incidence,
                                const ClauseIncidenceGraph &cig);

} // namespace polarcore

#endif // POLARCORE_HYPERGRAPH_H
