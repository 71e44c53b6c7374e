#include "polarcore/hypergraph.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace polarcore {

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), rowPtr_(rows + 1, 0) {}

SparseMatrix SparseMatrix::fromEntries(std::size_t rows, std::size_t cols,
                                       std::vector<Entry> entries) {
  for (const Entry &e : entries)
    if (e.row >= rows || e.col >= cols)
      throw std::out_of_range("sparse entry outside matrix bounds");
  std::sort(entries.begin(), entries.end(),
            [](const Entry &a, const Entry &b) {
              return a.row != b.row ? a.row < b.row : a.col < b.col;
            });
  SparseMatrix m(rows, cols);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const Entry &e = entries[k];
    if (k > 0 && entries[k - 1].row == e.row && entries[k - 1].col == e.col) {
      m.values_.back() += e.value;
      continue;
    }
    m.colIdx_.push_back(static_cast<std::uint32_t>(e.col));
    m.values_.push_back(e.value);
    ++m.rowPtr_[e.row + 1];
  }
  for (std::size_t r = 0; r < rows; ++r)
    m.rowPtr_[r + 1] += m.rowPtr_[r];
  return m;
}

double SparseMatrix::at(std::size_t row, std::size_t col) const {
  auto begin = colIdx_.begin() + static_cast<long>(rowPtr_[row]);
  auto end = colIdx_.begin() + static_cast<long>(rowPtr_[row + 1]);
  auto it = std::lower_bound(begin, end, static_cast<std::uint32_t>(col));
  if (it == end || *it != col)
    return 0.0;
  return values_[static_cast<std::size_t>(it - colIdx_.begin())];
}

SparseMatrix SparseMatrix::transpose() const {
  SparseMatrix t(cols_, rows_);
  for (std::uint32_t c : colIdx_)
    ++t.rowPtr_[c + 1];
  for (std::size_t r = 0; r < cols_; ++r)
    t.rowPtr_[r + 1] += t.rowPtr_[r];
  t.colIdx_.resize(nnz());
  t.values_.resize(nnz());
  std::vector<std::size_t> fill(t.rowPtr_.begin(), t.rowPtr_.end() - 1);
  // Walking source rows in order keeps target columns ascending.
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = rowPtr_[r]; k < rowPtr_[r + 1]; ++k) {
      std::size_t dst = fill[colIdx_[k]]++;
      t.colIdx_[dst] = static_cast<std::uint32_t>(r);
      t.values_[dst] = values_[k];
    }
  }
  return t;
}

std::vector<double> SparseMatrix::rowSums() const {
  std::vector<double> sums(rows_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = rowPtr_[r]; k < rowPtr_[r + 1]; ++k)
      sums[r] += values_[k];
  return sums;
}

std::vector<double> SparseMatrix::colSums() const {
  std::vector<double> sums(cols_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = rowPtr_[r]; k < rowPtr_[r + 1]; ++k)
      sums[colIdx_[k]] += values_[k];
  return sums;
}

SparseMatrix SparseMatrix::scaled(std::span<const double> left,
                                  std::span<const double> right) const {
  if (left.size() != rows_ || right.size() != cols_)
    throw std::invalid_argument("scaling vector length mismatch");
  SparseMatrix m = *this;
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = rowPtr_[r]; k < rowPtr_[r + 1]; ++k)
      m.values_[k] = left[r] * values_[k] * right[colIdx_[k]];
  return m;
}

std::vector<std::vector<double>> SparseMatrix::toDense() const {
  std::vector<std::vector<double>> dense(rows_, std::vector<double>(cols_, 0.0));
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = rowPtr_[r]; k < rowPtr_[r + 1]; ++k)
      dense[r][colIdx_[k]] = values_[k];
  return dense;
}

std::string SparseMatrix::toCoordinateText() const {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = rowPtr_[r]; k < rowPtr_[r + 1]; ++k)
      out << r << ' ' << colIdx_[k] << ' ' << values_[k] << '\n';
  return out.str();
}

namespace {

/// Sorted, deduplicated literal rows of a clause.
std::vector<std::size_t> literalSet(const Clause &clause, int numVars) {
  std::vector<std::size_t> rows;
  rows.reserve(clause.size());
  for (int lit : clause)
    rows.push_back(literalRow(lit, numVars));
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  return rows;
}

} // namespace

IncidenceStructure buildIncidence(const CnfFormula &formula) {
  std::size_t numRows = 2 * static_cast<std::size_t>(formula.numVars());
  std::vector<SparseMatrix::Entry> entries;
  entries.reserve(formula.numOccurrences());
  for (std::size_t j = 0; j < formula.numClauses(); ++j)
    for (std::size_t row : literalSet(formula.clause(j), formula.numVars()))
      entries.push_back({row, j, 1.0});
  IncidenceStructure out;
  out.incidence =
      SparseMatrix::fromEntries(numRows, formula.numClauses(), std::move(entries));
  out.literalDegree = out.incidence.rowSums();
  out.clauseDegree = out.incidence.colSums();
  return out;
}

double jaccardWeight(const Clause &a, const Clause &b) {
  int n = 0;
  for (int lit : a)
    n = std::max(n, std::abs(lit));
  for (int lit : b)
    n = std::max(n, std::abs(lit));
  auto sa = literalSet(a, n);
  auto sb = literalSet(b, n);
  std::vector<std::size_t> common;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(),
                        std::back_inserter(common));
  std::size_t unionSize = sa.size() + sb.size() - common.size();
  return unionSize == 0 ? 0.0
                        : static_cast<double>(common.size()) /
                              static_cast<double>(unionSize);
}

ClauseIncidenceGraph buildCig(const CnfFormula &formula, std::size_t topK) {
  if (topK == 0)
    throw std::invalid_argument("top_k must be at least 1");
  std::size_t m = formula.numClauses();
  std::size_t numRows = 2 * static_cast<std::size_t>(formula.numVars());

  std::vector<std::vector<std::size_t>> sets(m);
  std::vector<std::vector<std::uint32_t>> occurrences(numRows);
  for (std::size_t j = 0; j < m; ++j) {
    sets[j] = literalSet(formula.clause(j), formula.numVars());
    for (std::size_t row : sets[j])
      occurrences[row].push_back(static_cast<std::uint32_t>(j));
  }

  struct Candidate {
    std::uint32_t other;
    double weight;
  };
  std::vector<std::vector<Candidate>> candidates(m);
  std::vector<std::uint32_t> shared(m, 0);
  std::vector<std::uint32_t> touched;
  for (std::size_t i = 0; i < m; ++i) {
    touched.clear();
    for (std::size_t row : sets[i]) {
      for (std::uint32_t j : occurrences[row]) {
        if (j <= i)
          continue;
        if (shared[j]++ == 0)
          touched.push_back(j);
      }
    }
    for (std::uint32_t j : touched) {
      double common = shared[j];
      double unionSize =
          static_cast<double>(sets[i].size() + sets[j].size()) - common;
      double w = common / unionSize;
      candidates[i].push_back({j, w});
      candidates[j].push_back({static_cast<std::uint32_t>(i), w});
      shared[j] = 0;
    }
  }

  std::vector<SparseMatrix::Entry> entries;
  for (std::size_t i = 0; i < m; ++i) {
    auto &row = candidates[i];
    std::sort(row.begin(), row.end(),
              [](const Candidate &a, const Candidate &b) {
                return a.weight != b.weight ? a.weight > b.weight
                                            : a.other < b.other;
              });
    if (row.size() > topK) {
      double cut = row[topK - 1].weight;
      std::size_t keep = topK;
      while (keep < row.size() && row[keep].weight == cut)
        ++keep;
      row.resize(keep);
    }
    for (const Candidate &c : row) {
      entries.push_back({i, c.other, c.weight});
      entries.push_back({c.other, i, c.weight});
    }
  }
  // An edge kept by both endpoints appears twice per direction; keep one.
  std::sort(entries.begin(), entries.end(),
            [](const SparseMatrix::Entry &a, const SparseMatrix::Entry &b) {
              return a.row != b.row ? a.row < b.row : a.col < b.col;
            });
  entries.erase(std::unique(entries.begin(), entries.end(),
                            [](const SparseMatrix::Entry &a,
                               const SparseMatrix::Entry &b) {
                              return a.row == b.row && a.col == b.col;
                            }),
                entries.end());

  ClauseIncidenceGraph out;
  out.adjacency = SparseMatrix::fromEntries(m, m, std::move(entries));
  out.degree = out.adjacency.colSums();
  return out;
}

MessageOperators buildOperators(const IncidenceStructure &incidence,
                                const ClauseIncidenceGraph &cig) {
  const SparseMatrix &h = incidence.incidence;
  std::vector<double> invD(h.rows()), invB(h.cols()), invSqrtDc(cig.degree.size());
  for (std::size_t i = 0; i < invD.size(); ++i)
    invD[i] = pseudoInverse(incidence.literalDegree[i]);
  for (std::size_t j = 0; j < invB.size(); ++j)
    invB[j] = pseudoInverse(incidence.clauseDegree[j]);
  for (std::size_t j = 0; j < invSqrtDc.size(); ++j)
    invSqrtDc[j] = pseudoInverse(std::sqrt(cig.degree[j]));

  std::vector<double> onesRows(h.rows(), 1.0), onesCols(h.cols(), 1.0);
  MessageOperators ops;
  ops.literalToClause = h.transpose().scaled(invB, onesRows);
  ops.clauseToLiteral = h.scaled(invD, onesCols);
  ops.clauseToClause = cig.adjacency.scaled(invSqrtDc, invSqrtDc);
  return ops;
}

} // namespace polarcore
