//===- sat_gen.h - Paired SR instance generation and core labels -*- C++ -*-===//
//
// SR pairs: clauses are sampled until the formula turns unsatisfiable; the
// unsatisfiable member keeps every clause, the satisfiable member negates
// the first literal of the final clause.
//
//===----------------------------------------------------------------------===//

#ifndef POLARCORE_SAT_GEN_H
#define POLARCORE_SAT_GEN_H

#include "polarcore/cnf.h"
#include "polarcore/rng.h"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace polarcore {

struct SrConfig {
  double pBernoulli = 0.7;
  double pGeometric = 0.4;
};

/// k = 1 + Bernoulli(pBernoulli) + Geometric(pGeometric), clamped to n.
int sampleClauseLength(Rng &rng, int numVars, const SrConfig &config = {});

/// k distinct variables chosen uniformly, each negated with probability 1/2.
Clause sampleSrClause(Rng &rng, int numVars, const SrConfig &config = {});

struct SrPair {
  CnfFormula sat;
  CnfFormula unsat;
};

/// Requires numVars >= 3.
SrPair generateSrPair(int numVars, std::uint64_t seed,
                      const SrConfig &config = {});

class FormulaSatisfiable : public std::runtime_error {
public:
  FormulaSatisfiable() : std::runtime_error("formula is satisfiable") {}
};

struct LabeledInstance {
  CnfFormula formula;
  std::vector<std::size_t> coreClauseIds;
  /// 0-based, ascending.
  std::vector<int> coreVars;
  /// 1 iff the variable has a literal in some core clause.
  std::vector<std::uint8_t> labels;
};

struct LabelOptions {
  /// Deletion-based shrinking to a minimal unsatisfiable subset. Costs one
  /// solver call per core clause; intended for small formulas (n <= 40).
  bool minimize = false;
};

/// Throws FormulaSatisfiable if the solver finds a model.
LabeledInstance labelUnsatCore(const CnfFormula &formula,
                               const LabelOptions &options = {});

/// Removes clauses one at a time, keeping each removal that leaves the
/// subset unsatisfiable. `core` must index an unsatisfiable subset.
std::vector<std::size_t> minimizeCore(const CnfFormula &formula,
                                      std::vector<std::size_t> core);

/// Binary indicator over variables touched by the given clauses.
std::vector<std::uint8_t> coreVariableLabels(
    const CnfFormula &formula, const std::vector<std::size_t> &clauseIds);

struct DatasetConfig {
  int minVars = 10;
  int maxVars = 40;
  std::size_t count = 2000;
  std::uint64_t seed = 1;
  SrConfig sr;
};

/// Instance `index` of a dataset; depends only on (config, index), so any
/// subset of a dataset can be generated independently and in any order.
SrPair generateDatasetPair(const DatasetConfig &config, std::size_t index);

} // namespace polarcore

#endif // POLARCORE_SAT_GEN_H
