#include "polarcore/sat_gen.h"

#include "polarcore/cdcl.h"

#include <algorithm>
#include <cstdlib>
#include <numeric>

namespace polarcore {

int sampleClauseLength(Rng &rng, int numVars, const SrConfig &config) {
  int k = 1 + (rng.bernoulli(config.pBernoulli) ? 1 : 0) +
          rng.geometric(config.pGeometric);
  return std::min(k, numVars);
}

Clause sampleSrClause(Rng &rng, int numVars, const SrConfig &config) {
  int k = sampleClauseLength(rng, numVars, config);
  // Partial Fisher-Yates over the variable pool.
  std::vector<int> pool(static_cast<std::size_t>(numVars));
  std::iota(pool.begin(), pool.end(), 1);
  Clause clause;
  clause.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    std::size_t remaining = pool.size() - static_cast<std::size_t>(i);
    std::size_t pick = static_cast<std::size_t>(i) + rng.below(remaining);
    std::swap(pool[static_cast<std::size_t>(i)], pool[pick]);
    int var = pool[static_cast<std::size_t>(i)];
    clause.push_back(rng.bernoulli(0.5) ? -var : var);
  }
  return clause;
}

SrPair generateSrPair(int numVars, std::uint64_t seed,
                      const SrConfig &config) {
  if (numVars < 3)
    throw std::invalid_argument("SR generation needs at least 3 variables");
  Rng rng(seed);
  Solver solver(numVars);
  std::vector<Clause> clauses;
  for (;;) {
    Clause clause = sampleSrClause(rng, numVars, config);
    solver.addClause(clause);
    clauses.push_back(std::move(clause));
    if (solver.solve().status == SolveStatus::Unsat)
      break;
  }
  std::vector<Clause> satClauses = clauses;
  satClauses.back()[0] = -satClauses.back()[0];
  return {CnfFormula(numVars, std::move(satClauses)),
          CnfFormula(numVars, std::move(clauses))};
}

std::vector<std::uint8_t>
coreVariableLabels(const CnfFormula &formula,
                   const std::vector<std::size_t> &clauseIds) {
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(formula.numVars()),
                                   0);
  for (std::size_t id : clauseIds)
    for (int lit : formula.clause(id))
      labels[static_cast<std::size_t>(std::abs(lit) - 1)] = 1;
  return labels;
}

std::vector<std::size_t> minimizeCore(const CnfFormula &formula,
                                      std::vector<std::size_t> core) {
  std::size_t i = 0;
  while (i < core.size()) {
    std::vector<std::size_t> trial;
    trial.reserve(core.size() - 1);
    for (std::size_t k = 0; k < core.size(); ++k)
      if (k != i)
        trial.push_back(core[k]);
    SolverResult r = solve(subformula(formula, trial));
    if (r.status == SolveStatus::Unsat) {
      // The solver's own core of the trial subset may be smaller still;
      // everything before position i was already shown necessary.
      std::vector<std::size_t> shrunk;
      shrunk.reserve(r.coreClauseIds.size());
      for (std::size_t local : r.coreClauseIds)
        shrunk.push_back(trial[local]);
      std::vector<std::size_t> next;
      for (std::size_t k = 0; k < i; ++k)
        next.push_back(core[k]);
      for (std::size_t id : shrunk)
        if (std::find(core.begin(), core.begin() + static_cast<long>(i), id) ==
            core.begin() + static_cast<long>(i))
          next.push_back(id);
      std::sort(next.begin() + static_cast<long>(i), next.end());
      core = std::move(next);
    } else {
      ++i;
    }
  }
  std::sort(core.begin(), core.end());
  return core;
}

LabeledInstance labelUnsatCore(const CnfFormula &formula,
                               const LabelOptions &options) {
  SolverResult r = solve(formula);
  if (r.status == SolveStatus::Sat)
    throw FormulaSatisfiable();
  if (r.status != SolveStatus::Unsat)
    throw std::runtime_error("solver returned UNKNOWN while labeling");

  LabeledInstance out;
  out.formula = formula;
  out.coreClauseIds = options.minimize
                          ? minimizeCore(formula, std::move(r.coreClauseIds))
                          : std::move(r.coreClauseIds);
  out.labels = coreVariableLabels(formula, out.coreClauseIds);
  for (std::size_t v = 0; v < out.labels.size(); ++v)
    if (out.labels[v])
      out.coreVars.push_back(static_cast<int>(v));
  return out;
}

SrPair generateDatasetPair(const DatasetConfig &config, std::size_t index) {
  if (config.minVars < 3 || config.maxVars < config.minVars)
    throw std::invalid_argument("bad variable range");
  Rng rng = Rng(config.seed).split(index);
  std::uint64_t span =
      static_cast<std::uint64_t>(config.maxVars - config.minVars + 1);
  int n = config.minVars + static_cast<int>(rng.below(span));
  return generateSrPair(n, rng.next(), config.sr);
}

} // namespace polarcore
