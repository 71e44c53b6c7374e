//===- cdcl.h - Embedded CDCL solver with core extraction ------*- C++ -*-===//
//
// Two-watched-literal propagation, first-UIP learning, VSIDS activities with
// multiplicative decay, Luby restarts and phase saving. Every learned clause
// remembers the clauses it was resolved from, so an UNSAT answer comes with
// a set of original clauses that is itself unsatisfiable.
//
// External scores can be injected into the branching heuristic: activities
// are overwritten with the (min-max normalized) scores before the first
// decision and again every `period` conflicts.
//
//===----------------------------------------------------------------------===//

#ifndef POLARCORE_CDCL_H
#define POLARCORE_CDCL_H

#include "polarcore/cnf.h"

#include <cstdlib>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace polarcore {

enum class SolveStatus { Sat, Unsat, Unknown };

const char *toString(SolveStatus status);

struct SolverStats {
  std::uint64_t conflicts = 0;
  std::uint64_t decisions = 0;
  std::uint64_t propagations = 0;
  std::uint64_t restarts = 0;
  std::uint64_t overwrites = 0;
};

struct SolverResult {
  SolveStatus status = SolveStatus::Unknown;
  /// Truth value per variable (0-based); filled for Sat only.
  std::vector<bool> model;
  /// Indices into the original clause list; filled for Unsat only.
  std::vector<std::size_t> coreClauseIds;
  SolverStats stats;
};

struct GuidanceConfig {
  std::vector<double> scores;
  /// Conflicts between overwrites.
  std::uint64_t period = 1000;
  /// When set, overwrite on wall-clock time instead of conflict count.
  std::optional<double> periodSeconds;
  bool enabled = true;

  /// Throws std::invalid_argument on non-finite scores, wrong length or a
  /// zero period.
  void validate(int numVars) const;
};

/// Min-max normalization to [0, 1]; a constant vector maps to all zeros.
std::vector<double> normalizeScores(std::span<const double> scores);

/// Per-variable assignment: 1 true, -1 false, 0 unassigned.
using VarValue = std::int8_t;

struct DecisionEvent {
  int var;                            ///< 0-based decision variable.
  bool negated;                       ///< Polarity chosen for it.
  bool firstSinceOverwrite;           ///< No decision since the last overwrite.
  std::span<const VarValue> assigns;  ///< State just before the decision.
};

struct SolverOptions {
  double varDecay = 0.95;
  std::uint64_t lubyBase = 64;
  std::function<void(const DecisionEvent &)> onDecision;
};

class Solver {
public:
  explicit Solver(int numVars, SolverOptions options = {});
  explicit Solver(const CnfFormula &formula, SolverOptions options = {});

  int numVars() const { return numVars_; }

  /// Adds an original clause (1-based signed literals) and returns its id.
  /// Ids are assigned consecutively from 0. May be called between solves.
  std::size_t addClause(std::span<const int> lits);

  void setGuidance(GuidanceConfig guidance);
  void clearGuidance() { guidance_.reset(); }

  SolverResult solve(std::optional<std::uint64_t> conflictBudget = {});

  /// Original clause ids reachable from the final conflict through learned
  /// clause antecedents and level-0 reasons. Throws std::logic_error unless
  /// the last solve returned Unsat.
  std::vector<std::size_t> extractCore() const;

  const SolverStats &stats() const { return stats_; }

private:
  static constexpr std::uint32_t kNoReason = UINT32_MAX;

  struct ClauseData {
    std::vector<std::uint32_t> lits;
    std::vector<std::uint32_t> antecedents;
    std::int64_t originalId = -1;
    bool learnt = false;
  };

  struct Watcher {
    std::uint32_t cref;
    std::uint32_t blocker;
  };

  static std::uint32_t var(std::uint32_t lit) { return lit >> 1; }
  static std::uint32_t neg(std::uint32_t lit) { return lit ^ 1U; }
  static std::uint32_t encode(int dimacs) {
    return 2U * static_cast<std::uint32_t>(std::abs(dimacs) - 1) +
           (dimacs < 0 ? 1U : 0U);
  }

  VarValue value(std::uint32_t lit) const {
    VarValue v = assigns_[var(lit)];
    return (lit & 1U) ? static_cast<VarValue>(-v) : v;
  }
  int decisionLevel() const { return static_cast<int>(trailLim_.size()); }

  void enqueue(std::uint32_t lit, std::uint32_t reason);
  std::uint32_t propagate();
  void analyze(std::uint32_t conflict, std::vector<std::uint32_t> &learnt,
               std::vector<std::uint32_t> &antecedents, int &backtrackLevel);
  void backtrack(int level);
  void attach(std::uint32_t cref);
  void bump(std::uint32_t v);
  void overwriteActivities();
  std::optional<std::uint32_t> pickBranchVar();

  // Max-heap over variables keyed by activity, ties to the lower index.
  bool heapLess(std::uint32_t a, std::uint32_t b) const {
    return activity_[a] > activity_[b] ||
           (activity_[a] == activity_[b] && a < b);
  }
  void heapInsert(std::uint32_t v);
  void heapSiftUp(std::size_t pos);
  void heapSiftDown(std::size_t pos);
  std::uint32_t heapPop();
  void heapRebuild();

  int numVars_;
  SolverOptions options_;
  std::optional<GuidanceConfig> guidance_;
  std::vector<double> normalizedScores_;

  std::vector<ClauseData> clauses_;
  std::size_t numOriginal_ = 0;
  std::vector<std::vector<Watcher>> watches_;
  std::vector<VarValue> assigns_;
  std::vector<int> level_;
  std::vector<std::uint32_t> reason_;
  std::vector<bool> phase_;
  std::vector<double> activity_;
  double varInc_ = 1.0;
  std::vector<std::uint32_t> trail_;
  std::vector<std::size_t> trailLim_;
  std::size_t qhead_ = 0;
  std::vector<char> seen_;

  std::vector<std::uint32_t> heap_;
  std::vector<std::int64_t> heapPos_;

  bool unsat_ = false;
  std::uint32_t finalConflict_ = kNoReason;
  bool freshOverwrite_ = false;
  SolverStats stats_;
};

/// One-shot convenience wrapper. With guidance, activities are overwritten
/// at the start and every guidance->period conflicts.
SolverResult solve(const CnfFormula &formula,
                   const GuidanceConfig *guidance = nullptr,
                   std::optional<std::uint64_t> conflictBudget = {},
                   SolverOptions options = {});

/// True iff every clause has a satisfied literal. Throws
/// std::invalid_argument if model.size() != numVars.
bool checkAssignment(const CnfFormula &formula, const std::vector<bool> &model);

/// Luby sequence 1 1 2 1 1 2 4 ..., 0-based index.
std::uint64_t luby(std::uint64_t index);

} // namespace polarcore

#endif // POLARCORE_CDCL_H
