#include "polarcore/cdcl.h"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace polarcore {

namespace {
constexpr double kActivityRescale = 1e100;
} // namespace

const char *toString(SolveStatus status) {
  switch (status) {
  case SolveStatus::Sat:
    return "SAT";
  case SolveStatus::Unsat:
    return "UNSAT";
  case SolveStatus::Unknown:
    return "UNKNOWN";
  }
  return "UNKNOWN";
}

void GuidanceConfig::validate(int numVars) const {
  if (scores.size() != static_cast<std::size_t>(numVars))
    throw std::invalid_argument("guidance has " +
                                std::to_string(scores.size()) +
                                " scores for " + std::to_string(numVars) +
                                " variables");
  for (double s : scores)
    if (!std::isfinite(s))
      throw std::invalid_argument("guidance score is not finite");
  if (period == 0)
    throw std::invalid_argument("guidance period must be at least 1");
  if (periodSeconds && !(*periodSeconds > 0.0))
    throw std::invalid_argument("guidance wall-clock period must be positive");
}

std::vector<double> normalizeScores(std::span<const double> scores) {
  std::vector<double> out(scores.size(), 0.0);
  if (scores.empty())
    return out;
  auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  double range = *hi - *lo;
  if (range <= 0.0)
    return out;
  for (std::size_t i = 0; i < scores.size(); ++i)
    out[i] = (scores[i] - *lo) / range;
  return out;
}

std::uint64_t luby(std::uint64_t index) {
  // Find the finite subsequence containing index, then its position in it.
  std::uint64_t size = 1;
  int seq = 0;
  while (size < index + 1) {
    ++seq;
    size = 2 * size + 1;
  }
  while (size - 1 != index) {
    size = (size - 1) >> 1;
    --seq;
    index = index % size;
  }
  return std::uint64_t{1} << seq;
}

//===----------------------------------------------------------------------===//
// Construction
//===----------------------------------------------------------------------===//

Solver::Solver(int numVars, SolverOptions options)
    : numVars_(numVars), options_(std::move(options)) {
  if (numVars < 0)
    throw std::invalid_argument("negative variable count");
  std::size_t n = static_cast<std::size_t>(numVars);
  watches_.resize(2 * n);
  assigns_.assign(n, 0);
  level_.assign(n, 0);
  reason_.assign(n, kNoReason);
  phase_.assign(n, true);
  activity_.assign(n, 0.0);
  seen_.assign(n, 0);
  heapPos_.assign(n, -1);
  for (std::uint32_t v = 0; v < n; ++v)
    heapInsert(v);
}

Solver::Solver(const CnfFormula &formula, SolverOptions options)
    : Solver(formula.numVars(), std::move(options)) {
  for (const Clause &c : formula.clauses())
    addClause(c);
}

std::size_t Solver::addClause(std::span<const int> lits) {
  backtrack(0);
  std::size_t id = numOriginal_++;
  ClauseData data;
  data.originalId = static_cast<std::int64_t>(id);
  for (int lit : lits) {
    if (lit == 0 || std::abs(lit) > numVars_)
      throw std::invalid_argument("literal out of range: " +
                                  std::to_string(lit));
    data.lits.push_back(encode(lit));
  }
  std::sort(data.lits.begin(), data.lits.end());
  data.lits.erase(std::unique(data.lits.begin(), data.lits.end()),
                  data.lits.end());
  for (std::size_t i = 1; i < data.lits.size(); ++i)
    if (data.lits[i] == neg(data.lits[i - 1]))
      return id; // tautology, never constrains anything

  if (unsat_)
    return id;

  // Order: true literals, then unassigned, then false ones.
  auto rank = [&](std::uint32_t l) {
    VarValue v = value(l);
    return v > 0 ? 0 : (v == 0 ? 1 : 2);
  };
  std::stable_sort(data.lits.begin(), data.lits.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     return rank(a) < rank(b);
                   });

  std::uint32_t cref = static_cast<std::uint32_t>(clauses_.size());
  clauses_.push_back(std::move(data));
  const auto &cl = clauses_[cref].lits;

  if (cl.empty() || value(cl[0]) < 0) {
    unsat_ = true;
    finalConflict_ = cref;
    return id;
  }
  if (cl.size() >= 2)
    attach(cref);
  if (value(cl[0]) == 0 && (cl.size() == 1 || value(cl[1]) < 0))
    enqueue(cl[0], cref);
  return id;
}

void Solver::setGuidance(GuidanceConfig guidance) {
  guidance.validate(numVars_);
  normalizedScores_ = normalizeScores(guidance.scores);
  guidance_ = std::move(guidance);
}

//===----------------------------------------------------------------------===//
// Core machinery
//===----------------------------------------------------------------------===//

void Solver::attach(std::uint32_t cref) {
  const auto &lits = clauses_[cref].lits;
  watches_[lits[0]].push_back({cref, lits[1]});
  watches_[lits[1]].push_back({cref, lits[0]});
}

void Solver::enqueue(std::uint32_t lit, std::uint32_t reason) {
  std::uint32_t v = var(lit);
  assigns_[v] = (lit & 1U) ? -1 : 1;
  level_[v] = decisionLevel();
  reason_[v] = reason;
  trail_.push_back(lit);
}

std::uint32_t Solver::propagate() {
  std::uint32_t conflict = kNoReason;
  while (qhead_ < trail_.size()) {
    std::uint32_t falseLit = neg(trail_[qhead_++]);
    ++stats_.propagations;
    auto &ws = watches_[falseLit];
    std::size_t i = 0, j = 0;
    while (i < ws.size()) {
      Watcher w = ws[i];
      if (value(w.blocker) > 0) {
        ws[j++] = ws[i++];
        continue;
      }
      auto &lits = clauses_[w.cref].lits;
      if (lits[0] == falseLit)
        std::swap(lits[0], lits[1]);
      ++i;
      std::uint32_t first = lits[0];
      if (first != w.blocker && value(first) > 0) {
        ws[j++] = {w.cref, first};
        continue;
      }
      bool moved = false;
      for (std::size_t k = 2; k < lits.size(); ++k) {
        if (value(lits[k]) >= 0) {
          std::swap(lits[1], lits[k]);
          watches_[lits[1]].push_back({w.cref, first});
          moved = true;
          break;
        }
      }
      if (moved)
        continue;
      ws[j++] = {w.cref, first};
      if (value(first) < 0) {
        conflict = w.cref;
        qhead_ = trail_.size();
        while (i < ws.size())
          ws[j++] = ws[i++];
      } else {
        enqueue(first, w.cref);
      }
    }
    ws.resize(j);
    if (conflict != kNoReason)
      break;
  }
  return conflict;
}

void Solver::bump(std::uint32_t v) {
  activity_[v] += varInc_;
  if (activity_[v] > kActivityRescale) {
    for (double &a : activity_)
      a *= 1.0 / kActivityRescale;
    varInc_ *= 1.0 / kActivityRescale;
  }
  if (heapPos_[v] >= 0)
    heapSiftUp(static_cast<std::size_t>(heapPos_[v]));
}

void Solver::analyze(std::uint32_t conflict, std::vector<std::uint32_t> &learnt,
                     std::vector<std::uint32_t> &antecedents,
                     int &backtrackLevel) {
  learnt.assign(1, 0);
  antecedents.assign(1, conflict);
  std::vector<std::uint32_t> rootVars;
  int pathCount = 0;
  std::optional<std::uint32_t> pivot;
  std::size_t index = trail_.size();
  std::uint32_t cref = conflict;

  do {
    const auto &lits = clauses_[cref].lits;
    for (std::size_t k = pivot ? 1 : 0; k < lits.size(); ++k) {
      std::uint32_t q = lits[k];
      std::uint32_t v = var(q);
      if (seen_[v])
        continue;
      seen_[v] = 1;
      if (level_[v] == 0) {
        // Dropped from the learned clause, but the derivation depends on
        // whatever forced it at the root.
        rootVars.push_back(v);
        antecedents.push_back(reason_[v]);
        continue;
      }
      bump(v);
      if (level_[v] >= decisionLevel())
        ++pathCount;
      else
        learnt.push_back(q);
    }
    while (!seen_[var(trail_[--index])])
      ;
    pivot = trail_[index];
    cref = reason_[var(*pivot)];
    seen_[var(*pivot)] = 0;
    --pathCount;
    if (pathCount > 0)
      antecedents.push_back(cref);
  } while (pathCount > 0);
  learnt[0] = neg(*pivot);

  backtrackLevel = 0;
  if (learnt.size() > 1) {
    std::size_t maxAt = 1;
    for (std::size_t k = 2; k < learnt.size(); ++k)
      if (level_[var(learnt[k])] > level_[var(learnt[maxAt])])
        maxAt = k;
    std::swap(learnt[1], learnt[maxAt]);
    backtrackLevel = level_[var(learnt[1])];
  }
  for (std::size_t k = 1; k < learnt.size(); ++k)
    seen_[var(learnt[k])] = 0;
  for (std::uint32_t v : rootVars)
    seen_[v] = 0;
}

void Solver::backtrack(int level) {
  if (decisionLevel() <= level)
    return;
  std::size_t stop = trailLim_[static_cast<std::size_t>(level)];
  for (std::size_t k = trail_.size(); k > stop; --k) {
    std::uint32_t v = var(trail_[k - 1]);
    phase_[v] = (trail_[k - 1] & 1U) != 0;
    assigns_[v] = 0;
    reason_[v] = kNoReason;
    if (heapPos_[v] < 0)
      heapInsert(v);
  }
  trail_.resize(stop);
  trailLim_.resize(static_cast<std::size_t>(level));
  qhead_ = trail_.size();
}

void Solver::overwriteActivities() {
  for (std::size_t v = 0; v < activity_.size(); ++v)
    activity_[v] = normalizedScores_[v];
  varInc_ = 1.0;
  heapRebuild();
  freshOverwrite_ = true;
  ++stats_.overwrites;
}

std::optional<std::uint32_t> Solver::pickBranchVar() {
  while (!heap_.empty()) {
    std::uint32_t v = heapPop();
    if (assigns_[v] == 0)
      return v;
  }
  return std::nullopt;
}

SolverResult Solver::solve(std::optional<std::uint64_t> conflictBudget) {
  stats_ = {};
  SolverResult result;
  auto finish = [&](SolveStatus status) {
    result.status = status;
    result.stats = stats_;
    if (status == SolveStatus::Sat) {
      result.model.resize(static_cast<std::size_t>(numVars_));
      for (std::size_t v = 0; v < result.model.size(); ++v)
        result.model[v] = assigns_[v] > 0;
    } else if (status == SolveStatus::Unsat) {
      result.coreClauseIds = extractCore();
    }
    if (status != SolveStatus::Unsat)
      backtrack(0);
    return result;
  };

  if (unsat_)
    return finish(SolveStatus::Unsat);

  backtrack(0);
  bool guided = guidance_ && guidance_->enabled;
  using Clock = std::chrono::steady_clock;
  auto lastOverwrite = Clock::now();
  if (guided)
    overwriteActivities();

  std::uint64_t restartIndex = 0;
  std::uint64_t restartLimit = luby(restartIndex) * options_.lubyBase;
  std::uint64_t conflictsSinceRestart = 0;
  std::vector<std::uint32_t> learnt, antecedents;

  for (;;) {
    std::uint32_t conflict = propagate();
    if (conflict != kNoReason) {
      ++stats_.conflicts;
      ++conflictsSinceRestart;
      if (decisionLevel() == 0) {
        unsat_ = true;
        finalConflict_ = conflict;
        return finish(SolveStatus::Unsat);
      }
      int backtrackLevel = 0;
      analyze(conflict, learnt, antecedents, backtrackLevel);
      backtrack(backtrackLevel);

      std::uint32_t cref = static_cast<std::uint32_t>(clauses_.size());
      ClauseData data;
      data.lits = learnt;
      data.antecedents = antecedents;
      data.learnt = true;
      clauses_.push_back(std::move(data));
      if (learnt.size() >= 2)
        attach(cref);
      enqueue(learnt[0], cref);
      varInc_ *= 1.0 / options_.varDecay;
      freshOverwrite_ = false;

      if (guided) {
        bool due;
        if (guidance_->periodSeconds) {
          std::chrono::duration<double> elapsed = Clock::now() - lastOverwrite;
          due = elapsed.count() >= *guidance_->periodSeconds;
        } else {
          due = stats_.conflicts % guidance_->period == 0;
        }
        if (due) {
          overwriteActivities();
          lastOverwrite = Clock::now();
        }
      }
      if (conflictBudget && stats_.conflicts >= *conflictBudget)
        return finish(SolveStatus::Unknown);
      continue;
    }

    if (conflictsSinceRestart >= restartLimit) {
      ++stats_.restarts;
      conflictsSinceRestart = 0;
      restartLimit = luby(++restartIndex) * options_.lubyBase;
      backtrack(0);
      continue;
    }

    auto next = pickBranchVar();
    if (!next)
      return finish(SolveStatus::Sat);
    std::uint32_t v = *next;
    bool negated = phase_[v];
    if (options_.onDecision)
      options_.onDecision(DecisionEvent{static_cast<int>(v), negated,
                                        freshOverwrite_, assigns_});
    freshOverwrite_ = false;
    ++stats_.decisions;
    trailLim_.push_back(trail_.size());
    enqueue(2 * v + (negated ? 1U : 0U), kNoReason);
  }
}

std::vector<std::size_t> Solver::extractCore() const {
  if (!unsat_)
    throw std::logic_error("extractCore called before UNSAT was established");
  std::vector<char> visited(clauses_.size(), 0);
  std::vector<std::uint32_t> stack{finalConflict_};
  std::vector<std::size_t> core;
  while (!stack.empty()) {
    std::uint32_t cref = stack.back();
    stack.pop_back();
    if (cref == kNoReason || visited[cref])
      continue;
    visited[cref] = 1;
    const ClauseData &c = clauses_[cref];
    if (c.learnt)
      stack.insert(stack.end(), c.antecedents.begin(), c.antecedents.end());
    else
      core.push_back(static_cast<std::size_t>(c.originalId));
    for (std::uint32_t lit : c.lits) {
      std::uint32_t v = var(lit);
      if (value(lit) < 0 && level_[v] == 0 && reason_[v] != cref)
        stack.push_back(reason_[v]);
    }
  }
  std::sort(core.begin(), core.end());
  return core;
}

//===----------------------------------------------------------------------===//
// Heap
//===----------------------------------------------------------------------===//

void Solver::heapInsert(std::uint32_t v) {
  heapPos_[v] = static_cast<std::int64_t>(heap_.size());
  heap_.push_back(v);
  heapSiftUp(heap_.size() - 1);
}

void Solver::heapSiftUp(std::size_t pos) {
  std::uint32_t v = heap_[pos];
  while (pos > 0) {
    std::size_t parent = (pos - 1) / 2;
    if (!heapLess(v, heap_[parent]))
      break;
    heap_[pos] = heap_[parent];
    heapPos_[heap_[pos]] = static_cast<std::int64_t>(pos);
    pos = parent;
  }
  heap_[pos] = v;
  heapPos_[v] = static_cast<std::int64_t>(pos);
}

void Solver::heapSiftDown(std::size_t pos) {
  std::uint32_t v = heap_[pos];
  for (;;) {
    std::size_t child = 2 * pos + 1;
    if (child >= heap_.size())
      break;
    if (child + 1 < heap_.size() && heapLess(heap_[child + 1], heap_[child]))
      ++child;
    if (!heapLess(heap_[child], v))
      break;
    heap_[pos] = heap_[child];
    heapPos_[heap_[pos]] = static_cast<std::int64_t>(pos);
    pos = child;
  }
  heap_[pos] = v;
  heapPos_[v] = static_cast<std::int64_t>(pos);
}

std::uint32_t Solver::heapPop() {
  std::uint32_t top = heap_.front();
  heapPos_[top] = -1;
  std::uint32_t last = heap_.back();
  heap_.pop_back();
  if (!heap_.empty()) {
    heap_[0] = last;
    heapPos_[last] = 0;
    heapSiftDown(0);
  }
  return top;
}

void Solver::heapRebuild() {
  for (std::uint32_t v : heap_)
    heapPos_[v] = -1;
  heap_.clear();
  for (std::uint32_t v = 0; v < static_cast<std::uint32_t>(numVars_); ++v)
    if (assigns_[v] == 0)
      heapInsert(v);
}

//===----------------------------------------------------------------------===//
// Free functions
//===----------------------------------------------------------------------===//

SolverResult solve(const CnfFormula &formula, const GuidanceConfig *guidance,
                   std::optional<std::uint64_t> conflictBudget,
                   SolverOptions options) {
  Solver solver(formula, std::move(options));
  if (guidance)
    solver.setGuidance(*guidance);
  return solver.solve(conflictBudget);
}

bool checkAssignment(const CnfFormula &formula,
                     const std::vector<bool> &model) {
  if (model.size() != static_cast<std::size_t>(formula.numVars()))
    throw std::invalid_argument("assignment length " +
                                std::to_string(model.size()) +
                                " does not match " +
                                std::to_string(formula.numVars()) +
                                " variables");
  for (const Clause &c : formula.clauses()) {
    bool satisfied = false;
    for (int lit : c) {
      bool value = model[static_cast<std::size_t>(std::abs(lit) - 1)];
      if ((lit > 0) == value) {
        satisfied = true;
        break;
      }
    }
    if (!satisfied)
      return false;
  }
  return true;
}

} // namespace polarcore
