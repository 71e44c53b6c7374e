//===- acceptance.cpp - End-to-end acceptance checks ---------------------===//
//
// One PASS/FAIL line per criterion. Exit status is non-zero if any selected
// criterion fails.
//
//===----------------------------------------------------------------------===//

#include "polarcore/cdcl.h"
#include "polarcore/eval.h"
#include "polarcore/io.h"
#include "polarcore/training.h"

#include "oracles.h"

#include "CLI11.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

using namespace polarcore;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Options {
  std::string cli;
  std::string workdir = "acceptance_work";
  std::size_t jobs = 0;
};

std::string fmt(const char *f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

Tensor randomTensor(Rng &rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Tensor t(r, c);
  for (double &x : t.data())
    x = rng.gaussian(0.0, scale);
  return t;
}

//===----------------------------------------------------------------------===//
// 1. Literal construction round trip
//===----------------------------------------------------------------------===//

Outcome roundTrip(const Options &) {
  Rng rng(101);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    std::size_t n = 1 + rng.below(40), d = 1 + rng.below(16);
    Tensor a = randomTensor(rng, n, d, 5.0), b = randomTensor(rng, n, d, 5.0);
    Tape t;
    Decomposed r = recoverVariables(buildLiterals(t.constant(a), t.constant(b)));
    for (std::size_t i = 0; i < a.size(); ++i)
      worst = std::max({worst, std::abs(r.inv.value()[i] - a[i]),
                        std::abs(r.eq.value()[i] - b[i])});
  }
  return {worst <= 1e-12, "max abs error " + fmt("%.3g", worst) + " (tol 1e-12)"};
}

//===----------------------------------------------------------------------===//
// 2. Flip involution and structure
//===----------------------------------------------------------------------===//

Outcome flipStructure(const Options &) {
  Rng rng(202);
  std::size_t bad = 0;
  for (int k = 0; k < 500; ++k) {
    CnfFormula f = k % 2 ? generateSrPair(3 + static_cast<int>(rng.below(38)), rng.next()).unsat
                         : oracle::randomFormula(rng, 2 + static_cast<int>(rng.below(15)),
                                                 1 + rng.below(60), 5);
    CnfFormula g = polarityFlip(f);
    bool ok = polarityFlip(g) == f;
    IncidenceStructure hf = buildIncidence(f), hg = buildIncidence(g);
    std::vector<SparseMatrix::Entry> swapped;
    const SparseMatrix &h = hf.incidence;
    for (std::size_t r = 0; r < h.rows(); ++r)
      for (std::size_t p = h.rowPtr()[r]; p < h.rowPtr()[r + 1]; ++p)
        swapped.push_back({complementRow(r), h.colIdx()[p], h.values()[p]});
    ok = ok && hg.incidence == SparseMatrix::fromEntries(h.rows(), h.cols(), swapped);
    ClauseIncidenceGraph cf = buildCig(f, 50), cg = buildCig(g, 50);
    ok = ok && cf.adjacency == cg.adjacency && cf.degree == cg.degree;
    bad += !ok;
  }
  return {bad == 0, std::to_string(500 - bad) + "/500 instances exact"};
}

//===----------------------------------------------------------------------===//
// 3. Gradient correctness
//===----------------------------------------------------------------------===//

Outcome gradients(const Options &) {
  Rng rng(303);
  SparseMatrix sparse = SparseMatrix::fromEntries(
      3, 4, {{0, 1, 0.5}, {1, 0, -2.0}, {1, 3, 1.5}, {2, 2, 0.25}});
  std::map<std::string, std::pair<ScalarFn, std::vector<Tensor>>> cases;
  // Outputs are reduced with a fixed random projection.
  auto project = [&rng](std::function<Var(Tape &, std::span<const Var>)> op,
                        std::size_t rows, std::size_t cols) {
    Tensor w = randomTensor(rng, rows, cols);
    return ScalarFn([op, w](Tape &t, std::span<const Var> in) {
      return ad::sum(ad::mul(op(t, in), t.constant(w)));
    });
  };
  Tensor a = randomTensor(rng, 3, 4), b = randomTensor(rng, 3, 4);
  Tensor pos(3, 4);
  for (double &x : pos.data())
    x = 0.5 + rng.uniform();
  cases["matmul"] = {project([](Tape &, auto in) { return ad::matmul(in[0], in[1]); }, 3, 2),
                     {a, randomTensor(rng, 4, 2)}};
  cases["spmm"] = {project([&](Tape &, auto in) { return ad::spmm(sparse, in[0]); }, 3, 2),
                   {randomTensor(rng, 4, 2)}};
  cases["add"] = {project([](Tape &, auto in) { return ad::add(in[0], in[1]); }, 3, 4), {a, b}};
  cases["sub"] = {project([](Tape &, auto in) { return ad::sub(in[0], in[1]); }, 3, 4), {a, b}};
  cases["mul"] = {project([](Tape &, auto in) { return ad::mul(in[0], in[1]); }, 3, 4), {a, b}};
  cases["addRowVector"] = {
      project([](Tape &, auto in) { return ad::addRowVector(in[0], in[1]); }, 3, 4),
      {a, randomTensor(rng, 1, 4)}};
  cases["scale"] = {project([](Tape &, auto in) { return ad::scale(in[0], -1.7); }, 3, 4), {a}};
  cases["scaleBy"] = {project([](Tape &, auto in) { return ad::scaleBy(in[0], in[1]); }, 3, 4),
                      {Tensor::scalar(0.8), a}};
  cases["relu"] = {project([](Tape &, auto in) { return ad::relu(in[0]); }, 3, 4), {a}};
  cases["tanh"] = {project([](Tape &, auto in) { return ad::tanh(in[0]); }, 3, 4), {a}};
  cases["softmaxRows"] = {project([](Tape &, auto in) { return ad::softmaxRows(in[0]); }, 3, 4),
                          {a}};
  cases["logSoftmaxRows"] = {
      project([](Tape &, auto in) { return ad::logSoftmaxRows(in[0]); }, 3, 4), {a}};
  cases["log"] = {project([](Tape &, auto in) { return ad::log(in[0]); }, 3, 4), {pos}};
  cases["clampMin"] = {project([](Tape &, auto in) { return ad::clampMin(in[0], 1.0); }, 3, 4),
                       {pos}};
  cases["concatCols"] = {
      project([](Tape &, auto in) { return ad::concatCols({in[0], in[1]}); }, 3, 6),
      {a, randomTensor(rng, 3, 2)}};
  cases["concatRows"] = {
      project([](Tape &, auto in) { return ad::concatRows({in[0], in[1]}); }, 5, 4),
      {a, randomTensor(rng, 2, 4)}};
  cases["rowPermute"] = {
      project([](Tape &, auto in) { return ad::rowPermute(in[0], {2, 0, 0, 1}); }, 4, 4), {a}};
  cases["rowSlice"] = {
      project([](Tape &, auto in) { return ad::rowSlice(in[0], 1, 2, 2); }, 2, 4),
      {randomTensor(rng, 5, 4)}};
  cases["transpose"] = {project([](Tape &, auto in) { return ad::transpose(in[0]); }, 4, 3),
                        {a}};
  cases["sum"] = {[](Tape &, std::span<const Var> in) { return ad::sum(in[0]); }, {a}};
  cases["mean"] = {[](Tape &, std::span<const Var> in) { return ad::mean(in[0]); }, {a}};
  cases["squaredL2"] = {[](Tape &, std::span<const Var> in) { return ad::squaredL2(in[0]); },
                        {a}};

  std::string failed;
  double worst = 0.0;
  for (const auto &[name, c] : cases) {
    GradCheckReport r = gradCheck(c.first, c.second, 1e-5, 1e-4);
    worst = std::max(worst, r.maxRelError);
    if (!r.passed)
      failed += " " + name;
  }

  ModelConfig m;
  m.hiddenDim = 4;
  m.rounds = 2;
  ModelParams p = ModelParams::initialize(m);
  LabeledInstance inst = labelUnsatCore(
      CnfFormula(4, {{1, 2}, {-1, 3}, {-3, 4}, {-4, -1}, {-2, 1}, {-2, -4}}));
  TrainingExample ex = makeExample(inst, m);
  std::vector<Tensor> inputs;
  for (const NamedTensor &nt : p.tensors())
    inputs.push_back(nt.value);
  GradCheckReport full = gradCheck(
      [&](Tape &t, std::span<const Var> v) {
        BoundParams b{&p, std::vector<Var>(v.begin(), v.end())};
        return totalLoss(t, b, ex, LossWeights{}).total;
      },
      inputs, 1e-5, 1e-4);
  if (!full.passed)
    failed += " full-loss";
  return {failed.empty(),
          std::to_string(cases.size()) + " primitives max rel " + fmt("%.2g", worst) +
              ", full loss max rel " + fmt("%.2g", full.maxRelError) + " over " +
              std::to_string(full.coordinates) + " coords (tol 1e-4, h 1e-5)" +
              (failed.empty() ? "" : "; failed:" + failed)};
}

//===----------------------------------------------------------------------===//
// 4. Solver soundness and completeness
//===----------------------------------------------------------------------===//

Outcome solverSoundness(const Options &) {
  Rng rng(404);
  std::size_t disagreements = 0, badModels = 0, badCores = 0, unsat = 0;
  for (int k = 0; k < 500; ++k) {
    int n = 1 + static_cast<int>(rng.below(10));
    CnfFormula f = oracle::randomFormula(rng, n, 1 + rng.below(5 * n), 3);
    SolverResult r = solve(f);
    bool sat = oracle::bruteForceSat(f);
    disagreements += (r.status == SolveStatus::Sat) != sat || r.status == SolveStatus::Unknown;
    if (r.status == SolveStatus::Sat && !checkAssignment(f, r.model))
      ++badModels;
    if (r.status == SolveStatus::Unsat) {
      ++unsat;
      if (solve(subformula(f, r.coreClauseIds)).status != SolveStatus::Unsat)
        ++badCores;
    }
  }
  std::size_t bruteBad = 0;
  for (int k = 0; k < 200; ++k) {
    SrPair pair = generateSrPair(3 + k % 10, 4040 + static_cast<std::uint64_t>(k));
    SolverResult r = solve(pair.unsat);
    bruteBad += r.status != SolveStatus::Unsat ||
                !oracle::subsetUnsat(pair.unsat, r.coreClauseIds);
  }
  bool ok = disagreements == 0 && badModels == 0 && badCores == 0 && bruteBad == 0;
  return {ok, std::to_string(disagreements) + " disagreements/500 (" + std::to_string(unsat) +
                  " unsat), " + std::to_string(badCores) + " cores not unsat on re-solve, " +
                  std::to_string(bruteBad) + "/200 cores failing brute force"};
}

//===----------------------------------------------------------------------===//
// 5. Metric oracles
//===----------------------------------------------------------------------===//

Outcome metricOracles(const Options &) {
  Rng rng(505);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    std::size_t n = 2 + rng.below(49);
    std::vector<double> s;
    std::vector<std::uint8_t> y;
    for (std::size_t i = 0; i < n; ++i) {
      s.push_back(k % 2 ? rng.uniform() : static_cast<double>(rng.below(4)));
      y.push_back(rng.bernoulli(0.4) ? 1 : 0);
    }
    y[0] = 1;
    y[n - 1] = 0;
    worst = std::max({worst,
                      std::abs(topMPrecision(s, y) - oracle::topMPrecision(s, y)),
                      std::abs(prAuc(s, y) - oracle::prAllThresholds(s, y)),
                      std::abs(*rocAuc(s, y) - oracle::rocPairwise(s, y))});
  }
  return {worst <= 1e-9, "max deviation " + fmt("%.3g", worst) + " (tol 1e-9)"};
}

//===----------------------------------------------------------------------===//
// 6. Permutation equivariance
//===----------------------------------------------------------------------===//

ModelConfig deskModel() {
  ModelConfig m;
  m.hiddenDim = 16;
  m.rounds = 2;
  return m;
}

Outcome permutationEquivariance(const Options &) {
  Rng rng(606);
  ModelParams params = ModelParams::initialize(deskModel());
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    SrPair pair = generateSrPair(10 + static_cast<int>(rng.below(31)), rng.next());
    const CnfFormula &f = pair.unsat;
    std::vector<int> perm(f.numVars());
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<std::size_t> clausePerm(f.numClauses());
    std::iota(clausePerm.begin(), clausePerm.end(), 0);
    rng.shuffle(clausePerm);
    std::vector<Clause> relabeled(f.numClauses());
    for (std::size_t j = 0; j < f.numClauses(); ++j)
      for (int lit : f.clause(j)) {
        int v = perm[std::abs(lit) - 1] + 1;
        relabeled[clausePerm[j]].push_back(lit > 0 ? v : -v);
      }
    std::vector<double> s = predictScores(f, params);
    std::vector<double> s2 = predictScores(CnfFormula(f.numVars(), relabeled), params);
    for (int v = 0; v < f.numVars(); ++v)
      worst = std::max(worst, std::abs(s2[perm[v]] - s[v]));
  }
  return {worst <= 1e-9, "max abs deviation " + fmt("%.3g", worst) + " (tol 1e-9)"};
}

//===----------------------------------------------------------------------===//
// 7/8. Desk-scale training
//===----------------------------------------------------------------------===//

struct DeskData {
  std::vector<LabeledInstance> train, test;
};

DeskData &deskData(const Options &opt) {
  static std::optional<DeskData> data;
  if (data)
    return *data;
  DatasetConfig dc;
  dc.minVars = 10;
  dc.maxVars = 40;
  dc.count = 2200;
  dc.seed = 11;
  std::vector<LabeledInstance> all(dc.count);
  parallelFor(dc.count, opt.jobs, [&](std::size_t i) {
    all[i] = labelUnsatCore(generateDatasetPair(dc, i).unsat);
  });
  data.emplace();
  data->train.assign(all.begin(), all.begin() + 2000);
  data->test.assign(all.begin() + 2000, all.end());
  return *data;
}

RunConfig deskRun(double lambdaCons, double lambdaDecomp) {
  RunConfig c;
  c.model = deskModel();
  c.train.epochs = 20;
  c.train.learningRate = 2e-3;
  c.train.lambda = {lambdaCons, lambdaDecomp};
  return c;
}

TrainResult &deskModelTrained(const Options &opt, bool regularized) {
  static std::map<bool, TrainResult> cache;
  auto it = cache.find(regularized);
  if (it != cache.end())
    return it->second;
  const DeskData &data = deskData(opt);
  RunConfig cfg = regularized ? deskRun(0.1, 0.05) : deskRun(0.0, 0.0);
  std::vector<TrainingExample> examples(data.train.size());
  parallelFor(examples.size(), opt.jobs,
              [&](std::size_t i) { examples[i] = makeExample(data.train[i], cfg.model); });
  TrainHooks hooks;
  hooks.jobs = opt.jobs;
  hooks.onEpoch = [&](const EpochRecord &r) {
    std::cerr << "    [" << (regularized ? "reg" : "noreg") << "] epoch " << r.epoch
              << " l_core " << fmt("%.5f", r.lCore) << " l_cons " << fmt("%.3g", r.lCons)
              << "\n";
  };
  return cache.emplace(regularized, train(examples, cfg, hooks)).first->second;
}

Outcome learningSignal(const Options &opt) {
  const DeskData &data = deskData(opt);
  TrainResult &r = deskModelTrained(opt, true);
  double first = r.history.front().lCore, last = r.history.back().lCore;
  double drop = 1.0 - last / first;

  std::vector<std::vector<double>> scores(data.test.size());
  std::vector<std::vector<std::uint8_t>> labels(data.test.size());
  parallelFor(data.test.size(), opt.jobs, [&](std::size_t i) {
    scores[i] = predictScores(data.test[i].formula, r.params);
    labels[i] = data.test[i].labels;
  });
  MetricReport m = evaluate(scores, labels);
  double gain = m.precision - m.randomPrecision;
  bool a = drop >= 0.40, b = gain >= 0.10 && m.rocAuc >= 0.60;
  return {a && b,
          "(a) L_core " + fmt("%.4f", first) + " -> " + fmt("%.4f", last) + " drop " +
              fmt("%.1f%%", 100.0 * drop) + " (need >= 40%) " + (a ? "ok" : "FAIL") +
              "; (b) precision " + fmt("%.4f", m.precision) + " vs random " +
              fmt("%.4f", m.randomPrecision) + " gain " + fmt("%+.4f", gain) +
              " (need >= 0.10), ROC-AUC " + fmt("%.4f", m.rocAuc) + " (need >= 0.60) " +
              (b ? "ok" : "FAIL")};
}

Outcome regularizationEffect(const Options &opt) {
  const DeskData &data = deskData(opt);
  const ModelParams &reg = deskModelTrained(opt, true).params;
  const ModelParams &plain = deskModelTrained(opt, false).params;
  std::vector<double> gapReg(data.test.size()), gapPlain(data.test.size());
  parallelFor(data.test.size(), opt.jobs, [&](std::size_t i) {
    gapReg[i] = flipConsistencyGap(data.test[i].formula, reg);
    gapPlain[i] = flipConsistencyGap(data.test[i].formula, plain);
  });
  double meanReg = std::accumulate(gapReg.begin(), gapReg.end(), 0.0) / gapReg.size();
  double meanPlain = std::accumulate(gapPlain.begin(), gapPlain.end(), 0.0) / gapPlain.size();
  return {meanReg <= 0.5 * meanPlain,
          "flip gap " + fmt("%.4g", meanReg) + " (lambda 0.1) vs " + fmt("%.4g", meanPlain) +
              " (lambda 0), ratio " + fmt("%.3f", meanReg / meanPlain) + " (need <= 0.5)"};
}

//===----------------------------------------------------------------------===//
// 9. Guidance plumbing
//===----------------------------------------------------------------------===//

Outcome guidancePlumbing(const Options &) {
  Rng rng(909);
  std::size_t checked = 0, wrong = 0, noEvent = 0;
  for (int k = 0; k < 50; ++k) {
    SrPair pair = generateSrPair(15 + static_cast<int>(rng.below(26)), rng.next());
    GuidanceConfig g;
    for (int v = 0; v < pair.unsat.numVars(); ++v)
      g.scores.push_back(rng.uniform());
    g.period = 1;
    std::size_t here = 0;
    SolverOptions so;
    so.onDecision = [&](const DecisionEvent &e) {
      if (!e.firstSinceOverwrite)
        return;
      int best = -1;
      for (int v = 0; v < static_cast<int>(e.assigns.size()); ++v)
        if (e.assigns[v] == 0 && (best < 0 || g.scores[v] > g.scores[best]))
          best = v;
      wrong += e.var != best;
      ++here;
    };
    SolverResult r = solve(pair.unsat, &g, std::nullopt, so);
    wrong += r.status != SolveStatus::Unsat;
    noEvent += here == 0;
    checked += here;
  }
  return {wrong == 0 && noEvent == 0,
          std::to_string(checked) + " post-overwrite decisions, " + std::to_string(wrong) +
              " off the max-score free variable, " + std::to_string(noEvent) +
              " instances without a check"};
}

//===----------------------------------------------------------------------===//
// 10. CLI pipeline
//===----------------------------------------------------------------------===//

Outcome cliSmoke(const Options &opt) {
  if (opt.cli.empty())
    return {false, "no --cli given"};
  fs::path dir = fs::path(opt.workdir) / "smoke";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::string d = dir.string();
  writeTextFile(dir / "smoke.cfg", "epochs = 5\nhidden_dim = 8\nrounds = 2\n");
  const std::vector<std::pair<std::string, std::string>> steps = {
      {"generate", "generate --n-range 8:12 --count 50 --seed 5 --out " + d + "/data"},
      {"label", "label --in " + d + "/data"},
      {"train", "train --data " + d + "/data --config " + d + "/smoke.cfg --out " + d +
                    "/model.ckpt"},
      {"predict", "predict --ckpt " + d + "/model.ckpt --in " + d + "/data --out " + d +
                      "/scores.txt"},
      {"eval", "eval --scores " + d + "/scores.txt --labels " + d + "/data --out " + d +
                   "/metrics.csv"},
      {"solve", "solve --in " + d + "/data --scores " + d + "/scores.txt --guided --stats " +
                    d + "/stats.csv"},
  };
  for (const auto &[name, args] : steps) {
    std::string cmd = opt.cli + " " + args + " --jobs " + std::to_string(opt.jobs) + " > " +
                      d + "/" + name + ".log 2>&1";
    int status = std::system(cmd.c_str());
    int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (code != 0)
      return {false, name + " exited with " + std::to_string(code)};
  }
  std::istringstream csv(readTextFile(dir / "metrics.csv"));
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  std::vector<double> values;
  std::istringstream fields(row);
  std::string f;
  std::getline(fields, f, ',');
  for (int i = 0; i < 3 && std::getline(fields, f, ','); ++i)
    values.push_back(std::stod(f));
  bool finite = values.size() == 3 &&
                std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
  return {finite, "all steps exit 0; precision " + (values.empty() ? "?" : fmt("%.4f", values[0])) +
                      (finite ? ", metrics finite" : ", non-finite metrics")};
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Acceptance checks"};
  Options opt;
  std::string only;
  app.add_option("--cli", opt.cli, "Path to the polarcore executable");
  app.add_option("--workdir", opt.workdir, "Scratch directory");
  app.add_option("--only", only, "Comma-separated criterion numbers");
  app.add_option("--jobs", opt.jobs, "Worker threads (default: all cores)");
  CLI11_PARSE(app, argc, argv);
  if (opt.jobs == 0)
    opt.jobs = std::max(1u, std::thread::hardware_concurrency());

  std::set<int> selected;
  std::stringstream ss(only);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty())
      selected.insert(std::stoi(item));

  const std::vector<std::pair<std::string, Outcome (*)(const Options &)>> criteria = {
      {"literal round trip", roundTrip},
      {"flip involution and structure", flipStructure},
      {"gradient correctness", gradients},
      {"solver soundness and completeness", solverSoundness},
      {"metric oracles", metricOracles},
      {"permutation equivariance", permutationEquivariance},
      {"desk-scale learning signal", learningSignal},
      {"regularization effect", regularizationEffect},
      {"guidance plumbing", guidancePlumbing},
      {"cli end-to-end smoke", cliSmoke},
  };
  bool allPass = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id))
      continue;
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second(opt);
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    allPass = allPass && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << ": "
              << o.detail << " (" << fmt("%.1f", secs) << " s)" << std::endl;
  }
  return allPass ? 0 : 1;
}
