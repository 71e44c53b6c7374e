//===- polarcore_cli.cpp - Pipeline entry point ---------------------------===//
//
// polarcore generate | label | train | predict | eval | solve | flip
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric trap.
//
//===----------------------------------------------------------------------===//

#include "polarcore/cdcl.h"
#include "polarcore/cnf.h"
#include "polarcore/eval.h"
#include "polarcore/io.h"
#include "polarcore/model.h"
#include "polarcore/sat_gen.h"
#include "polarcore/training.h"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#ifndef POLARCORE_VERSION
#define POLARCORE_VERSION "0.0.0+unknown"
#endif

using namespace polarcore;
namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::size_t defaultJobs() {
  if (const char *env = std::getenv("POLARCORE_JOBS")) {
    char *end = nullptr;
    unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0)
      return v;
  }
  return 1;
}

void writeManifest(const fs::path &path, RunManifest manifest) {
  manifest.version = POLARCORE_VERSION;
  writeTextFile(path, formatManifest(manifest));
}

fs::path sidecarPath(const std::string &arg, const char *defaultName) {
  fs::path p(arg);
  return fs::is_directory(p) ? p / defaultName : p;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

//===----------------------------------------------------------------------===//
// generate
//===----------------------------------------------------------------------===//

struct GenerateArgs {
  std::string range = "10:40";
  std::size_t count = 100;
  std::string out;
  std::uint64_t seed = 1;
  bool emitSat = false;
  std::size_t jobs = 1;
};

int runGenerate(const GenerateArgs &a) {
  DatasetConfig cfg;
  cfg.count = a.count;
  cfg.seed = a.seed;
  auto colon = a.range.find(':');
  try {
    if (colon == std::string::npos)
      throw std::invalid_argument("");
    cfg.minVars = std::stoi(a.range.substr(0, colon));
    cfg.maxVars = std::stoi(a.range.substr(colon + 1));
  } catch (const std::exception &) {
    throw UsageError("--n-range expects A:B, got '" + a.range + "'");
  }
  if (cfg.minVars < 3 || cfg.maxVars < cfg.minVars)
    throw UsageError("--n-range needs 3 <= A <= B");
  if (cfg.count == 0)
    throw UsageError("--count must be positive");

  fs::path out(a.out);
  fs::create_directories(out);
  if (a.emitSat)
    fs::create_directories(out / "sat");
  writeManifest(out / "generate.manifest",
                {"generate",
                 {{"n_range", a.range},
                  {"count", std::to_string(a.count)},
                  {"emit_sat", a.emitSat ? "true" : "false"}},
                 a.seed,
                 {},
                 {out.string()},
                 {}});

  parallelFor(cfg.count, a.jobs, [&](std::size_t i) {
    SrPair pair = generateDatasetPair(cfg, i);
    char name[32];
    std::snprintf(name, sizeof name, "sr_%05zu.cnf", i);
    writeTextFile(out / name, serializeDimacs(pair.unsat));
    if (a.emitSat)
      writeTextFile(out / "sat" / name, serializeDimacs(pair.sat));
  });
  std::cout << "generated " << cfg.count << " instances in " << out.string() << "\n";
  return kOk;
}

//===----------------------------------------------------------------------===//
// label
//===----------------------------------------------------------------------===//

struct LabelArgs {
  std::string in;
  std::string out;
  bool minimize = false;
  std::size_t jobs = 1;
};

int runLabel(const LabelArgs &a) {
  std::vector<fs::path> files = listCnfFiles(a.in);
  if (files.empty())
    throw DataError("no .cnf files in '" + a.in + "'");
  std::vector<CnfFormula> formulas;
  formulas.reserve(files.size());
  for (const fs::path &f : files)
    formulas.push_back(readDimacsFile(f));

  fs::path out = a.out.empty() ? fs::path(a.in) / "labels.txt" : fs::path(a.out);
  writeManifest(fs::path(out.string() + ".manifest"),
                {"label",
                 {{"minimize", a.minimize ? "true" : "false"}},
                 0,
                 {a.in},
                 {out.string()},
                 {}});

  std::vector<LabelRecord> records(files.size());
  LabelOptions options;
  options.minimize = a.minimize;
  parallelFor(files.size(), a.jobs, [&](std::size_t i) {
    try {
      records[i] = {files[i].filename().string(),
                    labelUnsatCore(formulas[i], options).labels};
    } catch (const FormulaSatisfiable &) {
      throw DataError(files[i].string() + ": formula is satisfiable, no core");
    }
  });
  writeTextFile(out, formatLabelSidecar(records));
  std::cout << "labelled " << records.size() << " instances -> " << out.string()
            << "\n";
  return kOk;
}

//===----------------------------------------------------------------------===//
// train
//===----------------------------------------------------------------------===//

struct LabeledSet {
  std::vector<std::string> names;
  std::vector<CnfFormula> formulas;
  std::vector<std::vector<std::uint8_t>> labels;
};

LabeledSet loadLabeledSet(const std::string &dir, const fs::path &labelFile) {
  std::vector<LabelRecord> records = parseLabelSidecar(readTextFile(labelFile));
  LabeledSet set;
  for (const fs::path &f : listCnfFiles(dir)) {
    std::string name = f.filename().string();
    const LabelRecord *rec = findRecord(records, name);
    if (!rec)
      throw DataError("no labels for '" + name + "' in " + labelFile.string());
    CnfFormula formula = readDimacsFile(f);
    if (rec->values.size() != static_cast<std::size_t>(formula.numVars()))
      throw DataError("labels for '" + name + "' have " +
                      std::to_string(rec->values.size()) + " entries, formula has " +
                      std::to_string(formula.numVars()) + " variables");
    set.names.push_back(name);
    set.formulas.push_back(std::move(formula));
    set.labels.push_back(rec->values);
  }
  if (set.formulas.empty())
    throw DataError("no .cnf files in '" + dir + "'");
  return set;
}

struct TrainArgs {
  std::string data;
  std::string config;
  std::string out;
  std::string labels;
  std::string history;
  std::string ablation;
  std::size_t jobs = 1;
};

int runTrain(const TrainArgs &a) {
  RunConfig config;
  if (!a.config.empty()) {
    try {
      config = parseRunConfig(readTextFile(a.config));
    } catch (const std::invalid_argument &e) {
      throw DataError(a.config + ": " + e.what());
    }
  }
  if (!a.ablation.empty())
    applyAblation(config.model, a.ablation);
  fs::path labelFile =
      a.labels.empty() ? fs::path(a.data) / "labels.txt" : fs::path(a.labels);
  LabeledSet set = loadLabeledSet(a.data, labelFile);
  fs::path history = a.history.empty() ? fs::path(a.out + ".history.csv")
                                       : fs::path(a.history);

  RunManifest manifest{"train", {}, config.train.seed, {a.data, labelFile.string()},
                       {a.out, history.string()}, {}};
  std::istringstream resolved(formatRunConfig(config));
  for (std::string line; std::getline(resolved, line);) {
    auto eq = line.find(" = ");
    manifest.settings.emplace_back(line.substr(0, eq), line.substr(eq + 3));
  }
  writeManifest(a.out + ".manifest", manifest);

  std::vector<TrainingExample> examples(set.formulas.size());
  parallelFor(examples.size(), a.jobs, [&](std::size_t i) {
    LabeledInstance inst{set.formulas[i], {}, {}, set.labels[i]};
    try {
      examples[i] = makeExample(inst, config.model);
    } catch (const std::invalid_argument &e) {
      throw DataError(set.names[i] + ": " + e.what());
    }
  });

  TrainHooks hooks;
  hooks.jobs = a.jobs;
  hooks.onEpoch = [](const EpochRecord &r) {
    std::cout << "epoch " << r.epoch << " l_core " << fmt(r.lCore) << " l_cons "
              << fmt(r.lCons) << " l_decomp " << fmt(r.lDecomp) << " total "
              << fmt(r.total) << " lr " << fmt(r.learningRate) << std::endl;
  };
  TrainResult result = train(examples, config, hooks);
  saveCheckpoint(a.out, result.params);
  writeTextFile(history, formatHistoryCsv(result.history));
  std::cout << "saved " << a.out << "\n";
  return kOk;
}

//===----------------------------------------------------------------------===//
// predict
//===----------------------------------------------------------------------===//

struct PredictArgs {
  std::string ckpt;
  std::string in;
  std::string out;
  std::size_t jobs = 1;
};

int runPredict(const PredictArgs &a) {
  ModelParams params;
  try {
    params = loadCheckpoint(a.ckpt);
  } catch (const std::runtime_error &e) {
    throw DataError(e.what());
  }
  std::vector<fs::path> files = listCnfFiles(a.in);
  if (files.empty())
    throw DataError("no .cnf files in '" + a.in + "'");
  std::vector<CnfFormula> formulas;
  for (const fs::path &f : files)
    formulas.push_back(readDimacsFile(f));
  writeManifest(a.out + ".manifest",
                {"predict", {}, params.config().seed, {a.ckpt, a.in}, {a.out}, {}});

  std::vector<ScoreRecord> records(files.size());
  parallelFor(files.size(), a.jobs, [&](std::size_t i) {
    records[i] = {files[i].filename().string(), predictScores(formulas[i], params)};
  });
  writeTextFile(a.out, formatScoreSidecar(records));
  std::cout << "scored " << records.size() << " instances -> " << a.out << "\n";
  return kOk;
}

//===----------------------------------------------------------------------===//
// eval
//===----------------------------------------------------------------------===//

struct EvalArgs {
  std::string scores;
  std::string labels;
  std::string out;
  std::string split = "test";
};

int runEval(const EvalArgs &a) {
  std::vector<ScoreRecord> scores = parseScoreSidecar(readTextFile(a.scores));
  std::vector<LabelRecord> labels =
      parseLabelSidecar(readTextFile(sidecarPath(a.labels, "labels.txt")));
  std::vector<std::vector<double>> s;
  std::vector<std::vector<std::uint8_t>> l;
  for (const ScoreRecord &rec : scores) {
    const LabelRecord *lab = findRecord(labels, rec.instance);
    if (!lab)
      throw DataError("no labels for scored instance '" + rec.instance + "'");
    if (lab->values.size() != rec.values.size())
      throw DataError("'" + rec.instance + "': " + std::to_string(rec.values.size()) +
                      " scores vs " + std::to_string(lab->values.size()) + " labels");
    s.push_back(rec.values);
    l.push_back(lab->values);
  }
  if (s.empty())
    throw DataError("score file is empty");
  MetricReport report = evaluate(s, l);
  writeManifest(a.out + ".manifest",
                {"eval", {{"split", a.split}}, 0, {a.scores, a.labels}, {a.out}, {}});
  std::string csv = formatEvalCsv(a.split, report);
  writeTextFile(a.out, csv);
  std::cout << csv;
  return kOk;
}

//===----------------------------------------------------------------------===//
// solve
//===----------------------------------------------------------------------===//

struct SolveArgs {
  std::string in;
  std::string scores;
  std::string stats;
  bool guided = false;
  std::uint64_t period = 1000;
  double periodSeconds = 0.0;
  std::uint64_t budget = 0;
};

int runSolve(const SolveArgs &a) {
  if (a.guided && a.scores.empty())
    throw UsageError("--guided needs --scores");
  std::vector<fs::path> files;
  if (fs::is_directory(a.in))
    files = listCnfFiles(a.in);
  else
    files.push_back(a.in);
  if (files.empty())
    throw DataError("no .cnf files in '" + a.in + "'");
  std::vector<CnfFormula> formulas;
  for (const fs::path &f : files)
    formulas.push_back(readDimacsFile(f));

  std::vector<std::optional<GuidanceConfig>> guidance(files.size());
  if (!a.scores.empty()) {
    std::vector<ScoreRecord> records = parseScoreSidecar(readTextFile(a.scores));
    for (std::size_t i = 0; i < files.size(); ++i) {
      const ScoreRecord *rec = findRecord(records, files[i].filename().string());
      if (!rec)
        throw DataError("no scores for '" + files[i].filename().string() + "'");
      GuidanceConfig g;
      g.scores = rec->values;
      g.period = a.period;
      if (a.periodSeconds > 0.0)
        g.periodSeconds = a.periodSeconds;
      try {
        g.validate(formulas[i].numVars());
      } catch (const std::invalid_argument &e) {
        throw DataError(files[i].filename().string() + ": " + e.what());
      }
      guidance[i] = std::move(g);
    }
  }

  writeManifest(a.stats + ".manifest",
                {"solve",
                 {{"guided", guidance[0] ? "true" : "false"},
                  {"period", std::to_string(a.period)},
                  {"period_seconds", fmt(a.periodSeconds)},
                  {"budget", std::to_string(a.budget)}},
                 0,
                 {a.in, a.scores},
                 {a.stats},
                 {}});

  std::vector<SolveStatsRow> rows;
  for (std::size_t i = 0; i < files.size(); ++i) {
    std::optional<std::uint64_t> budget;
    if (a.budget > 0)
      budget = a.budget;
    auto start = std::chrono::steady_clock::now();
    SolverResult r =
        solve(formulas[i], guidance[i] ? &*guidance[i] : nullptr, budget);
    double ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - start)
                    .count();
    if (r.status == SolveStatus::Sat && !checkAssignment(formulas[i], r.model))
      throw std::logic_error("solver returned a non-satisfying model for " +
                             files[i].string());
    rows.push_back({files[i].filename().string(), r.status, r.stats.conflicts,
                    r.stats.decisions, ms});
    std::cout << rows.back().instance << " " << toString(r.status) << " conflicts "
              << r.stats.conflicts << " decisions " << r.stats.decisions << "\n";
  }
  writeTextFile(a.stats, formatStatsCsv(rows));
  return kOk;
}

//===----------------------------------------------------------------------===//
// flip
//===----------------------------------------------------------------------===//

int runFlip(const std::string &in, const std::string &out) {
  CnfFormula f = readDimacsFile(in);
  writeTextFile(out, serializeDimacs(polarityFlip(f)));
  return kOk;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Unsat-core variable prediction lab"};
  app.set_version_flag("--version", POLARCORE_VERSION);
  app.require_subcommand(1);
  std::size_t jobs = defaultJobs();

  GenerateArgs gen;
  auto *generate = app.add_subcommand("generate", "Generate paired SR instances");
  generate->add_option("--n-range", gen.range, "Variable count range A:B")
      ->capture_default_str();
  generate->add_option("--count", gen.count, "Number of instances")
      ->capture_default_str();
  generate->add_option("--out", gen.out, "Output directory")->required();
  generate->add_option("--seed", gen.seed, "Dataset seed")->capture_default_str();
  generate->add_flag("--emit-sat", gen.emitSat,
                     "Also write the satisfiable twins to OUT/sat");
  generate->add_option("--jobs", jobs, "Worker threads (POLARCORE_JOBS)");

  LabelArgs lab;
  auto *label = app.add_subcommand("label", "Label core variables with the solver");
  label->add_option("--in", lab.in, "Instance directory")->required();
  label->add_option("--out", lab.out, "Label sidecar (default IN/labels.txt)");
  label->add_flag("--minimize", lab.minimize, "Shrink each core to a MUS");
  label->add_option("--jobs", jobs, "Worker threads (POLARCORE_JOBS)");

  TrainArgs tr;
  auto *trainCmd = app.add_subcommand("train", "Train a model");
  trainCmd->add_option("--data", tr.data, "Instance directory")->required();
  trainCmd->add_option("--config", tr.config, "key = value config file");
  trainCmd->add_option("--out", tr.out, "Checkpoint path")->required();
  trainCmd->add_option("--labels", tr.labels, "Label sidecar (default DATA/labels.txt)");
  trainCmd->add_option("--history", tr.history, "History CSV (default OUT.history.csv)");
  trainCmd->add_option("--ablation", tr.ablation, "hg, hg+de or full")
      ->check(CLI::IsMember({"hg", "hg+de", "full"}));
  trainCmd->add_option("--jobs", jobs, "Worker threads (POLARCORE_JOBS)");

  PredictArgs pr;
  auto *predict = app.add_subcommand("predict", "Score variables with a checkpoint");
  predict->add_option("--ckpt", pr.ckpt, "Checkpoint")->required();
  predict->add_option("--in", pr.in, "Instance directory")->required();
  predict->add_option("--out", pr.out, "Score sidecar")->required();
  predict->add_option("--jobs", jobs, "Worker threads (POLARCORE_JOBS)");

  EvalArgs ev;
  auto *evalCmd = app.add_subcommand("eval", "Ranking metrics of scores");
  evalCmd->add_option("--scores", ev.scores, "Score sidecar")->required();
  evalCmd->add_option("--labels", ev.labels, "Label sidecar or its directory")
      ->required();
  evalCmd->add_option("--out", ev.out, "Metrics CSV")->required();
  evalCmd->add_option("--split", ev.split, "Split name")->capture_default_str();
  evalCmd->add_option("--jobs", jobs, "Accepted for uniformity");

  SolveArgs sv;
  auto *solveCmd = app.add_subcommand("solve", "Run the CDCL solver");
  solveCmd->add_option("--in", sv.in, "DIMACS file or directory")->required();
  solveCmd->add_option("--scores", sv.scores, "Score sidecar for branching guidance");
  solveCmd->add_flag("--guided", sv.guided, "Require guidance scores");
  solveCmd->add_option("--period", sv.period, "Conflicts between activity overwrites")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  solveCmd->add_option("--period-seconds", sv.periodSeconds,
                       "Overwrite on wall-clock time instead")
      ->check(CLI::NonNegativeNumber);
  solveCmd->add_option("--budget", sv.budget, "Conflict budget (0 = none)");
  solveCmd->add_option("--stats", sv.stats, "Stats CSV")->required();
  solveCmd->add_option("--jobs", jobs, "Accepted for uniformity");

  std::string flipIn, flipOut;
  auto *flip = app.add_subcommand("flip", "Negate every literal");
  flip->add_option("--in", flipIn, "Input DIMACS")->required();
  flip->add_option("--out", flipOut, "Output DIMACS")->required();
  flip->add_option("--jobs", jobs, "Accepted for uniformity");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  if (jobs == 0) {
    std::cerr << "error: --jobs must be positive\n";
    return kUsage;
  }
  gen.jobs = lab.jobs = tr.jobs = pr.jobs = jobs;

  try {
    if (*generate)
      return runGenerate(gen);
    if (*label)
      return runLabel(lab);
    if (*trainCmd)
      return runTrain(tr);
    if (*predict)
      return runPredict(pr);
    if (*evalCmd)
      return runEval(ev);
    if (*solveCmd)
      return runSolve(sv);
    if (*flip)
      return runFlip(flipIn, flipOut);
  } catch (const UsageError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError &e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const DataError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::invalid_argument &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
