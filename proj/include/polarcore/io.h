//===- io.h - Sidecar files, CSV output and run manifests ------*- C++ -*-===//
//
// Formulas are plain DIMACS. Labels and scores travel in sidecar files with
// one line per instance:
//
//   sr_00017.cnf 1 0 1 1 0
//   sr_00017.cnf 0.8125 -1.5 0.25 2 0
//
//===----------------------------------------------------------------------===//

#ifndef POLARCORE_IO_H
#define POLARCORE_IO_H

#include "polarcore/cdcl.h"
#include "polarcore/cnf.h"
#include "polarcore/eval.h"
#include "polarcore/training.h"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace polarcore {

/// Missing or malformed input files.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

std::string readTextFile(const std::filesystem::path &path);
void writeTextFile(const std::filesystem::path &path, const std::string &text);
CnfFormula readDimacsFile(const std::filesystem::path &path);

/// Sorted paths of `*.cnf` directly inside `dir`.
std::vector<std::filesystem::path> listCnfFiles(const std::filesystem::path &dir);

template <typename T> struct SidecarRecord {
  std::string instance;
  std::vector<T> values;
};

using LabelRecord = SidecarRecord<std::uint8_t>;
using ScoreRecord = SidecarRecord<double>;

std::vector<LabelRecord> parseLabelSidecar(const std::string &text);
std::vector<ScoreRecord> parseScoreSidecar(const std::string &text);
std::string formatLabelSidecar(const std::vector<LabelRecord> &records);
/// Scores are printed with 17 significant digits so they round-trip.
std::string formatScoreSidecar(const std::vector<ScoreRecord> &records);

template <typename T>
const SidecarRecord<T> *findRecord(const std::vector<SidecarRecord<T>> &records,
                                   const std::string &instance) {
  for (const auto &r : records)
    if (r.instance == instance)
      return &r;
  return nullptr;
}

struct SolveStatsRow {
  std::string instance;
  SolveStatus status = SolveStatus::Unknown;
  std::uint64_t conflicts = 0;
  std::uint64_t decisions = 0;
  double wallMs = 0.0;
};

std::string formatStatsCsv(const std::vector<SolveStatsRow> &rows);
std::string formatHistoryCsv(const std::vector<EpochRecord> &history);
/// One row per split: split,precision,pr_auc,roc_auc,instances,skipped_roc.
std::string formatEvalCsv(const std::string &split, const MetricReport &report);

struct RunManifest {
  std::string subcommand;
  std::vector<std::pair<std::string, std::string>> settings;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string version;
};

std::string formatManifest(const RunManifest &manifest);

} // namespace polarcore

#endif // POLARCORE_IO_H
