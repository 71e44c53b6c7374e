#include "polarcore/io.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace polarcore {

namespace fs = std::filesystem;

std::string readTextFile(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw DataError("cannot read '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void writeTextFile(const fs::path &path, const std::string &text) {
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out || !out.write(text.data(), static_cast<std::streamsize>(text.size())))
    throw DataError("cannot write '" + path.string() + "'");
}

CnfFormula readDimacsFile(const fs::path &path) {
  std::string text = readTextFile(path);
  try {
    return parseDimacs(text);
  } catch (const ParseError &e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<fs::path> listCnfFiles(const fs::path &dir) {
  if (!fs::is_directory(dir))
    throw DataError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto &entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".cnf")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

namespace {

template <typename T, typename ParseValue>
std::vector<SidecarRecord<T>> parseSidecar(const std::string &text,
                                           ParseValue parseValue) {
  std::vector<SidecarRecord<T>> records;
  std::istringstream in(text);
  std::string line;
  for (int lineNo = 1; std::getline(in, line); ++lineNo) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos)
      continue;
    std::istringstream fields(line);
    SidecarRecord<T> rec;
    fields >> rec.instance;
    std::string token;
    while (fields >> token) {
      try {
        rec.values.push_back(parseValue(token));
      } catch (const std::exception &) {
        throw DataError("sidecar line " + std::to_string(lineNo) +
                        ": bad value '" + token + "'");
      }
    }
    if (rec.values.empty())
      throw DataError("sidecar line " + std::to_string(lineNo) +
                      ": no values for '" + rec.instance + "'");
    if (findRecord(records, rec.instance))
      throw DataError("sidecar line " + std::to_string(lineNo) +
                      ": duplicate instance '" + rec.instance + "'");
    records.push_back(std::move(rec));
  }
  return records;
}

std::string formatDouble(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

} // namespace

std::vector<LabelRecord> parseLabelSidecar(const std::string &text) {
  return parseSidecar<std::uint8_t>(text, [](const std::string &t) {
    if (t == "0")
      return std::uint8_t{0};
    if (t == "1")
      return std::uint8_t{1};
    throw std::invalid_argument("label");
  });
}

std::vector<ScoreRecord> parseScoreSidecar(const std::string &text) {
  return parseSidecar<double>(text, [](const std::string &t) {
    std::size_t used = 0;
    double x = std::stod(t, &used);
    if (used != t.size() || !std::isfinite(x))
      throw std::invalid_argument("score");
    return x;
  });
}

std::string formatLabelSidecar(const std::vector<LabelRecord> &records) {
  std::string out;
  for (const LabelRecord &r : records) {
    out += r.instance;
    for (std::uint8_t v : r.values)
      out += v ? " 1" : " 0";
    out += '\n';
  }
  return out;
}

std::string formatScoreSidecar(const std::vector<ScoreRecord> &records) {
  std::string out;
  for (const ScoreRecord &r : records) {
    out += r.instance;
    for (double v : r.values)
      out += ' ' + formatDouble(v);
    out += '\n';
  }
  return out;
}

std::string formatStatsCsv(const std::vector<SolveStatsRow> &rows) {
  std::string out = "instance,status,conflicts,decisions,wall_ms\n";
  for (const SolveStatsRow &r : rows) {
    char wall[32];
    std::snprintf(wall, sizeof wall, "%.3f", r.wallMs);
    out += r.instance + ',' + toString(r.status) + ',' +
           std::to_string(r.conflicts) + ',' + std::to_string(r.decisions) +
           ',' + wall + '\n';
  }
  return out;
}

std::string formatHistoryCsv(const std::vector<EpochRecord> &history) {
  std::string out = "epoch,l_core,l_cons,l_decomp,total,lr\n";
  for (const EpochRecord &r : history)
    out += std::to_string(r.epoch) + ',' + formatDouble(r.lCore) + ',' +
           formatDouble(r.lCons) + ',' + formatDouble(r.lDecomp) + ',' +
           formatDouble(r.total) + ',' + formatDouble(r.learningRate) + '\n';
  return out;
}

std::string formatEvalCsv(const std::string &split, const MetricReport &report) {
  std::size_t counted = report.instances.size() - report.skippedEmpty;
  return "split,precision,pr_auc,roc_auc,instances,skipped_roc\n" + split + ',' +
         formatDouble(report.precision) + ',' + formatDouble(report.prAuc) + ',' +
         formatDouble(report.rocAuc) + ',' + std::to_string(counted) + ',' +
         std::to_string(report.skippedRoc) + '\n';
}

std::string formatManifest(const RunManifest &m) {
  std::string out = "subcommand = " + m.subcommand + "\n";
  out += "version = " + m.version + "\n";
  out += "seed = " + std::to_string(m.seed) + "\n";
  for (const std::string &in : m.inputs)
    out += "input = " + in + "\n";
  for (const std::string &o : m.outputs)
    out += "output = " + o + "\n";
  for (const auto &[key, value] : m.settings)
    out += "config." + key + " = " + value + "\n";
  return out;
}

} // namespace polarcore
