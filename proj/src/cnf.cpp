#include "polarcore/cnf.h"

#include <charconv>
#include <cstdlib>
#include <optional>

namespace polarcore {

ParseError::ParseError(Kind kind, std::size_t line, const std::string &what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what),
      kind_(kind), line_(line) {}

CnfFormula::CnfFormula(int numVars, std::vector<Clause> clauses)
    : numVars_(numVars), clauses_(std::move(clauses)) {
  if (numVars_ < 0)
    throw std::invalid_argument("negative variable count");
  for (const Clause &c : clauses_)
    for (int lit : c)
      if (lit == 0 || std::abs(lit) > numVars_)
        throw std::invalid_argument("literal out of range: " +
                                    std::to_string(lit));
}

std::size_t CnfFormula::numOccurrences() const {
  std::size_t total = 0;
  for (const Clause &c : clauses_)
    total += c.size();
  return total;
}

namespace {

std::vector<std::string_view> splitTokens(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() &&
           (line[i] == ' ' || line[i] == '\t' || line[i] == '\r'))
      ++i;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' &&
           line[i] != '\r')
      ++i;
    if (i > start)
      tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

std::optional<long long> toInteger(std::string_view token) {
  long long value = 0;
  auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size())
    return std::nullopt;
  return value;
}

} // namespace

CnfFormula parseDimacs(std::string_view text) {
  using Kind = ParseError::Kind;
  std::optional<long long> declaredVars;
  long long declaredClauses = 0;
  std::vector<Clause> clauses;
  Clause current;
  std::size_t currentStartLine = 0;
  std::size_t lineNo = 0;

  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos)
      eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++lineNo;

    auto tokens = splitTokens(line);
    if (tokens.empty())
      continue;
    if (tokens[0] == "c" || tokens[0][0] == 'c')
      continue;
    // Some generators terminate files with a lone '%'.
    if (tokens[0] == "%")
      break;
    if (tokens[0] == "p") {
      if (declaredVars)
        throw ParseError(Kind::DuplicateHeader, lineNo, "duplicate header");
      if (tokens.size() != 4 || tokens[1] != "cnf")
        throw ParseError(Kind::MalformedHeader, lineNo,
                         "malformed header, expected 'p cnf N M'");
      auto n = toInteger(tokens[2]);
      auto m = toInteger(tokens[3]);
      if (!n || !m || *n < 0 || *m < 0 || *n > (1LL << 30))
        throw ParseError(Kind::MalformedHeader, lineNo,
                         "malformed header counts");
      declaredVars = *n;
      declaredClauses = *m;
      continue;
    }
    if (!declaredVars)
      throw ParseError(Kind::MissingHeader, lineNo,
                       "clause data before 'p cnf' header");
    for (std::string_view tok : tokens) {
      auto lit = toInteger(tok);
      if (!lit)
        throw ParseError(Kind::BadToken, lineNo,
                         "bad token '" + std::string(tok) + "'");
      if (*lit == 0) {
        if (current.empty())
          throw ParseError(Kind::EmptyClause, lineNo, "zero-length clause");
        clauses.push_back(std::move(current));
        current.clear();
        continue;
      }
      if (std::llabs(*lit) > *declaredVars)
        throw ParseError(Kind::LiteralOutOfRange, lineNo,
                         "literal out of range: " + std::string(tok));
      if (current.empty())
        currentStartLine = lineNo;
      current.push_back(static_cast<int>(*lit));
    }
  }

  if (!declaredVars)
    throw ParseError(Kind::MissingHeader, lineNo, "missing 'p cnf' header");
  if (!current.empty())
    throw ParseError(Kind::ClauseCountMismatch, currentStartLine,
                     "unterminated clause");
  if (static_cast<long long>(clauses.size()) != declaredClauses)
    throw ParseError(Kind::ClauseCountMismatch, lineNo,
                     "clause count mismatch: header declares " +
                         std::to_string(declaredClauses) + ", found " +
                         std::to_string(clauses.size()));
  return CnfFormula(static_cast<int>(*declaredVars), std::move(clauses));
}

std::string serializeDimacs(const CnfFormula &formula) {
  std::string out = "p cnf " + std::to_string(formula.numVars()) + " " +
                    std::to_string(formula.numClauses()) + "\n";
  for (const Clause &c : formula.clauses()) {
    for (int lit : c) {
      out += std::to_string(lit);
      out += ' ';
    }
    out += "0\n";
  }
  return out;
}

CnfFormula polarityFlip(const CnfFormula &formula) {
  std::vector<Clause> flipped = formula.clauses();
  for (Clause &c : flipped)
    for (int &lit : c)
      lit = -lit;
  return CnfFormula(formula.numVars(), std::move(flipped));
}

std::size_t literalRow(int lit, int numVars) {
  if (lit == 0 || std::abs(lit) > numVars)
    throw std::out_of_range("literal out of range: " + std::to_string(lit));
  std::size_t var = static_cast<std::size_t>(std::abs(lit) - 1);
  return 2 * var + (lit < 0 ? 1 : 0);
}

CnfFormula subformula(const CnfFormula &formula,
                      const std::vector<std::size_t> &clauseIds) {
  std::vector<Clause> picked;
  picked.reserve(clauseIds.size());
  for (std::size_t id : clauseIds)
    picked.push_back(formula.clause(id));
  return CnfFormula(formula.numVars(), std::move(picked));
}

} // namespace polarcore
