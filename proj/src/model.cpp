#include "polarcore/model.h"

#include "polarcore/rng.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <utility>

namespace polarcore {

InitMode parseInitMode(const std::string &name) {
  if (name == "ones")
    return InitMode::Ones;
  if (name == "random")
    return InitMode::Random;
  throw std::invalid_argument("unknown init mode '" + name + "'");
}

const char *toString(InitMode mode) {
  return mode == InitMode::Ones ? "ones" : "random";
}

Propagation parsePropagation(const std::string &name) {
  if (name == "extended")
    return Propagation::Extended;
  if (name == "baseline")
    return Propagation::Baseline;
  throw std::invalid_argument("unknown propagation mode '" + name + "'");
}

const char *toString(Propagation mode) {
  return mode == Propagation::Extended ? "extended" : "baseline";
}

//===----------------------------------------------------------------------===//
// Parameters
//===----------------------------------------------------------------------===//

namespace {

class LayoutBuilder {
public:
  explicit LayoutBuilder(std::vector<NamedTensor> &tensors) : tensors_(tensors) {}

  std::size_t add(std::string name, std::size_t rows, std::size_t cols) {
    tensors_.push_back({std::move(name), Tensor(rows, cols)});
    return tensors_.size() - 1;
  }

  LayerRef layer(const std::string &name, std::size_t in, std::size_t out) {
    LayerRef ref;
    ref.weight = add(name + ".weight", in, out);
    ref.bias = add(name + ".bias", 1, out);
    return ref;
  }

  MlpRef mlp(const std::string &name, std::size_t in, std::size_t hidden,
             std::size_t out) {
    return {layer(name + ".0", in, hidden), layer(name + ".1", hidden, out)};
  }

private:
  std::vector<NamedTensor> &tensors_;
};

} // namespace

ModelParams ModelParams::skeleton(const ModelConfig &config) {
  if (config.hiddenDim == 0 || config.rounds == 0)
    throw std::invalid_argument("hidden dimension and rounds must be positive");
  if (config.cigTopK == 0)
    throw std::invalid_argument("cig top-k must be positive");
  ModelParams p;
  p.config_ = config;
  std::size_t d = config.hiddenDim;
  LayoutBuilder b(p.tensors_);
  for (std::size_t t = 0; t < config.rounds; ++t) {
    std::string prefix = "round" + std::to_string(t);
    RoundRef r;
    r.messageWeight = b.add(prefix + ".W", d, d);
    if (config.decomposition) {
      r.splitInv = b.mlp(prefix + ".split_inv", 2 * d, d, d);
      r.splitEq = b.mlp(prefix + ".split_eq", 2 * d, d, d);
      r.mergeInv = b.mlp(prefix + ".merge_inv", d, d, d);
      r.mergeEq = b.mlp(prefix + ".merge_eq", d, d, d);
    }
    r.update = b.mlp(prefix + ".update", 3 * d, d, d);
    p.layout_.rounds.push_back(r);
  }
  p.layout_.clauseWeight = b.add("U", d, d);
  p.layout_.clauseScale = b.add("alpha", 1, 1);
  if (!config.decomposition)
    p.layout_.literalPairReadout = b.mlp("pair_readout", 2 * d, d, d);
  p.layout_.readout = b.layer("readout", d, 1);
  return p;
}

ModelParams ModelParams::initialize(const ModelConfig &config) {
  ModelParams p = skeleton(config);
  Rng rng = Rng(config.seed).split(0x5eed);
  for (NamedTensor &nt : p.tensors_) {
    const std::string &name = nt.name;
    if (name == "alpha") {
      nt.value[0] = 0.1;
    } else if (name.size() > 5 && name.compare(name.size() - 5, 5, ".bias") == 0) {
      // zero
    } else {
      double stddev = 1.0 / std::sqrt(static_cast<double>(nt.value.rows()));
      for (double &x : nt.value.data())
        x = rng.gaussian(0.0, stddev);
    }
  }
  return p;
}

const Tensor &ModelParams::get(const std::string &name) const {
  for (const NamedTensor &nt : tensors_)
    if (nt.name == name)
      return nt.value;
  throw std::out_of_range("no parameter named '" + name + "'");
}

Tensor &ModelParams::get(const std::string &name) {
  return const_cast<Tensor &>(std::as_const(*this).get(name));
}

std::size_t ModelParams::numScalars() const {
  std::size_t total = 0;
  for (const NamedTensor &nt : tensors_)
    total += nt.value.size();
  return total;
}

bool operator==(const ModelParams &a, const ModelParams &b) {
  if (!(a.config_ == b.config_) || a.tensors_.size() != b.tensors_.size())
    return false;
  for (std::size_t i = 0; i < a.tensors_.size(); ++i) {
    const Tensor &x = a.tensors_[i].value, &y = b.tensors_[i].value;
    if (a.tensors_[i].name != b.tensors_[i].name || !x.sameShape(y) ||
        std::memcmp(x.data().data(), y.data().data(), x.size() * sizeof(double)))
      return false;
  }
  return true;
}

BoundParams bindParams(Tape &tape, const ModelParams &params,
                       bool requiresGrad) {
  BoundParams bound;
  bound.params = &params;
  bound.vars.reserve(params.tensors().size());
  for (const NamedTensor &nt : params.tensors())
    bound.vars.push_back(tape.leaf(nt.value, requiresGrad));
  return bound;
}

//===----------------------------------------------------------------------===//
// Forward pieces
//===----------------------------------------------------------------------===//

GraphInputs prepareGraph(const CnfFormula &formula, std::size_t cigTopK) {
  GraphInputs g;
  g.numVars = formula.numVars();
  g.numClauses = formula.numClauses();
  g.incidence = buildIncidence(formula);
  g.cig = buildCig(formula, cigTopK);
  g.ops = buildOperators(g.incidence, g.cig);
  g.complement.resize(2 * static_cast<std::size_t>(formula.numVars()));
  for (std::size_t r = 0; r < g.complement.size(); ++r)
    g.complement[r] = complementRow(r);
  return g;
}

Tensor initVariables(std::size_t numVars, std::size_t hiddenDim, InitMode mode,
                     std::uint64_t seed) {
  if (numVars == 0)
    throw std::invalid_argument("initVariables needs at least one variable");
  if (mode == InitMode::Ones)
    return Tensor::ones(numVars, 2 * hiddenDim);
  Tensor v(numVars, 2 * hiddenDim);
  Rng rng(seed);
  double stddev = 1.0 / std::sqrt(2.0 * static_cast<double>(hiddenDim));
  for (double &x : v.data())
    x = rng.gaussian(0.0, stddev);
  return v;
}

Var applyLayer(Var x, const BoundParams &p, const LayerRef &layer) {
  return ad::addRowVector(ad::matmul(x, p[layer.weight]), p[layer.bias]);
}

Var applyMlp(Var x, const BoundParams &p, const MlpRef &mlp,
             Activation activation) {
  return applyLayer(ad::activate(applyLayer(x, p, mlp.first), activation), p,
                    mlp.second);
}

Decomposed decompose(Var variables, const BoundParams &p, std::size_t round) {
  const ModelConfig &cfg = p.params->config();
  if (variables.cols() != 2 * cfg.hiddenDim)
    throw ShapeError("decompose: expected width " +
                     std::to_string(2 * cfg.hiddenDim) + ", got " +
                     variables.value().shapeString());
  const RoundRef &r = p.params->layout().rounds.at(round);
  return {applyMlp(variables, p, r.splitInv, cfg.activation),
          applyMlp(variables, p, r.splitEq, cfg.activation)};
}

Var buildLiterals(Var inv, Var eq) {
  if (!inv.value().sameShape(eq.value()))
    throw ShapeError("buildLiterals: component shapes differ");
  std::size_t n = inv.rows();
  Var stacked = ad::concatRows({ad::add(inv, eq), ad::sub(inv, eq)});
  std::vector<std::size_t> interleave(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    interleave[2 * i] = i;
    interleave[2 * i + 1] = n + i;
  }
  return ad::rowPermute(stacked, std::move(interleave));
}

Decomposed recoverVariables(Var literals) {
  if (literals.rows() % 2 != 0)
    throw ShapeError("recoverVariables: odd literal row count " +
                     std::to_string(literals.rows()));
  std::size_t n = literals.rows() / 2;
  Var pos = ad::rowSlice(literals, 0, n, 2);
  Var negRows = ad::rowSlice(literals, 1, n, 2);
  return {ad::scale(ad::add(pos, negRows), 0.5),
          ad::scale(ad::sub(pos, negRows), 0.5)};
}

Var literalMessages(Var literals, const GraphInputs &graph, const BoundParams &p,
                    std::size_t round) {
  const ModelConfig &cfg = p.params->config();
  const ParamLayout &layout = p.params->layout();
  if (literals.rows() != 2 * static_cast<std::size_t>(graph.numVars) ||
      literals.cols() != cfg.hiddenDim)
    throw ShapeError("literalMessages: literal matrix " +
                     literals.value().shapeString() + " does not match graph");
  Var projected = ad::matmul(literals, p[layout.rounds.at(round).messageWeight]);
  Var clauses = ad::spmm(graph.ops.literalToClause, projected);
  if (cfg.propagation == Propagation::Extended) {
    Var delta = ad::matmul(ad::spmm(graph.ops.clauseToClause, clauses),
                           p[layout.clauseWeight]);
    clauses = ad::add(clauses, ad::scaleBy(p[layout.clauseScale],
                                           ad::activate(delta, cfg.activation)));
  }
  return ad::spmm(graph.ops.clauseToLiteral, clauses);
}

Var updateLiterals(Var literals, Var messages, const GraphInputs &graph,
                   const BoundParams &p, std::size_t round) {
  const ModelConfig &cfg = p.params->config();
  Var complement = ad::rowPermute(literals, graph.complement);
  Var joined = ad::concatCols({literals, messages, complement});
  return applyMlp(joined, p, p.params->layout().rounds.at(round).update,
                  cfg.activation);
}

Var propagateRound(Var literals, const GraphInputs &graph, const BoundParams &p,
                   std::size_t round) {
  Var messages = literalMessages(literals, graph, p, round);
  return updateLiterals(literals, messages, graph, p, round);
}

Var updateVariables(const Decomposed &recovered, const BoundParams &p,
                    std::size_t round) {
  const ModelConfig &cfg = p.params->config();
  const RoundRef &r = p.params->layout().rounds.at(round);
  return ad::concatCols({applyMlp(recovered.inv, p, r.mergeInv, cfg.activation),
                         applyMlp(recovered.eq, p, r.mergeEq, cfg.activation)});
}

ForwardResult forward(Tape &tape, const GraphInputs &graph,
                      const BoundParams &params) {
  const ModelConfig &cfg = params.params->config();
  const ParamLayout &layout = params.params->layout();
  std::size_t n = static_cast<std::size_t>(graph.numVars);
  std::size_t d = cfg.hiddenDim;
  std::uint64_t initSeed = splitMix64(cfg.seed ^ (0x1000003ULL * n));

  ForwardResult result;
  Var invariant;
  if (cfg.decomposition) {
    Var v = tape.constant(initVariables(n, d, cfg.init, initSeed));
    for (std::size_t t = 0; t < cfg.rounds; ++t) {
      Decomposed parts = decompose(v, params, t);
      Var literals = buildLiterals(parts.inv, parts.eq);
      Var updated = propagateRound(literals, graph, params, t);
      Decomposed recovered = recoverVariables(updated);
      v = updateVariables(recovered, params, t);
      result.finalComponents = recovered;
    }
    invariant = ad::transpose(ad::rowSlice(ad::transpose(v), 0, d));
  } else {
    Tensor init = Tensor::ones(2 * n, d);
    if (cfg.init == InitMode::Random) {
      Rng rng(initSeed);
      double stddev = 1.0 / std::sqrt(static_cast<double>(d));
      for (double &x : init.data())
        x = rng.gaussian(0.0, stddev);
    }
    Var literals = tape.constant(std::move(init));
    for (std::size_t t = 0; t < cfg.rounds; ++t)
      literals = propagateRound(literals, graph, params, t);
    Var pairs = ad::concatCols({ad::rowSlice(literals, 0, n, 2),
                                ad::rowSlice(literals, 1, n, 2)});
    invariant = applyMlp(pairs, params, *layout.literalPairReadout, cfg.activation);
  }

  result.scores = applyLayer(invariant, params, layout.readout);
  Var row = ad::transpose(result.scores);
  result.logProbs = ad::transpose(ad::logSoftmaxRows(row));
  result.probs = ad::transpose(ad::softmaxRows(row));
  return result;
}

std::vector<double> predictScores(const CnfFormula &formula,
                                  const ModelParams &params) {
  GraphInputs graph = prepareGraph(formula, params.config().cigTopK);
  Tape tape;
  BoundParams bound = bindParams(tape, params, false);
  ForwardResult r = forward(tape, graph, bound);
  const Tensor &s = r.scores.value();
  return std::vector<double>(s.data().begin(), s.data().end());
}

//===----------------------------------------------------------------------===//
// Checkpoints
//===----------------------------------------------------------------------===//

namespace {

constexpr char kMagic[8] = {'P', 'L', 'R', 'C', 'K', 'P', 'T', '1'};

void writeU64(std::ostream &out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i)
    bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char *>(bytes), 8);
}

std::uint64_t readU64(std::istream &in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char *>(bytes), 8))
    throw std::runtime_error("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

void writeDouble(std::ostream &out, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, sizeof bits);
  writeU64(out, bits);
}

double readDouble(std::istream &in) {
  std::uint64_t bits = readU64(in);
  double x;
  std::memcpy(&x, &bits, sizeof x);
  return x;
}

std::string headerText(const ModelConfig &c) {
  std::ostringstream h;
  h << "d=" << c.hiddenDim << "\n"
    << "T=" << c.rounds << "\n"
    << "activation=" << toString(c.activation) << "\n"
    << "init=" << toString(c.init) << "\n"
    << "propagation=" << toString(c.propagation) << "\n"
    << "decomposition=" << (c.decomposition ? 1 : 0) << "\n"
    << "regularization=" << (c.regularization ? 1 : 0) << "\n"
    << "cig_top_k=" << c.cigTopK << "\n"
    << "seed=" << c.seed << "\n";
  return h.str();
}

ModelConfig parseHeader(const std::string &text) {
  ModelConfig c;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("malformed checkpoint header line '" + line + "'");
    std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "d")
      c.hiddenDim = std::stoull(value);
    else if (key == "T")
      c.rounds = std::stoull(value);
    else if (key == "activation")
      c.activation = parseActivation(value);
    else if (key == "init")
      c.init = parseInitMode(value);
    else if (key == "propagation")
      c.propagation = parsePropagation(value);
    else if (key == "decomposition")
      c.decomposition = value == "1";
    else if (key == "regularization")
      c.regularization = value == "1";
    else if (key == "cig_top_k")
      c.cigTopK = std::stoull(value);
    else if (key == "seed")
      c.seed = std::stoull(value);
    else
      throw std::runtime_error("unknown checkpoint header key '" + key + "'");
  }
  return c;
}

} // namespace

void writeCheckpoint(std::ostream &out, const ModelParams &params) {
  out.write(kMagic, sizeof kMagic);
  std::string header = headerText(params.config());
  writeU64(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  writeU64(out, params.tensors().size());
  for (const NamedTensor &nt : params.tensors()) {
    writeU64(out, nt.name.size());
    out.write(nt.name.data(), static_cast<std::streamsize>(nt.name.size()));
    writeU64(out, nt.value.rows());
    writeU64(out, nt.value.cols());
    for (double x : nt.value.data())
      writeDouble(out, x);
  }
  if (!out)
    throw std::runtime_error("failed writing checkpoint");
}

ModelParams readCheckpoint(std::istream &in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("not a checkpoint file (bad magic)");
  std::uint64_t headerLen = readU64(in);
  if (headerLen > (1U << 20))
    throw std::runtime_error("checkpoint header too large");
  std::string header(headerLen, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(headerLen)))
    throw std::runtime_error("checkpoint truncated");
  ModelParams p = ModelParams::skeleton(parseHeader(header));
  std::uint64_t count = readU64(in);
  if (count != p.tensors_.size())
    throw std::runtime_error("checkpoint has " + std::to_string(count) +
                             " arrays, configuration expects " +
                             std::to_string(p.tensors_.size()));
  for (NamedTensor &nt : p.tensors_) {
    std::uint64_t nameLen = readU64(in);
    if (nameLen > 4096)
      throw std::runtime_error("checkpoint array name too long");
    std::string name(nameLen, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(nameLen)))
      throw std::runtime_error("checkpoint truncated");
    std::uint64_t rows = readU64(in), cols = readU64(in);
    if (name != nt.name || rows != nt.value.rows() || cols != nt.value.cols())
      throw std::runtime_error("checkpoint array '" + name +
                               "' does not match expected '" + nt.name + "' " +
                               nt.value.shapeString());
    for (double &x : nt.value.data())
      x = readDouble(in);
  }
  return p;
}

void saveCheckpoint(const std::string &path, const ModelParams &params) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open '" + path + "' for writing");
  writeCheckpoint(out, params);
}

ModelParams loadCheckpoint(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open checkpoint '" + path + "'");
  return readCheckpoint(in);
}

} // namespace polarcore
