//===- model.h - Polarity-aware hypergraph message passing -----*- C++ -*-===//
//
// Each round splits variable embeddings (N x 2d) into an invariant and an
// equivariant half, builds complementary literal embeddings as their sum
// and difference (rows 2i and 2i+1), propagates literals through the
// clause hypergraph and the clause incidence graph, and recombines the
// updated literal pair back into the two halves.
//
// Scores come from a linear map over the final invariant embedding.
//
//===----------------------------------------------------------------------===//

#ifndef POLARCORE_MODEL_H
#define POLARCORE_MODEL_H

#include "polarcore/autodiff.h"
#include "polarcore/cnf.h"
#include "polarcore/hypergraph.h"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace polarcore {

enum class InitMode { Ones, Random };
enum class Propagation {
  Extended, ///< Hypergraph plus clause incidence graph refinement.
  Baseline, ///< Degree-normalized hypergraph operator only.
};

InitMode parseInitMode(const std::string &name);
const char *toString(InitMode mode);
Propagation parsePropagation(const std::string &name);
const char *toString(Propagation mode);

struct ModelConfig {
  std::size_t hiddenDim = 80;
  std::size_t rounds = 4;
  Activation activation = Activation::Relu;
  InitMode init = InitMode::Ones;
  Propagation propagation = Propagation::Extended;
  bool decomposition = true;
  bool regularization = true;
  std::size_t cigTopK = 50;
  /// Seeds weight initialization and the random variable-embedding mode.
  std::uint64_t seed = 7;

  friend bool operator==(const ModelConfig &, const ModelConfig &) = default;
};

/// Indices into ModelParams::tensors() for one affine layer.
struct LayerRef {
  std::size_t weight = 0;
  std::size_t bias = 0;
};

/// Two affine layers with the activation in between.
struct MlpRef {
  LayerRef first;
  LayerRef second;
};

struct RoundRef {
  std::size_t messageWeight = 0; ///< W^(t), d x d.
  MlpRef splitInv, splitEq;      ///< 2d -> d.
  MlpRef mergeInv, mergeEq;      ///< d -> d.
  MlpRef update;                 ///< 3d -> d.
};

struct ParamLayout {
  std::vector<RoundRef> rounds;
  std::size_t clauseWeight = 0; ///< U, shared across rounds.
  std::size_t clauseScale = 0;  ///< alpha (1x1), shared across rounds.
  LayerRef readout;             ///< g: d -> 1.
  std::optional<MlpRef> literalPairReadout; ///< 2d -> d, without decomposition.
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

class ModelParams {
public:
  ModelParams() = default;

  /// Gaussian(0, 1/sqrt(fan_in)) weights, zero biases, alpha = 0.1.
  static ModelParams initialize(const ModelConfig &config);

  const ModelConfig &config() const { return config_; }
  const ParamLayout &layout() const { return layout_; }
  std::vector<NamedTensor> &tensors() { return tensors_; }
  const std::vector<NamedTensor> &tensors() const { return tensors_; }
  const Tensor &get(const std::string &name) const;
  Tensor &get(const std::string &name);
  std::size_t numScalars() const;

  friend bool operator==(const ModelParams &a, const ModelParams &b);

private:
  friend ModelParams readCheckpoint(std::istream &in);
  static ModelParams skeleton(const ModelConfig &config);

  ModelConfig config_;
  ParamLayout layout_;
  std::vector<NamedTensor> tensors_;
};

/// Parameters placed on a tape as leaves, aligned with ModelParams::tensors().
struct BoundParams {
  const ModelParams *params = nullptr;
  std::vector<Var> vars;

  Var operator[](std::size_t index) const { return vars[index]; }
};

BoundParams bindParams(Tape &tape, const ModelParams &params,
                       bool requiresGrad);

/// Per-formula constants consumed by the forward pass.
struct GraphInputs {
  int numVars = 0;
  std::size_t numClauses = 0;
  IncidenceStructure incidence;
  ClauseIncidenceGraph cig;
  MessageOperators ops;
  /// Row index of each literal's complement (2i <-> 2i+1).
  std::vector<std::size_t> complement;
};

GraphInputs prepareGraph(const CnfFormula &formula, std::size_t cigTopK);

/// N x 2d all-ones, or seeded Gaussian(0, 1/sqrt(2d)).
Tensor initVariables(std::size_t numVars, std::size_t hiddenDim, InitMode mode,
                     std::uint64_t seed);

Var applyLayer(Var x, const BoundParams &p, const LayerRef &layer);
Var applyMlp(Var x, const BoundParams &p, const MlpRef &mlp,
             Activation activation);

struct Decomposed {
  Var inv; ///< N x d.
  Var eq;  ///< N x d.
};

Decomposed decompose(Var variables, const BoundParams &p, std::size_t round);

/// Row 2i = inv[i] + eq[i], row 2i+1 = inv[i] - eq[i].
Var buildLiterals(Var inv, Var eq);

/// inv[i] = (L[2i] + L[2i+1]) / 2, eq[i] = (L[2i] - L[2i+1]) / 2.
Decomposed recoverVariables(Var literals);

/// Messages arriving at each literal (2N x d). Extended mode refines the
/// clause embeddings over the clause incidence graph before sending them
/// back; baseline mode applies the plain hypergraph operator.
Var literalMessages(Var literals, const GraphInputs &graph, const BoundParams &p,
                    std::size_t round);

/// f_update over [L | M | L-bar].
Var updateLiterals(Var literals, Var messages, const GraphInputs &graph,
                   const BoundParams &p, std::size_t round);

Var propagateRound(Var literals, const GraphInputs &graph, const BoundParams &p,
                   std::size_t round);

/// Column concatenation [f'_inv(inv), f'_eq(eq)] (N x 2d).
Var updateVariables(const Decomposed &recovered, const BoundParams &p,
                    std::size_t round);

struct ForwardResult {
  Var scores;   ///< N x 1.
  Var logProbs; ///< N x 1, log-softmax of scores.
  Var probs;    ///< N x 1.
  /// Final recovered components; unset when decomposition is disabled.
  std::optional<Decomposed> finalComponents;
};

ForwardResult forward(Tape &tape, const GraphInputs &graph,
                      const BoundParams &params);

/// Convenience: scores of a formula with a fresh tape and no gradients.
std::vector<double> predictScores(const CnfFormula &formula,
                                  const ModelParams &params);

//===----------------------------------------------------------------------===//
// Checkpoints
//===----------------------------------------------------------------------===//

/// Binary container: magic, a key=value header (d, T, activation, init,
/// propagation, ablation flags, top-k, seed), then named arrays as
/// (name, rows, cols, raw little-endian doubles).
void writeCheckpoint(std::ostream &out, const ModelParams &params);
ModelParams readCheckpoint(std::istream &in);
void saveCheckpoint(const std::string &path, const ModelParams &params);
ModelParams loadCheckpoint(const std::string &path);

} // namespace polarcore

#endif // POLARCORE_MODEL_H
