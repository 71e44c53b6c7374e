//===- training.h - Losses, dual-view objective and the trainer -*- C++ -*-===//
//
// The objective for one formula runs the model on the formula and on its
// polarity flip with shared parameters:
//
//   KL(p* || p) + KL(p* || p_flip) + lambda_cons * L_cons
//                                  + lambda_decomp * L_decomp
//
// With regularization disabled the flipped view is skipped entirely.
//
//===----------------------------------------------------------------------===//

#ifndef POLARCORE_TRAINING_H
#define POLARCORE_TRAINING_H

#include "polarcore/model.h"
#include "polarcore/sat_gen.h"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace polarcore {

inline constexpr double kProbabilityFloor = 1e-12;

/// p*[i] = labels[i] / sum(labels). Throws std::invalid_argument when no
/// label is positive.
std::vector<double> buildTarget(std::span<const std::uint8_t> labels);

/// sum_i p*_i log(p*_i / max(p_i, floor)), with 0 log 0 := 0.
double coreLoss(std::span<const double> p, std::span<const double> pStar);
double consistencyLoss(std::span<const double> s, std::span<const double> sFlip);

/// Tape versions. `logProbs` is N x 1 log-softmax output.
Var coreLoss(Var logProbs, const Tensor &pStar);
Var consistencyLoss(Var s, Var sFlip);
/// (1/N) sum_i ||inv_i - invFlip_i||^2 + ||eq_i + eqFlip_i||^2.
Var decompLoss(Var inv, Var invFlip, Var eq, Var eqFlip);

struct LossWeights {
  double consistency = 0.1;
  double decomposition = 0.05;
};

/// Graphs and target of one labelled formula, precomputed once.
struct TrainingExample {
  GraphInputs graph;
  std::optional<GraphInputs> flipped;
  Tensor target; ///< N x 1.
};

TrainingExample makeExample(const LabeledInstance &instance,
                            const ModelConfig &model);

struct LossTerms {
  double coreOriginal = 0.0;
  double coreFlipped = 0.0;
  double consistency = 0.0;
  double decomposition = 0.0;
  double total = 0.0;

  double core() const { return coreOriginal + coreFlipped; }
};

struct LossOutput {
  Var total;
  LossTerms terms;
};

/// Throws std::invalid_argument if regularization is on but the example
/// has no flipped graph.
LossOutput totalLoss(Tape &tape, const BoundParams &params,
                     const TrainingExample &example, const LossWeights &weights);

//===----------------------------------------------------------------------===//
// Configuration
//===----------------------------------------------------------------------===//

struct TrainConfig {
  double learningRate = 2e-4;
  double weightDecay = 1e-4;
  double gradClipNorm = 5.0;
  double lrDecay = 0.95;
  std::size_t batchSize = 32;
  std::size_t epochs = 20;
  LossWeights lambda;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adamEps = 1e-8;
  /// Batch order.
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

struct RunConfig {
  TrainConfig train;
  ModelConfig model;
};

/// Flat `key = value` lines; '#' starts a comment. Unknown keys, repeated
/// keys and unparsable values throw std::invalid_argument naming the line.
RunConfig parseRunConfig(const std::string &text);
/// Every key with its resolved value, in parseRunConfig syntax.
std::string formatRunConfig(const RunConfig &config);

/// "hg" (no decomposition, no regularization), "hg+de" (no regularization)
/// or "full".
void applyAblation(ModelConfig &model, const std::string &name);

//===----------------------------------------------------------------------===//
// Optimization
//===----------------------------------------------------------------------===//

/// Per-parameter gradients aligned with ModelParams::tensors().
using Gradients = std::vector<Tensor>;

Gradients zeroGradients(const ModelParams &params);
double globalNorm(const Gradients &grads);
/// Rescales so the global norm is at most maxNorm; returns the norm before
/// clipping.
double clipGradients(Gradients &grads, double maxNorm);

class AdamW {
public:
  AdamW(const ModelParams &params, const TrainConfig &config);

  void step(ModelParams &params, const Gradients &grads, double learningRate);
  std::uint64_t steps() const { return steps_; }

private:
  double beta1_, beta2_, eps_, weightDecay_;
  std::uint64_t steps_ = 0;
  std::vector<Tensor> m_, v_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lCore = 0.0;
  double lCons = 0.0;
  double lDecomp = 0.0;
  double total = 0.0;
  double learningRate = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> history;
};

struct TrainHooks {
  /// Worker threads for per-example forward/backward. Results do not
  /// depend on this value.
  std::size_t jobs = 1;
  std::function<void(const EpochRecord &)> onEpoch;
};

/// Loss and parameter gradients of one example on a private tape.
LossTerms exampleGradients(const ModelParams &params,
                           const TrainingExample &example,
                           const LossWeights &weights, Gradients &out);

/// One optimizer step over `batch`: averaged gradients, clipping, AdamW.
/// Returns the averaged loss terms.
LossTerms trainStep(ModelParams &params, AdamW &optimizer,
                    std::span<const TrainingExample *const> batch,
                    const TrainConfig &config, double learningRate,
                    std::size_t jobs = 1);

/// Throws NumericError if a loss becomes non-finite.
TrainResult train(const std::vector<TrainingExample> &dataset,
                  const RunConfig &config, const TrainHooks &hooks = {});

/// (1/N) ||s(phi) - s(flip(phi))||^2 under the given parameters.
double flipConsistencyGap(const CnfFormula &formula, const ModelParams &params);

/// Runs fn(i) for i in [0, count) on up to `jobs` threads. Rethrows the
/// first exception by index.
void parallelFor(std::size_t count, std::size_t jobs,
                 const std::function<void(std::size_t)> &fn);

} // namespace polarcore

#endif // POLARCORE_TRAINING_H
