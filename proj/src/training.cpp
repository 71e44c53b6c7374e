#include "polarcore/training.h"

#include "polarcore/rng.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

namespace polarcore {

//===----------------------------------------------------------------------===//
// Losses
//===----------------------------------------------------------------------===//

std::vector<double> buildTarget(std::span<const std::uint8_t> labels) {
  std::size_t positives = 0;
  for (std::uint8_t l : labels) {
    if (l > 1)
      throw std::invalid_argument("labels must be 0 or 1");
    positives += l;
  }
  if (positives == 0)
    throw std::invalid_argument("target needs at least one positive label");
  std::vector<double> p(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    p[i] = labels[i] ? 1.0 / static_cast<double>(positives) : 0.0;
  return p;
}

double coreLoss(std::span<const double> p, std::span<const double> pStar) {
  if (p.size() != pStar.size())
    throw std::invalid_argument("coreLoss: length mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (pStar[i] > 0.0)
      kl += pStar[i] * (std::log(pStar[i]) - std::log(std::max(p[i], kProbabilityFloor)));
  if (!std::isfinite(kl))
    throw NumericError("core loss is not finite");
  return kl;
}

double consistencyLoss(std::span<const double> s, std::span<const double> sFlip) {
  if (s.size() != sFlip.size() || s.empty())
    throw std::invalid_argument("consistencyLoss: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    acc += (s[i] - sFlip[i]) * (s[i] - sFlip[i]);
  return acc / static_cast<double>(s.size());
}

Var coreLoss(Var logProbs, const Tensor &pStar) {
  if (!logProbs.value().sameShape(pStar))
    throw ShapeError("coreLoss: target " + pStar.shapeString() +
                     " vs predictions " + logProbs.value().shapeString());
  Tape &tape = *logProbs.tape();
  double entropyTerm = 0.0;
  for (double q : pStar.data())
    if (q > 0.0)
      entropyTerm += q * std::log(q);
  Var floored = ad::clampMin(logProbs, std::log(kProbabilityFloor));
  Var cross = ad::sum(ad::mul(tape.constant(pStar), floored));
  return ad::sub(tape.constant(Tensor::scalar(entropyTerm)), cross);
}

Var consistencyLoss(Var s, Var sFlip) {
  if (!s.value().sameShape(sFlip.value()))
    throw ShapeError("consistencyLoss: shape mismatch");
  return ad::scale(ad::squaredL2(ad::sub(s, sFlip)),
                   1.0 / static_cast<double>(s.rows()));
}

Var decompLoss(Var inv, Var invFlip, Var eq, Var eqFlip) {
  const Tensor &shape = inv.value();
  if (!shape.sameShape(invFlip.value()) || !shape.sameShape(eq.value()) ||
      !shape.sameShape(eqFlip.value()))
    throw ShapeError("decompLoss: component shapes differ");
  Var acc = ad::add(ad::squaredL2(ad::sub(inv, invFlip)),
                    ad::squaredL2(ad::add(eq, eqFlip)));
  return ad::scale(acc, 1.0 / static_cast<double>(inv.rows()));
}

TrainingExample makeExample(const LabeledInstance &instance,
                            const ModelConfig &model) {
  TrainingExample ex;
  ex.graph = prepareGraph(instance.formula, model.cigTopK);
  if (model.regularization)
    ex.flipped = prepareGraph(polarityFlip(instance.formula), model.cigTopK);
  ex.target = Tensor::column(buildTarget(instance.labels));
  return ex;
}

LossOutput totalLoss(Tape &tape, const BoundParams &params,
                     const TrainingExample &example, const LossWeights &weights) {
  const ModelConfig &cfg = params.params->config();
  LossOutput out;
  ForwardResult original = forward(tape, example.graph, params);
  Var coreO = coreLoss(original.logProbs, example.target);
  out.terms.coreOriginal = coreO.value()[0];
  if (!cfg.regularization) {
    out.total = coreO;
    out.terms.total = out.terms.coreOriginal;
    return out;
  }
  if (!example.flipped)
    throw std::invalid_argument("regularized loss needs the flipped graph");

  ForwardResult flipped = forward(tape, *example.flipped, params);
  Var coreF = coreLoss(flipped.logProbs, example.target);
  Var cons = consistencyLoss(original.scores, flipped.scores);
  out.terms.coreFlipped = coreF.value()[0];
  out.terms.consistency = cons.value()[0];
  Var total = ad::add(ad::add(coreO, coreF), ad::scale(cons, weights.consistency));
  if (original.finalComponents && flipped.finalComponents) {
    const Decomposed &a = *original.finalComponents, &b = *flipped.finalComponents;
    Var decomp = decompLoss(a.inv, b.inv, a.eq, b.eq);
    out.terms.decomposition = decomp.value()[0];
    total = ad::add(total, ad::scale(decomp, weights.decomposition));
  }
  out.total = total;
  out.terms.total = total.value()[0];
  return out;
}

//===----------------------------------------------------------------------===//
// Configuration
//===----------------------------------------------------------------------===//

void TrainConfig::validate() const {
  auto require = [](bool ok, const char *what) {
    if (!ok)
      throw std::invalid_argument(what);
  };
  require(std::isfinite(learningRate) && learningRate >= 0.0,
          "learning_rate must be a finite value >= 0");
  require(std::isfinite(weightDecay) && weightDecay >= 0.0,
          "weight_decay must be >= 0");
  require(gradClipNorm > 0.0, "grad_clip_norm must be > 0");
  require(lrDecay > 0.0 && lrDecay <= 1.0, "lr_decay must lie in (0, 1]");
  require(batchSize > 0, "batch_size must be positive");
  require(lambda.consistency >= 0.0, "lambda_cons must be >= 0");
  require(lambda.decomposition >= 0.0, "lambda_decomp must be >= 0");
  require(beta1 >= 0.0 && beta1 < 1.0, "beta1 must lie in [0, 1)");
  require(beta2 >= 0.0 && beta2 < 1.0, "beta2 must lie in [0, 1)");
  require(adamEps > 0.0, "adam_eps must be > 0");
}

namespace {

std::string trim(const std::string &s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parseDouble(const std::string &v) {
  std::size_t used = 0;
  double x = std::stod(v, &used);
  if (used != v.size())
    throw std::invalid_argument("trailing characters");
  return x;
}

std::uint64_t parseUnsigned(const std::string &v) {
  if (v.empty() || v[0] == '-')
    throw std::invalid_argument("expected a non-negative integer");
  std::size_t used = 0;
  unsigned long long x = std::stoull(v, &used);
  if (used != v.size())
    throw std::invalid_argument("trailing characters");
  return x;
}

bool parseBool(const std::string &v) {
  if (v == "1" || v == "true")
    return true;
  if (v == "0" || v == "false")
    return false;
  throw std::invalid_argument("expected true/false");
}

using Setter = std::function<void(RunConfig &, const std::string &)>;

const std::map<std::string, Setter> &configKeys() {
  static const std::map<std::string, Setter> keys = {
      {"learning_rate", [](RunConfig &c, const std::string &v) { c.train.learningRate = parseDouble(v); }},
      {"weight_decay", [](RunConfig &c, const std::string &v) { c.train.weightDecay = parseDouble(v); }},
      {"grad_clip_norm", [](RunConfig &c, const std::string &v) { c.train.gradClipNorm = parseDouble(v); }},
      {"lr_decay", [](RunConfig &c, const std::string &v) { c.train.lrDecay = parseDouble(v); }},
      {"batch_size", [](RunConfig &c, const std::string &v) { c.train.batchSize = parseUnsigned(v); }},
      {"epochs", [](RunConfig &c, const std::string &v) { c.train.epochs = parseUnsigned(v); }},
      {"lambda_cons", [](RunConfig &c, const std::string &v) { c.train.lambda.consistency = parseDouble(v); }},
      {"lambda_decomp", [](RunConfig &c, const std::string &v) { c.train.lambda.decomposition = parseDouble(v); }},
      {"beta1", [](RunConfig &c, const std::string &v) { c.train.beta1 = parseDouble(v); }},
      {"beta2", [](RunConfig &c, const std::string &v) { c.train.beta2 = parseDouble(v); }},
      {"adam_eps", [](RunConfig &c, const std::string &v) { c.train.adamEps = parseDouble(v); }},
      {"seed", [](RunConfig &c, const std::string &v) { c.train.seed = parseUnsigned(v); }},
      {"hidden_dim", [](RunConfig &c, const std::string &v) { c.model.hiddenDim = parseUnsigned(v); }},
      {"rounds", [](RunConfig &c, const std::string &v) { c.model.rounds = parseUnsigned(v); }},
      {"activation", [](RunConfig &c, const std::string &v) { c.model.activation = parseActivation(v); }},
      {"init", [](RunConfig &c, const std::string &v) { c.model.init = parseInitMode(v); }},
      {"propagation", [](RunConfig &c, const std::string &v) { c.model.propagation = parsePropagation(v); }},
      {"decomposition", [](RunConfig &c, const std::string &v) { c.model.decomposition = parseBool(v); }},
      {"regularization", [](RunConfig &c, const std::string &v) { c.model.regularization = parseBool(v); }},
      {"cig_top_k", [](RunConfig &c, const std::string &v) { c.model.cigTopK = parseUnsigned(v); }},
      {"model_seed", [](RunConfig &c, const std::string &v) { c.model.seed = parseUnsigned(v); }},
  };
  return keys;
}

} // namespace

RunConfig parseRunConfig(const std::string &text) {
  RunConfig config;
  std::istringstream in(text);
  std::string raw;
  std::vector<std::string> seen;
  for (int lineNo = 1; std::getline(in, raw); ++lineNo) {
    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty())
      continue;
    std::string where = "config line " + std::to_string(lineNo) + ": ";
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(where + "expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    auto it = configKeys().find(key);
    if (it == configKeys().end())
      throw std::invalid_argument(where + "unknown key '" + key + "'");
    if (std::find(seen.begin(), seen.end(), key) != seen.end())
      throw std::invalid_argument(where + "repeated key '" + key + "'");
    seen.push_back(key);
    try {
      it->second(config, value);
    } catch (const std::exception &e) {
      throw std::invalid_argument(where + "bad value '" + value + "' for " +
                                  key + " (" + e.what() + ")");
    }
  }
  config.train.validate();
  if (config.model.hiddenDim == 0 || config.model.rounds == 0 ||
      config.model.cigTopK == 0)
    throw std::invalid_argument("hidden_dim, rounds and cig_top_k must be positive");
  return config;
}

std::string formatRunConfig(const RunConfig &c) {
  std::ostringstream out;
  out.precision(17);
  out << "learning_rate = " << c.train.learningRate << "\n"
      << "weight_decay = " << c.train.weightDecay << "\n"
      << "grad_clip_norm = " << c.train.gradClipNorm << "\n"
      << "lr_decay = " << c.train.lrDecay << "\n"
      << "batch_size = " << c.train.batchSize << "\n"
      << "epochs = " << c.train.epochs << "\n"
      << "lambda_cons = " << c.train.lambda.consistency << "\n"
      << "lambda_decomp = " << c.train.lambda.decomposition << "\n"
      << "beta1 = " << c.train.beta1 << "\n"
      << "beta2 = " << c.train.beta2 << "\n"
      << "adam_eps = " << c.train.adamEps << "\n"
      << "seed = " << c.train.seed << "\n"
      << "hidden_dim = " << c.model.hiddenDim << "\n"
      << "rounds = " << c.model.rounds << "\n"
      << "activation = " << toString(c.model.activation) << "\n"
      << "init = " << toString(c.model.init) << "\n"
      << "propagation = " << toString(c.model.propagation) << "\n"
      << "decomposition = " << (c.model.decomposition ? "true" : "false") << "\n"
      << "regularization = " << (c.model.regularization ? "true" : "false") << "\n"
      << "cig_top_k = " << c.model.cigTopK << "\n"
      << "model_seed = " << c.model.seed << "\n";
  return out.str();
}

void applyAblation(ModelConfig &model, const std::string &name) {
  if (name == "hg") {
    model.decomposition = false;
    model.regularization = false;
  } else if (name == "hg+de") {
    model.decomposition = true;
    model.regularization = false;
  } else if (name == "full") {
    model.decomposition = true;
    model.regularization = true;
  } else {
    throw std::invalid_argument("unknown ablation '" + name +
                                "' (expected hg, hg+de or full)");
  }
}

//===----------------------------------------------------------------------===//
// Optimization
//===----------------------------------------------------------------------===//

Gradients zeroGradients(const ModelParams &params) {
  Gradients g;
  g.reserve(params.tensors().size());
  for (const NamedTensor &nt : params.tensors())
    g.emplace_back(nt.value.rows(), nt.value.cols());
  return g;
}

double globalNorm(const Gradients &grads) {
  double acc = 0.0;
  for (const Tensor &g : grads)
    for (double x : g.data())
      acc += x * x;
  return std::sqrt(acc);
}

double clipGradients(Gradients &grads, double maxNorm) {
  double norm = globalNorm(grads);
  if (norm > maxNorm) {
    double factor = maxNorm / norm;
    for (Tensor &g : grads)
      for (double &x : g.data())
        x *= factor;
  }
  return norm;
}

AdamW::AdamW(const ModelParams &params, const TrainConfig &config)
    : beta1_(config.beta1), beta2_(config.beta2), eps_(config.adamEps),
      weightDecay_(config.weightDecay), m_(zeroGradients(params)),
      v_(zeroGradients(params)) {}

void AdamW::step(ModelParams &params, const Gradients &grads,
                 double learningRate) {
  auto &tensors = params.tensors();
  if (grads.size() != tensors.size() || m_.size() != tensors.size())
    throw std::invalid_argument("AdamW: gradient count does not match params");
  ++steps_;
  if (learningRate == 0.0)
    return;
  double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    Tensor &w = tensors[k].value;
    const Tensor &g = grads[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * g[i];
      v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * g[i] * g[i];
      double mHat = m_[k][i] / c1;
      double vHat = v_[k][i] / c2;
      w[i] -= learningRate * (mHat / (std::sqrt(vHat) + eps_) + weightDecay_ * w[i]);
    }
  }
}

void parallelFor(std::size_t count, std::size_t jobs,
                 const std::function<void(std::size_t)> &fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i)
      fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += jobs) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (std::thread &t : workers)
    t.join();
  for (const std::exception_ptr &e : errors)
    if (e)
      std::rethrow_exception(e);
}

LossTerms exampleGradients(const ModelParams &params,
                           const TrainingExample &example,
                           const LossWeights &weights, Gradients &out) {
  Tape tape;
  BoundParams bound = bindParams(tape, params, true);
  LossOutput loss = totalLoss(tape, bound, example, weights);
  if (!std::isfinite(loss.terms.total))
    throw NumericError("training loss became non-finite");
  tape.backward(loss.total);
  out.clear();
  out.reserve(bound.vars.size());
  for (const Var &v : bound.vars)
    out.push_back(v.grad());
  return loss.terms;
}

LossTerms trainStep(ModelParams &params, AdamW &optimizer,
                    std::span<const TrainingExample *const> batch,
                    const TrainConfig &config, double learningRate,
                    std::size_t jobs) {
  if (batch.empty())
    throw std::invalid_argument("trainStep: empty batch");
  std::vector<Gradients> perExample(batch.size());
  std::vector<LossTerms> terms(batch.size());
  parallelFor(batch.size(), jobs, [&](std::size_t i) {
    terms[i] = exampleGradients(params, *batch[i], config.lambda, perExample[i]);
  });

  // Fixed-order reduction keeps results independent of the thread count.
  Gradients grads = zeroGradients(params);
  LossTerms mean;
  double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t k = 0; k < grads.size(); ++k)
      for (std::size_t j = 0; j < grads[k].size(); ++j)
        grads[k][j] += perExample[i][k][j] * inv;
    mean.coreOriginal += terms[i].coreOriginal * inv;
    mean.coreFlipped += terms[i].coreFlipped * inv;
    mean.consistency += terms[i].consistency * inv;
    mean.decomposition += terms[i].decomposition * inv;
    mean.total += terms[i].total * inv;
  }
  clipGradients(grads, config.gradClipNorm);
  optimizer.step(params, grads, learningRate);
  return mean;
}

TrainResult train(const std::vector<TrainingExample> &dataset,
                  const RunConfig &config, const TrainHooks &hooks) {
  if (dataset.empty())
    throw std::invalid_argument("training dataset is empty");
  config.train.validate();
  TrainResult result;
  result.params = ModelParams::initialize(config.model);
  AdamW optimizer(result.params, config.train);
  const TrainConfig &tc = config.train;
  Rng orderRng(tc.seed);

  double lr = tc.learningRate;
  std::vector<const TrainingExample *> order(dataset.size());
  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    for (std::size_t i = 0; i < dataset.size(); ++i)
      order[i] = &dataset[i];
    Rng rng = orderRng.split(epoch);
    rng.shuffle(order);

    EpochRecord record;
    record.epoch = epoch;
    record.learningRate = lr;
    for (std::size_t start = 0; start < order.size(); start += tc.batchSize) {
      std::size_t count = std::min(tc.batchSize, order.size() - start);
      std::span<const TrainingExample *const> batch(order.data() + start, count);
      LossTerms t = trainStep(result.params, optimizer, batch, tc, lr, hooks.jobs);
      double w = static_cast<double>(count);
      record.lCore += t.core() * w;
      record.lCons += t.consistency * w;
      record.lDecomp += t.decomposition * w;
      record.total += t.total * w;
    }
    double n = static_cast<double>(order.size());
    record.lCore /= n;
    record.lCons /= n;
    record.lDecomp /= n;
    record.total /= n;
    for (const NamedTensor &nt : result.params.tensors())
      if (!nt.value.allFinite())
        throw NumericError("parameter '" + nt.name + "' became non-finite");
    result.history.push_back(record);
    if (hooks.onEpoch)
      hooks.onEpoch(record);
    lr *= tc.lrDecay;
  }
  return result;
}

double flipConsistencyGap(const CnfFormula &formula, const ModelParams &params) {
  std::vector<double> s = predictScores(formula, params);
  std::vector<double> sFlip = predictScores(polarityFlip(formula), params);
  return consistencyLoss(s, sFlip);
}

} // namespace polarcore
