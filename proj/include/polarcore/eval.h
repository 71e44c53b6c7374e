//===- eval.h - Ranking metrics for core-variable prediction ---*- C++ -*-===//
//
// Scores rank variables; labels mark core variables. Ties are resolved the
// same way everywhere: lower index first for Top-M, half credit for ROC-AUC,
// and whole tied blocks at once for PR-AUC.
//
//===----------------------------------------------------------------------===//

#ifndef POLARCORE_EVAL_H
#define POLARCORE_EVAL_H

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace polarcore {

/// Fraction of positives among the M best-ranked variables, M = #positives.
/// Throws std::invalid_argument without positives or on a length mismatch.
double topMPrecision(std::span<const double> scores,
                     std::span<const std::uint8_t> labels);

/// Mann-Whitney AUC; std::nullopt when only one class is present.
std::optional<double> rocAuc(std::span<const double> scores,
                             std::span<const std::uint8_t> labels);

/// Step-interpolated area under the precision-recall curve. Throws
/// std::invalid_argument without positives.
double prAuc(std::span<const double> scores,
             std::span<const std::uint8_t> labels);

/// Expected Top-M precision of a uniformly random ranking: M / N.
double randomPrecision(std::span<const std::uint8_t> labels);

struct InstanceMetrics {
  double precision = 0.0;
  double prAuc = 0.0;
  std::optional<double> rocAuc;
};

struct MetricReport {
  std::vector<InstanceMetrics> instances;
  double precision = 0.0;
  double prAuc = 0.0;
  double rocAuc = 0.0;
  /// Instances with no negative (or no positive) label, left out of rocAuc.
  std::size_t skippedRoc = 0;
  /// Instances without a positive label, left out of every mean.
  std::size_t skippedEmpty = 0;
  /// Mean of randomPrecision over the counted instances.
  double randomPrecision = 0.0;
};

/// Unweighted means over instances.
MetricReport evaluate(const std::vector<std::vector<double>> &scores,
                      const std::vector<std::vector<std::uint8_t>> &labels);

} // namespace polarcore

#endif // POLARCORE_EVAL_H
