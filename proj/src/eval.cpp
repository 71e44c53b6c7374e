#include "polarcore/eval.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace polarcore {

namespace {

void checkInputs(std::span<const double> scores,
                 std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("scores and labels differ in length");
  for (double s : scores)
    if (!std::isfinite(s))
      throw std::invalid_argument("non-finite score");
}

std::size_t countPositives(std::span<const std::uint8_t> labels) {
  return static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(), [](std::uint8_t l) { return l != 0; }));
}

/// Indices by descending score, ascending index among equal scores.
std::vector<std::size_t> rankOrder(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  return order;
}

} // namespace

double topMPrecision(std::span<const double> scores,
                     std::span<const std::uint8_t> labels) {
  checkInputs(scores, labels);
  std::size_t m = countPositives(labels);
  if (m == 0)
    throw std::invalid_argument("top-M precision needs a positive label");
  std::vector<std::size_t> order = rankOrder(scores);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < m; ++k)
    hits += labels[order[k]] != 0;
  return static_cast<double>(hits) / static_cast<double>(m);
}

std::optional<double> rocAuc(std::span<const double> scores,
                             std::span<const std::uint8_t> labels) {
  checkInputs(scores, labels);
  std::size_t pos = countPositives(labels);
  std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0)
    return std::nullopt;
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of midranks of positives.
  double rankSum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]])
      ++j;
    double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]])
        rankSum += midrank;
    i = j;
  }
  double p = static_cast<double>(pos), q = static_cast<double>(neg);
  return (rankSum - p * (p + 1.0) / 2.0) / (p * q);
}

double prAuc(std::span<const double> scores,
             std::span<const std::uint8_t> labels) {
  checkInputs(scores, labels);
  std::size_t pos = countPositives(labels);
  if (pos == 0)
    throw std::invalid_argument("PR-AUC needs a positive label");
  std::vector<std::size_t> order = rankOrder(scores);
  double area = 0.0, prevRecall = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      tp += labels[order[j]] != 0;
      ++j;
    }
    seen = j;
    double recall = static_cast<double>(tp) / static_cast<double>(pos);
    double precision = static_cast<double>(tp) / static_cast<double>(seen);
    area += (recall - prevRecall) * precision;
    prevRecall = recall;
    i = j;
  }
  return area;
}

double randomPrecision(std::span<const std::uint8_t> labels) {
  if (labels.empty())
    throw std::invalid_argument("empty label vector");
  return static_cast<double>(countPositives(labels)) /
         static_cast<double>(labels.size());
}

MetricReport evaluate(const std::vector<std::vector<double>> &scores,
                      const std::vector<std::vector<std::uint8_t>> &labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("score and label sets differ in size");
  MetricReport report;
  std::size_t counted = 0, rocCounted = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    InstanceMetrics m;
    if (countPositives(labels[i]) == 0) {
      checkInputs(scores[i], labels[i]);
      ++report.skippedEmpty;
      ++report.skippedRoc;
      report.instances.push_back(m);
      continue;
    }
    m.precision = topMPrecision(scores[i], labels[i]);
    m.prAuc = prAuc(scores[i], labels[i]);
    m.rocAuc = rocAuc(scores[i], labels[i]);
    report.precision += m.precision;
    report.prAuc += m.prAuc;
    report.randomPrecision += randomPrecision(labels[i]);
    ++counted;
    if (m.rocAuc) {
      report.rocAuc += *m.rocAuc;
      ++rocCounted;
    } else {
      ++report.skippedRoc;
    }
    report.instances.push_back(m);
  }
  if (counted) {
    report.precision /= static_cast<double>(counted);
    report.prAuc /= static_cast<double>(counted);
    report.randomPrecision /= static_cast<double>(counted);
  }
  if (rocCounted)
    report.rocAuc /= static_cast<double>(rocCounted);
  return report;
}

} // namespace polarcore
