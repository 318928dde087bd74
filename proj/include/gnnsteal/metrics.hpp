#pragma once

#include <vector>

#include "gnnsteal/errors.hpp"

namespace gnnsteal {

struct Metrics {
  double accuracy = 0.0;
  double fidelity = 0.0;
  double f1 = 0.0;
};

inline double accuracy_score(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw ValidationError("accuracy_score: size mismatch or empty input");
  long hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

/// Macro-averaged F1 over classes 0..num_classes-1; classes with no true or
/// predicted instances contribute 0 (matching common GNN evaluation).
inline double macro_f1(const std::vector<int>& pred, const std::vector<int>& truth,
                       int num_classes) {
  if (pred.size() != truth.size() || pred.empty())
    throw ValidationError("macro_f1: size mismatch or empty input");
  double sum = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i] == c && truth[i] == c) ++tp;
      else if (pred[i] == c) ++fp;
      else if (truth[i] == c) ++fn;
    }
    double denom = 2.0 * tp + fp + fn;
    sum += denom > 0 ? 2.0 * tp / denom : 0.0;
  }
  return sum / num_classes;
}

}  // namespace gnnsteal
