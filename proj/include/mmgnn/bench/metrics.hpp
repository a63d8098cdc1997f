#pragma once

#include <vector>

#include <json.hpp>

#include "mmgnn/types.hpp"

namespace mmgnn::bench {

/// Classification quality. F1 is the unweighted mean over classes; AUC is
/// the Mann-Whitney statistic of the positive-class probability (binary) or
/// the mean one-vs-rest AUC (multiclass).
struct Metrics {
  double acc = 0.0;
  double auc = 0.0;
  double f1 = 0.0;
};

nlohmann::json to_json(const Metrics& m);

/// Model outputs for a list of subjects.
struct Predictions {
  std::vector<int> labels;
  std::vector<int> predicted;
  Matrix probabilities;  // n x C
  double mean_loss = 0.0;
};

double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels);

/// P(score of a random positive > score of a random negative), ties 0.5.
/// Throws RangeError when either class is empty.
double binary_auc(const std::vector<double>& scores, const std::vector<bool>& positive);

double macro_f1(const std::vector<int>& predicted, const std::vector<int>& labels, int num_classes);

/// Throws RangeError when AUC is undefined (a single class present).
Metrics compute_metrics(const Predictions& p);

}  // namespace mmgnn::bench
