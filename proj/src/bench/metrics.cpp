#include <algorithm>
#include <numeric>

#include "mmgnn/bench/evaluate.hpp"
#include "mmgnn/bench/metrics.hpp"
#include "mmgnn/errors.hpp"

namespace mmgnn::bench {

nlohmann::json to_json(const Metrics& m) {
  return {{"acc", m.acc}, {"auc", m.auc}, {"f1", m.f1}, {"f1_average", "macro"}};
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels) {
  if (predicted.size() != labels.size()) throw DimensionError("accuracy: length mismatch");
  if (labels.empty()) throw RangeError("accuracy of an empty set is undefined");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predicted[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

double binary_auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw DimensionError("auc: length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Average ranks over tie blocks, then the Mann-Whitney U of the positives.
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (positive[order[k]]) {
        rank_sum += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw RangeError("AUC is undefined: only one class present");
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double macro_f1(const std::vector<int>& predicted, const std::vector<int>& labels, int num_classes) {
  if (predicted.size() != labels.size()) throw DimensionError("f1: length mismatch");
  double total = 0.0;
  int counted = 0;
  for (int c = 0; c < num_classes; ++c) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const bool p = predicted[i] == c;
      const bool l = labels[i] == c;
      tp += p && l;
      fp += p && !l;
      fn += !p && l;
    }
    if (tp + fp + fn == 0) continue;  // class absent from both
    total += 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    ++counted;
  }
  return counted == 0 ? 0.0 : total / counted;
}

Metrics compute_metrics(const Predictions& p) {
  Metrics m;
  const int classes = static_cast<int>(p.probabilities.cols());
  m.acc = accuracy(p.predicted, p.labels);
  m.f1 = macro_f1(p.predicted, p.labels, classes);
  auto auc_for = [&](int c) {
    std::vector<double> scores(p.labels.size());
    std::vector<bool> positive(p.labels.size());
    for (std::size_t i = 0; i < p.labels.size(); ++i) {
      scores[i] = p.probabilities(static_cast<Index>(i), c);
      positive[i] = p.labels[i] == c;
    }
    return binary_auc(scores, positive);
  };
  if (classes == 2) {
    m.auc = auc_for(1);
  } else {
    double total = 0.0;
    for (int c = 0; c < classes; ++c) total += auc_for(c);
    m.auc = total / classes;
  }
  return m;
}

Metrics evaluate(const model::MultimodalModel& m, const data::ConnectomeDataset& ds,
                 const data::KnowledgeBase& kb, const std::vector<std::size_t>& indices,
                 int threads) {
  if (indices.empty()) throw RangeError("evaluate: empty index set");
  return compute_metrics(model::predict(m, ds, kb, indices, threads));
}

}  // namespace mmgnn::bench
