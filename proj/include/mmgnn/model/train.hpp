#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <json.hpp>

#include "mmgnn/bench/metrics.hpp"
#include "mmgnn/data/knowledge.hpp"
#include "mmgnn/data/split.hpp"
#include "mmgnn/model/model.hpp"
#include "mmgnn/model/optim.hpp"

namespace mmgnn::model {

struct EpochRecord;

struct TrainConfig {
  int epochs = 200;
  double learning_rate = 1e-3;
  int batch_size = 8;  // subjects whose gradients are accumulated per step
  std::uint64_t seed = 0;
  double weight_decay = 5e-4;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double momentum = 0.9;
  int threads = 1;  // evaluation only
  std::function<void(const EpochRecord&)> on_epoch;  // progress hook, not serialized
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;  // mean over the epoch's training inputs
  double val_loss = 0.0;
  bench::Metrics train;
  bench::Metrics val;
};

nlohmann::json to_json(const EpochRecord& r);

struct TrainResult {
  MultimodalModel model;  // best-val epoch, or the initial model if no epochs ran
  std::vector<EpochRecord> history;
  int best_epoch = 0;
};

/// What one training subject looks like in one epoch.
struct TrainInputs {
  Matrix adjacency;
  Matrix indicator;  // N x 1
};

/// Returns the inputs for (epoch, subject index); used by fine-tuning to
/// re-augment every epoch.
using InputSampler = std::function<TrainInputs(int epoch, std::size_t subject)>;

/// Minibatch training on mean cross-entropy over split.train. The returned
/// model is the epoch with the highest val accuracy, ties broken by lower
/// val loss and then by the earlier epoch.
TrainResult train(const MultimodalModel& init, const data::ConnectomeDataset& ds,
                  const data::KnowledgeBase& kb, const data::Split& split, const TrainConfig& cfg,
                  const InputSampler& sampler = {});

TrainResult pretrain(const MultimodalModel& init, const data::ConnectomeDataset& ds,
                     const data::KnowledgeBase& kb, const data::Split& split,
                     const TrainConfig& cfg);

/// Forward pass over the given subjects on unmodified inputs. Runs on up to
/// `threads` threads; results do not depend on the thread count.
bench::Predictions predict(const MultimodalModel& m, const data::ConnectomeDataset& ds,
                           const data::KnowledgeBase& kb, const std::vector<std::size_t>& indices,
                           int threads = 1);

}  // namespace mmgnn::model
