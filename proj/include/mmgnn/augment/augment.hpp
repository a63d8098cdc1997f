#pragma once

#include <cstdint>
#include <functional>

#include <json.hpp>

#include "mmgnn/explain/masks.hpp"
#include "mmgnn/model/train.hpp"

namespace mmgnn::augment {

struct AugmentConfig {
  double threshold = 0.5;         // T
  double keep_probability = 0.5;  // retention of below-threshold edges; fixed
  int epochs = 100;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  int batch_size = 8;
  double weight_decay = 5e-4;
  model::OptimizerKind optimizer = model::OptimizerKind::kAdam;
  int threads = 1;  // evaluation only
  std::function<void(const model::EpochRecord&)> on_epoch;
};

nlohmann::json to_json(const AugmentConfig& c);

/// Keeps each existing edge whose sigma(alpha) >= T; any other edge survives
/// with probability 1/2. Draws one coin per upper-triangular entry, in
/// row-major order, and mirrors the result.
Matrix augment_graph(const Matrix& adjacency, const explain::MaskPair& pair, const AugmentConfig& cfg,
                     Rng& rng);
data::Connectome augment_graph(const data::Connectome& g, const explain::MaskPair& pair,
                               const AugmentConfig& cfg, Rng& rng);

/// Same rule on sigma(beta) for the N fusion edges; returns an N x 1 0/1
/// indicator.
Matrix augment_fusion(const Tensor& beta, const AugmentConfig& cfg, Rng& rng);

/// Fine-tunes every parameter group on freshly augmented inputs each epoch
/// (streams keyed by seed, epoch and subject). Masks are read only.
model::TrainResult finetune(const model::MultimodalModel& m, const explain::MaskSet& masks,
                            const data::ConnectomeDataset& ds, const data::KnowledgeBase& kb,
                            const data::Split& split, const AugmentConfig& cfg);

}  // namespace mmgnn::augment
