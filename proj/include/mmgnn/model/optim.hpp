#pragma once

#include <memory>
#include <string>

#include "mmgnn/types.hpp"

namespace mmgnn::model {

enum class OptimizerKind { kAdam, kSgdMomentum };

OptimizerKind parse_optimizer(const std::string& name);
std::string to_string(OptimizerKind kind);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;  // L2 term added to the gradient
  double momentum = 0.9;      // sgd only
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Updates the leaf tensors in place from their accumulated gradients.
/// Parameters without a gradient are skipped (their moments do not advance).
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step() = 0;
  void zero_grad();

 protected:
  Optimizer(NamedTensors params, OptimizerConfig cfg);
  NamedTensors params_;
  OptimizerConfig cfg_;
};

std::unique_ptr<Optimizer> make_optimizer(NamedTensors params, const OptimizerConfig& cfg);

}  // namespace mmgnn::model
