#include <cmath>
#include <vector>

#include "mmgnn/errors.hpp"
#include "mmgnn/model/optim.hpp"

namespace mmgnn::model {

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "sgd_momentum" || name == "sgd") return OptimizerKind::kSgdMomentum;
  throw ValidationError("unknown optimizer '" + name + "' (expected adam or sgd_momentum)");
}

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "sgd_momentum";
}

Optimizer::Optimizer(NamedTensors params, OptimizerConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  if (!(cfg_.learning_rate > 0.0)) throw RangeError("learning rate must be positive");
  if (!(cfg_.weight_decay >= 0.0)) throw RangeError("weight decay must be nonnegative");
}

void Optimizer::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

namespace {

class Adam final : public Optimizer {
 public:
  Adam(NamedTensors params, OptimizerConfig cfg) : Optimizer(std::move(params), cfg) {
    for (const auto& [name, t] : params_) {
      m_.push_back(Matrix::Zero(t.rows(), t.cols()));
      v_.push_back(Matrix::Zero(t.rows(), t.cols()));
    }
    steps_.assign(params_.size(), 0);
  }

  void step() override {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor& p = params_[i].second;
      if (!p.has_grad()) continue;
      Matrix g = p.grad();
      if (cfg_.weight_decay > 0.0) g += cfg_.weight_decay * p.value();
      ++steps_[i];
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
      const double c1 = 1.0 - std::pow(cfg_.beta1, steps_[i]);
      const double c2 = 1.0 - std::pow(cfg_.beta2, steps_[i]);
      const double lr = cfg_.learning_rate / c1;
      p.mutable_value().array() -=
          lr * m_[i].array() / ((v_[i].array() / c2).sqrt() + cfg_.eps);
    }
  }

 private:
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::vector<int> steps_;
};

class SgdMomentum final : public Optimizer {
 public:
  SgdMomentum(NamedTensors params, OptimizerConfig cfg) : Optimizer(std::move(params), cfg) {
    for (const auto& [name, t] : params_) velocity_.push_back(Matrix::Zero(t.rows(), t.cols()));
  }

  void step() override {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor& p = params_[i].second;
      if (!p.has_grad()) continue;
      Matrix g = p.grad();
      if (cfg_.weight_decay > 0.0) g += cfg_.weight_decay * p.value();
      velocity_[i] = cfg_.momentum * velocity_[i] + g;
      p.mutable_value() -= cfg_.learning_rate * velocity_[i];
    }
  }

 private:
  std::vector<Matrix> velocity_;
};

}  // namespace

std::unique_ptr<Optimizer> make_optimizer(NamedTensors params, const OptimizerConfig& cfg) {
  if (cfg.kind == OptimizerKind::kAdam) return std::make_unique<Adam>(std::move(params), cfg);
  return std::make_unique<SgdMomentum>(std::move(params), cfg);
}

}  // namespace mmgnn::model
