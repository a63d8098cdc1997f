#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "mmgnn/errors.hpp"
#include "mmgnn/model/train.hpp"
#include "mmgnn/rng.hpp"

namespace mmgnn::model {

using nlohmann::json;

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"weight_decay", c.weight_decay},
          {"optimizer", to_string(c.optimizer)},
          {"momentum", c.momentum}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.optimizer = parse_optimizer(j.value("optimizer", to_string(c.optimizer)));
  c.momentum = j.value("momentum", c.momentum);
  return c;
}

json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"train_loss", r.train_loss},
          {"val_loss", r.val_loss},
          {"train", bench::to_json(r.train)},
          {"val", bench::to_json(r.val)}};
}

namespace {

void check_train_config(const TrainConfig& c) {
  if (c.epochs < 0) throw RangeError("epochs must be nonnegative");
  if (!(c.learning_rate > 0.0)) throw RangeError("learning rate must be positive");
  if (c.batch_size < 1) throw RangeError("batch size must be at least 1");
  if (!(c.weight_decay >= 0.0)) throw RangeError("weight decay must be nonnegative");
}

// Lenient variant for training curves: AUC is reported as 0.5 when one
// class is missing from the partition.
bench::Metrics curve_metrics(const bench::Predictions& p) {
  try {
    return bench::compute_metrics(p);
  } catch (const RangeError&) {
    bench::Metrics m;
    m.acc = bench::accuracy(p.predicted, p.labels);
    m.auc = 0.5;
    m.f1 = bench::macro_f1(p.predicted, p.labels, static_cast<int>(p.probabilities.cols()));
    return m;
  }
}

bool better(const EpochRecord& a, const EpochRecord& best) {
  if (a.val.acc != best.val.acc) return a.val.acc > best.val.acc;
  return a.val_loss < best.val_loss;
}

}  // namespace

TrainResult train(const MultimodalModel& init, const data::ConnectomeDataset& ds,
                  const data::KnowledgeBase& kb, const data::Split& split, const TrainConfig& cfg,
                  const InputSampler& sampler) {
  check_train_config(cfg);
  check_compatible(init, ds);
  check_compatible(init, kb);
  if (split.train.empty()) throw ValidationError("training split is empty");

  TrainResult result;
  result.model = init.clone();
  if (cfg.epochs == 0) return result;

  MultimodalModel model = init.clone();
  model.set_requires_grad(true);
  OptimizerConfig oc;
  oc.kind = cfg.optimizer;
  oc.learning_rate = cfg.learning_rate;
  oc.weight_decay = cfg.weight_decay;
  oc.momentum = cfg.momentum;
  auto optimizer = make_optimizer(model.parameters(), oc);

  const Index n_knowledge = kb.count();
  std::vector<std::size_t> order = split.train;
  EpochRecord best;
  bool have_best = false;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng = Rng::keyed(cfg.seed, {static_cast<std::uint64_t>(epoch)});
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      optimizer->zero_grad();
      // Adapter output is shared by every subject in the batch.
      Tensor e_k = embed_knowledge(model, kb);
      Tensor batch_loss;
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t s = order[k];
        const auto& subject = ds.subjects[s];
        Tensor logits;
        if (sampler) {
          TrainInputs in = sampler(epoch, s);
          logits = forward(model, Tensor(std::move(in.adjacency)), subject.adjacency, e_k,
                           Tensor(std::move(in.indicator)));
        } else {
          logits = forward(model, Tensor(subject.adjacency), e_k,
                           Tensor::constant(n_knowledge, 1, 1.0));
        }
        Tensor loss = cross_entropy(logits, subject.label);
        batch_loss = k == start ? loss : batch_loss + loss;
      }
      batch_loss = batch_loss * (1.0 / static_cast<double>(stop - start));
      const double value = batch_loss.item();
      if (!std::isfinite(value)) {
        ad::Tape<double>::current().clear();
        throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch));
      }
      loss_sum += value * static_cast<double>(stop - start);
      backward(batch_loss);
      optimizer->step();
    }
    optimizer->zero_grad();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train = curve_metrics(predict(model, ds, kb, split.train, cfg.threads));
    if (!split.val.empty()) {
      const auto val = predict(model, ds, kb, split.val, cfg.threads);
      rec.val = curve_metrics(val);
      rec.val_loss = val.mean_loss;
    }
    if (!std::isfinite(rec.val_loss)) {
      throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    result.history.push_back(rec);
    if (cfg.on_epoch) cfg.on_epoch(rec);
    if (!have_best || better(rec, best)) {
      best = rec;
      have_best = true;
      result.best_epoch = epoch;
      result.model = model.clone();
    }
  }
  result.model.set_requires_grad(false);
  result.model.zero_grad();
  return result;
}

TrainResult pretrain(const MultimodalModel& init, const data::ConnectomeDataset& ds,
                     const data::KnowledgeBase& kb, const data::Split& split,
                     const TrainConfig& cfg) {
  return train(init, ds, kb, split, cfg);
}

bench::Predictions predict(const MultimodalModel& m, const data::ConnectomeDataset& ds,
                           const data::KnowledgeBase& kb, const std::vector<std::size_t>& indices,
                           int threads) {
  check_compatible(m, ds);
  check_compatible(m, kb);
  const auto n = indices.size();
  const int classes = m.config.num_classes;
  bench::Predictions out;
  out.labels.resize(n);
  out.predicted.resize(n);
  out.probabilities.resize(static_cast<Index>(n), classes);
  std::vector<double> losses(n, 0.0);

  Tensor e_k;
  {
    NoGrad guard;
    e_k = embed_knowledge(m, kb).detach();
  }
  auto work = [&](std::size_t begin, std::size_t end) {
    NoGrad guard;
    for (std::size_t k = begin; k < end; ++k) {
      const auto& subject = ds.subjects.at(indices[k]);
      Tensor logits = forward(m, Tensor(subject.adjacency), e_k);
      Tensor logp = log_softmax_rows(logits);
      const auto& lp = logp.value();
      Index arg = 0;
      for (Index c = 1; c < classes; ++c)
        if (lp(0, c) > lp(0, arg)) arg = c;
      out.labels[k] = subject.label;
      out.predicted[k] = static_cast<int>(arg);
      out.probabilities.row(static_cast<Index>(k)) = lp.array().exp().matrix();
      losses[k] = -lp(0, subject.label);
    }
  };

  const auto t = static_cast<std::size_t>(std::max(1, threads));
  if (t == 1 || n < 2) {
    work(0, n);
  } else {
    const std::size_t chunk = (n + t - 1) / t;
    std::vector<std::exception_ptr> errors((n + chunk - 1) / chunk);
    {
      std::vector<std::jthread> pool;
      for (std::size_t b = 0; b < n; b += chunk) {
        pool.emplace_back([&, b] {
          try {
            work(b, std::min(n, b + chunk));
          } catch (...) {
            errors[b / chunk] = std::current_exception();
          }
        });
      }
    }
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  double total = 0.0;
  for (double l : losses) total += l;  // fixed order, independent of threads
  out.mean_loss = n == 0 ? 0.0 : total / static_cast<double>(n);
  return out;
}

}  // namespace mmgnn::model
