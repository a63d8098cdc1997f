#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <unistd.h>

#include "mmgnn/bench/synth.hpp"
#include "mmgnn/data/knowledge.hpp"
#include "mmgnn/model/model.hpp"
#include "mmgnn/rng.hpp"

namespace mmgnn::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("mmgnn_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Matrix random_matrix(Index rows, Index cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, scale);
  return m;
}

/// Symmetric, zero-diagonal, strictly positive off-diagonal weights.
inline Matrix random_adjacency(Index v, Rng& rng) {
  Matrix w = Matrix::Zero(v, v);
  for (Index i = 0; i < v; ++i) {
    for (Index j = i + 1; j < v; ++j) w(i, j) = w(j, i) = rng.uniform(0.1, 1.0);
  }
  return w;
}

inline data::KnowledgeBase random_knowledge(Index n, Index d, std::uint64_t seed) {
  Rng rng(seed);
  data::KnowledgeBase kb;
  kb.embeddings = random_matrix(n, d, rng);
  return kb;
}

/// Small planted benchmark for fast tests.
inline bench::SynthSpec small_spec(std::uint64_t seed = 7) {
  bench::SynthSpec s;
  s.subjects_per_class = 10;
  s.num_nodes = 8;
  s.num_knowledge = 6;
  s.knowledge_dim = 4;
  s.planted_edges = 3;
  s.shared_edges = 1;
  s.planted_knowledge = 2;
  s.seed = seed;
  return s;
}

inline model::ModelConfig small_config(gnn::Arch arch, Index v, Index knowledge_dim,
                                       data::FeatureMode mode = data::FeatureMode::kProfile,
                                       std::uint64_t seed = 3) {
  model::ModelConfig c;
  c.arch = arch;
  c.feature_mode = mode;
  c.num_nodes = v;
  c.knowledge_dim = knowledge_dim;
  c.hidden = 8;
  c.fusion_dim = 8;
  c.gat_heads = 2;
  c.seed = seed;
  return c;
}

/// Central-difference check of d loss / d leaf for every entry of every leaf.
/// `loss` must rebuild the graph from the current leaf values. Returns the
/// largest |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline double max_gradient_error(const std::function<Tensor()>& loss, std::vector<Tensor*> leaves,
                                 double h = 1e-5, double floor = 1e-6,
                                 double* grad_abs_sum = nullptr) {
  for (Tensor* t : leaves) {
    t->set_requires_grad(true);
    t->zero_grad();
  }
  backward(loss());
  std::vector<Matrix> analytic;
  for (Tensor* t : leaves) analytic.push_back(t->grad());
  double worst = 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    Tensor* t = leaves[k];
    for (Index i = 0; i < t->size(); ++i) {
      double& x = t->mutable_value().data()[i];
      const double saved = x;
      double plus;
      double minus;
      {
        NoGrad ng;
        x = saved + h;
        plus = loss().item();
        x = saved - h;
        minus = loss().item();
      }
      x = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = analytic[k].data()[i];
      total += std::abs(a);
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  if (grad_abs_sum) *grad_abs_sum = total;
  return worst;
}

/// True when central differences at h and h/10 agree on every coordinate,
/// i.e. no activation kink lies within h of the evaluation point. Uses loss
/// values only; `abs_tol` covers round-off at the smaller step.
inline bool locally_smooth(const std::function<Tensor()>& loss, std::vector<Tensor*> leaves, double h = 1e-5,
                           double rel_tol = 1e-5, double abs_tol = 1e-9) {
  NoGrad ng;
  for (Tensor* t : leaves) {
    for (Index i = 0; i < t->size(); ++i) {
      double& x = t->mutable_value().data()[i];
      const double saved = x;
      double d[2];
      for (int k = 0; k < 2; ++k) {
        const double step = k == 0 ? h : h / 10.0;
        x = saved + step;
        const double plus = loss().item();
        x = saved - step;
        const double minus = loss().item();
        d[k] = (plus - minus) / (2.0 * step);
      }
      x = saved;
      if (std::abs(d[0] - d[1]) > rel_tol * std::max(std::abs(d[0]), std::abs(d[1])) + abs_tol) return false;
    }
  }
  return true;
}

}  // namespace mmgnn::testing
