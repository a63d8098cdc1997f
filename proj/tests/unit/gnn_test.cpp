#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "mmgnn/errors.hpp"
#include "mmgnn/gnn/layers.hpp"
#include "test_util.hpp"

namespace mmgnn::gnn {
namespace {

using testing::max_gradient_error;
using testing::random_adjacency;
using testing::random_matrix;

Tensor rows(std::initializer_list<std::initializer_list<double>> values) {
  const auto r = static_cast<Index>(values.size());
  const auto c = static_cast<Index>(values.begin()->size());
  Matrix m(r, c);
  Index i = 0;
  for (const auto& row : values) {
    Index j = 0;
    for (double x : row) m(i, j++) = x;
    ++i;
  }
  return Tensor(m);
}

MLPParams identity_mlp(Index d) {
  MLPParams p;
  p.weights = {Tensor(Matrix::Identity(d, d))};
  p.biases = {Tensor::zeros(1, d)};
  return p;
}

Matrix permute_rows(const Matrix& x, const std::vector<Index>& perm) {
  Matrix out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) out.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
  return out;
}

Matrix permute_both(const Matrix& w, const std::vector<Index>& perm) {
  Matrix out(w.rows(), w.cols());
  for (Index i = 0; i < w.rows(); ++i)
    for (Index j = 0; j < w.cols(); ++j) out(i, j) = w(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  return out;
}

TEST(Gcn, SingleNodeNoEdges) {
  GcnParams p{Tensor(Matrix::Identity(2, 2)), Tensor::zeros(1, 2)};
  const Matrix out = gcn_layer(rows({{1, 2}}), Tensor(Matrix::Zero(1, 1)), p, true).value();
  EXPECT_DOUBLE_EQ(out(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(out(0, 1), 2.0);
}

TEST(Gcn, TwoNodesUnitEdge) {
  GcnParams p{Tensor(Matrix::Identity(2, 2)), Tensor::zeros(1, 2)};
  const Matrix out =
      gcn_layer(rows({{1, 0}, {0, 1}}), rows({{0, 1}, {1, 0}}), p, false).value();
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 2; ++j) EXPECT_NEAR(out(i, j), 0.5, 1e-15);
}

TEST(Gcn, ZeroAdjacencyIsDenseLayer) {
  Rng rng(1);
  Tensor x(random_matrix(4, 3, rng));
  GcnParams p{Tensor(random_matrix(3, 5, rng)), Tensor(random_matrix(1, 5, rng))};
  const Matrix out = gcn_layer(x, Tensor(Matrix::Zero(4, 4)), p, false).value();
  const Matrix dense = (x.value() * p.weight.value()).rowwise() + p.bias.value().row(0);
  EXPECT_TRUE(out.isApprox(dense, 1e-14));
}

TEST(Gine, IsolatedNodeKeepsFeatures) {
  GineParams p{Tensor::zeros(1, 1), Tensor::zeros(1, 2), Tensor::zeros(1, 2), identity_mlp(2)};
  const Matrix out = gine_layer(rows({{1.5, -2}}), Tensor(Matrix::Zero(1, 1)), p, false).value();
  EXPECT_DOUBLE_EQ(out(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(out(0, 1), -2.0);
}

TEST(Gine, TwoNodesHandValue) {
  GineParams p{Tensor::zeros(1, 1), Tensor::zeros(1, 1), Tensor::zeros(1, 1), identity_mlp(1)};
  const Matrix out = gine_layer(rows({{1}, {2}}), rows({{0, 1}, {1, 0}}), p, false).value();
  EXPECT_DOUBLE_EQ(out(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(out(1, 0), 3.0);
}

class Equivariance : public ::testing::TestWithParam<Arch> {};

TEST_P(Equivariance, PermutingNodesPermutesOutputs) {
  for (Index v : {2, 3}) {
    Rng rng(static_cast<std::uint64_t>(10 + v));
    const Matrix x = random_matrix(v, 3, rng);
    const Matrix w = random_adjacency(v, rng);
    const LayerParams p = init_layer(GetParam(), 3, 4, rng, {2, 2});
    const Matrix base = layer_forward(Tensor(x), Tensor(w), p, true).value();
    std::vector<Index> perm(static_cast<std::size_t>(v));
    std::iota(perm.begin(), perm.end(), Index{0});
    do {
      const Matrix out =
          layer_forward(Tensor(permute_rows(x, perm)), Tensor(permute_both(w, perm)), p, true).value();
      EXPECT_TRUE(out.isApprox(permute_rows(base, perm), 1e-12));
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST_P(Equivariance, GradientsMatchFiniteDifferences) {
  Rng rng(20);
  Tensor x(random_matrix(5, 3, rng));
  Tensor upper((random_matrix(1, 10, rng).array().abs() + 0.1).matrix());
  LayerParams p = init_layer(GetParam(), 3, 4, rng, {2, 2});
  ParamRefs refs;
  parameter_refs(p, "layer", refs);
  std::vector<Tensor*> leaves{&x, &upper};
  for (auto& [name, t] : refs) leaves.push_back(t);
  Tensor probe(random_matrix(5, 4, rng));
  double total = 0.0;
  const double err = max_gradient_error(
      [&] {
        Tensor w = ad::mirror_upper(upper, 5);
        return ad::sum(ad::mul(layer_forward(x, w, p, true), probe));
      },
      leaves, 1e-5, 1e-6, &total);
  EXPECT_LE(err, 1e-5);
  EXPECT_GT(total, 0.0);
}

INSTANTIATE_TEST_SUITE_P(AllArchs, Equivariance, ::testing::Values(Arch::kGcn, Arch::kGine, Arch::kGat),
                         [](const auto& info) { return to_string(info.param); });

TEST(Gat, SingleNodeAttendsToItself) {
  Rng rng(3);
  GatParams p;
  p.heads.push_back({Tensor(random_matrix(2, 3, rng)), Tensor(random_matrix(3, 1, rng)),
                     Tensor(random_matrix(3, 1, rng)), Tensor::scalar(0.7)});
  p.bias = Tensor::zeros(1, 3);
  Tensor x = rows({{0.3, -1.2}});
  const Matrix out = gat_layer(x, Tensor(Matrix::Zero(1, 1)), p, false).value();
  EXPECT_TRUE(out.isApprox(x.value() * p.heads[0].weight.value(), 1e-14));
}

TEST(Gat, AttentionWeightsSumToOne) {
  // With identical node rows the output equals that row times Theta exactly
  // when every attention row sums to one.
  Rng rng(4);
  const LayerParams lp = init_layer(Arch::kGat, 3, 3, rng, {3, 2});
  GatParams p = std::get<GatParams>(lp);
  for (auto& h : p.heads) h.edge_coef = Tensor::scalar(2.5);
  Matrix x(6, 3);
  for (Index i = 0; i < 6; ++i) x.row(i) << 0.4, -0.9, 1.3;
  const Matrix out = gat_layer(Tensor(x), Tensor(random_adjacency(6, rng)), p, false).value();
  Matrix expected = Matrix::Zero(1, 3);
  for (const auto& h : p.heads) expected += x.row(0) * h.weight.value();
  expected /= static_cast<double>(p.heads.size());
  for (Index i = 0; i < 6; ++i) EXPECT_LE((out.row(i) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Gat, ZeroAttentionIsUniformAverage) {
  GatParams p;
  p.heads.push_back({Tensor(Matrix::Identity(1, 1)), Tensor::zeros(1, 1), Tensor::zeros(1, 1), Tensor::scalar(0.0)});
  p.bias = Tensor::zeros(1, 1);
  // Path 0 - 1 - 2.
  const Matrix out = gat_layer(rows({{3}, {6}, {12}}), rows({{0, 1, 0}, {1, 0, 2}, {0, 2, 0}}), p, false).value();
  EXPECT_NEAR(out(0, 0), 4.5, 1e-14);
  EXPECT_NEAR(out(1, 0), 7.0, 1e-14);
  EXPECT_NEAR(out(2, 0), 9.0, 1e-14);
}

TEST(Mlp, IdentityAndTwoLayers) {
  Tensor x = rows({{1, -2, 3}});
  EXPECT_TRUE(mlp_forward(x, identity_mlp(3)).value() == x.value());
  MLPParams two;
  two.weights = {rows({{2}}), rows({{3}})};
  two.biases = {Tensor::zeros(1, 1), Tensor::zeros(1, 1)};
  EXPECT_DOUBLE_EQ(mlp_forward(rows({{1}}), two).item(), 6.0);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  MLPParams p = MLPParams::init({4, 6, 3}, rng);
  for (auto& b : p.biases) b = Tensor(random_matrix(1, b.cols(), rng, 0.1));
  Tensor x(random_matrix(3, 4, rng));
  ParamRefs refs;
  parameter_refs(p, "mlp", refs);
  std::vector<Tensor*> leaves{&x};
  for (auto& [name, t] : refs) leaves.push_back(t);
  EXPECT_LE(max_gradient_error([&] { return ad::sum(ad::pow(ad::softplus(mlp_forward(x, p)), 2.0)); }, leaves), 1e-6);
  EXPECT_EQ(p.in_dim(), 4);
  EXPECT_EQ(p.out_dim(), 3);
}

TEST(MeanPool, Examples) {
  const Matrix m = mean_pool(rows({{1, 2}, {3, 4}})).value();
  EXPECT_DOUBLE_EQ(m(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(m(0, 1), 3.0);
  EXPECT_TRUE(mean_pool(rows({{5, 6}})).value() == rows({{5, 6}}).value());
  Rng rng(6);
  const Matrix x = random_matrix(5, 3, rng);
  EXPECT_TRUE(mean_pool(Tensor(x)).value().isApprox(mean_pool(Tensor(permute_rows(x, {4, 2, 0, 1, 3}))).value(), 1e-15));
}

class Star : public ::testing::TestWithParam<Arch> {};

TEST_P(Star, MatchesDenseStarGraph) {
  Rng rng(7);
  const Index n = 5;
  StarState in{Tensor(random_matrix(1, 3, rng)), Tensor(random_matrix(n, 3, rng))};
  Matrix ind(n, 1);
  ind << 1.0, 0.3, 0.0, 0.9, 0.05;
  const LayerParams p = init_layer(GetParam(), 3, 4, rng, {2, 2});
  const StarState out = star_layer(in, Tensor(ind), p, true);

  Matrix x(n + 1, 3);
  x.row(0) = in.center.value();
  x.bottomRows(n) = in.leaves.value();
  Matrix w = Matrix::Zero(n + 1, n + 1);
  for (Index k = 0; k < n; ++k) w(0, k + 1) = w(k + 1, 0) = ind(k, 0);
  const Matrix dense = layer_forward(Tensor(x), Tensor(w), p, true).value();
  EXPECT_LE((dense.row(0) - out.center.value()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((dense.bottomRows(n) - out.leaves.value()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST_P(Star, GradientsMatchFiniteDifferences) {
  Rng rng(8);
  Tensor center(random_matrix(1, 3, rng));
  Tensor leaves(random_matrix(4, 3, rng));
  Tensor ind((random_matrix(4, 1, rng).array().abs() * 0.5 + 0.2).matrix());
  LayerParams p = init_layer(GetParam(), 3, 3, rng, {2, 2});
  ParamRefs refs;
  parameter_refs(p, "star", refs);
  std::vector<Tensor*> leaves_list{&center, &leaves, &ind};
  for (auto& [name, t] : refs) leaves_list.push_back(t);
  Tensor probe(random_matrix(4, 3, rng));
  auto f = [&] {
    StarState s = star_layer({center, leaves}, ind, p, false);
    return ad::sum(ad::mul(s.center, s.center)) + ad::sum(ad::mul(s.leaves, probe));
  };
  EXPECT_LE(max_gradient_error(f, leaves_list), 1e-5);
}

INSTANTIATE_TEST_SUITE_P(AllArchs, Star, ::testing::Values(Arch::kGcn, Arch::kGine, Arch::kGat),
                         [](const auto& info) { return to_string(info.param); });

TEST(Layers, ParseAndShapes) {
  EXPECT_EQ(parse_arch("gine"), Arch::kGine);
  EXPECT_THROW(parse_arch("sage"), ValidationError);
  Rng rng(9);
  for (Arch a : {Arch::kGcn, Arch::kGine, Arch::kGat}) {
    const LayerParams p = init_layer(a, 6, 5, rng);
    EXPECT_EQ(arch_of(p), a);
    EXPECT_EQ(out_dim(p), 5);
    const Tensor out = layer_forward(Tensor(random_matrix(7, 6, rng)), Tensor(random_adjacency(7, rng)), p, true);
    EXPECT_EQ(out.rows(), 7);
    EXPECT_EQ(out.cols(), 5);
  }
}

TEST(Layers, CheckAdjacency) {
  EXPECT_THROW(check_adjacency(Matrix::Zero(2, 3)), ValidationError);
  EXPECT_THROW(check_adjacency(rows({{0, 1}, {2, 0}}).value()), ValidationError);
  EXPECT_THROW(check_adjacency(rows({{0, -1}, {-1, 0}}).value()), ValidationError);
  EXPECT_NO_THROW(check_adjacency(rows({{0, 1}, {1, 0}}).value()));
}

}  // namespace
}  // namespace mmgnn::gnn
