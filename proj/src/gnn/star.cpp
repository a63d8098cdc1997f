// Star-graph specializations of the three layer kinds. The center is node 0
// of the implicit (N+1)-node graph; leaf i connects to it with weight a_i.

#include <variant>

#include "mmgnn/errors.hpp"
#include "mmgnn/gnn/layers.hpp"

namespace mmgnn::gnn {


namespace {

void check_star(const StarState& s, const Tensor& a) {
  if (s.center.rows() != 1 || s.leaves.cols() != s.center.cols() || a.cols() != 1 ||
      a.rows() != s.leaves.rows()) {
    throw DimensionError("star graph: center " + s.center.shape_string() + ", leaves " +
                         s.leaves.shape_string() + ", indicator " + a.shape_string());
  }
  if (a.size() > 0 && !(a.value().minCoeff() >= 0.0)) {
    throw ValidationError("star graph: indicator entries must be nonnegative");
  }
}

// Leaves with a_i > 0, as a constant 0/1 column.
Tensor present_column(const Tensor& a) {
  return Tensor(Matrix((a.value().array() > 0.0).cast<double>().matrix()));
}

StarState gcn_star(const StarState& s, const Tensor& a, const GcnParams& p) {
  Tensor deg_center = add_scalar(sum(a), 1.0);  // 1 x 1
  Tensor deg_leaf = add_scalar(a, 1.0);         // N x 1
  Tensor coeff = mul(mul(a, pow(deg_leaf, -0.5)), pow(deg_center, -0.5));
  Tensor hc = matmul(s.center, p.weight);
  Tensor hk = matmul(s.leaves, p.weight);
  Tensor center = mul(pow(deg_center, -1.0), hc) + matmul(transpose(coeff), hk);
  Tensor leaves = scale_rows(hk, pow(deg_leaf, -1.0)) + matmul(coeff, hc);
  return {add_rowwise(center, p.bias), add_rowwise(leaves, p.bias)};
}

StarState gine_star(const StarState& s, const Tensor& a, const GineParams& p) {
  Tensor present = present_column(a);
  Tensor lift = matmul(a, p.edge_weight);  // N x d, a_i u
  Tensor to_center = scale_rows(relu(add_rowwise(s.leaves + lift, p.edge_bias)), present);
  Tensor to_leaf =
      scale_rows(relu(add_rowwise(lift, add_rowwise(s.center, p.edge_bias))), present);
  Tensor center = s.center + mul(p.eps, s.center) + sum(to_center, 0);
  Tensor leaves = s.leaves + mul(p.eps, s.leaves) + to_leaf;
  return {mlp_forward(center, p.mlp), mlp_forward(leaves, p.mlp)};
}

StarState gat_star(const StarState& s, const Tensor& a, const GatParams& p) {
  const Index n = a.rows();
  ad::BoolMatrix<double> center_allowed(1, n + 1);
  ad::BoolMatrix<double> leaf_allowed(n, 2);
  center_allowed(0, 0) = true;
  for (Index i = 0; i < n; ++i) {
    center_allowed(0, i + 1) = a.value()(i, 0) > 0.0;
    leaf_allowed(i, 0) = true;
    leaf_allowed(i, 1) = a.value()(i, 0) > 0.0;
  }

  Tensor center_total;
  Tensor leaf_total;
  for (std::size_t h = 0; h < p.heads.size(); ++h) {
    const GatHead& head = p.heads[h];
    Tensor hc = matmul(s.center, head.weight);  // 1 x d'
    Tensor hk = matmul(s.leaves, head.weight);  // N x d'
    Tensor src_c = matmul(hc, head.att_src);    // 1 x 1
    Tensor dst_c = matmul(hc, head.att_dst);
    Tensor src_k = matmul(hk, head.att_src);  // N x 1
    Tensor dst_k = matmul(hk, head.att_dst);
    Tensor edge_term = mul(head.edge_coef, a);

    Tensor self_c = leaky_relu(src_c + dst_c, kGatNegativeSlope);
    Tensor from_leaves = leaky_relu(src_c + dst_k, kGatNegativeSlope) + edge_term;
    Tensor center_attn =
        masked_softmax_rows(concat_cols(self_c, transpose(from_leaves)), center_allowed);
    Tensor center = matmul(center_attn, concat_rows(hc, hk));

    Tensor self_k = leaky_relu(src_k + dst_k, kGatNegativeSlope);
    Tensor from_center = leaky_relu(src_k + dst_c, kGatNegativeSlope) + edge_term;
    Tensor leaf_attn = masked_softmax_rows(concat_cols(self_k, from_center), leaf_allowed);
    Tensor leaves =
        scale_rows(hk, slice(leaf_attn, 0, n, 0, 1)) + matmul(slice(leaf_attn, 0, n, 1, 1), hc);

    center_total = h == 0 ? center : center_total + center;
    leaf_total = h == 0 ? leaves : leaf_total + leaves;
  }
  if (p.heads.size() > 1) {
    const double inv = 1.0 / static_cast<double>(p.heads.size());
    center_total = center_total * inv;
    leaf_total = leaf_total * inv;
  }
  return {add_rowwise(center_total, p.bias), add_rowwise(leaf_total, p.bias)};
}

}  // namespace

StarState star_layer(const StarState& in, const Tensor& indicator, const LayerParams& p,
                     bool activate) {
  check_star(in, indicator);
  StarState out = std::visit(
      [&](const auto& params) -> StarState {
        using T = std::decay_t<decltype(params)>;
        if constexpr (std::is_same_v<T, GcnParams>) {
          return gcn_star(in, indicator, params);
        } else if constexpr (std::is_same_v<T, GineParams>) {
          return gine_star(in, indicator, params);
        } else {
          return gat_star(in, indicator, params);
        }
      },
      p);
  if (activate) {
    out.center = relu(out.center);
    out.leaves = relu(out.leaves);
  }
  return out;
}

}  // namespace mmgnn::gnn
