#pragma once

#include <string>
#include <variant>
#include <vector>

#include "mmgnn/rng.hpp"
#include "mmgnn/types.hpp"

namespace mmgnn::gnn {

enum class Arch { kGcn, kGine, kGat };

Arch parse_arch(const std::string& name);
std::string to_string(Arch arch);

/// Affine/relu stack; no activation after the last layer.
struct MLPParams {
  std::vector<Tensor> weights;  // d_in x d_out
  std::vector<Tensor> biases;   // 1 x d_out

  /// dims = {d_in, h_1, ..., d_out}; Glorot-uniform weights, zero biases.
  static MLPParams init(const std::vector<Index>& dims, Rng& rng);
  Index in_dim() const;
  Index out_dim() const;
};

struct GcnParams {
  Tensor weight;  // d_in x d_out
  Tensor bias;    // 1 x d_out
};

struct GineParams {
  Tensor eps;          // 1 x 1
  Tensor edge_weight;  // 1 x d_in, slope of the scalar edge-weight lift
  Tensor edge_bias;    // 1 x d_in
  MLPParams mlp;
};

struct GatHead {
  Tensor weight;     // d_in x d_out
  Tensor att_src;    // d_out x 1, scores the receiving node
  Tensor att_dst;    // d_out x 1, scores the neighbor
  Tensor edge_coef;  // 1 x 1, multiplies the edge weight inside the logit
};

struct GatParams {
  std::vector<GatHead> heads;  // head outputs are averaged
  Tensor bias;                 // 1 x d_out
};

using LayerParams = std::variant<GcnParams, GineParams, GatParams>;

struct LayerOptions {
  int gat_heads = 1;
  int gine_mlp_layers = 2;
};

LayerParams init_layer(Arch arch, Index d_in, Index d_out, Rng& rng, const LayerOptions& opts = {});
Arch arch_of(const LayerParams& p);
Index out_dim(const LayerParams& p);

inline constexpr double kGatNegativeSlope = 0.2;

Tensor mlp_forward(const Tensor& x, const MLPParams& p);

/// X' = act(D^-1/2 (W + I) D^-1/2 X Theta + b), D = row sums of W + I.
Tensor gcn_layer(const Tensor& x, const Tensor& w_adj, const GcnParams& p, bool activate);

/// x'_i = MLP((1 + eps) x_i + sum_{j: w_ij > 0} relu(x_j + w_ij u + b)).
Tensor gine_layer(const Tensor& x, const Tensor& w_adj, const GineParams& p, bool activate);

/// Attention over N(i) and i itself with logits
/// leakyrelu(a_src . Theta x_i + a_dst . Theta x_j) + c w_ij.
Tensor gat_layer(const Tensor& x, const Tensor& w_adj, const GatParams& p, bool activate);

Tensor layer_forward(const Tensor& x, const Tensor& w_adj, const LayerParams& p, bool activate);

/// Column mean of a V x d matrix, returned as 1 x d.
Tensor mean_pool(const Tensor& x);

/// Fused GINE neighbor sum: out_i = sum_{j: w_ij > 0} relu(x_j + w_ij u + b).
/// Differentiable in x, w_adj, u and b.
Tensor gine_aggregate(const Tensor& x, const Tensor& w_adj, const Tensor& u, const Tensor& b);

/// Throws ValidationError when w_adj is not square, symmetric and
/// nonnegative.
void check_adjacency(const Matrix& w_adj);

/// Star graph: one center node linked to N leaves by edges whose weights are
/// the N x 1 indicator. Leaves are not linked to each other.
struct StarState {
  Tensor center;  // 1 x d
  Tensor leaves;  // N x d
};

/// One message-passing layer on a star graph, computed in O(N d) without
/// materializing the (N+1) x (N+1) adjacency. Matches layer_forward on the
/// dense star adjacency.
StarState star_layer(const StarState& in, const Tensor& indicator, const LayerParams& p,
                     bool activate);

/// Named pointers to parameter members, in a fixed order.
using ParamRefs = std::vector<std::pair<std::string, Tensor*>>;

void parameter_refs(MLPParams& p, const std::string& prefix, ParamRefs& out);
void parameter_refs(LayerParams& p, const std::string& prefix, ParamRefs& out);

}  // namespace mmgnn::gnn
