#include "mmgnn/gnn/layers.hpp"

#include <cmath>

#include "mmgnn/errors.hpp"

namespace mmgnn::gnn {


Arch parse_arch(const std::string& name) {
  if (name == "gcn") return Arch::kGcn;
  if (name == "gine") return Arch::kGine;
  if (name == "gat") return Arch::kGat;
  throw ValidationError("unknown architecture '" + name + "' (expected gcn, gine or gat)");
}

std::string to_string(Arch arch) {
  switch (arch) {
    case Arch::kGcn: return "gcn";
    case Arch::kGine: return "gine";
    case Arch::kGat: return "gat";
  }
  return "?";
}

namespace {

Tensor glorot(Index fan_in, Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(fan_in, fan_out);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-limit, limit);
  return Tensor(std::move(m), true);
}

Tensor zeros_param(Index rows, Index cols) { return Tensor::zeros(rows, cols, true); }

}  // namespace

MLPParams MLPParams::init(const std::vector<Index>& dims, Rng& rng) {
  if (dims.size() < 2) throw DimensionError("MLP needs at least input and output widths");
  MLPParams p;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    p.weights.push_back(glorot(dims[i], dims[i + 1], rng));
    p.biases.push_back(zeros_param(1, dims[i + 1]));
  }
  return p;
}

Index MLPParams::in_dim() const { return weights.empty() ? 0 : weights.front().rows(); }
Index MLPParams::out_dim() const { return weights.empty() ? 0 : weights.back().cols(); }

LayerParams init_layer(Arch arch, Index d_in, Index d_out, Rng& rng, const LayerOptions& opts) {
  switch (arch) {
    case Arch::kGcn:
      return GcnParams{glorot(d_in, d_out, rng), zeros_param(1, d_out)};
    case Arch::kGine: {
      GineParams p;
      p.eps = zeros_param(1, 1);
      p.edge_weight = glorot(1, d_in, rng);
      p.edge_bias = zeros_param(1, d_in);
      std::vector<Index> dims{d_in};
      for (int i = 1; i < opts.gine_mlp_layers; ++i) dims.push_back(d_out);
      dims.push_back(d_out);
      p.mlp = MLPParams::init(dims, rng);
      return p;
    }
    case Arch::kGat: {
      if (opts.gat_heads < 1) throw RangeError("GAT needs at least one head");
      GatParams p;
      for (int h = 0; h < opts.gat_heads; ++h) {
        GatHead head;
        head.weight = glorot(d_in, d_out, rng);
        head.att_src = glorot(d_out, 1, rng);
        head.att_dst = glorot(d_out, 1, rng);
        head.edge_coef = zeros_param(1, 1);
        p.heads.push_back(std::move(head));
      }
      p.bias = zeros_param(1, d_out);
      return p;
    }
  }
  throw ContractError("unreachable architecture");
}

Arch arch_of(const LayerParams& p) {
  if (std::holds_alternative<GcnParams>(p)) return Arch::kGcn;
  if (std::holds_alternative<GineParams>(p)) return Arch::kGine;
  return Arch::kGat;
}

Index out_dim(const LayerParams& p) {
  if (const auto* g = std::get_if<GcnParams>(&p)) return g->weight.cols();
  if (const auto* g = std::get_if<GineParams>(&p)) return g->mlp.out_dim();
  return std::get<GatParams>(p).bias.cols();
}

Tensor mlp_forward(const Tensor& x, const MLPParams& p) {
  if (x.cols() != p.in_dim()) {
    throw DimensionError("mlp: input " + x.shape_string() + " does not match input width " +
                         std::to_string(p.in_dim()));
  }
  Tensor h = x;
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    h = add_rowwise(matmul(h, p.weights[i]), p.biases[i]);
    if (i + 1 < p.weights.size()) h = relu(h);
  }
  return h;
}

void check_adjacency(const Matrix& w) {
  if (w.rows() != w.cols()) {
    throw DimensionError("adjacency must be square, got " + std::to_string(w.rows()) + "x" +
                         std::to_string(w.cols()));
  }
  const double tol = 1e-12 * std::max(1.0, w.cwiseAbs().maxCoeff());
  for (Index i = 0; i < w.rows(); ++i) {
    for (Index j = 0; j < w.cols(); ++j) {
      if (!(w(i, j) >= 0.0)) {
        throw ValidationError("adjacency has negative or non-finite entry at (" +
                              std::to_string(i) + "," + std::to_string(j) + ")");
      }
      if (j > i && std::abs(w(i, j) - w(j, i)) > tol) {
        throw ValidationError("adjacency is not symmetric at (" + std::to_string(i) + "," +
                              std::to_string(j) + ")");
      }
    }
  }
}

namespace {

void check_features(const Tensor& x, const Tensor& w_adj) {
  check_adjacency(w_adj.value());
  if (x.rows() != w_adj.rows()) {
    throw DimensionError("node features " + x.shape_string() + " do not match adjacency " +
                         w_adj.shape_string());
  }
}

}  // namespace

Tensor gcn_layer(const Tensor& x, const Tensor& w_adj, const GcnParams& p, bool activate) {
  check_features(x, w_adj);
  const Index v = w_adj.rows();
  Tensor with_self = w_adj + Tensor(Matrix::Identity(v, v));
  Tensor inv_sqrt_deg = pow(sum(with_self, 1), -0.5);  // V x 1
  Tensor normalized = scale_rows(scale_cols(with_self, transpose(inv_sqrt_deg)), inv_sqrt_deg);
  Tensor out = add_rowwise(matmul(normalized, matmul(x, p.weight)), p.bias);
  return activate ? relu(out) : out;
}

Tensor gine_aggregate(const Tensor& x, const Tensor& w_adj, const Tensor& u, const Tensor& b) {
  const Index v = x.rows();
  const Index d = x.cols();
  if (w_adj.rows() != v || w_adj.cols() != v || u.rows() != 1 || u.cols() != d || b.rows() != 1 ||
      b.cols() != d) {
    throw DimensionError("gine_aggregate: inconsistent shapes x" + x.shape_string() + " w" +
                         w_adj.shape_string() + " u" + u.shape_string() + " b" + b.shape_string());
  }
  const Matrix& xv = x.value();
  const Matrix& wv = w_adj.value();
  const Matrix& uv = u.value();
  const Matrix& bv = b.value();
  Matrix out = Matrix::Zero(v, d);
  for (Index i = 0; i < v; ++i) {
    for (Index j = 0; j < v; ++j) {
      const double w = wv(i, j);
      if (!(w > 0.0)) continue;
      out.row(i) += (xv.row(j) + w * uv + bv).cwiseMax(0.0);
    }
  }
  return ad::make_result<double>(std::move(out), {x, w_adj, u, b}, [v, d](ad::detail::Node<double>& self) {
    auto& xn = self.input(0);
    auto& wn = self.input(1);
    auto& un = self.input(2);
    auto& bn = self.input(3);
    const Matrix& xv = xn.value;
    const Matrix& wv = wn.value;
    const Matrix& uv = un.value;
    const Matrix& bv = bn.value;
    Matrix dx = Matrix::Zero(v, d);
    Matrix dw = Matrix::Zero(v, v);
    Matrix du = Matrix::Zero(1, d);
    Matrix db = Matrix::Zero(1, d);
    for (Index i = 0; i < v; ++i) {
      for (Index j = 0; j < v; ++j) {
        const double w = wv(i, j);
        if (!(w > 0.0)) continue;
        for (Index k = 0; k < d; ++k) {
          const double z = xv(j, k) + w * uv(0, k) + bv(0, k);
          if (z <= 0.0) continue;
          const double g = self.grad(i, k);
          dx(j, k) += g;
          dw(i, j) += g * uv(0, k);
          du(0, k) += g * w;
          db(0, k) += g;
        }
      }
    }
    if (xn.requires_grad) xn.accumulate(dx);
    if (wn.requires_grad) wn.accumulate(dw);
    if (un.requires_grad) un.accumulate(du);
    if (bn.requires_grad) bn.accumulate(db);
  });
}

Tensor gine_layer(const Tensor& x, const Tensor& w_adj, const GineParams& p, bool activate) {
  check_features(x, w_adj);
  Tensor agg = gine_aggregate(x, w_adj, p.edge_weight, p.edge_bias);
  Tensor combined = x + mul(p.eps, x) + agg;
  Tensor out = mlp_forward(combined, p.mlp);
  return activate ? relu(out) : out;
}

Tensor gat_layer(const Tensor& x, const Tensor& w_adj, const GatParams& p, bool activate) {
  check_features(x, w_adj);
  const Index v = w_adj.rows();
  ad::BoolMatrix<double> allowed = w_adj.value().array() > 0.0;
  for (Index i = 0; i < v; ++i) allowed(i, i) = true;
  Tensor ones_row = Tensor::constant(1, v, 1.0);
  Tensor ones_col = Tensor::constant(v, 1, 1.0);

  Tensor total;
  for (std::size_t h = 0; h < p.heads.size(); ++h) {
    const GatHead& head = p.heads[h];
    Tensor z = matmul(x, head.weight);
    Tensor src = matmul(z, head.att_src);  // V x 1
    Tensor dst = matmul(z, head.att_dst);  // V x 1
    Tensor pair = matmul(src, ones_row) + matmul(ones_col, transpose(dst));
    Tensor logits = leaky_relu(pair, kGatNegativeSlope) + mul(head.edge_coef, w_adj);
    Tensor attn = masked_softmax_rows(logits, allowed);
    Tensor out = matmul(attn, z);
    total = h == 0 ? out : total + out;
  }
  if (p.heads.size() > 1) total = total * (1.0 / static_cast<double>(p.heads.size()));
  Tensor out = add_rowwise(total, p.bias);
  return activate ? relu(out) : out;
}

Tensor layer_forward(const Tensor& x, const Tensor& w_adj, const LayerParams& p, bool activate) {
  return std::visit(
      [&](const auto& params) -> Tensor {
        using T = std::decay_t<decltype(params)>;
        if constexpr (std::is_same_v<T, GcnParams>) {
          return gcn_layer(x, w_adj, params, activate);
        } else if constexpr (std::is_same_v<T, GineParams>) {
          return gine_layer(x, w_adj, params, activate);
        } else {
          return gat_layer(x, w_adj, params, activate);
        }
      },
      p);
}

Tensor mean_pool(const Tensor& x) {
  if (x.rows() == 0) throw ContractError("mean_pool: no nodes");
  return mean(x, 0);
}

void parameter_refs(MLPParams& p, const std::string& prefix, ParamRefs& out) {
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    out.emplace_back(prefix + ".w" + std::to_string(i), &p.weights[i]);
    out.emplace_back(prefix + ".b" + std::to_string(i), &p.biases[i]);
  }
}

void parameter_refs(LayerParams& p, const std::string& prefix, ParamRefs& out) {
  if (auto* g = std::get_if<GcnParams>(&p)) {
    out.emplace_back(prefix + ".weight", &g->weight);
    out.emplace_back(prefix + ".bias", &g->bias);
  } else if (auto* g = std::get_if<GineParams>(&p)) {
    out.emplace_back(prefix + ".eps", &g->eps);
    out.emplace_back(prefix + ".edge_weight", &g->edge_weight);
    out.emplace_back(prefix + ".edge_bias", &g->edge_bias);
    parameter_refs(g->mlp, prefix + ".mlp", out);
  } else {
    auto& gat = std::get<GatParams>(p);
    for (std::size_t h = 0; h < gat.heads.size(); ++h) {
      const std::string hp = prefix + ".head" + std::to_string(h);
      out.emplace_back(hp + ".weight", &gat.heads[h].weight);
      out.emplace_back(hp + ".att_src", &gat.heads[h].att_src);
      out.emplace_back(hp + ".att_dst", &gat.heads[h].att_dst);
      out.emplace_back(hp + ".edge_coef", &gat.heads[h].edge_coef);
    }
    out.emplace_back(prefix + ".bias", &gat.bias);
  }
}

}  // namespace mmgnn::gnn
