#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "aps/common.hpp"
#include "aps/io.hpp"
#include "aps/rng.hpp"
#include "aps/tensor.hpp"

namespace aps {

enum class Activation : int { kIdentity = 0, kRelu = 1, kElu = 2 };

inline double apply_activation(Activation a, double z) {
  switch (a) {
    case Activation::kIdentity: return z;
    case Activation::kRelu: return z > 0.0 ? z : 0.0;
    case Activation::kElu: return z > 0.0 ? z : std::exp(z) - 1.0;
  }
  throw ContractViolation("unknown activation");
}

inline double activation_grad(Activation a, double z) {
  switch (a) {
    case Activation::kIdentity: return 1.0;
    case Activation::kRelu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::kElu: return z > 0.0 ? 1.0 : std::exp(z);
  }
  throw ContractViolation("unknown activation");
}

/// One affine layer. Weights are stored input-major (wt[j][r] scales input j
/// into output r) so that forwarding a mostly-zero input only touches the
/// weight rows of its nonzero entries.
struct Layer {
  Matrix wt;  // [in][out]
  Vec bias;   // [out]
  Activation act = Activation::kIdentity;

  int in_dim() const { return wt.rows; }
  int out_dim() const { return wt.cols; }
};

/// Plain feed-forward stack of affine layers with elementwise activations.
/// Forward passes are pure functions of (parameters, input); all mutation
/// goes through adam_step / sync_target.
struct DenseNet {
  std::vector<Layer> layers;

  void add_layer(int in, int out, Activation act) {
    if (!layers.empty() && layers.back().out_dim() != in)
      throw ContractViolation("add_layer: dimension chain broken (" +
                              std::to_string(layers.back().out_dim()) + " -> " +
                              std::to_string(in) + ")");
    Layer l;
    l.wt = Matrix(in, out);
    l.bias.assign(static_cast<std::size_t>(out), 0.0);
    l.act = act;
    layers.push_back(std::move(l));
  }

  int input_dim() const {
    if (layers.empty()) throw ContractViolation("empty network");
    return layers.front().in_dim();
  }
  int output_dim() const {
    if (layers.empty()) throw ContractViolation("empty network");
    return layers.back().out_dim();
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.wt.size() + l.bias.size();
    return n;
  }
};

inline bool same_architecture(const DenseNet& a, const DenseNet& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (!a.layers[i].wt.same_shape(b.layers[i].wt)) return false;
    if (a.layers[i].act != b.layers[i].act) return false;
  }
  return true;
}

/// Fan-in scaled uniform init, U[-sqrt(1/fan_in), +sqrt(1/fan_in)] for both
/// weights and biases. Draw order is fixed (layer by layer, weights then
/// bias) so a seeded Rng reproduces the same network.
inline void init_uniform_fanin(DenseNet& net, Rng& rng) {
  for (auto& l : net.layers) {
    const double bound = std::sqrt(1.0 / static_cast<double>(l.in_dim()));
    for (auto& w : l.wt.data) w = (2.0 * rng.uniform() - 1.0) * bound;
    for (auto& b : l.bias) b = (2.0 * rng.uniform() - 1.0) * bound;
  }
}

// ---------------------------------------------------------------------------
// Forward

/// Reusable ping-pong buffers for allocation-free forward passes.
struct ForwardScratch {
  Vec a, b;
};

namespace detail {

inline void affine_into(const Layer& l, std::span<const double> x, Vec& out) {
  if (static_cast<int>(x.size()) != l.in_dim())
    throw ContractViolation("forward: input size " + std::to_string(x.size()) +
                            " does not match layer in-dim " + std::to_string(l.in_dim()));
  out.assign(l.bias.begin(), l.bias.end());
  const int n_out = l.out_dim();
  for (int j = 0; j < l.in_dim(); ++j) {
    const double xj = x[j];
    if (xj == 0.0) continue;  // one-hot inputs skip almost every row
    const double* wrow = l.wt.row(j);
    double* o = out.data();
    for (int r = 0; r < n_out; ++r) o[r] += xj * wrow[r];
  }
}

inline void activate_inplace(Activation act, Vec& v) {
  if (act == Activation::kIdentity) return;
  for (auto& z : v) z = apply_activation(act, z);
}

}  // namespace detail

/// Forward pass without gradient bookkeeping. Returns a reference into the
/// scratch buffers, valid until the next call with the same scratch.
inline const Vec& forward(const DenseNet& net, std::span<const double> input,
                          ForwardScratch& scratch) {
  if (net.layers.empty()) throw ContractViolation("forward: empty network");
  const Vec* cur = nullptr;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    Vec& dst = (i % 2 == 0) ? scratch.a : scratch.b;
    std::span<const double> x = (i == 0) ? input : std::span<const double>(*cur);
    detail::affine_into(net.layers[i], x, dst);
    detail::activate_inplace(net.layers[i].act, dst);
    cur = &dst;
  }
  return *cur;
}

/// Convenience allocating forward.
inline Vec forward(const DenseNet& net, std::span<const double> input) {
  ForwardScratch s;
  return forward(net, input, s);
}

/// Per-layer records needed to run the reverse pass.
struct ForwardTrace {
  Vec input;
  std::vector<Vec> pre;   // z_l, before activation
  std::vector<Vec> post;  // a_l, after activation
};

inline const Vec& forward_trace(const DenseNet& net, std::span<const double> input,
                                ForwardTrace& trace) {
  if (net.layers.empty()) throw ContractViolation("forward: empty network");
  trace.input.assign(input.begin(), input.end());
  trace.pre.resize(net.layers.size());
  trace.post.resize(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    std::span<const double> x = (i == 0) ? std::span<const double>(trace.input)
                                         : std::span<const double>(trace.post[i - 1]);
    detail::affine_into(net.layers[i], x, trace.pre[i]);
    trace.post[i] = trace.pre[i];
    detail::activate_inplace(net.layers[i].act, trace.post[i]);
  }
  return trace.post.back();
}

// ---------------------------------------------------------------------------
// Backward

/// Gradients shaped exactly like one DenseNet, plus the input gradient.
struct GradientBundle {
  std::vector<Matrix> wt;
  std::vector<Vec> bias;
  Vec input;

  static GradientBundle zeros_like(const DenseNet& net) {
    GradientBundle g;
    g.wt.reserve(net.layers.size());
    g.bias.reserve(net.layers.size());
    for (const auto& l : net.layers) {
      g.wt.emplace_back(l.wt.rows, l.wt.cols);
      g.bias.emplace_back(l.bias.size(), 0.0);
    }
    g.input.assign(static_cast<std::size_t>(net.input_dim()), 0.0);
    return g;
  }

  void zero() {
    for (auto& m : wt) m.fill(0.0);
    for (auto& b : bias) std::fill(b.begin(), b.end(), 0.0);
    std::fill(input.begin(), input.end(), 0.0);
  }

  bool shape_matches(const DenseNet& net) const {
    if (wt.size() != net.layers.size() || bias.size() != net.layers.size()) return false;
    for (std::size_t i = 0; i < wt.size(); ++i) {
      if (!wt[i].same_shape(net.layers[i].wt)) return false;
      if (bias[i].size() != net.layers[i].bias.size()) return false;
    }
    return true;
  }
};

/// Accumulate reverse-mode gradients of dot(output, output_grad) into `acc`.
/// Writes the input gradient for this sample into `acc.input` (overwriting,
/// not accumulating, since per-sample input grads are rarely summed).
inline void backward_acc(const DenseNet& net, const ForwardTrace& trace,
                         std::span<const double> output_grad, GradientBundle& acc) {
  if (!acc.shape_matches(net))
    throw ContractViolation("backward: gradient bundle shape mismatch");
  if (static_cast<int>(output_grad.size()) != net.output_dim())
    throw ContractViolation("backward: output_grad size mismatch");

  const int n_layers = static_cast<int>(net.layers.size());
  Vec dz(output_grad.begin(), output_grad.end());
  Vec dprev;
  for (int l = n_layers - 1; l >= 0; --l) {
    const Layer& layer = net.layers[l];
    const Vec& z = trace.pre[l];
    if (layer.act != Activation::kIdentity)
      for (int r = 0; r < layer.out_dim(); ++r) dz[r] *= activation_grad(layer.act, z[r]);

    std::span<const double> x = (l == 0) ? std::span<const double>(trace.input)
                                         : std::span<const double>(trace.post[l - 1]);
    Matrix& dwt = acc.wt[l];
    Vec& db = acc.bias[l];
    const int n_out = layer.out_dim();
    for (int r = 0; r < n_out; ++r) db[r] += dz[r];
    for (int j = 0; j < layer.in_dim(); ++j) {
      const double xj = x[j];
      if (xj == 0.0) continue;
      double* drow = dwt.row(j);
      for (int r = 0; r < n_out; ++r) drow[r] += xj * dz[r];
    }

    dprev.assign(static_cast<std::size_t>(layer.in_dim()), 0.0);
    for (int j = 0; j < layer.in_dim(); ++j) {
      const double* wrow = layer.wt.row(j);
      double s = 0.0;
      for (int r = 0; r < n_out; ++r) s += wrow[r] * dz[r];
      dprev[j] = s;
    }
    dz.swap(dprev);
  }
  acc.input = dz;
}

/// Fresh-bundle variant: exact gradients of dot(output, output_grad) with
/// respect to every parameter and the input.
inline GradientBundle backward(const DenseNet& net, std::span<const double> input,
                               std::span<const double> output_grad) {
  ForwardTrace trace;
  forward_trace(net, input, trace);
  GradientBundle g = GradientBundle::zeros_like(net);
  backward_acc(net, trace, output_grad, g);
  return g;
}

// ---------------------------------------------------------------------------
// Optimization

/// Adam accumulators; shapes mirror the parameter shapes exactly.
struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 0.00015;
  std::int64_t step = 0;
  std::vector<Matrix> m_wt, v_wt;
  std::vector<Vec> m_b, v_b;

  static AdamState for_net(const DenseNet& net, double lr, double beta1 = 0.9,
                           double beta2 = 0.999, double eps = 0.00015) {
    AdamState s;
    s.lr = lr;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.eps = eps;
    for (const auto& l : net.layers) {
      s.m_wt.emplace_back(l.wt.rows, l.wt.cols);
      s.v_wt.emplace_back(l.wt.rows, l.wt.cols);
      s.m_b.emplace_back(l.bias.size(), 0.0);
      s.v_b.emplace_back(l.bias.size(), 0.0);
    }
    return s;
  }
};

namespace detail {

inline void adam_update_array(std::span<double> param, std::span<const double> grad,
                              std::span<double> m, std::span<double> v, const AdamState& s,
                              double corr1, double corr2, const char* tensor_name) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    if (!std::isfinite(g))
      throw NumericsError(std::string("adam_step: non-finite gradient in ") + tensor_name);
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g;
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g * g;
    const double mhat = m[i] / corr1;
    const double vhat = v[i] / corr2;
    param[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

}  // namespace detail

/// Standard bias-corrected Adam. Increments the step counter by exactly 1.
inline void adam_step(DenseNet& net, const GradientBundle& grads, AdamState& state) {
  if (!grads.shape_matches(net))
    throw ContractViolation("adam_step: gradient shapes do not match network");
  if (state.m_wt.size() != net.layers.size())
    throw ContractViolation("adam_step: optimizer state does not match network");
  state.step += 1;
  const double corr1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double corr2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const std::string base = "L" + std::to_string(l);
    detail::adam_update_array(net.layers[l].wt.data, grads.wt[l].data, state.m_wt[l].data,
                              state.v_wt[l].data, state, corr1, corr2, (base + ".wt").c_str());
    detail::adam_update_array(net.layers[l].bias, grads.bias[l], state.m_b[l], state.v_b[l],
                              state, corr1, corr2, (base + ".b").c_str());
  }
}

/// Global L2 norm over every parameter gradient in the bundle (the input
/// gradient is not a parameter and is excluded).
inline double global_grad_norm(const GradientBundle& g) {
  double s = 0.0;
  for (const auto& m : g.wt)
    for (double x : m.data) s += x * x;
  for (const auto& b : g.bias)
    for (double x : b) s += x * x;
  return std::sqrt(s);
}

/// If the global norm exceeds max_norm, rescales uniformly so it equals
/// max_norm; otherwise leaves the bundle untouched. Returns the norm before
/// clipping. Idempotent, never increases the norm.
inline double clip_grad_norm(GradientBundle& g, double max_norm) {
  if (!(max_norm > 0.0)) throw ContractViolation("clip_grad_norm: max_norm must be > 0");
  const double norm = global_grad_norm(g);
  if (!std::isfinite(norm)) throw NumericsError("clip_grad_norm: non-finite gradient norm");
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& m : g.wt)
      for (double& x : m.data) x *= scale;
    for (auto& b : g.bias)
      for (double& x : b) x *= scale;
  }
  return norm;
}

/// target := bit-exact copy of online's parameters.
inline void sync_target(const DenseNet& online, DenseNet& target) {
  if (!same_architecture(online, target))
    throw ContractViolation("sync_target: architecture mismatch");
  for (std::size_t l = 0; l < online.layers.size(); ++l) {
    target.layers[l].wt.data = online.layers[l].wt.data;
    target.layers[l].bias = online.layers[l].bias;
  }
}

// ---------------------------------------------------------------------------
// Serialization (versioned named-tensor container, bit-exact round trip)

inline void save_net(std::ostream& os, const DenseNet& net) {
  io::TensorWriter w;
  Vec arch;
  for (const auto& l : net.layers) {
    arch.push_back(static_cast<double>(l.in_dim()));
    arch.push_back(static_cast<double>(l.out_dim()));
    arch.push_back(static_cast<double>(static_cast<int>(l.act)));
  }
  w.add("arch", {net.layers.size(), 3}, arch);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const std::string base = "L" + std::to_string(l);
    w.add(base + ".wt",
          {static_cast<std::uint64_t>(net.layers[l].wt.rows),
           static_cast<std::uint64_t>(net.layers[l].wt.cols)},
          net.layers[l].wt.data);
    w.add(base + ".b", {net.layers[l].bias.size()}, net.layers[l].bias);
  }
  w.write(os);
}

inline DenseNet load_net(std::istream& is) {
  io::TensorReader r(is);
  const auto& arch = r.get("arch");
  if (arch.dims.size() != 2 || arch.dims[1] != 3)
    throw SerializationError("malformed arch tensor");
  DenseNet net;
  const auto n_layers = arch.dims[0];
  for (std::uint64_t l = 0; l < n_layers; ++l) {
    const int in = static_cast<int>(arch.values[l * 3 + 0]);
    const int out = static_cast<int>(arch.values[l * 3 + 1]);
    const auto act = static_cast<Activation>(static_cast<int>(arch.values[l * 3 + 2]));
    net.add_layer(in, out, act);
    const std::string base = "L" + std::to_string(l);
    net.layers[l].wt.data = r.get(base + ".wt").values;
    net.layers[l].bias = r.get(base + ".b").values;
  }
  return net;
}

inline void save_adam(std::ostream& os, const AdamState& s) {
  io::TensorWriter w;
  w.add("hyper", {5},
        {s.lr, s.beta1, s.beta2, s.eps, static_cast<double>(s.step)});
  for (std::size_t l = 0; l < s.m_wt.size(); ++l) {
    const std::string base = "L" + std::to_string(l);
    auto dims_wt = std::vector<std::uint64_t>{static_cast<std::uint64_t>(s.m_wt[l].rows),
                                              static_cast<std::uint64_t>(s.m_wt[l].cols)};
    w.add(base + ".m_wt", dims_wt, s.m_wt[l].data);
    w.add(base + ".v_wt", dims_wt, s.v_wt[l].data);
    w.add(base + ".m_b", {s.m_b[l].size()}, s.m_b[l]);
    w.add(base + ".v_b", {s.v_b[l].size()}, s.v_b[l]);
  }
  w.write(os);
}

inline AdamState load_adam(std::istream& is, const DenseNet& net) {
  io::TensorReader r(is);
  const auto& h = r.get("hyper");
  AdamState s = AdamState::for_net(net, h.values[0], h.values[1], h.values[2], h.values[3]);
  s.step = static_cast<std::int64_t>(h.values[4]);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const std::string base = "L" + std::to_string(l);
    s.m_wt[l].data = r.get(base + ".m_wt").values;
    s.v_wt[l].data = r.get(base + ".v_wt").values;
    s.m_b[l] = r.get(base + ".m_b").values;
    s.v_b[l] = r.get(base + ".v_b").values;
  }
  return s;
}

}  // namespace aps
