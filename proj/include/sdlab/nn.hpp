#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdlab/rng.hpp"

namespace sdlab {

// Row-major dense matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
};

struct DenseLayer {
  Matrix weights;            // [out x in]
  std::vector<double> bias;  // [out]

  int in_dim() const { return weights.cols; }
  int out_dim() const { return weights.rows; }
};

struct LayerNormParams {
  std::vector<double> gain;
  std::vector<double> shift;
  double epsilon = 1e-5;
};

// Fully connected stack. Each hidden block is dense -> LayerNorm -> ReLU
// (LayerNorm optional, skipped by the time-embedding net); the final dense
// layer has no normalization or activation.
struct Network {
  std::vector<DenseLayer> layers;
  std::vector<LayerNormParams> norms;  // size layers.size()-1 when normalized, else empty

  bool normalized() const { return !norms.empty(); }
  int input_dim() const { return layers.front().in_dim(); }
  int output_dim() const { return layers.back().out_dim(); }

  std::vector<int> dims() const {
    std::vector<int> d;
    d.push_back(layers.front().in_dim());
    for (const auto& l : layers) d.push_back(l.out_dim());
    return d;
  }
};

// Weights uniform in +-sqrt(1/fan_in), biases zero, gain 1, shift 0.
inline Network make_network(std::span<const int> dims, bool layer_norm, Rng& rng,
                            double ln_epsilon = 1e-5) {
  if (dims.size() < 2) throw std::invalid_argument("make_network: need at least two dims");
  Network net;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const int in = dims[k];
    const int out = dims[k + 1];
    if (in < 1 || out < 1) throw std::invalid_argument("make_network: dims must be positive");
    DenseLayer layer;
    layer.weights = Matrix(out, in);
    const double bound = std::sqrt(1.0 / in);
    for (double& w : layer.weights.data) w = (2.0 * rng.uniform() - 1.0) * bound;
    layer.bias.assign(out, 0.0);
    net.layers.push_back(std::move(layer));
  }
  if (layer_norm) {
    for (std::size_t k = 0; k + 2 < dims.size(); ++k) {
      LayerNormParams ln;
      ln.gain.assign(dims[k + 1], 1.0);
      ln.shift.assign(dims[k + 1], 0.0);
      ln.epsilon = ln_epsilon;
      net.norms.push_back(std::move(ln));
    }
  }
  return net;
}

// Everything backward() needs, captured by forward(). The dims signature
// guards against feeding a cache from a different network shape.
struct ForwardCache {
  std::vector<int> dims;
  bool layer_norm = false;
  std::vector<std::vector<double>> inputs;  // activation entering dense layer k
  std::vector<std::vector<double>> normed;  // xhat per hidden block (layer_norm only)
  std::vector<double> inv_std;              // per hidden block (layer_norm only)
  std::vector<std::vector<double>> preact;  // value entering ReLU per hidden block
};

// Normalize in place; returns (xhat, inv_std) through out-params.
inline void layer_norm_forward(const LayerNormParams& ln, std::vector<double>& v,
                               std::vector<double>* xhat_out, double* inv_std_out) {
  const std::size_t n = v.size();
  if (ln.gain.size() != n)
    throw std::invalid_argument("layer_norm_forward: parameter length mismatch");
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(n);
  const double inv = 1.0 / std::sqrt(var + ln.epsilon);
  if (xhat_out) xhat_out->resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double xh = (v[i] - mean) * inv;
    if (xhat_out) (*xhat_out)[i] = xh;
    v[i] = ln.gain[i] * xh + ln.shift[i];
  }
  if (inv_std_out) *inv_std_out = inv;
}

inline std::vector<double> forward(const Network& net, std::span<const double> input,
                                   ForwardCache* cache = nullptr) {
  if (net.layers.empty()) throw std::invalid_argument("forward: empty network");
  if (static_cast<int>(input.size()) != net.input_dim())
    throw std::invalid_argument("forward: input length " + std::to_string(input.size()) +
                                " does not match first-layer input dimension " +
                                std::to_string(net.input_dim()));
  if (cache) {
    *cache = ForwardCache{};
    cache->dims = net.dims();
    cache->layer_norm = net.normalized();
  }
  std::vector<double> h(input.begin(), input.end());
  const std::size_t last = net.layers.size() - 1;
  for (std::size_t k = 0; k <= last; ++k) {
    const DenseLayer& layer = net.layers[k];
    if (cache) cache->inputs.push_back(h);
    std::vector<double> z(layer.out_dim());
    for (int r = 0; r < layer.out_dim(); ++r) {
      const double* w = layer.weights.row(r);
      double acc = layer.bias[r];
      for (int c = 0; c < layer.in_dim(); ++c) acc += w[c] * h[c];
      z[r] = acc;
    }
    if (k == last) {
      h = std::move(z);
      break;
    }
    if (net.normalized()) {
      double inv = 0.0;
      std::vector<double> xhat;
      layer_norm_forward(net.norms[k], z, cache ? &xhat : nullptr, &inv);
      if (cache) {
        cache->normed.push_back(std::move(xhat));
        cache->inv_std.push_back(inv);
      }
    }
    if (cache) cache->preact.push_back(z);
    for (double& x : z)
      if (x < 0.0) x = 0.0;
    h = std::move(z);
  }
  return h;
}

struct GradientBundle {
  std::vector<Matrix> weight_grads;
  std::vector<std::vector<double>> bias_grads;
  std::vector<std::vector<double>> gain_grads;
  std::vector<std::vector<double>> shift_grads;
};

inline GradientBundle zero_gradients(const Network& net) {
  GradientBundle gb;
  for (const auto& l : net.layers) {
    gb.weight_grads.emplace_back(l.out_dim(), l.in_dim());
    gb.bias_grads.emplace_back(l.out_dim(), 0.0);
  }
  for (const auto& n : net.norms) {
    gb.gain_grads.emplace_back(n.gain.size(), 0.0);
    gb.shift_grads.emplace_back(n.shift.size(), 0.0);
  }
  return gb;
}

inline void accumulate(GradientBundle& into, const GradientBundle& from) {
  for (std::size_t k = 0; k < into.weight_grads.size(); ++k) {
    auto& a = into.weight_grads[k].data;
    const auto& b = from.weight_grads[k].data;
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    for (std::size_t i = 0; i < into.bias_grads[k].size(); ++i)
      into.bias_grads[k][i] += from.bias_grads[k][i];
  }
  for (std::size_t k = 0; k < into.gain_grads.size(); ++k) {
    for (std::size_t i = 0; i < into.gain_grads[k].size(); ++i) {
      into.gain_grads[k][i] += from.gain_grads[k][i];
      into.shift_grads[k][i] += from.shift_grads[k][i];
    }
  }
}

inline void scale(GradientBundle& gb, double s) {
  for (auto& m : gb.weight_grads)
    for (double& x : m.data) x *= s;
  for (auto& v : gb.bias_grads)
    for (double& x : v) x *= s;
  for (auto& v : gb.gain_grads)
    for (double& x : v) x *= s;
  for (auto& v : gb.shift_grads)
    for (double& x : v) x *= s;
}

// Exact reverse-mode gradients of a scalar loss whose gradient at the network
// output is output_grad. When input_grad is non-null it receives d loss / d input.
inline GradientBundle backward(const Network& net, const ForwardCache& cache,
                               std::span<const double> output_grad,
                               std::vector<double>* input_grad = nullptr) {
  if (cache.dims != net.dims() || cache.layer_norm != net.normalized() ||
      cache.inputs.size() != net.layers.size())
    throw std::invalid_argument("backward: cache does not match network");
  if (static_cast<int>(output_grad.size()) != net.output_dim())
    throw std::invalid_argument("backward: output_grad length mismatch");

  GradientBundle gb = zero_gradients(net);
  std::vector<double> g(output_grad.begin(), output_grad.end());
  const int last = static_cast<int>(net.layers.size()) - 1;
  for (int k = last; k >= 0; --k) {
    if (k < last) {
      // ReLU derivative: pass where the pre-activation was positive.
      const auto& pre = cache.preact[k];
      for (std::size_t i = 0; i < g.size(); ++i)
        if (pre[i] <= 0.0) g[i] = 0.0;
      if (net.normalized()) {
        const auto& ln = net.norms[k];
        const auto& xhat = cache.normed[k];
        const double inv = cache.inv_std[k];
        const std::size_t n = g.size();
        std::vector<double> dxhat(n);
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          gb.gain_grads[k][i] += g[i] * xhat[i];
          gb.shift_grads[k][i] += g[i];
          dxhat[i] = g[i] * ln.gain[i];
          m1 += dxhat[i];
          m2 += dxhat[i] * xhat[i];
        }
        m1 /= static_cast<double>(n);
        m2 /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) g[i] = inv * (dxhat[i] - m1 - xhat[i] * m2);
      }
    }
    const DenseLayer& layer = net.layers[k];
    const auto& x = cache.inputs[k];
    for (int r = 0; r < layer.out_dim(); ++r) {
      gb.bias_grads[k][r] += g[r];
      double* wg = gb.weight_grads[k].row(r);
      for (int c = 0; c < layer.in_dim(); ++c) wg[c] += g[r] * x[c];
    }
    if (k > 0 || input_grad) {
      std::vector<double> gx(layer.in_dim(), 0.0);
      for (int r = 0; r < layer.out_dim(); ++r) {
        const double* w = layer.weights.row(r);
        const double gr = g[r];
        for (int c = 0; c < layer.in_dim(); ++c) gx[c] += w[c] * gr;
      }
      if (k == 0) {
        *input_grad = std::move(gx);
      } else {
        g = std::move(gx);
      }
    }
  }
  return gb;
}

// --- flat parameter order: per layer (weights row-major, bias), then per
// --- norm block (gain, shift). Checkpoints use the same order.

inline std::size_t param_count(const Network& net) {
  std::size_t n = 0;
  for (const auto& l : net.layers) n += l.weights.data.size() + l.bias.size();
  for (const auto& ln : net.norms) n += ln.gain.size() + ln.shift.size();
  return n;
}

inline void flatten_params(const Network& net, std::vector<double>& out) {
  for (const auto& l : net.layers) {
    out.insert(out.end(), l.weights.data.begin(), l.weights.data.end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  for (const auto& ln : net.norms) {
    out.insert(out.end(), ln.gain.begin(), ln.gain.end());
    out.insert(out.end(), ln.shift.begin(), ln.shift.end());
  }
}

inline std::size_t set_params(Network& net, std::span<const double> flat, std::size_t pos = 0) {
  for (auto& l : net.layers) {
    for (double& w : l.weights.data) w = flat[pos++];
    for (double& b : l.bias) b = flat[pos++];
  }
  for (auto& ln : net.norms) {
    for (double& g : ln.gain) g = flat[pos++];
    for (double& s : ln.shift) s = flat[pos++];
  }
  return pos;
}

inline void flatten_grads(const GradientBundle& gb, std::vector<double>& out) {
  for (std::size_t k = 0; k < gb.weight_grads.size(); ++k) {
    out.insert(out.end(), gb.weight_grads[k].data.begin(), gb.weight_grads[k].data.end());
    out.insert(out.end(), gb.bias_grads[k].begin(), gb.bias_grads[k].end());
  }
  for (std::size_t k = 0; k < gb.gain_grads.size(); ++k) {
    out.insert(out.end(), gb.gain_grads[k].begin(), gb.gain_grads[k].end());
    out.insert(out.end(), gb.shift_grads[k].begin(), gb.shift_grads[k].end());
  }
}

// --- Adam ---

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  long long step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline AdamState make_adam_state(std::size_t n) {
  AdamState st;
  st.first_moment.assign(n, 0.0);
  st.second_moment.assign(n, 0.0);
  return st;
}

// Bias-corrected Adam update, elementwise over a flat parameter vector.
inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& st,
                      double lr) {
  if (params.size() != grads.size() || st.first_moment.size() != params.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  if (lr <= 0.0) throw std::invalid_argument("adam_step: lr must be positive");
  for (double g : grads)
    if (!std::isfinite(g)) throw std::runtime_error("adam_step: non-finite gradient entry");
  st.step_count += 1;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step_count));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = st.first_moment[i];
    double& v = st.second_moment[i];
    m = st.beta1 * m + (1.0 - st.beta1) * g;
    v = st.beta2 * v + (1.0 - st.beta2) * g * g;
    params[i] -= lr * (m / c1) / (std::sqrt(v / c2) + st.eps);
  }
}

// base_lr * (1 + cos(pi * step / total_steps)) / 2
inline double cosine_lr(long long step, long long total_steps, double base_lr) {
  if (total_steps < 1) throw std::invalid_argument("cosine_lr: total_steps must be >= 1");
  if (step < 0 || step > total_steps) throw std::invalid_argument("cosine_lr: step out of range");
  if (base_lr <= 0.0) throw std::invalid_argument("cosine_lr: base_lr must be positive");
  const double phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps);
  return base_lr * (1.0 + std::cos(phase)) / 2.0;
}

}  // namespace sdlab
