#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "devinr/errors.hpp"
#include "devinr/rng.hpp"

namespace devinr {

// Topology of the coordinate network f(x, t, l):
//
//   input  (x, t, l), width  n1 = spatial_dims + 1 + latent_dim
//   layer 1          n1 -> h          plain WIRE block
//   layers 2..N-1    h  -> h          residual: 0.5 * (x + wire(x))
//   layer N          h  -> 1          plain WIRE block
//
// where a WIRE block is sin(omega0 * u(x)) * exp(-(s0 * v(x))^2) with two
// affine maps u, v applied element-wise.
struct NetworkConfig {
  int spatial_dims = 2;    // d, 2 or 3
  int latent_dim = 128;    // lambda
  int hidden_dim = 128;    // h
  int layer_count = 8;     // N
  float omega0 = 10.0f;
  float s0 = 10.0f;

  int input_dim() const { return spatial_dims + 1 + latent_dim; }

  int layer_in(int i) const { return i == 0 ? input_dim() : hidden_dim; }
  int layer_out(int i) const { return i == layer_count - 1 ? 1 : hidden_dim; }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (int i = 0; i < layer_count; ++i)
      n += 2u * static_cast<std::size_t>(layer_out(i)) *
           (static_cast<std::size_t>(layer_in(i)) + 1u);
    return n;
  }

  void validate() const {
    if (spatial_dims != 2 && spatial_dims != 3)
      throw ConfigError("network: spatial_dims must be 2 or 3");
    if (layer_count < 2) throw ConfigError("network: need at least 2 layers");
    if (latent_dim < 1 || hidden_dim < 1)
      throw ConfigError("network: latent_dim and hidden_dim must be >= 1");
    if (!(omega0 > 0.0f) || !(s0 > 0.0f))
      throw ConfigError("network: omega0 and s0 must be positive");
  }

  bool operator==(const NetworkConfig&) const = default;
};

// One pair of affine maps (u, v). Weights are row-major [out][in].
template <typename T>
struct WireLayer {
  int in = 0;
  int out = 0;
  std::vector<T> u_w, u_b, v_w, v_b;

  void resize(int n_in, int n_out) {
    in = n_in;
    out = n_out;
    u_w.assign(static_cast<std::size_t>(n_in) * n_out, T{});
    v_w.assign(static_cast<std::size_t>(n_in) * n_out, T{});
    u_b.assign(n_out, T{});
    v_b.assign(n_out, T{});
  }
};

template <typename T>
struct InrNetworkT {
  NetworkConfig config;
  std::vector<WireLayer<T>> layers;
};

using InrNetwork = InrNetworkT<float>;

// Gradients mirror the layer shapes; accumulation is always in double.
struct LayerGrads {
  std::vector<double> u_w, u_b, v_w, v_b;
};

struct GradientSet {
  std::vector<LayerGrads> layers;
  std::vector<double> latent;

  template <typename T>
  void resize_like(const InrNetworkT<T>& net) {
    layers.resize(net.layers.size());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
      layers[i].u_w.assign(net.layers[i].u_w.size(), 0.0);
      layers[i].u_b.assign(net.layers[i].u_b.size(), 0.0);
      layers[i].v_w.assign(net.layers[i].v_w.size(), 0.0);
      layers[i].v_b.assign(net.layers[i].v_b.size(), 0.0);
    }
    latent.assign(net.config.latent_dim, 0.0);
  }

  void zero() {
    for (auto& l : layers) {
      std::fill(l.u_w.begin(), l.u_w.end(), 0.0);
      std::fill(l.u_b.begin(), l.u_b.end(), 0.0);
      std::fill(l.v_w.begin(), l.v_w.end(), 0.0);
      std::fill(l.v_b.begin(), l.v_b.end(), 0.0);
    }
    std::fill(latent.begin(), latent.end(), 0.0);
  }

  void scale(double s) {
    for (auto& l : layers) {
      for (auto& g : l.u_w) g *= s;
      for (auto& g : l.u_b) g *= s;
      for (auto& g : l.v_w) g *= s;
      for (auto& g : l.v_b) g *= s;
    }
    for (auto& g : latent) g *= s;
  }

  void add(const GradientSet& o) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      for (std::size_t j = 0; j < layers[i].u_w.size(); ++j)
        layers[i].u_w[j] += o.layers[i].u_w[j];
      for (std::size_t j = 0; j < layers[i].u_b.size(); ++j)
        layers[i].u_b[j] += o.layers[i].u_b[j];
      for (std::size_t j = 0; j < layers[i].v_w.size(); ++j)
        layers[i].v_w[j] += o.layers[i].v_w[j];
      for (std::size_t j = 0; j < layers[i].v_b.size(); ++j)
        layers[i].v_b[j] += o.layers[i].v_b[j];
    }
    for (std::size_t j = 0; j < latent.size(); ++j) latent[j] += o.latent[j];
  }

  bool finite() const {
    auto ok = [](const std::vector<double>& v) {
      for (double x : v)
        if (!std::isfinite(x)) return false;
      return true;
    };
    for (const auto& l : layers)
      if (!ok(l.u_w) || !ok(l.u_b) || !ok(l.v_w) || !ok(l.v_b)) return false;
    return ok(latent);
  }
};

namespace detail {

template <typename T>
inline void sincos_at(T x, T* s, T* c) {
  if constexpr (std::is_same_v<T, float>) {
    ::sincosf(x, s, c);
  } else {
    ::sincos(x, s, c);
  }
}

template <typename T>
inline T exp_at(T x) {
  if constexpr (std::is_same_v<T, float>) return ::expf(x);
  return ::exp(x);
}

// Y[j*B+p] += sum_k W[j*n+k] * X[k*B+p]. The k-accumulation order per output
// element is fixed, so per-pixel results do not depend on the batch size.
template <typename T>
inline void mat_mul_accum(const T* W, int m, int n, const T* X, int B, T* Y) {
  for (int j = 0; j < m; ++j) {
    const T* wrow = W + static_cast<std::size_t>(j) * n;
    T* yrow = Y + static_cast<std::size_t>(j) * B;
    for (int k = 0; k < n; ++k) {
      const T w = wrow[k];
      const T* xrow = X + static_cast<std::size_t>(k) * B;
      for (int p = 0; p < B; ++p) yrow[p] += w * xrow[p];
    }
  }
}

// dX[k*B+p] += sum_j W[j*n+k] * G[j*B+p]
template <typename T>
inline void mat_tmul_accum(const T* W, int m, int n, const T* G, int B, T* dX) {
  for (int j = 0; j < m; ++j) {
    const T* wrow = W + static_cast<std::size_t>(j) * n;
    const T* grow = G + static_cast<std::size_t>(j) * B;
    for (int k = 0; k < n; ++k) {
      const T w = wrow[k];
      T* xrow = dX + static_cast<std::size_t>(k) * B;
      for (int p = 0; p < B; ++p) xrow[p] += w * grow[p];
    }
  }
}

// sum_p a[p]*x[p] in double with four strided lanes combined in fixed order.
template <typename T>
inline double dot_f64(const T* a, const T* x, int B) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  int p = 0;
  for (; p + 4 <= B; p += 4) {
    s0 += static_cast<double>(a[p]) * static_cast<double>(x[p]);
    s1 += static_cast<double>(a[p + 1]) * static_cast<double>(x[p + 1]);
    s2 += static_cast<double>(a[p + 2]) * static_cast<double>(x[p + 2]);
    s3 += static_cast<double>(a[p + 3]) * static_cast<double>(x[p + 3]);
  }
  for (; p < B; ++p)
    s0 += static_cast<double>(a[p]) * static_cast<double>(x[p]);
  return (s0 + s1) + (s2 + s3);
}

template <typename T>
inline double sum_f64(const T* a, int B) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  int p = 0;
  for (; p + 4 <= B; p += 4) {
    s0 += static_cast<double>(a[p]);
    s1 += static_cast<double>(a[p + 1]);
    s2 += static_cast<double>(a[p + 2]);
    s3 += static_cast<double>(a[p + 3]);
  }
  for (; p < B; ++p) s0 += static_cast<double>(a[p]);
  return (s0 + s1) + (s2 + s3);
}

}  // namespace detail

// Element-wise sin(omega0*u(x)) * exp(-(s0*v(x))^2) for a single vector.
template <typename T>
std::vector<T> wire_block(const WireLayer<T>& layer, std::span<const T> x,
                          T omega0, T s0) {
  if (static_cast<int>(x.size()) != layer.in)
    throw DataError("wire_block: input length " + std::to_string(x.size()) +
                    " does not match layer width " + std::to_string(layer.in));
  std::vector<T> y(layer.out);
  for (int j = 0; j < layer.out; ++j) {
    T a = layer.u_b[j];
    T c = layer.v_b[j];
    const T* uw = layer.u_w.data() + static_cast<std::size_t>(j) * layer.in;
    const T* vw = layer.v_w.data() + static_cast<std::size_t>(j) * layer.in;
    for (int k = 0; k < layer.in; ++k) {
      a += uw[k] * x[k];
      c += vw[k] * x[k];
    }
    T s, co;
    detail::sincos_at(omega0 * a, &s, &co);
    const T g = s0 * c;
    y[j] = s * detail::exp_at(-g * g);
  }
  return y;
}

// Residual composition 0.5 * (x + wire(x)); requires a square layer.
template <typename T>
std::vector<T> residual_block(const WireLayer<T>& layer, std::span<const T> x,
                              T omega0, T s0) {
  if (layer.in != layer.out)
    throw DataError("residual_block: layer must be square, got " +
                    std::to_string(layer.in) + "x" + std::to_string(layer.out));
  std::vector<T> y = wire_block(layer, x, omega0, s0);
  for (int j = 0; j < layer.out; ++j) y[j] = T(0.5) * (x[j] + y[j]);
  return y;
}

// Scratch buffers for batched evaluation. Reused across calls; sized for the
// largest batch seen so far. Memory is proportional to the micro-batch size,
// never to the full image.
template <typename T>
struct BatchWorkspace {
  struct LayerBuf {
    std::vector<T> x;      // input to this layer [n_i x B] (layers >= 2)
    std::vector<T> a;      // u pre-activation   [m_i x B]
    std::vector<T> c;      // v pre-activation   [m_i x B]
    std::vector<T> sin_a;  // sin(omega0 * a)
    std::vector<T> cos_a;  // cos(omega0 * a)
    std::vector<T> gauss;  // exp(-(s0 * c)^2)
  };
  std::vector<LayerBuf> layers;
  std::vector<T> y;      // final outputs                     [B]
  std::vector<T> g_out;  // gradient plane entering a layer  [m x B]
  std::vector<T> g_a;    // dLoss/dA for current layer       [m x B]
  std::vector<T> g_c;    // dLoss/dC                          [m x B]
  std::vector<T> g_x;    // dLoss/d(input)                    [n x B]

  void ensure(const NetworkConfig& cfg, int B) {
    const auto grow = [](std::vector<T>& v, std::size_t need) {
      if (v.size() < need) v.resize(need);
    };
    layers.resize(cfg.layer_count);
    for (int i = 0; i < cfg.layer_count; ++i) {
      const auto m = static_cast<std::size_t>(cfg.layer_out(i)) * B;
      auto& L = layers[i];
      if (i > 0) grow(L.x, static_cast<std::size_t>(cfg.layer_in(i)) * B);
      grow(L.a, m);
      grow(L.c, m);
      grow(L.sin_a, m);
      grow(L.cos_a, m);
      grow(L.gauss, m);
    }
    const auto hb = static_cast<std::size_t>(cfg.hidden_dim) * B;
    grow(y, static_cast<std::size_t>(B));
    grow(g_out, hb);
    grow(g_a, hb);
    grow(g_c, hb);
    grow(g_x, hb);
  }
};

namespace detail {

// Effective bias for layer 1: the time and latent input rows are constant
// across a batch, so their contribution is folded into the bias once.
template <typename T>
inline void fold_conditioning(const WireLayer<T>& layer, int d, T t,
                              std::span<const T> latent, std::vector<T>& bu,
                              std::vector<T>& bv) {
  bu.resize(layer.out);
  bv.resize(layer.out);
  for (int j = 0; j < layer.out; ++j) {
    const T* uw = layer.u_w.data() + static_cast<std::size_t>(j) * layer.in;
    const T* vw = layer.v_w.data() + static_cast<std::size_t>(j) * layer.in;
    T au = layer.u_b[j] + uw[d] * t;
    T av = layer.v_b[j] + vw[d] * t;
    for (int q = 0; q < static_cast<int>(latent.size()); ++q) {
      au += uw[d + 1 + q] * latent[q];
      av += vw[d + 1 + q] * latent[q];
    }
    bu[j] = au;
    bv[j] = av;
  }
}

template <typename T>
inline void wire_elementwise(typename BatchWorkspace<T>::LayerBuf& L, int m,
                             int B, T omega0, T s0) {
  for (int j = 0; j < m; ++j) {
    const std::size_t off = static_cast<std::size_t>(j) * B;
    for (int p = 0; p < B; ++p) {
      T s, c;
      sincos_at(omega0 * L.a[off + p], &s, &c);
      L.sin_a[off + p] = s;
      L.cos_a[off + p] = c;
      const T g = s0 * L.c[off + p];
      L.gauss[off + p] = exp_at(-g * g);
    }
  }
}

}  // namespace detail

// Batched forward pass. coords is axis-major [d x B]; out receives the raw
// network output for each of the B points (no clamping).
template <typename T>
void forward_batch(const InrNetworkT<T>& net, const T* coords, int B, T t,
                   std::span<const T> latent, T* out, BatchWorkspace<T>& ws) {
  const auto& cfg = net.config;
  if (static_cast<int>(latent.size()) != cfg.latent_dim)
    throw DataError("forward: latent length does not match latent_dim");
  if (!(t >= T(0) && t <= T(1)))
    throw DataError("forward: normalized time must lie in [0, 1]");
  for (const T v : latent)
    if (!std::isfinite(static_cast<double>(v)))
      throw DataError("forward: non-finite latent input");
  for (std::size_t i = 0; i < static_cast<std::size_t>(cfg.spatial_dims) * B; ++i)
    if (!std::isfinite(static_cast<double>(coords[i])))
      throw DataError("forward: non-finite coordinate input");
  ws.ensure(cfg, B);

  const T omega0 = static_cast<T>(cfg.omega0);
  const T s0 = static_cast<T>(cfg.s0);
  std::vector<T> bu, bv;
  for (int i = 0; i < cfg.layer_count; ++i) {
    const auto& layer = net.layers[i];
    auto& L = ws.layers[i];
    const int m = layer.out;
    const T* X = i == 0 ? coords : L.x.data();
    if (i == 0) {
      detail::fold_conditioning(layer, cfg.spatial_dims, t, latent, bu, bv);
      for (int j = 0; j < m; ++j) {
        std::fill_n(L.a.data() + static_cast<std::size_t>(j) * B, B, bu[j]);
        std::fill_n(L.c.data() + static_cast<std::size_t>(j) * B, B, bv[j]);
      }
      detail::mat_mul_accum(layer.u_w.data(), m, cfg.spatial_dims, X, B,
                            L.a.data());
      detail::mat_mul_accum(layer.v_w.data(), m, cfg.spatial_dims, X, B,
                            L.c.data());
    } else {
      for (int j = 0; j < m; ++j) {
        std::fill_n(L.a.data() + static_cast<std::size_t>(j) * B, B,
                    layer.u_b[j]);
        std::fill_n(L.c.data() + static_cast<std::size_t>(j) * B, B,
                    layer.v_b[j]);
      }
      detail::mat_mul_accum(layer.u_w.data(), m, layer.in, X, B, L.a.data());
      detail::mat_mul_accum(layer.v_w.data(), m, layer.in, X, B, L.c.data());
    }
    detail::wire_elementwise<T>(L, m, B, omega0, s0);

    if (i == cfg.layer_count - 1) {
      for (int p = 0; p < B; ++p) out[p] = L.sin_a[p] * L.gauss[p];
    } else {
      auto& next_x = ws.layers[i + 1].x;
      if (i == 0) {
        // first layer output is not residual
        for (int j = 0; j < m; ++j) {
          const std::size_t off = static_cast<std::size_t>(j) * B;
          for (int p = 0; p < B; ++p)
            next_x[off + p] = L.sin_a[off + p] * L.gauss[off + p];
        }
      } else {
        const auto& cur_x = L.x;
        for (int j = 0; j < m; ++j) {
          const std::size_t off = static_cast<std::size_t>(j) * B;
          for (int p = 0; p < B; ++p)
            next_x[off + p] =
                T(0.5) * (cur_x[off + p] + L.sin_a[off + p] * L.gauss[off + p]);
        }
      }
    }
  }
}

// Convenience single-point evaluation; identical to a batch of one.
template <typename T>
T forward_point(const InrNetworkT<T>& net, std::span<const T> x, T t,
                std::span<const T> latent, BatchWorkspace<T>& ws) {
  if (static_cast<int>(x.size()) != net.config.spatial_dims)
    throw DataError("forward: coordinate length does not match spatial_dims");
  std::vector<T> coords(x.begin(), x.end());
  T out;
  forward_batch(net, coords.data(), 1, t, latent, &out, ws);
  return out;
}

// Batched forward + reverse pass in sum form: adds sum_p (f(p) - target_p)^2
// to loss_sum and d(sum)/d(theta), d(sum)/d(latent) into grads. Callers divide
// by the total pixel count to obtain the mean loss. Set with_param_grads=false
// to compute only the latent gradient (used during inversion).
template <typename T>
void forward_backward_batch(const InrNetworkT<T>& net, const T* coords, int B,
                            T t, std::span<const T> latent, const T* targets,
                            bool with_param_grads, GradientSet& grads,
                            double& loss_sum, BatchWorkspace<T>& ws) {
  if (B <= 0) throw DataError("forward_backward: empty batch");
  const auto& cfg = net.config;
  ws.ensure(cfg, B);
  forward_batch(net, coords, B, t, latent, ws.y.data(), ws);

  // d(sum)/dy_p = 2 * (y_p - target_p)
  T* g = ws.g_out.data();
  for (int p = 0; p < B; ++p) {
    const double r =
        static_cast<double>(ws.y[p]) - static_cast<double>(targets[p]);
    loss_sum += r * r;
    g[p] = T(2) * (ws.y[p] - targets[p]);
  }

  const T omega0 = static_cast<T>(cfg.omega0);
  const T s0 = static_cast<T>(cfg.s0);
  const T two_s0sq = T(2) * s0 * s0;

  for (int i = cfg.layer_count - 1; i >= 0; --i) {
    const auto& layer = net.layers[i];
    auto& L = ws.layers[i];
    const int m = layer.out;
    const int n = layer.in;
    const bool residual = i > 0 && i < cfg.layer_count - 1;

    // Gradient w.r.t. the wire output. For residual layers the skip term
    // contributes 0.5*g directly to the input gradient below.
    const T scale = residual ? T(0.5) : T(1);
    T* ga = ws.g_a.data();
    T* gc = ws.g_c.data();
    for (int j = 0; j < m; ++j) {
      const std::size_t off = static_cast<std::size_t>(j) * B;
      for (int p = 0; p < B; ++p) {
        const T gphi = scale * g[off + p];
        const T e = L.gauss[off + p];
        ga[off + p] = gphi * omega0 * L.cos_a[off + p] * e;
        gc[off + p] =
            gphi * L.sin_a[off + p] * e * (-two_s0sq * L.c[off + p]);
      }
    }

    if (i == 0) {
      // Latent gradient via the row sums of ga/gc (the latent input is
      // constant across the batch).
      std::vector<double> rsa(m), rsc(m);
      for (int j = 0; j < m; ++j) {
        rsa[j] = detail::sum_f64(ga + static_cast<std::size_t>(j) * B, B);
        rsc[j] = detail::sum_f64(gc + static_cast<std::size_t>(j) * B, B);
      }
      const int d = cfg.spatial_dims;
      for (int q = 0; q < cfg.latent_dim; ++q) {
        double acc = 0.0;
        for (int j = 0; j < m; ++j) {
          const std::size_t row = static_cast<std::size_t>(j) * n;
          acc += static_cast<double>(layer.u_w[row + d + 1 + q]) * rsa[j] +
                 static_cast<double>(layer.v_w[row + d + 1 + q]) * rsc[j];
        }
        grads.latent[q] += acc;
      }
      if (with_param_grads) {
        auto& lg = grads.layers[0];
        for (int j = 0; j < m; ++j) {
          const std::size_t row = static_cast<std::size_t>(j) * n;
          const T* garow = ga + static_cast<std::size_t>(j) * B;
          const T* gcrow = gc + static_cast<std::size_t>(j) * B;
          for (int k = 0; k < d; ++k) {
            lg.u_w[row + k] +=
                detail::dot_f64(garow, coords + static_cast<std::size_t>(k) * B, B);
            lg.v_w[row + k] +=
                detail::dot_f64(gcrow, coords + static_cast<std::size_t>(k) * B, B);
          }
          // time column and latent columns are rank-one in the row sums
          lg.u_w[row + d] += rsa[j] * static_cast<double>(t);
          lg.v_w[row + d] += rsc[j] * static_cast<double>(t);
          for (int q = 0; q < cfg.latent_dim; ++q) {
            lg.u_w[row + d + 1 + q] += rsa[j] * static_cast<double>(latent[q]);
            lg.v_w[row + d + 1 + q] += rsc[j] * static_cast<double>(latent[q]);
          }
          lg.u_b[j] += rsa[j];
          lg.v_b[j] += rsc[j];
        }
      }
      break;
    }

    const T* X = L.x.data();
    if (with_param_grads) {
      auto& lg = grads.layers[i];
      for (int j = 0; j < m; ++j) {
        const std::size_t row = static_cast<std::size_t>(j) * n;
        const T* garow = ga + static_cast<std::size_t>(j) * B;
        const T* gcrow = gc + static_cast<std::size_t>(j) * B;
        for (int k = 0; k < n; ++k) {
          const T* xrow = X + static_cast<std::size_t>(k) * B;
          lg.u_w[row + k] += detail::dot_f64(garow, xrow, B);
          lg.v_w[row + k] += detail::dot_f64(gcrow, xrow, B);
        }
        lg.u_b[j] += detail::sum_f64(garow, B);
        lg.v_b[j] += detail::sum_f64(gcrow, B);
      }
    }

    // Input gradient: skip term (residual) plus the two affine transposes.
    T* gx = ws.g_x.data();
    const std::size_t nxB = static_cast<std::size_t>(n) * B;
    if (residual) {
      for (std::size_t q = 0; q < nxB; ++q) gx[q] = T(0.5) * g[q];
    } else {
      std::fill_n(gx, nxB, T(0));
    }
    detail::mat_tmul_accum(layer.u_w.data(), m, n, ga, B, gx);
    detail::mat_tmul_accum(layer.v_w.data(), m, n, gc, B, gx);
    std::copy_n(gx, nxB, g);
  }
}

// Deterministic initialization: uniform weights in [-1/sqrt(n_i), 1/sqrt(n_i)],
// zero biases. Draw order: layers first to last, u weights row-major, then v.
template <typename T = float>
InrNetworkT<T> init_network(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  InrNetworkT<T> net;
  net.config = cfg;
  net.layers.resize(cfg.layer_count);
  Pcg64 rng = stream_rng(seed, RngStream::kInit);
  for (int i = 0; i < cfg.layer_count; ++i) {
    auto& L = net.layers[i];
    L.resize(cfg.layer_in(i), cfg.layer_out(i));
    const double bound = 1.0 / std::sqrt(static_cast<double>(L.in));
    for (auto& w : L.u_w) w = static_cast<T>(rng.uniform(-bound, bound));
    for (auto& w : L.v_w) w = static_cast<T>(rng.uniform(-bound, bound));
  }
  return net;
}

}  // namespace devinr
