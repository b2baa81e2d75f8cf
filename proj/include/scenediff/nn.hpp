#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "scenediff/error.hpp"
#include "scenediff/voxel.hpp"

namespace scenediff::nn {

/// Channel-major activation volume: data[c][z][y][x].
template <class T>
struct Tensor {
  int channels = 0;
  Dims dims;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int c, Dims d, T fill = T(0))
      : channels(c), dims(d), data(static_cast<std::size_t>(c) * d.volume(), fill) {}

  std::size_t plane() const { return dims.volume(); }
  T* channel(int c) { return data.data() + static_cast<std::size_t>(c) * plane(); }
  const T* channel(int c) const { return data.data() + static_cast<std::size_t>(c) * plane(); }
  bool same_shape(const Tensor& o) const { return channels == o.channels && dims == o.dims; }
};

/// Kernel, stride and zero padding per axis (x, y, z).
struct ConvGeom {
  std::array<int, 3> kernel{3, 3, 3};
  std::array<int, 3> stride{1, 1, 1};
  std::array<int, 3> pad{1, 1, 1};

  static ConvGeom same(int k) { return {{k, k, k}, {1, 1, 1}, {k / 2, k / 2, k / 2}}; }
  static ConvGeom patch(std::array<int, 3> s) { return {s, s, {0, 0, 0}}; }

  int taps() const { return kernel[0] * kernel[1] * kernel[2]; }

  Dims out_dims(Dims in) const {
    auto o = [&](int n, int a) { return (n + 2 * pad[a] - kernel[a]) / stride[a] + 1; };
    return {o(in.x, 0), o(in.y, 1), o(in.z, 2)};
  }
};

namespace detail {

/// Range of output coordinates o with 0 <= o*s + k - p < n.
inline void valid_range(int out_n, int in_n, int s, int k, int p, int& lo, int& hi) {
  const int off = k - p;
  lo = off >= 0 ? 0 : (-off + s - 1) / s;
  const int last = in_n - 1 - off;
  hi = last < 0 ? -1 : std::min(out_n - 1, last / s);
}

/// Visits every (input row, output row) pair touched by one kernel tap and
/// calls f(in_offset, out_offset, x_lo, x_count) with x offsets already
/// applied for the first element; x stride is geom.stride[0] on the input.
template <class F>
void for_each_tap_row(const ConvGeom& g, Dims in, Dims out, int kx, int ky, int kz, F&& f) {
  int xlo, xhi, ylo, yhi, zlo, zhi;
  valid_range(out.x, in.x, g.stride[0], kx, g.pad[0], xlo, xhi);
  valid_range(out.y, in.y, g.stride[1], ky, g.pad[1], ylo, yhi);
  valid_range(out.z, in.z, g.stride[2], kz, g.pad[2], zlo, zhi);
  if (xlo > xhi) return;
  const int count = xhi - xlo + 1;
  for (int oz = zlo; oz <= zhi; ++oz) {
    const int iz = oz * g.stride[2] + kz - g.pad[2];
    for (int oy = ylo; oy <= yhi; ++oy) {
      const int iy = oy * g.stride[1] + ky - g.pad[1];
      const int ix = xlo * g.stride[0] + kx - g.pad[0];
      f(in.index(ix, iy, iz), out.index(xlo, oy, oz), count);
    }
  }
}

/// Dot product with independent accumulator lanes so the compiler can
/// vectorize without reassociation flags.
template <class T>
inline T dot(const T* a, const T* b, int n) {
  constexpr int kLanes = 8;
  T lanes[kLanes] = {};
  int i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (int j = 0; j < kLanes; ++j) lanes[j] += a[i + j] * b[i + j];
  T acc = 0;
  for (; i < n; ++i) acc += a[i] * b[i];
  for (int j = 0; j < kLanes; ++j) acc += lanes[j];
  return acc;
}

}  // namespace detail

/// out[co] = bias[co] + sum_ci W[co][ci] * in[ci]; W laid out [co][ci][kz][ky][kx].
template <class T>
Tensor<T> conv3d(const Tensor<T>& in, std::span<const T> weight, std::span<const T> bias, int out_channels,
                 const ConvGeom& g) {
  const Dims od = g.out_dims(in.dims);
  if (weight.size() != static_cast<std::size_t>(out_channels) * in.channels * g.taps())
    fail(ErrorKind::DimMismatch, "conv3d: weight size does not match channels and kernel");
  Tensor<T> out(out_channels, od);
  const int sx = g.stride[0];
  for (int co = 0; co < out_channels; ++co) {
    T* o = out.channel(co);
    if (!bias.empty()) std::fill(o, o + out.plane(), bias[static_cast<std::size_t>(co)]);
    for (int ci = 0; ci < in.channels; ++ci) {
      const T* src = in.channel(ci);
      const T* w = weight.data() + (static_cast<std::size_t>(co) * in.channels + ci) * g.taps();
      for (int kz = 0; kz < g.kernel[2]; ++kz)
        for (int ky = 0; ky < g.kernel[1]; ++ky)
          for (int kx = 0; kx < g.kernel[0]; ++kx, ++w) {
            const T wv = *w;
            detail::for_each_tap_row(g, in.dims, od, kx, ky, kz, [&](std::size_t ii, std::size_t oi, int n) {
              const T* s = src + ii;
              T* d = o + oi;
              if (sx == 1)
                for (int i = 0; i < n; ++i) d[i] += wv * s[i];
              else
                for (int i = 0; i < n; ++i) d[i] += wv * s[i * sx];
            });
          }
    }
  }
  return out;
}

/// Adjoint of conv3d with respect to its input: accumulates into `din`.
template <class T>
void conv3d_backward_data(const Tensor<T>& dout, std::span<const T> weight, const ConvGeom& g, Tensor<T>& din) {
  const int sx = g.stride[0];
  for (int co = 0; co < dout.channels; ++co) {
    const T* o = dout.channel(co);
    for (int ci = 0; ci < din.channels; ++ci) {
      T* dst = din.channel(ci);
      const T* w = weight.data() + (static_cast<std::size_t>(co) * din.channels + ci) * g.taps();
      for (int kz = 0; kz < g.kernel[2]; ++kz)
        for (int ky = 0; ky < g.kernel[1]; ++ky)
          for (int kx = 0; kx < g.kernel[0]; ++kx, ++w) {
            const T wv = *w;
            detail::for_each_tap_row(g, din.dims, dout.dims, kx, ky, kz, [&](std::size_t ii, std::size_t oi, int n) {
              T* d = dst + ii;
              const T* s = o + oi;
              if (sx == 1)
                for (int i = 0; i < n; ++i) d[i] += wv * s[i];
              else
                for (int i = 0; i < n; ++i) d[i * sx] += wv * s[i];
            });
          }
    }
  }
}

/// Accumulates dL/dW (and dL/dbias when non-empty) for conv3d.
template <class T>
void conv3d_backward_params(const Tensor<T>& in, const Tensor<T>& dout, const ConvGeom& g, std::span<T> dweight,
                            std::span<T> dbias) {
  const int sx = g.stride[0];
  for (int co = 0; co < dout.channels; ++co) {
    const T* o = dout.channel(co);
    if (!dbias.empty()) {
      T s = 0;
      for (std::size_t i = 0; i < dout.plane(); ++i) s += o[i];
      dbias[static_cast<std::size_t>(co)] += s;
    }
    for (int ci = 0; ci < in.channels; ++ci) {
      const T* src = in.channel(ci);
      T* dw = dweight.data() + (static_cast<std::size_t>(co) * in.channels + ci) * g.taps();
      for (int kz = 0; kz < g.kernel[2]; ++kz)
        for (int ky = 0; ky < g.kernel[1]; ++ky)
          for (int kx = 0; kx < g.kernel[0]; ++kx, ++dw) {
            T acc = 0;
            detail::for_each_tap_row(g, in.dims, dout.dims, kx, ky, kz, [&](std::size_t ii, std::size_t oi, int n) {
              const T* s = src + ii;
              const T* d = o + oi;
              if (sx == 1)
                acc += detail::dot(d, s, n);
              else
                for (int i = 0; i < n; ++i) acc += d[i] * s[i * sx];
            });
            *dw += acc;
          }
    }
  }
}

/// Transposed convolution: the adjoint of a conv mapping `out_dims` ->
/// in.dims. Weight laid out [in_channels][out_channels][kz][ky][kx].
template <class T>
Tensor<T> conv3d_transpose(const Tensor<T>& in, std::span<const T> weight, std::span<const T> bias,
                           int out_channels, const ConvGeom& g, Dims out_dims) {
  if (g.out_dims(out_dims) != in.dims) fail(ErrorKind::DimMismatch, "conv3d_transpose: geometry does not invert");
  if (weight.size() != static_cast<std::size_t>(out_channels) * in.channels * g.taps())
    fail(ErrorKind::DimMismatch, "conv3d_transpose: weight size does not match channels and kernel");
  Tensor<T> out(out_channels, out_dims);
  if (!bias.empty())
    for (int c = 0; c < out_channels; ++c)
      std::fill(out.channel(c), out.channel(c) + out.plane(), bias[static_cast<std::size_t>(c)]);
  conv3d_backward_data(in, weight, g, out);
  return out;
}

template <class T>
void conv3d_transpose_backward(const Tensor<T>& in, const Tensor<T>& dout, std::span<const T> weight,
                               const ConvGeom& g, std::span<T> dweight, std::span<T> dbias, Tensor<T>* din) {
  if (!dbias.empty())
    for (int c = 0; c < dout.channels; ++c) {
      T s = 0;
      const T* d = dout.channel(c);
      for (std::size_t i = 0; i < dout.plane(); ++i) s += d[i];
      dbias[static_cast<std::size_t>(c)] += s;
    }
  // Roles swap: dout plays the conv input, `in` plays the conv output.
  conv3d_backward_params(dout, in, g, dweight, std::span<T>{});
  if (din) {
    Tensor<T> d = conv3d(dout, weight, std::span<const T>{}, in.channels, g);
    for (std::size_t i = 0; i < d.data.size(); ++i) din->data[i] += d.data[i];
  }
}

template <class T>
inline T silu(T a) {
  return a / (T(1) + std::exp(-a));
}

template <class T>
inline T silu_grad(T a) {
  const T s = T(1) / (T(1) + std::exp(-a));
  return s * (T(1) + a * (T(1) - s));
}

template <class T>
Tensor<T> silu(const Tensor<T>& a) {
  Tensor<T> h = a;
  for (T& v : h.data) v = silu(v);
  return h;
}

/// dL/da = dL/dh * silu'(a), in place on dh.
template <class T>
void silu_backward(const Tensor<T>& a, Tensor<T>& dh) {
  for (std::size_t i = 0; i < a.data.size(); ++i) dh.data[i] *= silu_grad(a.data[i]);
}

struct ParamInfo {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
  /// Fan-in used for initialization; 0 marks a bias (initialized to zero).
  int fan_in = 0;
};

/// Named parameter arrays packed into one flat vector with a stable layout.
template <class T>
class ParamSet {
 public:
  void add(std::string name, std::vector<int> shape, int fan_in) {
    std::size_t n = 1;
    for (int s : shape) n *= static_cast<std::size_t>(s);
    layout_.push_back({std::move(name), std::move(shape), values_.size(), n, fan_in});
    values_.resize(values_.size() + n, T(0));
  }

  const std::vector<ParamInfo>& layout() const { return layout_; }
  std::vector<T>& values() { return values_; }
  const std::vector<T>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < layout_.size(); ++i)
      if (layout_[i].name == name) return i;
    fail(ErrorKind::ConfigMismatch, "no parameter named '" + name + "'");
  }

  std::span<T> view(std::size_t i) { return {values_.data() + layout_[i].offset, layout_[i].size}; }
  std::span<const T> view(std::size_t i) const { return {values_.data() + layout_[i].offset, layout_[i].size}; }
  std::span<T> view(const std::string& name) { return view(index_of(name)); }
  std::span<const T> view(const std::string& name) const { return view(index_of(name)); }

  ParamSet zeros_like() const {
    ParamSet z = *this;
    std::fill(z.values_.begin(), z.values_.end(), T(0));
    return z;
  }

  template <class U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const ParamInfo& p : layout_) out.add(p.name, p.shape, p.fan_in);
    for (std::size_t i = 0; i < values_.size(); ++i) out.values()[i] = static_cast<U>(values_[i]);
    return out;
  }

  bool same_layout(const ParamSet& o) const {
    if (layout_.size() != o.layout_.size()) return false;
    for (std::size_t i = 0; i < layout_.size(); ++i)
      if (layout_[i].name != o.layout_[i].name || layout_[i].shape != o.layout_[i].shape) return false;
    return true;
  }

 private:
  std::vector<ParamInfo> layout_;
  std::vector<T> values_;
};

/// Fan-in scaled uniform init: weights ~ U(-sqrt(3/fan_in), sqrt(3/fan_in)),
/// i.e. variance 1/fan_in; biases zero.
template <class T>
void init_uniform_fan_in(ParamSet<T>& params, Rng& rng) {
  for (std::size_t i = 0; i < params.layout().size(); ++i) {
    const int fan_in = params.layout()[i].fan_in;
    auto v = params.view(i);
    if (fan_in == 0) {
      std::fill(v.begin(), v.end(), T(0));
      continue;
    }
    const double a = std::sqrt(3.0 / fan_in);
    for (T& x : v) x = static_cast<T>(rng.uniform(-a, a));
  }
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <class T>
class Adam {
 public:
  Adam() = default;
  Adam(AdamConfig cfg, std::size_t n) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

  const AdamConfig& config() const { return cfg_; }
  long steps() const { return step_; }

  void update(std::vector<T>& params, const std::vector<T>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
      fail(ErrorKind::DimMismatch, "adam: parameter count changed");
    if (cfg_.learning_rate == 0.0) return;
    ++step_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = grads[i];
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
      const double step = cfg_.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.epsilon);
      params[i] = static_cast<T>(params[i] - step);
    }
  }

 private:
  AdamConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  long step_ = 0;
};

}  // namespace scenediff::nn
