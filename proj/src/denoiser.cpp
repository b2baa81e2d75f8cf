#include "scenediff/denoiser.hpp"

#include <cmath>

namespace scenediff {

using nn::ConvGeom;
using nn::Tensor;

void DenoiserConfig::validate() const {
  if (num_classes < 2) fail(ErrorKind::InvalidArgument, "denoiser needs at least 2 classes");
  for (int w : widths)
    if (w < 1) fail(ErrorKind::InvalidArgument, "denoiser widths must be positive");
  if (widths[0] != widths[2])
    fail(ErrorKind::InvalidArgument, "denoiser skip connection needs widths[0] == widths[2]");
  if (kernel < 1 || kernel % 2 == 0) fail(ErrorKind::InvalidArgument, "denoiser kernel size must be odd");
  if (time_dim < 2 || time_dim % 2 != 0) fail(ErrorKind::InvalidArgument, "time embedding dim must be even");
  if (time_hidden < 1) fail(ErrorKind::InvalidArgument, "time hidden width must be positive");
}

std::vector<double> time_embedding(int t, int dim) {
  const int half = dim / 2;
  std::vector<double> e(static_cast<std::size_t>(dim));
  for (int i = 0; i < half; ++i) {
    const double f = std::exp(-std::log(10000.0) * i / half);
    e[static_cast<std::size_t>(i)] = std::sin(t * f);
    e[static_cast<std::size_t>(i + half)] = std::cos(t * f);
  }
  return e;
}

template <class T>
nn::ParamSet<T> denoiser_layout(const DenoiserConfig& c) {
  c.validate();
  const int k = c.kernel, taps = k * k * k;
  nn::ParamSet<T> p;
  p.add("time.w1", {c.time_hidden, c.time_dim}, c.time_dim);
  p.add("time.b1", {c.time_hidden}, 0);
  p.add("time.w2", {c.time_bias_width(), c.time_hidden}, c.time_hidden);
  p.add("time.b2", {c.time_bias_width()}, 0);
  p.add("enc.w", {c.widths[0], c.in_channels(), k, k, k}, c.in_channels() * taps);
  p.add("enc.b", {c.widths[0]}, 0);
  p.add("mid.w", {c.widths[1], c.widths[0], k, k, k}, c.widths[0] * taps);
  p.add("mid.b", {c.widths[1]}, 0);
  p.add("dec.w", {c.widths[2], c.widths[1], k, k, k}, c.widths[1] * taps);
  p.add("dec.b", {c.widths[2]}, 0);
  p.add("out.w", {c.num_classes, c.widths[2], k, k, k}, c.widths[2] * taps);
  p.add("out.b", {c.num_classes}, 0);
  return p;
}

namespace {

// Parameter indices, in layout order.
enum : std::size_t { kTw1, kTb1, kTw2, kTb2, kEncW, kEncB, kMidW, kMidB, kDecW, kDecB, kOutW, kOutB };

template <class T>
void add_channel_bias(Tensor<T>& a, const std::vector<T>& bias, int offset) {
  for (int c = 0; c < a.channels; ++c) {
    const T b = bias[static_cast<std::size_t>(offset + c)];
    T* p = a.channel(c);
    for (std::size_t i = 0; i < a.plane(); ++i) p[i] += b;
  }
}

template <class T>
void sum_channels(const Tensor<T>& a, std::vector<T>& out, int offset) {
  for (int c = 0; c < a.channels; ++c) {
    T s = 0;
    const T* p = a.channel(c);
    for (std::size_t i = 0; i < a.plane(); ++i) s += p[i];
    out[static_cast<std::size_t>(offset + c)] += s;
  }
}

}  // namespace

template <class T>
ConvDenoiser<T>::ConvDenoiser(DenoiserConfig config)
    : config_(config), params_(denoiser_layout<T>(config)) {}

template <class T>
ConvDenoiser<T> ConvDenoiser<T>::init(const DenoiserConfig& config, std::uint64_t seed) {
  ConvDenoiser net(config);
  Rng rng(seed);
  nn::init_uniform_fan_in(net.params_, rng);
  return net;
}

template <class T>
Tensor<T> ConvDenoiser<T>::forward(const Tensor<T>& input, int t, Cache* cache) const {
  const DenoiserConfig& c = config_;
  if (input.channels != c.in_channels())
    fail(ErrorKind::DimMismatch, "denoiser expects " + std::to_string(c.in_channels()) + " input channels, got " +
                                     std::to_string(input.channels));
  const auto& P = params_;
  const ConvGeom g = ConvGeom::same(c.kernel);

  // Time embedding MLP -> per-stage channel biases.
  const std::vector<double> e = time_embedding(t, c.time_dim);
  std::vector<T> embed(e.begin(), e.end());
  std::vector<T> pre(static_cast<std::size_t>(c.time_hidden)), hid(pre.size());
  {
    auto w1 = P.view(kTw1);
    auto b1 = P.view(kTb1);
    for (int h = 0; h < c.time_hidden; ++h) {
      T s = b1[static_cast<std::size_t>(h)];
      for (int d = 0; d < c.time_dim; ++d) s += w1[static_cast<std::size_t>(h * c.time_dim + d)] * embed[static_cast<std::size_t>(d)];
      pre[static_cast<std::size_t>(h)] = s;
      hid[static_cast<std::size_t>(h)] = nn::silu(s);
    }
  }
  std::vector<T> tbias(static_cast<std::size_t>(c.time_bias_width()));
  {
    auto w2 = P.view(kTw2);
    auto b2 = P.view(kTb2);
    for (int o = 0; o < c.time_bias_width(); ++o) {
      T s = b2[static_cast<std::size_t>(o)];
      for (int h = 0; h < c.time_hidden; ++h) s += w2[static_cast<std::size_t>(o * c.time_hidden + h)] * hid[static_cast<std::size_t>(h)];
      tbias[static_cast<std::size_t>(o)] = s;
    }
  }

  Tensor<T> a1 = nn::conv3d(input, P.view(kEncW), P.view(kEncB), c.widths[0], g);
  add_channel_bias(a1, tbias, 0);
  Tensor<T> h1 = nn::silu(a1);
  Tensor<T> a2 = nn::conv3d(h1, P.view(kMidW), P.view(kMidB), c.widths[1], g);
  add_channel_bias(a2, tbias, c.widths[0]);
  Tensor<T> h2 = nn::silu(a2);
  Tensor<T> a3 = nn::conv3d(h2, P.view(kDecW), P.view(kDecB), c.widths[2], g);
  add_channel_bias(a3, tbias, c.widths[0] + c.widths[1]);
  for (std::size_t i = 0; i < a3.data.size(); ++i) a3.data[i] += h1.data[i];
  Tensor<T> h3 = nn::silu(a3);
  Tensor<T> out = nn::conv3d(h3, P.view(kOutW), P.view(kOutB), c.num_classes, g);

  if (cache) {
    cache->input = input;
    cache->embed = std::move(embed);
    cache->time_pre = std::move(pre);
    cache->time_hidden = std::move(hid);
    cache->time_bias = std::move(tbias);
    cache->a1 = std::move(a1);
    cache->h1 = std::move(h1);
    cache->a2 = std::move(a2);
    cache->h2 = std::move(h2);
    cache->a3 = std::move(a3);
    cache->h3 = std::move(h3);
  }
  return out;
}

template <class T>
void ConvDenoiser<T>::backward(const Cache& k, const Tensor<T>& upstream, nn::ParamSet<T>& grads) const {
  const DenoiserConfig& c = config_;
  if (upstream.channels != c.num_classes || upstream.dims != k.input.dims)
    fail(ErrorKind::DimMismatch, "denoiser backward: upstream gradient shape mismatch");
  if (!grads.same_layout(params_)) fail(ErrorKind::DimMismatch, "denoiser backward: gradient layout mismatch");
  const auto& P = params_;
  const ConvGeom g = ConvGeom::same(c.kernel);
  std::vector<T> dtb(static_cast<std::size_t>(c.time_bias_width()), T(0));

  nn::conv3d_backward_params(k.h3, upstream, g, grads.view(kOutW), grads.view(kOutB));
  Tensor<T> da3(c.widths[2], k.input.dims);
  nn::conv3d_backward_data(upstream, P.view(kOutW), g, da3);
  nn::silu_backward(k.a3, da3);
  sum_channels(da3, dtb, c.widths[0] + c.widths[1]);

  nn::conv3d_backward_params(k.h2, da3, g, grads.view(kDecW), grads.view(kDecB));
  Tensor<T> da2(c.widths[1], k.input.dims);
  nn::conv3d_backward_data(da3, P.view(kDecW), g, da2);
  nn::silu_backward(k.a2, da2);
  sum_channels(da2, dtb, c.widths[0]);

  nn::conv3d_backward_params(k.h1, da2, g, grads.view(kMidW), grads.view(kMidB));
  Tensor<T> da1 = da3;  // skip connection into stage 3
  nn::conv3d_backward_data(da2, P.view(kMidW), g, da1);
  nn::silu_backward(k.a1, da1);
  sum_channels(da1, dtb, 0);

  nn::conv3d_backward_params(k.input, da1, g, grads.view(kEncW), grads.view(kEncB));

  // Time MLP.
  auto w2 = P.view(kTw2);
  auto dw2 = grads.view(kTw2);
  auto db2 = grads.view(kTb2);
  std::vector<T> dhid(static_cast<std::size_t>(c.time_hidden), T(0));
  for (int o = 0; o < c.time_bias_width(); ++o) {
    const T d = dtb[static_cast<std::size_t>(o)];
    db2[static_cast<std::size_t>(o)] += d;
    for (int h = 0; h < c.time_hidden; ++h) {
      const auto idx = static_cast<std::size_t>(o * c.time_hidden + h);
      dw2[idx] += d * k.time_hidden[static_cast<std::size_t>(h)];
      dhid[static_cast<std::size_t>(h)] += d * w2[idx];
    }
  }
  auto dw1 = grads.view(kTw1);
  auto db1 = grads.view(kTb1);
  for (int h = 0; h < c.time_hidden; ++h) {
    const T du = dhid[static_cast<std::size_t>(h)] * nn::silu_grad(k.time_pre[static_cast<std::size_t>(h)]);
    db1[static_cast<std::size_t>(h)] += du;
    for (int d = 0; d < c.time_dim; ++d)
      dw1[static_cast<std::size_t>(h * c.time_dim + d)] += du * k.embed[static_cast<std::size_t>(d)];
  }
}

template <class T>
nn::ParamSet<T> ConvDenoiser<T>::backward(const Tensor<T>& input, int t, const Tensor<T>& upstream) const {
  Cache cache;
  forward(input, t, &cache);
  nn::ParamSet<T> grads = params_.zeros_like();
  backward(cache, upstream, grads);
  return grads;
}

template <class T>
Tensor<T> ConvDenoiser<T>::make_input(const VoxelGrid& x_t, const VoxelGrid* condition) const {
  const int k = config_.num_classes;
  check_labels(x_t, k);
  if (config_.conditioned && !condition) fail(ErrorKind::InvalidArgument, "conditioned denoiser needs a condition grid");
  if (!config_.conditioned && condition)
    fail(ErrorKind::DimMismatch, "unconditioned denoiser given a condition channel");
  if (condition && condition->dims != x_t.dims) fail(ErrorKind::DimMismatch, "condition dims differ from x_t dims");
  Tensor<T> in(config_.in_channels(), x_t.dims);
  const std::size_t n = x_t.dims.volume();
  for (std::size_t v = 0; v < n; ++v) in.channel(x_t.labels[v])[v] = T(1);
  if (condition)
    for (std::size_t v = 0; v < n; ++v) in.channel(k)[v] = condition->labels[v] != 0 ? T(1) : T(0);
  return in;
}

template <class T>
LogitField to_logit_field(const Tensor<T>& t) {
  LogitField f(t.dims, t.channels);
  const std::size_t n = t.plane();
  for (int c = 0; c < t.channels; ++c) {
    const T* p = t.channel(c);
    for (std::size_t v = 0; v < n; ++v) f.values[v * static_cast<std::size_t>(t.channels) + static_cast<std::size_t>(c)] = p[v];
  }
  return f;
}

template <class T>
Tensor<T> from_logit_field(const LogitField& f) {
  Tensor<T> t(f.num_classes, f.dims);
  const std::size_t n = f.voxel_count();
  for (int c = 0; c < f.num_classes; ++c) {
    T* p = t.channel(c);
    for (std::size_t v = 0; v < n; ++v)
      p[v] = static_cast<T>(f.values[v * static_cast<std::size_t>(f.num_classes) + static_cast<std::size_t>(c)]);
  }
  return t;
}

LogitField NetworkDenoiser::predict(const VoxelGrid& x_t, const VoxelGrid* condition, int t) const {
  return to_logit_field(net_.forward(net_.make_input(x_t, condition), t));
}

template class ConvDenoiser<float>;
template class ConvDenoiser<double>;
template nn::ParamSet<float> denoiser_layout<float>(const DenoiserConfig&);
template nn::ParamSet<double> denoiser_layout<double>(const DenoiserConfig&);
template LogitField to_logit_field<float>(const Tensor<float>&);
template LogitField to_logit_field<double>(const Tensor<double>&);
template Tensor<float> from_logit_field<float>(const LogitField&);
template Tensor<double> from_logit_field<double>(const LogitField&);

}  // namespace scenediff
