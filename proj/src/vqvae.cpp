#include "scenediff/vqvae.hpp"

#include "scenediff/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace scenediff {

using nn::ConvGeom;
using nn::Tensor;

namespace {

bool power_of_two(int v) { return v >= 1 && (v & (v - 1)) == 0; }

}  // namespace

void VqVaeConfig::validate() const {
  if (num_classes < 2) fail(ErrorKind::InvalidArgument, "vq-vae needs at least 2 classes");
  if (hidden < 1 || code_dim < 1) fail(ErrorKind::InvalidArgument, "vq-vae widths must be positive");
  if (codebook_size < 2) fail(ErrorKind::InvalidArgument, "codebook needs N >= 2");
  if (codebook_size > 65535) fail(ErrorKind::InvalidArgument, "codebook size must fit 16-bit indices");
  for (int s : stride)
    if (!power_of_two(s)) fail(ErrorKind::InvalidArgument, "vq-vae strides must be powers of two");
  if (!(beta_commit >= 0.0)) fail(ErrorKind::InvalidArgument, "commitment weight must be >= 0");
}

std::vector<std::array<int, 3>> VqVaeConfig::stage_strides() const {
  std::array<int, 3> remaining = stride;
  std::vector<std::array<int, 3>> stages;
  while (remaining[0] > 1 || remaining[1] > 1 || remaining[2] > 1) {
    std::array<int, 3> s{};
    for (int a = 0; a < 3; ++a) {
      s[static_cast<std::size_t>(a)] = remaining[static_cast<std::size_t>(a)] > 1 ? 2 : 1;
      remaining[static_cast<std::size_t>(a)] /= s[static_cast<std::size_t>(a)];
    }
    stages.push_back(s);
  }
  return stages;
}

Dims VqVaeConfig::latent_dims(Dims in) const {
  if (in.x % stride[0] || in.y % stride[1] || in.z % stride[2])
    fail(ErrorKind::DimMismatch, "input dims " + to_string(in) + " are not divisible by the encoder stride");
  return {in.x / stride[0], in.y / stride[1], in.z / stride[2]};
}

Dims VqVaeConfig::voxel_dims(Dims latent) const {
  return {latent.x * stride[0], latent.y * stride[1], latent.z * stride[2]};
}

VqVaeConfig full_scale_vqvae_config() {
  VqVaeConfig c;
  c.num_classes = 11;
  c.hidden = 32;
  c.code_dim = 11;
  c.codebook_size = 1100;
  c.stride = {4, 4, 4};
  return c;
}

VoxelGrid as_voxel_grid(const IndexGrid& idx) {
  VoxelGrid g(idx.dims);
  g.labels = idx.indices;
  return g;
}

IndexGrid as_index_grid(const VoxelGrid& grid, int codebook_size) {
  check_labels(grid, codebook_size);
  return {grid.dims, grid.labels};
}

template <class T>
int Codebook<T>::dead_count(std::uint64_t threshold) const {
  return static_cast<int>(std::count_if(usage.begin(), usage.end(), [&](std::uint64_t u) { return u < threshold; }));
}

template <class T>
Codebook<T> init_codebook(int size, int dim, Rng& rng) {
  Codebook<T> cb(size, dim);
  const double a = 1.0 / size;
  for (T& c : cb.codes) c = static_cast<T>(rng.uniform(-a, a));
  return cb;
}

template <class T>
int nearest_code(const Codebook<T>& cb, std::span<const T> v) {
  if (static_cast<int>(v.size()) != cb.dim) fail(ErrorKind::DimMismatch, "latent dim differs from code dim");
  int best = 0;
  T best_d = std::numeric_limits<T>::infinity();
  for (int n = 0; n < cb.size; ++n) {
    auto c = cb.code(n);
    T d = 0;
    for (int j = 0; j < cb.dim; ++j) {
      const T diff = v[static_cast<std::size_t>(j)] - c[static_cast<std::size_t>(j)];
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = n;
    }
  }
  return best;
}

template <class T>
std::pair<LatentGrid<T>, IndexGrid> quantize(const Codebook<T>& cb, const LatentGrid<T>& z) {
  if (z.channels != cb.dim)
    fail(ErrorKind::DimMismatch, "latent has " + std::to_string(z.channels) + " channels, codebook dim is " +
                                     std::to_string(cb.dim));
  const std::size_t n = z.plane();
  IndexGrid idx{z.dims, std::vector<std::uint16_t>(n)};
  std::vector<T> v(static_cast<std::size_t>(cb.dim));
  for (std::size_t p = 0; p < n; ++p) {
    for (int j = 0; j < cb.dim; ++j) v[static_cast<std::size_t>(j)] = z.channel(j)[p];
    idx.indices[p] = static_cast<std::uint16_t>(nearest_code(cb, std::span<const T>(v)));
  }
  return {lookup(cb, idx), std::move(idx)};
}

template <class T>
LatentGrid<T> lookup(const Codebook<T>& cb, const IndexGrid& idx) {
  LatentGrid<T> out(cb.dim, idx.dims);
  for (std::size_t p = 0; p < idx.indices.size(); ++p) {
    if (idx.indices[p] >= cb.size) fail(ErrorKind::InvalidLabel, "code index out of range");
    auto c = cb.code(idx.indices[p]);
    for (int j = 0; j < cb.dim; ++j) out.channel(j)[p] = c[static_cast<std::size_t>(j)];
  }
  return out;
}

template <class T>
VqLoss vqvae_loss(const VoxelGrid& x, const Tensor<T>& logits, const LatentGrid<T>& z, const LatentGrid<T>& z_q,
                  std::span<const double> w, double beta, VqLossGrads<T>* grads) {
  if (logits.dims != x.dims) fail(ErrorKind::DimMismatch, "vqvae_loss: logits and target dims differ");
  if (!z.same_shape(z_q)) fail(ErrorKind::DimMismatch, "vqvae_loss: z and z_q shapes differ");
  VqLoss loss;
  if (grads) {
    grads->z = Tensor<T>(z.channels, z.dims);
    grads->z_q = Tensor<T>(z.channels, z.dims);
  }
  loss.recon = weighted_cross_entropy(x, logits, w, grads ? &grads->logits : nullptr);

  const std::size_t positions = z.plane();
  const double inv_p = 1.0 / static_cast<double>(positions);
  double sq = 0.0;
  for (std::size_t i = 0; i < z.data.size(); ++i) {
    const double diff = static_cast<double>(z.data[i]) - static_cast<double>(z_q.data[i]);
    sq += diff * diff;
    if (grads) {
      grads->z.data[i] = static_cast<T>(2.0 * beta * diff * inv_p);
      grads->z_q.data[i] = static_cast<T>(-2.0 * diff * inv_p);
    }
  }
  loss.codebook = sq * inv_p;
  loss.commit = beta * sq * inv_p;
  loss.total = loss.recon + loss.codebook + loss.commit;
  return loss;
}

template <class T>
VqVae<T>::VqVae(VqVaeConfig config) : config_(config), codebook_(config.codebook_size, config.code_dim) {
  config_.validate();
  const int k = config_.num_classes, h = config_.hidden, d = config_.code_dim;
  auto add_conv = [&](std::vector<Layer>& chain, const std::string& name, int in, int out, ConvGeom g,
                      bool transposed, bool act) {
    const int overlap = std::max(1, g.taps() / (g.stride[0] * g.stride[1] * g.stride[2]));
    const int fan_in = transposed ? in * overlap : in * g.taps();
    params_.add(name + ".w", transposed ? std::vector<int>{in, out, g.kernel[2], g.kernel[1], g.kernel[0]}
                                        : std::vector<int>{out, in, g.kernel[2], g.kernel[1], g.kernel[0]},
                fan_in);
    params_.add(name + ".b", {out}, 0);
    const std::size_t w_idx = params_.layout().size() - 2;
    chain.push_back({w_idx, w_idx + 1, in, out, g, transposed, act});
  };
  const auto stages = config_.stage_strides();
  add_conv(encoder_, "enc.in", k, h, ConvGeom::same(3), false, true);
  for (std::size_t i = 0; i < stages.size(); ++i)
    add_conv(encoder_, "enc.down" + std::to_string(i), h, h, ConvGeom::patch(stages[i]), false, true);
  add_conv(encoder_, "enc.out", h, d, ConvGeom::same(1), false, false);

  add_conv(decoder_, "dec.in", d, h, ConvGeom::same(1), false, true);
  for (std::size_t i = stages.size(); i-- > 0;)
    add_conv(decoder_, "dec.up" + std::to_string(i), h, h, ConvGeom::patch(stages[i]), true, true);
  add_conv(decoder_, "dec.out", h, k, ConvGeom::same(3), false, false);
}

template <class T>
VqVae<T> VqVae<T>::init(const VqVaeConfig& config, std::uint64_t seed) {
  VqVae m(config);
  Rng rng(seed);
  nn::init_uniform_fan_in(m.params_, rng);
  m.codebook_ = init_codebook<T>(config.codebook_size, config.code_dim, rng);
  return m;
}

template <class T>
Tensor<T> VqVae<T>::make_input(const VoxelGrid& x) const {
  check_labels(x, config_.num_classes);
  Tensor<T> in(config_.num_classes, x.dims);
  for (std::size_t v = 0; v < x.labels.size(); ++v) in.channel(x.labels[v])[v] = T(1);
  return in;
}

template <class T>
Tensor<T> VqVae<T>::run_chain(const std::vector<Layer>& layers, const Tensor<T>& in, ChainCache* cache,
                              const std::vector<Dims>& out_dims) const {
  Tensor<T> cur = in;
  if (cache) {
    cache->pre.clear();
    cache->post.clear();
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& L = layers[i];
    Tensor<T> a = L.transposed
                      ? nn::conv3d_transpose(cur, params_.view(L.w), params_.view(L.b), L.out_ch, L.geom, out_dims[i])
                      : nn::conv3d(cur, params_.view(L.w), params_.view(L.b), L.out_ch, L.geom);
    Tensor<T> next = L.activation ? nn::silu(a) : a;
    if (cache) {
      cache->post.push_back(std::move(cur));
      cache->pre.push_back(std::move(a));
    }
    cur = std::move(next);
  }
  return cur;
}

template <class T>
Tensor<T> VqVae<T>::chain_backward(const std::vector<Layer>& layers, const ChainCache& cache, Tensor<T> grad,
                                   nn::ParamSet<T>& grads) const {
  for (std::size_t i = layers.size(); i-- > 0;) {
    const Layer& L = layers[i];
    if (L.activation) nn::silu_backward(cache.pre[i], grad);
    const Tensor<T>& input = cache.post[i];
    Tensor<T> din(input.channels, input.dims);
    if (L.transposed) {
      nn::conv3d_transpose_backward(input, grad, params_.view(L.w), L.geom, grads.view(L.w), grads.view(L.b), &din);
    } else {
      nn::conv3d_backward_params(input, grad, L.geom, grads.view(L.w), grads.view(L.b));
      nn::conv3d_backward_data(grad, params_.view(L.w), L.geom, din);
    }
    grad = std::move(din);
  }
  return grad;
}

template <class T>
std::vector<Dims> VqVae<T>::decoder_dims(Dims latent) const {
  std::vector<Dims> dims;
  Dims cur = latent;
  for (const Layer& L : decoder_) {
    if (L.transposed) cur = {cur.x * L.geom.stride[0], cur.y * L.geom.stride[1], cur.z * L.geom.stride[2]};
    dims.push_back(cur);
  }
  return dims;
}

template <class T>
LatentGrid<T> VqVae<T>::encode(const Tensor<T>& x, ChainCache* cache) const {
  if (x.channels != config_.num_classes) fail(ErrorKind::DimMismatch, "encoder input channel count differs from K");
  config_.latent_dims(x.dims);
  return run_chain(encoder_, x, cache, {});
}

template <class T>
Tensor<T> VqVae<T>::decode(const LatentGrid<T>& z_q, ChainCache* cache) const {
  if (z_q.channels != config_.code_dim) fail(ErrorKind::DimMismatch, "decoder input channel count differs from d");
  return run_chain(decoder_, z_q, cache, decoder_dims(z_q.dims));
}

template <class T>
void VqVae<T>::encode_backward(const ChainCache& cache, const LatentGrid<T>& dz, nn::ParamSet<T>& grads) const {
  chain_backward(encoder_, cache, dz, grads);
}

template <class T>
LatentGrid<T> VqVae<T>::decode_backward(const ChainCache& cache, const Tensor<T>& dlogits,
                                        nn::ParamSet<T>& grads) const {
  return chain_backward(decoder_, cache, dlogits, grads);
}

template <class T>
VqLoss VqVae<T>::loss_and_grad(const VoxelGrid& x, std::span<const double> w, nn::ParamSet<T>& grads,
                               std::vector<T>& codebook_grads, IndexGrid* indices, LatentGrid<T>* latent) const {
  ChainCache enc, dec;
  const LatentGrid<T> z = encode(make_input(x), &enc);
  auto [z_q, idx] = quantize(codebook_, z);
  const Tensor<T> logits = decode(z_q, &dec);
  VqLossGrads<T> g;
  const VqLoss loss = vqvae_loss(x, logits, z, z_q, w, config_.beta_commit, &g);

  // Straight-through: decoder gradient at z_q flows to z unchanged.
  LatentGrid<T> dz = decode_backward(dec, g.logits, grads);
  for (std::size_t i = 0; i < dz.data.size(); ++i) dz.data[i] += g.z.data[i];
  encode_backward(enc, dz, grads);

  codebook_grads.resize(codebook_.codes.size(), T(0));
  for (std::size_t p = 0; p < idx.indices.size(); ++p)
    for (int j = 0; j < codebook_.dim; ++j)
      codebook_grads[static_cast<std::size_t>(idx.indices[p]) * codebook_.dim + j] += g.z_q.channel(j)[p];
  if (indices) *indices = std::move(idx);
  if (latent) *latent = z;
  return loss;
}

template <class T>
VoxelGrid VqVae<T>::reconstruct(const VoxelGrid& x) const {
  return decode_indices(encode_indices(x));
}

template <class T>
IndexGrid VqVae<T>::encode_indices(const VoxelGrid& x) const {
  return quantize(codebook_, encode(make_input(x))).second;
}

template <class T>
VoxelGrid VqVae<T>::decode_indices(const IndexGrid& idx) const {
  const Tensor<T> logits = decode(lookup(codebook_, idx));
  VoxelGrid out(logits.dims);
  for (std::size_t v = 0; v < out.labels.size(); ++v) {
    int best = 0;
    for (int c = 1; c < logits.channels; ++c)
      if (logits.channel(c)[v] > logits.channel(best)[v]) best = c;
    out.labels[v] = static_cast<std::uint16_t>(best);
  }
  return out;
}

template <class T>
Codebook<T> reinit_dead_codes(const Codebook<T>& codebook, std::span<const std::vector<T>> recent, std::uint64_t threshold,
                              Rng& rng) {
  if (recent.empty()) fail(ErrorKind::EmptyInput, "dead-code reinit needs recent encoder outputs");
  Codebook<T> out = codebook;
  std::vector<int> assigned(recent.size());
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(codebook.size), 0);
  for (std::size_t i = 0; i < recent.size(); ++i) {
    assigned[i] = nearest_code(codebook, std::span<const T>(recent[i]));
    ++counts[static_cast<std::size_t>(assigned[i])];
  }
  std::vector<std::size_t> order(recent.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());
  std::vector<bool> taken(recent.size(), false);

  for (int n = 0; n < codebook.size; ++n) {
    if (codebook.usage[static_cast<std::size_t>(n)] >= threshold) continue;
    // Prefer a vector whose code keeps >= threshold uses without it.
    std::size_t pick = recent.size();
    for (std::size_t i : order) {
      if (taken[i]) continue;
      const auto owner = static_cast<std::size_t>(assigned[i]);
      if (codebook.usage[owner] >= threshold && counts[owner] > std::max<std::uint64_t>(threshold, 1)) {
        pick = i;
        break;
      }
    }
    if (pick == recent.size())
      for (std::size_t i : order)
        if (!taken[i]) {
          pick = i;
          break;
        }
    if (pick == recent.size()) break;
    taken[pick] = true;
    --counts[static_cast<std::size_t>(assigned[pick])];
    std::copy(recent[pick].begin(), recent[pick].end(), out.code(n).begin());
  }

  std::fill(out.usage.begin(), out.usage.end(), 0);
  for (const auto& v : recent) ++out.usage[static_cast<std::size_t>(nearest_code(out, std::span<const T>(v)))];
  return out;
}

MetricsReport reconstruction_metrics(const VqVae<float>& model, std::span<const VoxelGrid> dataset) {
  IouAccumulator acc(model.config().num_classes);
  for (const VoxelGrid& x : dataset) acc.add(model.reconstruct(x), x);
  return acc.report();
}

VqTrainResult train_vqvae(std::span<const VoxelGrid> dataset, const VqVaeConfig& config, const VqTrainConfig& train,
                          const std::function<void(const VqEpochReport&)>& on_epoch) {
  if (dataset.empty()) fail(ErrorKind::EmptyInput, "vq-vae training dataset is empty");
  if (train.batch_size < 1) fail(ErrorKind::InvalidArgument, "batch size must be positive");
  const std::vector<double> weights = train.class_weights.empty()
                                          ? inverse_frequency_weights(dataset, config.num_classes)
                                          : train.class_weights;
  if (static_cast<int>(weights.size()) != config.num_classes)
    fail(ErrorKind::InvalidArgument, "class weight count differs from K");

  VqTrainResult result{VqVae<float>::init(config, train.seed), {}};
  VqVae<float>& model = result.model;
  nn::Adam<float> opt(train.adam, model.params().size());
  nn::Adam<float> code_opt(train.adam, model.codebook().codes.size());
  Rng rng(train.seed ^ 0x5bd1e995u);

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  constexpr std::size_t kBufferCap = 4096;

  for (int epoch = 1; epoch <= train.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    std::fill(model.codebook().usage.begin(), model.codebook().usage.end(), 0);
    std::vector<std::vector<float>> buffer;
    std::size_t seen = 0;
    VqEpochReport report;
    report.epoch = epoch;
    int batches = 0;

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(train.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(train.batch_size));
      nn::ParamSet<float> grads = model.params().zeros_like();
      std::vector<float> code_grads(model.codebook().codes.size(), 0.0f);
      VqLoss batch_loss;
      for (std::size_t i = start; i < end; ++i) {
        IndexGrid idx;
        LatentGrid<float> z;
        const VqLoss l = model.loss_and_grad(dataset[order[i]], weights, grads, code_grads, &idx, &z);
        if (!std::isfinite(l.total))
          fail(ErrorKind::NonFiniteLoss, "non-finite vq-vae loss in epoch " + std::to_string(epoch));
        batch_loss.total += l.total;
        batch_loss.recon += l.recon;
        batch_loss.codebook += l.codebook;
        batch_loss.commit += l.commit;
        for (std::uint16_t n : idx.indices) ++model.codebook().usage[n];
        // Reservoir sample of this epoch's encoder outputs.
        for (std::size_t p = 0; p < z.plane(); ++p, ++seen) {
          std::vector<float> v(static_cast<std::size_t>(z.channels));
          for (int j = 0; j < z.channels; ++j) v[static_cast<std::size_t>(j)] = z.channel(j)[p];
          if (buffer.size() < kBufferCap) {
            buffer.push_back(std::move(v));
          } else {
            const std::uint64_t r = rng.below(seen + 1);
            if (r < kBufferCap) buffer[r] = std::move(v);
          }
        }
      }
      const float inv = 1.0f / static_cast<float>(end - start);
      for (float& g : grads.values()) g *= inv;
      for (float& g : code_grads) g *= inv;
      opt.update(model.params().values(), grads.values());
      code_opt.update(model.codebook().codes, code_grads);
      const double binv = 1.0 / static_cast<double>(end - start);
      report.loss.total += batch_loss.total * binv;
      report.loss.recon += batch_loss.recon * binv;
      report.loss.codebook += batch_loss.codebook * binv;
      report.loss.commit += batch_loss.commit * binv;
      ++batches;
    }
    report.loss.total /= batches;
    report.loss.recon /= batches;
    report.loss.codebook /= batches;
    report.loss.commit /= batches;
    report.dead_codes = model.codebook().dead_count(train.dead_threshold);
    if (report.dead_codes > 0 && epoch < train.epochs) {
      model.codebook() = reinit_dead_codes(model.codebook(), std::span<const std::vector<float>>(buffer),
                                           train.dead_threshold, rng);
    }
    report.recon = reconstruction_metrics(model, dataset);
    result.epochs.push_back(report);
    if (on_epoch) on_epoch(report);
  }
  return result;
}

void write_vqvae_config(Checkpoint& ckpt, const VqVaeConfig& c, const std::string& prefix) {
  auto& m = ckpt.metadata;
  m[prefix + "classes"] = std::to_string(c.num_classes);
  m[prefix + "hidden"] = std::to_string(c.hidden);
  m[prefix + "code_dim"] = std::to_string(c.code_dim);
  m[prefix + "codebook_size"] = std::to_string(c.codebook_size);
  m[prefix + "stride"] =
      std::to_string(c.stride[0]) + "," + std::to_string(c.stride[1]) + "," + std::to_string(c.stride[2]);
  std::ostringstream beta;
  beta.precision(17);
  beta << c.beta_commit;
  m[prefix + "beta_commit"] = beta.str();
}

VqVaeConfig read_vqvae_config(const Checkpoint& ckpt, const std::string& prefix) {
  VqVaeConfig c;
  auto get = [&](const std::string& k) { return std::stoi(ckpt.meta(prefix + k)); };
  try {
    c.num_classes = get("classes");
    c.hidden = get("hidden");
    c.code_dim = get("code_dim");
    c.codebook_size = get("codebook_size");
    c.beta_commit = std::stod(ckpt.meta(prefix + "beta_commit"));
    std::istringstream s(ckpt.meta(prefix + "stride"));
    std::string part;
    for (int& v : c.stride) {
      if (!std::getline(s, part, ',')) throw std::invalid_argument("stride");
      v = std::stoi(part);
    }
  } catch (const std::logic_error&) {
    fail(ErrorKind::ConfigMismatch, "malformed vq-vae metadata in checkpoint");
  }
  return c;
}

void append_vqvae(Checkpoint& ckpt, const VqVae<float>& model, const std::string& prefix) {
  write_vqvae_config(ckpt, model.config(), prefix);
  append_params(ckpt, model.params(), prefix);
  NamedArray cb;
  cb.name = prefix + "codebook";
  cb.shape = {static_cast<std::uint32_t>(model.codebook().size), static_cast<std::uint32_t>(model.codebook().dim)};
  cb.data = model.codebook().codes;
  ckpt.arrays.push_back(std::move(cb));
}

Checkpoint vqvae_checkpoint(const VqVae<float>& model) {
  Checkpoint ckpt;
  ckpt.metadata["kind"] = "vqvae";
  append_vqvae(ckpt, model);
  return ckpt;
}

VqVae<float> vqvae_from_checkpoint(const Checkpoint& ckpt, const std::string& prefix) {
  VqVae<float> model(read_vqvae_config(ckpt, prefix));
  read_params(ckpt, model.params(), prefix);
  const NamedArray& cb = ckpt.array(prefix + "codebook");
  if (cb.shape != std::vector<std::uint32_t>{static_cast<std::uint32_t>(model.codebook().size),
                                             static_cast<std::uint32_t>(model.codebook().dim)})
    fail(ErrorKind::ConfigMismatch, "codebook array shape differs from the vq-vae config");
  model.codebook().codes = cb.data;
  return model;
}

template struct Codebook<float>;
template struct Codebook<double>;
template class VqVae<float>;
template class VqVae<double>;
template Codebook<float> init_codebook<float>(int, int, Rng&);
template Codebook<double> init_codebook<double>(int, int, Rng&);
template int nearest_code<float>(const Codebook<float>&, std::span<const float>);
template int nearest_code<double>(const Codebook<double>&, std::span<const double>);
template std::pair<LatentGrid<float>, IndexGrid> quantize<float>(const Codebook<float>&, const LatentGrid<float>&);
template std::pair<LatentGrid<double>, IndexGrid> quantize<double>(const Codebook<double>&, const LatentGrid<double>&);
template LatentGrid<float> lookup<float>(const Codebook<float>&, const IndexGrid&);
template LatentGrid<double> lookup<double>(const Codebook<double>&, const IndexGrid&);
template VqLoss vqvae_loss<float>(const VoxelGrid&, const Tensor<float>&, const LatentGrid<float>&,
                                  const LatentGrid<float>&, std::span<const double>, double, VqLossGrads<float>*);
template VqLoss vqvae_loss<double>(const VoxelGrid&, const Tensor<double>&, const LatentGrid<double>&,
                                   const LatentGrid<double>&, std::span<const double>, double, VqLossGrads<double>*);
template Codebook<float> reinit_dead_codes<float>(const Codebook<float>&, std::span<const std::vector<float>>,
                                                  std::uint64_t, Rng&);
template Codebook<double> reinit_dead_codes<double>(const Codebook<double>&, std::span<const std::vector<double>>,
                                                    std::uint64_t, Rng&);

}  // namespace scenediff
